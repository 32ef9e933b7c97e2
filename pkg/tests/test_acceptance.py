"""Acceptance gate: one test (and one printed PASS line) per criterion.

Tolerances are pinned here and in the assertions; they are not tuned to
the implementation. Every numeric check is against an independent oracle
(finite differences, brute-force counting, closed forms, or exact
synthetic ground truth).
"""

import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from handfit import losses, metrics, sampling, skeleton
from handfit.camera import Keypoints2D, default_camera, project
from handfit.fitting import (
    FitConfig,
    StageSpec,
    TrackingSession,
    default_stages,
    fit_supervised,
    fit_unsupervised,
    track_frame,
)
from handfit.losses import FitContext, LossKind, MASKS_BY_NAME, evaluate, value_and_grad
from handfit.skeleton import (
    NUM_JOINTS,
    PARAM_DIM,
    TIP_JOINTS,
    WRIST,
    HandParams,
    canonicalize,
    clip_articulation,
    default_template,
    forward_kinematics,
    midpoint_articulation,
    mirror_keypoints_3d,
    mirror_params,
)
from handfit.workbench.config import WorkbenchConfig
from handfit.workbench.dataset import DatasetInstance, export_dataset, import_dataset
from handfit.workbench.service import create_app

from conftest import random_params

TEMPLATE = default_template()
CAM = default_camera()


def report(name, detail):
    print(f"[ACCEPTANCE] {name}: PASS ({detail})")


def ego_testset(n, seed, bank_seed=7, bank_size=1000):
    bank = sampling.synth_bank(bank_seed, TEMPLATE, bank_size, bank_size)
    return sampling.generate_testset(bank, "ego", n, seed, CAM, TEMPLATE)


# ---------------------------------------------------------------------------
# Gradients
# ---------------------------------------------------------------------------

class TestGradientSuite:
    def test_all_losses_all_masks_match_finite_differences(self):
        start = time.monotonic()
        rng = np.random.default_rng(42)
        h = 1e-5
        worst = 0.0
        n_points = 100
        for point in range(n_points):
            params = random_params(rng, TEMPLATE)
            target = random_params(rng, TEMPLATE)
            kp3d = forward_kinematics(target, TEMPLATE)
            ctx = FitContext(
                template=TEMPLATE,
                camera=CAM,
                observed=project(kp3d, CAM),
                canonical_target=canonicalize(kp3d, TEMPLATE),
            )
            vec = params.as_vector()
            for kind in LossKind:
                fd = np.zeros(PARAM_DIM)
                for k in range(PARAM_DIM):
                    e = np.zeros(PARAM_DIM)
                    e[k] = h
                    hi = evaluate(kind, params.with_vector(vec + e), ctx).total
                    lo = evaluate(kind, params.with_vector(vec - e), ctx).total
                    fd[k] = (hi - lo) / (2 * h)
                for mask_fn in MASKS_BY_NAME.values():
                    mask = mask_fn()
                    _, grad = value_and_grad(kind, params, ctx, mask)
                    err = np.abs(fd[mask] - grad[mask])
                    tol = np.maximum(
                        1e-3 * np.maximum(np.abs(fd[mask]), np.abs(grad[mask])), 1e-6
                    )
                    assert (err <= tol).all(), (
                        f"{kind.value} point {point} mask mismatch: "
                        f"max excess {(err - tol).max():.3e}"
                    )
                    with np.errstate(divide="ignore", invalid="ignore"):
                        worst = max(worst, np.nanmax(err / tol))
        elapsed = time.monotonic() - start
        assert elapsed < 60.0, f"gradient suite took {elapsed:.1f}s (budget 60s)"
        report(
            "gradient-suite",
            f"{n_points} points x {len(LossKind)} losses x {len(MASKS_BY_NAME)} masks, "
            f"worst error/tolerance {worst:.3f}, {elapsed:.1f}s",
        )


# ---------------------------------------------------------------------------
# Synthesize-then-fit round trip
# ---------------------------------------------------------------------------

class TestRoundTrip:
    def test_200_pose_lifting(self):
        start = time.monotonic()
        testset = ego_testset(200, seed=11)
        errors = []
        for sample in testset.samples:
            result = fit_unsupervised(
                sample.keypoints_2d, sample.canonical, CAM, TEMPLATE
            )
            errors.append(metrics.epe(
                forward_kinematics(result.params, TEMPLATE),
                sample.keypoints_3d, "root+scale", TEMPLATE,
            ))
        elapsed = time.monotonic() - start
        mean = float(np.mean(errors))
        p95 = float(np.percentile(errors, 95))
        assert mean <= 1.5, f"mean EPE {mean:.3f} cm exceeds 1.5 cm"
        assert p95 <= 3.0, f"p95 EPE {p95:.3f} cm exceeds 3.0 cm"
        assert elapsed < 600.0, f"round trip took {elapsed:.0f}s (budget 600s)"
        report(
            "round-trip-200",
            f"mean EPE {mean:.3f} cm (<=1.5), p95 {p95:.3f} cm (<=3.0), {elapsed:.0f}s",
        )


# ---------------------------------------------------------------------------
# Supervised annotation proxy
# ---------------------------------------------------------------------------

class TestSupervisedProxy:
    def test_100_perturbed_fits(self):
        start = time.monotonic()
        testset = ego_testset(100, seed=23)
        rng = np.random.default_rng(23)
        joints = (WRIST,) + TIP_JOINTS
        converged = 0
        for sample in testset.samples:
            truth = sample.params
            init = truth.copy()
            init.articulation = clip_articulation(
                truth.articulation + rng.uniform(-0.15, 0.15, 45), TEMPLATE
            )
            direction = rng.normal(size=3)
            init.rotation = truth.rotation + 0.1 * direction / np.linalg.norm(direction)
            direction = rng.normal(size=3)
            init.translation = truth.translation + 0.02 * direction / np.linalg.norm(direction)
            observed = Keypoints2D.from_sparse({
                j: tuple(sample.keypoints_2d.points[j]) for j in joints
            })
            result = fit_supervised(init, observed, CAM, TEMPLATE)
            fitted = project(forward_kinematics(result.params, TEMPLATE), CAM)
            rms = np.sqrt(np.mean(np.sum(
                (fitted.points[observed.mask] - observed.points[observed.mask]) ** 2,
                axis=1,
            )))
            converged += rms < 2.0
        elapsed = time.monotonic() - start
        assert converged >= 95, f"only {converged}/100 fits under 2 px RMS"
        assert elapsed < 300.0, f"supervised proxy took {elapsed:.0f}s (budget 300s)"
        report("supervised-proxy", f"{converged}/100 under 2 px (>=95), {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# Stage-order ablation
# ---------------------------------------------------------------------------

class TestStageAblation:
    def test_orientation_first_beats_skipping_it(self):
        testset = ego_testset(50, seed=17)
        full_config = FitConfig()
        ablated = FitConfig(stages=default_stages()[1:])

        def batch_epe(config):
            errs = []
            for sample in testset.samples:
                result = fit_unsupervised(
                    sample.keypoints_2d, sample.canonical, CAM, TEMPLATE, config
                )
                errs.append(metrics.epe(
                    forward_kinematics(result.params, TEMPLATE),
                    sample.keypoints_3d, "root+scale", TEMPLATE,
                ))
            return float(np.mean(errs))

        full = batch_epe(full_config)
        skipped = batch_epe(ablated)
        assert full < skipped, (
            f"full schedule {full:.3f} cm not better than stage-1-less {skipped:.3f} cm"
        )
        report("stage-ablation", f"full {full:.3f} cm < no-stage-1 {skipped:.3f} cm, n=50")


# ---------------------------------------------------------------------------
# Tracking
# ---------------------------------------------------------------------------

def tracking_sequence():
    """60-frame interpolation between two bank poses, fully in frame."""
    bank = sampling.synth_bank(7, TEMPLATE, 1000, 1000)
    rng = np.random.default_rng(99)
    while True:
        a = sampling.sample_pose(bank, "ego", rng)
        b = sampling.sample_pose(bank, "ego", rng)
        frames = []
        ok = True
        for k in range(60):
            w = k / 59
            params = HandParams(
                articulation=(1 - w) * a.articulation + w * b.articulation,
                rotation=(1 - w) * a.rotation + w * b.rotation,
                translation=(1 - w) * a.translation + w * b.translation,
            )
            kp3d = forward_kinematics(params, TEMPLATE)
            if (kp3d[:, 2] < CAM.z_min).any():
                ok = False
                break
            kp2d = project(kp3d, CAM)
            inside = (
                (kp2d.points[:, 0] >= 0).all()
                and (kp2d.points[:, 0] < CAM.image_width).all()
                and (kp2d.points[:, 1] >= 0).all()
                and (kp2d.points[:, 1] < CAM.image_height).all()
            )
            if not inside:
                ok = False
                break
            frames.append((params, kp3d, kp2d, canonicalize(kp3d, TEMPLATE)))
        if ok:
            noisy = [
                (
                    Keypoints2D(kp2d.points + rng.normal(0.0, 1.0, (NUM_JOINTS, 2))),
                    canon + rng.normal(0.0, 0.02, (NUM_JOINTS, 3)),
                )
                for (_, _, kp2d, canon) in frames
            ]
            return frames, noisy


class TestTracking:
    def test_60_frame_noisy_sequence(self):
        start = time.monotonic()
        frames, noisy = tracking_sequence()

        def run_tracked():
            session = TrackingSession(camera=CAM, template=TEMPLATE)
            return [track_frame(session, obs, canon).params.as_vector()
                    for obs, canon in noisy]

        warm = run_tracked()
        epes = [
            metrics.epe(
                forward_kinematics(HandParams().with_vector(vec), TEMPLATE),
                kp3d, "root+scale", TEMPLATE,
            )
            for vec, (_, kp3d, _, _) in zip(warm, frames)
        ]
        assert max(epes) < 2.0, f"worst per-frame EPE {max(epes):.3f} cm (bound 2.0)"

        cold = [
            fit_unsupervised(obs, canon, CAM, TEMPLATE).params.as_vector()
            for obs, canon in noisy
        ]
        warm_jump = float(np.linalg.norm(np.diff(np.array(warm), axis=0), axis=1).mean())
        cold_jump = float(np.linalg.norm(np.diff(np.array(cold), axis=0), axis=1).mean())
        ratio = warm_jump / cold_jump
        assert ratio <= 0.5, f"smoothness ratio {ratio:.3f} exceeds 0.5"

        # no-reset contract: replaying the identical sequence reproduces
        # the trajectory bit for bit
        replay = run_tracked()
        for a, b in zip(warm, replay):
            np.testing.assert_array_equal(a, b)

        elapsed = time.monotonic() - start
        report(
            "tracking-60",
            f"max EPE {max(epes):.3f} cm (<2), jump ratio {ratio:.3f} (<=0.5), "
            f"replay exact, {elapsed:.0f}s",
        )


# ---------------------------------------------------------------------------
# Metrics oracle
# ---------------------------------------------------------------------------

class TestMetricsOracle:
    def test_closed_forms_and_brute_force(self):
        # PCK against brute-force counting
        rng = np.random.default_rng(3)
        errs = rng.uniform(0, 10, 500)
        grid = np.linspace(0, 10, 41)
        curve = metrics.pck_curve(errs, grid)
        brute = np.array([np.sum(errs <= t) / errs.size for t in grid])
        np.testing.assert_array_equal(curve.fractions, brute)

        # ramp AUC closed form
        t = np.linspace(0.0, 1.0, 101)
        assert metrics.auc(metrics.PckCurve(t, t)) == pytest.approx(0.5, abs=1e-6)

        # constructed 10-degree rotation
        root = np.array([0.0, 0.1, 0.6])
        c, s = np.cos(np.radians(10.0)), np.sin(np.radians(10.0))
        Rx = np.array([[1, 0, 0], [0, c, -s], [0, s, c]])
        angle, radius = metrics.spherical_errors(Rx @ root, root)
        assert angle == pytest.approx(10.0, abs=1e-9)
        assert radius == pytest.approx(0.0, abs=1e-9)

        # explicit two-step alignment oracle
        pred = forward_kinematics(random_params(rng, TEMPLATE), TEMPLATE)
        gt = forward_kinematics(random_params(rng, TEMPLATE), TEMPLATE)
        a, b = TEMPLATE.reference_bone
        scale = np.linalg.norm(gt[b] - gt[a]) / np.linalg.norm(pred[b] - pred[a])
        expected = (pred - pred[WRIST]) * scale + gt[WRIST]
        np.testing.assert_allclose(
            metrics.align(pred, gt, "root+scale", TEMPLATE), expected, atol=1e-12
        )
        report("metrics-oracle", "counting, ramp 0.5, 10.000 deg, two-step alignment")


# ---------------------------------------------------------------------------
# Invariants
# ---------------------------------------------------------------------------

class TestInvariantSuite:
    def test_primary_invariants(self):
        rng = np.random.default_rng(5)
        rest = forward_kinematics(HandParams(), TEMPLATE)
        parents = TEMPLATE.parents
        rest_bones = np.array([
            np.linalg.norm(rest[j] - rest[parents[j]]) for j in range(1, NUM_JOINTS)
        ])
        for _ in range(25):
            params = random_params(rng, TEMPLATE, margin=0.0)
            kp = forward_kinematics(params, TEMPLATE)
            bones = np.array([
                np.linalg.norm(kp[j] - kp[parents[j]]) for j in range(1, NUM_JOINTS)
            ])
            np.testing.assert_allclose(bones, rest_bones, atol=1e-9)  # rigidity

            canon = canonicalize(kp, TEMPLATE)
            np.testing.assert_allclose(
                canonicalize(kp * 3.0 + [0.5, -1.0, 2.0], TEMPLATE), canon, atol=1e-10
            )  # translation/scale invariance

            np.testing.assert_allclose(
                mirror_params(mirror_params(params)).as_vector(),
                params.as_vector(), atol=1e-12,
            )  # mirror involution
            np.testing.assert_allclose(
                mirror_keypoints_3d(mirror_keypoints_3d(kp)), kp, atol=1e-12
            )

        # clip idempotence
        art = rng.uniform(-4, 4, 45)
        once = clip_articulation(art, TEMPLATE)
        np.testing.assert_array_equal(clip_articulation(once, TEMPLATE), once)

        # loss zero-cases
        params = random_params(rng, TEMPLATE)
        kp3d = forward_kinematics(params, TEMPLATE)
        ctx = FitContext(
            template=TEMPLATE, camera=CAM,
            observed=project(kp3d, CAM),
            canonical_target=canonicalize(kp3d, TEMPLATE),
        )
        assert evaluate(LossKind.REPROJECTION, params, ctx).total == pytest.approx(0.0, abs=1e-15)
        assert evaluate(LossKind.CANONICAL_ALIGNMENT, params, ctx).total == pytest.approx(0.0, abs=1e-12)
        centered = HandParams(
            articulation=midpoint_articulation(TEMPLATE),
            translation=np.array([0.0, 0.0, 0.5]),
        )
        prior_ctx = FitContext(template=TEMPLATE)
        assert evaluate(LossKind.ARTICULATION_PRIOR, centered, prior_ctx).total == 0.0

        # determinism of sampling and fitting under fixed seeds
        bank = sampling.synth_bank(9, TEMPLATE, 200, 200)
        set_a = sampling.generate_testset(bank, "ego", 3, 4, CAM, TEMPLATE)
        set_b = sampling.generate_testset(bank, "ego", 3, 4, CAM, TEMPLATE)
        for sa, sb in zip(set_a.samples, set_b.samples):
            np.testing.assert_array_equal(sa.params.as_vector(), sb.params.as_vector())
        sample = set_a.samples[0]
        fit_a = fit_unsupervised(sample.keypoints_2d, sample.canonical, CAM, TEMPLATE)
        fit_b = fit_unsupervised(sample.keypoints_2d, sample.canonical, CAM, TEMPLATE)
        np.testing.assert_array_equal(fit_a.params.as_vector(), fit_b.params.as_vector())
        report("invariant-suite", "rigidity, clip, zero-cases, canonicalize, mirror, determinism")


# ---------------------------------------------------------------------------
# API contract
# ---------------------------------------------------------------------------

class TestApiContract:
    def test_service_contract(self, tmp_path):
        testset = ego_testset(2, seed=31, bank_size=200)
        instances = [
            DatasetInstance(
                camera=CAM,
                keypoints_2d=s.keypoints_2d,
                canonical=s.canonical,
            )
            for s in testset.samples
        ]
        dataset_path = tmp_path / "data.jsonl"
        app = create_app(instances, WorkbenchConfig(), dataset_path=str(dataset_path))
        with TestClient(app) as client:
            # lifecycle
            state = client.post("/sessions", json={"instance_index": 0}).json()
            sid = state["id"]
            assert client.get(f"/sessions/{sid}/state").json() == \
                client.get(f"/sessions/{sid}/state").json()

            # keypoint set/unset
            body = client.put(f"/sessions/{sid}/keypoints",
                              json={"joint": 0, "u": 10.0, "v": 20.0}).json()
            assert body["annotated"]["0"] == [10.0, 20.0]
            body = client.delete(f"/sessions/{sid}/keypoints/0").json()
            assert "0" not in body["annotated"] or body["annotated"]["0"] != [10.0, 20.0]

            # fit reduces loss on a synthesized instance
            client.post(f"/sessions/{sid}/reset")
            pre = losses.evaluate(
                LossKind.FIT,
                skeleton.HandParams.from_dict(
                    client.get(f"/sessions/{sid}/state").json()["params"]
                ),
                FitContext(template=TEMPLATE, camera=CAM,
                           observed=instances[0].keypoints_2d),
            ).total
            body = client.post(f"/sessions/{sid}/fit", json={"mode": "unsupervised"}).json()
            assert body["loss"]["total"] < pre
            assert body["loss"]["total"] < 4.0

            # busy rejection on concurrent fits
            session = client.app.state.sessions[sid]
            assert session.lock.acquire(blocking=False)
            try:
                assert client.post(f"/sessions/{sid}/fit",
                                   json={"mode": "supervised"}).status_code == 409
            finally:
                session.lock.release()

            # dataset file round trip
            client.post(f"/sessions/{sid}/save", json={"status": "accepted"})
            reloaded = import_dataset(dataset_path)
            assert reloaded[0].status == "accepted"
            export_dataset(reloaded, tmp_path / "again.jsonl")
            assert dataset_path.read_text() == (tmp_path / "again.jsonl").read_text()
        report("api-contract", "lifecycle, keypoints, fit<4px^2, busy 409, file round trip")
