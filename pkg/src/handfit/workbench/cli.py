"""Batch command line: sample / convert / fit / track / eval / serve."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .. import fitting, metrics, sampling, skeleton
from ..camera import Keypoints2D
from ..fitting import TrackingSession
from .config import load_config
from .convert import convert_dataset
from .dataset import DatasetInstance, export_dataset, import_dataset
from .providers import CommandProvider, FileProvider, GroundTruthProvider


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="handfit")
    parser.add_argument("--config", default=None, help="workbench config JSON")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=None, help="output path")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="generate a synthetic test set")
    p.add_argument("--viewpoint", choices=sampling.VIEWPOINTS, default="ego")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--bank", default=None, help="bank file (default: synthetic bank)")
    p.add_argument("--bank-size", type=int, default=2000)

    p = sub.add_parser("convert", help="lift a 2D dataset to 3D annotations")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--format", choices=("canonical", "simple-2d"), default="canonical")
    p.add_argument("--provider", default="gt",
                   help="gt | file:<poses.json> | cmd:<command line>")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("fit", help="fit a single dataset instance")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--mode", choices=("supervised", "unsupervised"), default="unsupervised")

    p = sub.add_parser("track", help="track through a frame-sequence dataset")
    p.add_argument("--in", dest="input", required=True)

    p = sub.add_parser("eval", help="metric report for predictions vs ground truth")
    p.add_argument("--pred", required=True, help="dataset with predicted keypoints_3d")
    p.add_argument("--gt", required=True, help="dataset with ground-truth keypoints_3d")

    p = sub.add_parser("serve", help="run the annotation service")
    p.add_argument("--port", type=int, default=8321)
    p.add_argument("--data", required=True, help="canonical dataset file")
    p.add_argument("--host", default="127.0.0.1")
    return parser


def _make_provider(spec: str, template):
    if spec == "gt":
        return GroundTruthProvider(template)
    if spec.startswith("file:"):
        return FileProvider(spec[5:])
    if spec.startswith("cmd:"):
        return CommandProvider(spec[4:].split())
    raise SystemExit(f"unknown provider spec {spec!r}")


def _cmd_sample(args, config) -> int:
    template = config.template
    if args.bank:
        bank = sampling.load_bank(args.bank, template)
    else:
        bank = sampling.synth_bank(args.seed, template,
                                   args.bank_size, args.bank_size, args.viewpoint)
    testset = sampling.generate_testset(
        bank, args.viewpoint, args.n, args.seed, config.camera, template
    )
    instances = [
        DatasetInstance(
            side=skeleton.HandSide.RIGHT,
            camera=config.camera,
            keypoints_2d=s.keypoints_2d,
            keypoints_3d=s.keypoints_3d,
            canonical=s.canonical,
            params=s.params,
        )
        for s in testset.samples
    ]
    out = args.out or f"testset_{args.viewpoint}_{args.n}.jsonl"
    export_dataset(instances, out)
    print(f"wrote {len(instances)} instances to {out} "
          f"({testset.resampled} out-of-frame resamples)")
    return 0


def _cmd_convert(args, config) -> int:
    instances = import_dataset(args.input, args.format)
    provider = _make_provider(args.provider, config.template)
    report = convert_dataset(instances, provider, config.camera, config.template,
                             config.fit, max_workers=args.workers)
    out = args.out or (str(Path(args.input).with_suffix("")) + "_converted.jsonl")
    export_dataset(instances, out)
    print(f"fitted {report.fitted}/{report.attempted} "
          f"({report.skipped_incomplete} incomplete skipped) -> {out}")
    if report.failures:
        for idx, message in sorted(report.failures.items()):
            print(f"  instance {idx} failed: {message}", file=sys.stderr)
        return 1
    return 0


def _cmd_fit(args, config) -> int:
    instances = import_dataset(args.input)
    if args.index < 0 or args.index >= len(instances):
        raise SystemExit(f"index {args.index} out of range (0..{len(instances) - 1})")
    inst = instances[args.index]
    cam = inst.camera or config.camera
    template = config.template
    if inst.keypoints_2d is None:
        raise SystemExit("instance has no 2D keypoints")
    if args.mode == "unsupervised":
        provider = GroundTruthProvider(template)
        result = fitting.fit_unsupervised(
            inst.keypoints_2d, provider(inst), cam, template, config.fit, side=inst.side
        )
    else:
        initial = inst.params or skeleton.HandParams(translation=np.array([0.0, 0.0, 0.5]))
        result = fitting.fit_supervised(
            initial, inst.keypoints_2d, cam, template, config.fit, side=inst.side
        )
    payload = {
        "params": result.params.to_dict(),
        "loss": {"total": result.report.total, "components": result.report.components},
        "iterations": result.iterations,
    }
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(payload, fh, indent=2)
    else:
        json.dump(payload, sys.stdout, indent=2)
        print()
    return 0


def _cmd_track(args, config) -> int:
    frames = import_dataset(args.input)
    template = config.template
    provider = GroundTruthProvider(template)
    session = None
    rows = []
    failures = 0
    for i, frame in enumerate(frames):
        cam = frame.camera or config.camera
        if session is None:
            session = TrackingSession(camera=cam, template=template,
                                      config=config.fit, side=frame.side)
        try:
            result = fitting.track_frame(session, frame.keypoints_2d, provider(frame))
        except Exception as err:
            failures += 1
            rows.append({"frame": i, "error": str(err)})
            continue
        rows.append({
            "frame": i,
            "params": result.params.to_dict(),
            "loss_total": result.report.total,
            "iterations": result.iterations,
        })
    out = args.out or (str(Path(args.input).with_suffix("")) + "_tracked.jsonl")
    with open(out, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    print(f"tracked {len(frames) - failures}/{len(frames)} frames -> {out}")
    return 1 if failures else 0


def _cmd_eval(args, config) -> int:
    preds = import_dataset(args.pred)
    gts = import_dataset(args.gt)
    if len(preds) != len(gts):
        raise SystemExit("prediction and ground-truth datasets differ in length")
    template = config.template
    pred_kp, gt_kp, canonical_errors, pixel_errors = [], [], [], []
    for p, g in zip(preds, gts):
        if p.keypoints_3d is None or g.keypoints_3d is None:
            raise SystemExit("both datasets need keypoints_3d on every instance")
        pred_kp.append(p.keypoints_3d)
        gt_kp.append(g.keypoints_3d)
        canonical_errors.extend(
            np.linalg.norm(
                skeleton.canonicalize(p.keypoints_3d, template)
                - skeleton.canonicalize(g.keypoints_3d, template),
                axis=1,
            ).tolist()
        )
        if p.keypoints_2d is not None and g.keypoints_2d is not None:
            both = p.keypoints_2d.mask & g.keypoints_2d.mask
            diff = p.keypoints_2d.points[both] - g.keypoints_2d.points[both]
            pixel_errors.extend(np.linalg.norm(diff, axis=1).tolist())
    report = metrics.evaluate_batch(
        pred_kp, gt_kp, template,
        canonical_errors=canonical_errors,
        pixel_errors=pixel_errors or None,
    )
    out = args.out or "metrics.json"
    metrics.write_report(report, out)
    base = Path(out).with_suffix("")
    for name, curve in report["curves"].items():
        metrics.PckCurve(
            np.asarray(curve["thresholds"]), np.asarray(curve["fractions"]), curve["unit"]
        ).write_csv(f"{base}_{name}.csv")
    print(f"wrote {out}; EPE mean {report['epe_cm']['mean']:.3f} cm, "
          f"AUC(canonical) {report['auc'].get('canonical_3d', float('nan')):.4f}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    config = load_config(args.config)
    try:
        if args.command == "sample":
            return _cmd_sample(args, config)
        if args.command == "convert":
            return _cmd_convert(args, config)
        if args.command == "fit":
            return _cmd_fit(args, config)
        if args.command == "track":
            return _cmd_track(args, config)
        if args.command == "eval":
            return _cmd_eval(args, config)
        if args.command == "serve":
            from .service import serve
            instances = import_dataset(args.data)
            serve(args.port, instances, config, dataset_path=args.data, host=args.host)
            return 0
    except SystemExit:
        raise
    except Exception as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
