"""Batch 2D-to-3D dataset conversion via unsupervised fitting."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .. import fitting, skeleton
from ..camera import Camera
from ..fitting import FitConfig
from ..skeleton import SkeletonTemplate
from .dataset import DatasetInstance


@dataclass
class ConversionReport:
    fitted: int = 0
    skipped_incomplete: int = 0
    failures: dict[int, str] = field(default_factory=dict)

    @property
    def attempted(self) -> int:
        return self.fitted + len(self.failures)

    def acceptance_ratio(self, instances: list[DatasetInstance]) -> Optional[float]:
        """Accepted / reviewed ratio once manual validation has happened."""
        reviewed = [i for i in instances if i.status in ("accepted", "rejected")]
        if not reviewed:
            return None
        return sum(1 for i in reviewed if i.status == "accepted") / len(reviewed)


def convert_dataset(
    instances: list[DatasetInstance],
    provider: Callable[[DatasetInstance], np.ndarray],
    default_camera: Optional[Camera],
    template: SkeletonTemplate,
    config: FitConfig = FitConfig(),
    max_workers: int = 1,
) -> ConversionReport:
    """Attach fitted parameters and 3D keypoints to fully annotated
    instances. Per-instance failures are recorded and do not stop the
    batch. Status stays "unreviewed" pending manual validation."""
    report = ConversionReport()
    # Providers may be stateful (file cursor); query them serially first.
    jobs: list[tuple[int, np.ndarray]] = []
    for idx, inst in enumerate(instances):
        if not inst.fully_annotated:
            report.skipped_incomplete += 1
            continue
        try:
            jobs.append((idx, np.asarray(provider(inst), dtype=float)))
        except Exception as err:
            report.failures[idx] = str(err)

    def fit_one(job):
        idx, canonical = job
        inst = instances[idx]
        cam = inst.camera or default_camera
        if cam is None:
            raise ValueError("instance has no camera and no default was given")
        result = fitting.fit_unsupervised(
            inst.keypoints_2d, canonical, cam, template, config, side=inst.side
        )
        fit_template = template if inst.side == skeleton.HandSide.RIGHT \
            else skeleton.mirror_template(template)
        return idx, result.params, skeleton.forward_kinematics(result.params, fit_template)

    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
        for job, outcome in zip(jobs, pool.map(lambda j: _safe(fit_one, j), jobs)):
            idx = job[0]
            if isinstance(outcome, Exception):
                report.failures[idx] = str(outcome)
                continue
            _, params, kp3d = outcome
            instances[idx].params = params
            instances[idx].keypoints_3d = kp3d
            instances[idx].status = "unreviewed"
            report.fitted += 1
    return report


def _safe(fn, arg):
    try:
        return fn(arg)
    except Exception as err:
        return err
