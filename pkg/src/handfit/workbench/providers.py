"""Canonical-pose providers for dataset conversion.

A provider maps a DatasetInstance to a (21, 3) canonical pose. The neural
estimator slot stays pluggable: ground-truth injection, a file of
precomputed poses, or an external command.
"""

from __future__ import annotations

import json
import subprocess

import numpy as np

from ..skeleton import NUM_JOINTS
from .dataset import DatasetInstance


class ProviderError(RuntimeError):
    pass


class ProviderNotConfiguredError(ProviderError):
    """Default hook used when no canonical-pose source is configured."""


class GroundTruthProvider:
    """Injects the instance's own stored canonical pose (or derives it from
    stored 3D keypoints)."""

    def __init__(self, template):
        self.template = template

    def __call__(self, instance: DatasetInstance) -> np.ndarray:
        if instance.canonical is not None:
            return instance.canonical
        if instance.keypoints_3d is not None:
            from .. import skeleton
            return skeleton.canonicalize(instance.keypoints_3d, self.template)
        raise ProviderError("instance carries neither canonical pose nor 3D keypoints")


class FileProvider:
    """Reads precomputed canonical poses from a JSON file: a list with one
    (21, 3) nested list (or null) per instance index."""

    def __init__(self, path):
        with open(path) as fh:
            self.poses = json.load(fh)
        self._cursor = 0

    def __call__(self, instance: DatasetInstance) -> np.ndarray:
        idx = self._cursor
        self._cursor += 1
        if idx >= len(self.poses) or self.poses[idx] is None:
            raise ProviderError(f"no precomputed pose for instance {idx}")
        pose = np.asarray(self.poses[idx], dtype=float)
        if pose.shape != (NUM_JOINTS, 3):
            raise ProviderError(f"pose {idx} has shape {pose.shape}, expected (21, 3)")
        return pose


class CommandProvider:
    """Pipes the instance JSON to an external command and reads a (21, 3)
    canonical pose as JSON from its stdout."""

    def __init__(self, command: list[str], timeout: float = 60.0):
        self.command = command
        self.timeout = timeout

    def __call__(self, instance: DatasetInstance) -> np.ndarray:
        proc = subprocess.run(
            self.command,
            input=json.dumps(instance.to_dict()),
            capture_output=True,
            text=True,
            timeout=self.timeout,
        )
        if proc.returncode != 0:
            raise ProviderError(f"provider command failed: {proc.stderr.strip()}")
        try:
            pose = np.asarray(json.loads(proc.stdout), dtype=float)
        except (json.JSONDecodeError, ValueError) as err:
            raise ProviderError(f"provider output is not a pose: {err}") from err
        if pose.shape != (NUM_JOINTS, 3):
            raise ProviderError(f"provider returned shape {pose.shape}, expected (21, 3)")
        return pose


class UnconfiguredProvider:
    def __call__(self, instance: DatasetInstance) -> np.ndarray:
        raise ProviderNotConfiguredError(
            "no canonical-pose provider configured; supply ground-truth, file or command"
        )
