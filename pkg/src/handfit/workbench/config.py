"""Single JSON configuration covering fitting, template, camera, metrics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .. import skeleton
from ..camera import Camera, default_camera
from ..fitting import FitConfig
from ..skeleton import SkeletonTemplate


@dataclass
class WorkbenchConfig:
    fit: FitConfig = field(default_factory=FitConfig)
    camera: Camera = field(default_factory=default_camera)
    template_path: Optional[str] = None
    metric_grids: dict = field(default_factory=dict)
    _template: Optional[SkeletonTemplate] = None

    @property
    def template(self) -> SkeletonTemplate:
        if self._template is None:
            if self.template_path:
                object.__setattr__(self, "_template", SkeletonTemplate.load(self.template_path))
            else:
                object.__setattr__(self, "_template", skeleton.default_template())
        return self._template

    def to_dict(self) -> dict:
        return {
            "fit": self.fit.to_dict(),
            "camera": self.camera.to_dict(),
            "template_path": self.template_path,
            "metric_grids": self.metric_grids,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WorkbenchConfig":
        return cls(
            fit=FitConfig.from_dict(d["fit"]) if "fit" in d else FitConfig(),
            camera=Camera.from_dict(d["camera"]) if "camera" in d else default_camera(),
            template_path=d.get("template_path"),
            metric_grids=d.get("metric_grids", {}),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def load_config(path: Optional[str]) -> WorkbenchConfig:
    if path is None:
        return WorkbenchConfig()
    with open(path) as fh:
        return WorkbenchConfig.from_dict(json.load(fh))
