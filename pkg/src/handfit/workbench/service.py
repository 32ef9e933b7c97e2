"""Local annotation HTTP service consumed by the browser UI.

One in-memory session per open instance. All endpoints return JSON; errors
carry {"error": <machine code>, "detail": <human text>}.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import fitting, losses, skeleton
from ..camera import BehindCameraError, Keypoints2D, project
from ..skeleton import NUM_JOINTS, HandParams, HandSide
from .config import WorkbenchConfig
from .dataset import DatasetInstance, export_dataset, instance_consistency_error
from .providers import GroundTruthProvider, ProviderError

PAGE_SIZE = 50
DEFAULT_ROOT_DEPTH = 0.5
ACCEPT_CONSISTENCY_PX = 2.0


class ApiError(Exception):
    def __init__(self, status: int, code: str, detail: str):
        self.status = status
        self.code = code
        self.detail = detail


@dataclass
class Session:
    id: str
    instance_index: int
    params: HandParams
    annotations: Keypoints2D
    report: Optional[losses.LossReport] = None
    stage_reports: list = field(default_factory=list)
    history_depth: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock)


def _default_params() -> HandParams:
    params = HandParams()
    params.translation = np.array([0.0, 0.0, DEFAULT_ROOT_DEPTH])
    return params


def create_app(
    instances: list[DatasetInstance],
    config: Optional[WorkbenchConfig] = None,
    dataset_path: Optional[str] = None,
    provider=None,
) -> FastAPI:
    config = config or WorkbenchConfig()
    template = config.template
    if provider is None:
        provider = GroundTruthProvider(template)
    app = FastAPI(title="handfit annotation service")
    sessions: dict[str, Session] = {}
    app.state.sessions = sessions
    app.state.instances = instances

    @app.exception_handler(ApiError)
    async def on_api_error(request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status,
                            content={"error": exc.code, "detail": exc.detail})

    def get_instance(index: int) -> DatasetInstance:
        if index < 0 or index >= len(instances):
            raise ApiError(404, "instance_not_found", f"no instance {index}")
        return instances[index]

    def get_session(session_id: str) -> Session:
        session = sessions.get(session_id)
        if session is None:
            raise ApiError(404, "session_not_found", f"no session {session_id}")
        return session

    def side_template(side: HandSide):
        return template if side == HandSide.RIGHT else skeleton.mirror_template(template)

    def state_body(session: Session) -> dict:
        inst = instances[session.instance_index]
        cam = inst.camera or config.camera
        kp3d = skeleton.forward_kinematics(session.params, side_template(inst.side))
        try:
            projected = project(kp3d, cam).points.tolist()
        except BehindCameraError:
            projected = None
        annotated = {
            str(j): session.annotations.points[j].tolist()
            for j in session.annotations.annotated_indices
        }
        return {
            "id": session.id,
            "instance_index": session.instance_index,
            "side": inst.side.value,
            "image": inst.image,
            "camera": cam.to_dict(),
            "params": session.params.to_dict(),
            "keypoints_3d": kp3d.tolist(),
            "projected": projected,
            "annotated": annotated,
            "loss": None if session.report is None else {
                "total": session.report.total,
                "components": session.report.components,
            },
            "stage_losses": [
                {"total": r.total, "components": r.components}
                for r in session.stage_reports
            ],
            "limits": {
                "min": template.limit_min.tolist(),
                "max": template.limit_max.tolist(),
            },
            "history_depth": session.history_depth,
            "status": inst.status,
        }

    def acquire(session: Session):
        if not session.lock.acquire(blocking=False):
            raise ApiError(409, "busy", "a fit is already running on this session")
        return session.lock

    @app.get("/instances")
    def list_instances(cursor: int = 0):
        if cursor < 0:
            raise ApiError(400, "bad_cursor", "cursor must be nonnegative")
        page = instances[cursor:cursor + PAGE_SIZE]
        out = []
        for offset, inst in enumerate(page):
            annotated = 0
            if inst.keypoints_2d is not None:
                annotated = int(inst.keypoints_2d.mask.sum())
            out.append({
                "index": cursor + offset,
                "image": inst.image,
                "side": inst.side.value,
                "status": inst.status,
                "annotated_count": annotated,
            })
        next_cursor = cursor + PAGE_SIZE if cursor + PAGE_SIZE < len(instances) else None
        return {"instances": out, "next_cursor": next_cursor, "total": len(instances)}

    @app.post("/sessions", status_code=201)
    def create_session(body: dict):
        index = body.get("instance_index")
        if not isinstance(index, int):
            raise ApiError(400, "bad_request", "instance_index (int) is required")
        inst = get_instance(index)
        annotations = (
            inst.keypoints_2d.copy() if inst.keypoints_2d is not None
            else Keypoints2D(np.zeros((NUM_JOINTS, 2)), np.zeros(NUM_JOINTS, dtype=bool))
        )
        initial = inst.params.copy() if inst.params is not None else _default_params()
        session = Session(
            id=uuid.uuid4().hex,
            instance_index=index,
            params=initial,
            annotations=annotations,
        )
        sessions[session.id] = session
        return state_body(session)

    @app.get("/sessions/{session_id}/state")
    def get_state(session_id: str):
        return state_body(get_session(session_id))

    @app.put("/sessions/{session_id}/params")
    def put_params(session_id: str, body: dict):
        session = get_session(session_id)
        lock = acquire(session)
        try:
            params = session.params
            if "rotation" in body:
                params.rotation = np.asarray(body["rotation"], dtype=float)
            if "translation" in body:
                params.translation = np.asarray(body["translation"], dtype=float)
            if "articulation" in body:
                art = params.articulation
                for key, value in body["articulation"].items():
                    idx = int(key)
                    if idx < 0 or idx >= skeleton.ARTICULATION_DIM:
                        raise ApiError(400, "bad_articulation_index", f"index {idx} out of range")
                    art[idx] = float(value)
                params.articulation = skeleton.clip_articulation(art, template)
            session.history_depth += 1
            return state_body(session)
        finally:
            lock.release()

    @app.put("/sessions/{session_id}/keypoints")
    def put_keypoint(session_id: str, body: dict):
        session = get_session(session_id)
        joint = body.get("joint")
        if not isinstance(joint, int) or joint < 0 or joint >= NUM_JOINTS:
            raise ApiError(400, "bad_joint", "joint must be an int in 0..20")
        try:
            u, v = float(body["u"]), float(body["v"])
        except (KeyError, TypeError, ValueError):
            raise ApiError(400, "bad_request", "u and v pixel coordinates are required")
        lock = acquire(session)
        try:
            session.annotations.points[joint] = (u, v)
            session.annotations.mask[joint] = True
            session.history_depth += 1
            return state_body(session)
        finally:
            lock.release()

    @app.delete("/sessions/{session_id}/keypoints/{joint}")
    def delete_keypoint(session_id: str, joint: int):
        session = get_session(session_id)
        if joint < 0 or joint >= NUM_JOINTS:
            raise ApiError(400, "bad_joint", "joint must be in 0..20")
        lock = acquire(session)
        try:
            session.annotations.mask[joint] = False
            session.annotations.points[joint] = 0.0
            session.history_depth += 1
            return state_body(session)
        finally:
            lock.release()

    @app.post("/sessions/{session_id}/fit")
    def fit(session_id: str, body: dict):
        session = get_session(session_id)
        mode = body.get("mode", "supervised")
        if mode not in ("supervised", "unsupervised"):
            raise ApiError(400, "bad_mode", "mode must be supervised or unsupervised")
        inst = instances[session.instance_index]
        cam = inst.camera or config.camera
        lock = acquire(session)
        try:
            if mode == "supervised":
                if not session.annotations.mask.any():
                    raise ApiError(422, "no_annotations", "annotate at least one joint first")
                result = fitting.fit_supervised(
                    session.params, session.annotations, cam, template,
                    config.fit, side=inst.side,
                )
                session.stage_reports = []
            else:
                if not session.annotations.mask.all():
                    raise ApiError(422, "incomplete_annotations",
                                   "unsupervised fitting needs all 21 joints")
                try:
                    canonical = provider(inst)
                except ProviderError as err:
                    raise ApiError(501, "provider_unavailable", str(err))
                result = fitting.fit_unsupervised(
                    session.annotations, canonical, cam, template,
                    config.fit, side=inst.side,
                )
                session.stage_reports = result.stage_reports
            session.params = result.params
            session.report = result.report
            session.history_depth += 1
            return state_body(session)
        except BehindCameraError as err:
            raise ApiError(422, "behind_camera", str(err))
        except (ValueError, losses.EmptyAnnotationError) as err:
            raise ApiError(422, "fit_failed", str(err))
        finally:
            lock.release()

    @app.post("/sessions/{session_id}/reset")
    def reset(session_id: str):
        session = get_session(session_id)
        lock = acquire(session)
        try:
            inst = instances[session.instance_index]
            session.params = inst.params.copy() if inst.params is not None else _default_params()
            session.annotations = (
                inst.keypoints_2d.copy() if inst.keypoints_2d is not None
                else Keypoints2D(np.zeros((NUM_JOINTS, 2)), np.zeros(NUM_JOINTS, dtype=bool))
            )
            session.report = None
            session.stage_reports = []
            session.history_depth = 0
            return state_body(session)
        finally:
            lock.release()

    @app.post("/sessions/{session_id}/save")
    def save(session_id: str, body: dict):
        session = get_session(session_id)
        status = body.get("status", "accepted")
        if status not in ("accepted", "rejected"):
            raise ApiError(400, "bad_status", "status must be accepted or rejected")
        lock = acquire(session)
        try:
            inst = instances[session.instance_index]
            cam = inst.camera or config.camera
            inst.keypoints_2d = session.annotations.copy()
            inst.params = session.params.copy()
            inst.camera = cam
            fit_template = template if inst.side == HandSide.RIGHT \
                else skeleton.mirror_template(template)
            inst.keypoints_3d = skeleton.forward_kinematics(session.params, fit_template)
            if status == "accepted":
                err = instance_consistency_error(inst, fit_template)
                if err is not None and err > ACCEPT_CONSISTENCY_PX:
                    inst.status = "unreviewed"
                    raise ApiError(
                        422, "inconsistent_annotation",
                        f"annotated keypoints deviate {err:.2f} px from the fitted "
                        f"projection (limit {ACCEPT_CONSISTENCY_PX} px)",
                    )
            inst.status = status
            if dataset_path is not None:
                export_dataset(instances, dataset_path)
            return state_body(session)
        finally:
            lock.release()

    return app


def serve(port: int, instances, config=None, dataset_path=None, host="127.0.0.1"):
    import uvicorn

    app = create_app(instances, config, dataset_path)
    uvicorn.run(app, host=host, port=port)
