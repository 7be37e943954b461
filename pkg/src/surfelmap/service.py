"""HTTP face of the engine.

Maps are held in memory behind ids handed out at load time. One writer per
map: a fusion request that finds another fusion running gets 409 instead of
queueing. Queries run under the map's read lock and therefore see either
the state before a concurrent fusion or after it, never a mix.

Endpoints (request and response bodies are JSON unless noted):

- ``POST /maps`` with ``{"path": ...}``, ``{"dim": ...}``, or a raw
  ``application/octet-stream`` map payload; returns the new map id.
- ``POST /maps/{id}/frames`` fuses one frame given paths to a depth array
  (.npy), an optional feature pack, and an inline pose plus intrinsics.
- ``POST /maps/{id}/query`` scores a raw vector or a named operand.
- ``POST /maps/{id}/query/click`` turns a point index into a query.
- ``POST /maps/{id}/spatial`` parses and evaluates a relation string.
- ``GET /maps/{id}/points?stride=k`` returns downsampled positions/colors.

Errors come back as ``{"error": {"code": ..., "message": ...}}`` with 400
for malformed input, 404 for unknown maps or unresolvable operands, and 409
for writer conflicts.
"""

from __future__ import annotations

import json
import subprocess
import threading
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .errors import (
    DegenerateFeatureError,
    EngineError,
    FormatError,
    InputError,
    MapBusyError,
    ObjectNotFoundError,
    ParseError,
    UnknownRelationError,
)
from .features import PixelFeatureMap, compute_pixel_features
from .formats import decode_map, load_map, read_frame_pack
from .fusion import FusionConfig, SurfelMap, fuse_frame
from .geometry import CameraIntrinsics, ConceptVector, InputFrame, Pose
from .query import ThresholdPolicy, click_query, query
from .spatial import ViewConfig, evaluate

_ERROR_STATUS = {
    "map_not_found": 404,
    "object_not_found": 404,
    "point_not_found": 404,
    "map_busy": 409,
}


class ServiceError(Exception):
    """Internal carrier for an error code + message + HTTP status."""

    def __init__(self, code: str, message: str, status: int | None = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.status = status or _ERROR_STATUS.get(code, 400)


def _wrap_engine_error(exc: EngineError) -> ServiceError:
    if isinstance(exc, MapBusyError):
        return ServiceError("map_busy", str(exc))
    if isinstance(exc, ObjectNotFoundError):
        return ServiceError("object_not_found", str(exc))
    if isinstance(exc, UnknownRelationError):
        return ServiceError("unknown_relation", str(exc))
    if isinstance(exc, ParseError):
        return ServiceError("parse_error", str(exc))
    if isinstance(exc, FormatError):
        return ServiceError("format_error", str(exc))
    if isinstance(exc, DegenerateFeatureError):
        return ServiceError("degenerate_feature", str(exc))
    return ServiceError("input_error", str(exc))


class EmbedderHook:
    """External embedder: a command fed {"modality", "payload"} on stdin
    that prints a JSON array of floats."""

    def __init__(self, command: list[str], *, timeout: float = 60.0):
        if not command:
            raise InputError("embedder command must be non-empty")
        self.command = list(command)
        self.timeout = timeout

    def embed(self, modality: str, payload: str) -> ConceptVector:
        request = json.dumps({"modality": modality, "payload": payload})
        try:
            proc = subprocess.run(
                self.command,
                input=request.encode(),
                capture_output=True,
                timeout=self.timeout,
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise ServiceError("embedder_failed", f"embedder hook failed: {exc}", 502)
        if proc.returncode != 0:
            raise ServiceError(
                "embedder_failed",
                f"embedder exited {proc.returncode}: {proc.stderr.decode(errors='replace')[:500]}",
                502,
            )
        try:
            values = json.loads(proc.stdout.decode())
            return ConceptVector(np.asarray(values, dtype=np.float64))
        except (ValueError, InputError) as exc:
            raise ServiceError("embedder_failed", f"bad embedder output: {exc}", 502)


class NameResolver:
    """Operand names resolve through the vector table, then the embedder."""

    def __init__(
        self,
        table: dict[str, ConceptVector] | None = None,
        embedder: EmbedderHook | None = None,
    ):
        self.table = table or {}
        self.embedder = embedder

    def __call__(self, name: str) -> ConceptVector:
        if name in self.table:
            return self.table[name]
        if self.embedder is not None:
            return self.embedder.embed("text", name)
        raise ObjectNotFoundError(name)


class MapRegistry:
    def __init__(self):
        self._maps: dict[str, SurfelMap] = {}
        self._lock = threading.Lock()
        self._next = 1

    def add(self, surfels: SurfelMap) -> str:
        with self._lock:
            map_id = f"m{self._next}"
            self._next += 1
            self._maps[map_id] = surfels
        return map_id

    def get(self, map_id: str) -> SurfelMap:
        with self._lock:
            surfels = self._maps.get(map_id)
        if surfels is None:
            raise ServiceError("map_not_found", f"no map with id {map_id!r}")
        return surfels

    def items(self) -> list[tuple[str, SurfelMap]]:
        with self._lock:
            return list(self._maps.items())


def _field(payload: dict, name: str, kind, *, required: bool = True, default=None):
    if name not in payload:
        if required:
            raise ServiceError("input_error", f"missing field {name!r}")
        return default
    value = payload[name]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ServiceError("input_error", f"field {name!r} must be {kind.__name__}")
    return value


def _as_array(value, what: str) -> np.ndarray:
    try:
        return np.asarray(value, dtype=np.float64)
    except (TypeError, ValueError):
        raise ServiceError("input_error", f"field {what!r} must be a numeric array")


def _parse_policy(payload: dict) -> ThresholdPolicy | None:
    raw = payload.get("policy")
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise ServiceError("input_error", "policy must be an object")
    kind = _field(raw, "kind", str)
    value = _field(raw, "value", float, required=False, default=1.0)
    return ThresholdPolicy(kind, value)


def _parse_view(payload: dict) -> ViewConfig | None:
    raw = payload.get("view")
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise ServiceError("input_error", "view must be an object")
    kwargs = {}
    for key in ("viewing_direction", "up_axis"):
        if key in raw:
            kwargs[key] = _as_array(raw[key], key)
    for key in ("margin", "support_tolerance", "footprint_overlap",
                "containment_fraction"):
        if key in raw:
            kwargs[key] = _field(raw, key, float)
    return ViewConfig(**kwargs)


def _query_knobs(payload: dict, *, with_top_k: bool = True) -> dict:
    knobs = {}
    policy = _parse_policy(payload)
    if policy is not None:
        knobs["policy"] = policy
    if "eps" in payload:
        knobs["eps"] = _field(payload, "eps", float)
    if "min_points" in payload:
        knobs["min_points"] = _field(payload, "min_points", int)
    if with_top_k and "top_k" in payload:
        knobs["top_k"] = _field(payload, "top_k", int)
    return knobs


def create_app(
    *,
    vector_table: dict[str, ConceptVector] | None = None,
    embedder: EmbedderHook | None = None,
) -> FastAPI:
    app = FastAPI(title="surfelmap", docs_url=None, redoc_url=None)
    registry = MapRegistry()
    resolver = NameResolver(vector_table, embedder)
    app.state.registry = registry
    app.state.resolver = resolver

    @app.exception_handler(ServiceError)
    async def _service_error(_req, exc: ServiceError):
        return JSONResponse(
            status_code=exc.status,
            content={"error": {"code": exc.code, "message": exc.message}},
        )

    @app.exception_handler(EngineError)
    async def _engine_error(_req, exc: EngineError):
        wrapped = _wrap_engine_error(exc)
        return JSONResponse(
            status_code=wrapped.status,
            content={"error": {"code": wrapped.code, "message": wrapped.message}},
        )

    @app.exception_handler(RequestValidationError)
    async def _invalid_request(_req, exc: RequestValidationError):
        # keep framework-level rejections inside the same error envelope
        detail = "; ".join(
            f"{'.'.join(str(p) for p in err.get('loc', ()))}: {err.get('msg', 'invalid')}"
            for err in exc.errors()[:3]
        )
        return JSONResponse(
            status_code=400,
            content={
                "error": {"code": "input_error", "message": detail or "invalid request"}
            },
        )

    async def _json_body(request: Request) -> dict:
        try:
            payload = json.loads(await request.body())
        except ValueError:
            raise ServiceError("input_error", "request body is not valid JSON")
        if not isinstance(payload, dict):
            raise ServiceError("input_error", "request body must be a JSON object")
        return payload

    @app.post("/maps")
    async def create_map(request: Request):
        content_type = request.headers.get("content-type", "")
        if content_type.startswith("application/octet-stream"):
            surfels = decode_map(await request.body())
        else:
            payload = await _json_body(request)
            if "path" in payload:
                path = Path(_field(payload, "path", str))
                if not path.is_file():
                    raise ServiceError("input_error", f"no such file: {path}")
                surfels = load_map(path)
            elif "dim" in payload:
                surfels = SurfelMap(dim=_field(payload, "dim", int))
            else:
                raise ServiceError(
                    "input_error", "need 'path', 'dim', or an octet-stream body"
                )
        map_id = registry.add(surfels)
        return {"map_id": map_id, "points": surfels.count, "dim": surfels.dim}

    @app.post("/maps/{map_id}/frames")
    def fuse_endpoint(map_id: str, payload: dict):
        surfels = registry.get(map_id)
        if not isinstance(payload, dict):
            raise ServiceError("input_error", "request body must be a JSON object")

        depth_path = Path(_field(payload, "depth_path", str))
        if not depth_path.is_file():
            raise ServiceError("input_error", f"no such file: {depth_path}")
        try:
            depth = np.load(depth_path)
        except (ValueError, OSError) as exc:
            raise ServiceError("input_error", f"bad depth array: {exc}")

        intr_raw = _field(payload, "intrinsics", dict)
        intrinsics = CameraIntrinsics(
            fx=_field(intr_raw, "fx", float),
            fy=_field(intr_raw, "fy", float),
            cx=_field(intr_raw, "cx", float),
            cy=_field(intr_raw, "cy", float),
            width=_field(intr_raw, "width", int),
            height=_field(intr_raw, "height", int),
        )
        pose_raw = _field(payload, "pose", dict)
        if "rotation" not in pose_raw or "translation" not in pose_raw:
            raise ServiceError("input_error", "pose needs 'rotation' and 'translation'")
        pose = Pose(
            rotation=_as_array(pose_raw["rotation"], "rotation"),
            translation=_as_array(pose_raw["translation"], "translation"),
        )
        frame = InputFrame(
            depth=depth,
            pose=pose,
            intrinsics=intrinsics,
            frame_id=_field(payload, "frame_id", int, required=False, default=0),
        )

        pixel_features: PixelFeatureMap | None = None
        if "pack_path" in payload:
            pack_path = Path(_field(payload, "pack_path", str))
            if not pack_path.is_file():
                raise ServiceError("input_error", f"no such file: {pack_path}")
            pack = read_frame_pack(pack_path, frame_id=frame.frame_id)
            pixel_features = compute_pixel_features(pack, tau=surfels.config.tau)

        config = surfels.config
        if "stride" in payload:
            config = FusionConfig(
                dist_thresh=config.dist_thresh,
                angle_thresh_deg=config.angle_thresh_deg,
                sigma=config.sigma,
                tau=config.tau,
                depth_min=config.depth_min,
                depth_max=config.depth_max,
                stride=_field(payload, "stride", int),
            )
        report = fuse_frame(surfels, frame, pixel_features, config, wait=False)
        return {
            "fused": report.fused,
            "geometry_only": report.geometry_only,
            "inserted": report.inserted,
            "skipped": report.skipped,
            "valid_pixels": report.valid_pixels,
            "points": surfels.count,
        }

    @app.post("/maps/{map_id}/query")
    def query_endpoint(map_id: str, payload: dict):
        surfels = registry.get(map_id)
        if not isinstance(payload, dict):
            raise ServiceError("input_error", "request body must be a JSON object")
        if "vector" in payload:
            raw = payload["vector"]
            if not isinstance(raw, list):
                raise ServiceError("input_error", "field 'vector' must be a list")
            vector = ConceptVector(_as_array(raw, "vector"))
        elif "name" in payload:
            vector = resolver(_field(payload, "name", str))
        else:
            raise ServiceError("input_error", "need 'vector' or 'name'")
        stride = _field(payload, "score_stride", int, required=False, default=1)
        if stride < 1:
            raise ServiceError("input_error", "score_stride must be >= 1")
        result = query(surfels, vector, **_query_knobs(payload))
        return result.to_dict(score_stride=stride)

    @app.post("/maps/{map_id}/query/click")
    def click_endpoint(map_id: str, payload: dict):
        surfels = registry.get(map_id)
        if not isinstance(payload, dict):
            raise ServiceError("input_error", "request body must be a JSON object")
        index = _field(payload, "index", int)
        stride = _field(payload, "score_stride", int, required=False, default=1)
        if stride < 1:
            raise ServiceError("input_error", "score_stride must be >= 1")
        with surfels.reader():
            try:
                vector = click_query(surfels, index)
            except InputError as exc:
                if "out of range" in str(exc) or "empty map" in str(exc):
                    raise ServiceError("point_not_found", str(exc))
                raise
            result = query(surfels, vector, **_query_knobs(payload))
        return result.to_dict(score_stride=stride)

    @app.post("/maps/{map_id}/spatial")
    def spatial_endpoint(map_id: str, payload: dict):
        surfels = registry.get(map_id)
        if not isinstance(payload, dict):
            raise ServiceError("input_error", "request body must be a JSON object")
        expression = _field(payload, "expression", str)
        view = _parse_view(payload)
        result = evaluate(
            surfels, expression, resolver, view=view,
            **_query_knobs(payload, with_top_k=False),
        )
        return result.to_dict()

    @app.get("/maps/{map_id}/points")
    def points_endpoint(map_id: str, stride: int = 1):
        surfels = registry.get(map_id)
        if stride < 1:
            raise ServiceError("input_error", "stride must be >= 1")
        with surfels.reader():
            positions = surfels.positions[::stride].tolist()
            has_color = surfels.has_color[::stride]
            rgb = np.clip(np.rint(surfels.colors[::stride]), 0, 255).astype(int)
            colors = [
                c.tolist() if flag else None
                for c, flag in zip(rgb, has_color)
            ]
            count = surfels.count
        return {
            "point_count": count,
            "stride": stride,
            "positions": positions,
            "colors": colors,
        }

    return app
