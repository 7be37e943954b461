"""Spatial relation queries: a tiny call grammar plus geometric evaluators.

The grammar is a single relation call::

    relation ( operand , operand )

with a case-insensitive relation name from the eight below, arbitrary
whitespace (newlines included), and operands that are free text without
commas or parentheses, so multi-word names like "my location" pass through.
An external language model is expected to produce these strings; this module
only parses and evaluates them.

Relations: howFar, isToTheRight, isToTheLeft, isContained, onTopOf, under,
isBigger, canFitInside. howFar returns meters; the rest return booleans.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import InputError, ObjectNotFoundError, ParseError, UnknownRelationError
from .geometry import ConceptVector
from .fusion import SurfelMap
from .query import ThresholdPolicy, query as run_query

RELATIONS = (
    "howFar",
    "isToTheRight",
    "isToTheLeft",
    "isContained",
    "onTopOf",
    "under",
    "isBigger",
    "canFitInside",
)
_CANONICAL = {name.lower(): name for name in RELATIONS}

# Geometric thresholds. Margin suppresses left/right flapping for nearly
# aligned centroids; the support tolerance is the allowed vertical gap or
# penetration between a resting object and its base.
DIRECTIONAL_MARGIN_M = 0.01
SUPPORT_TOLERANCE_M = 0.05
FOOTPRINT_OVERLAP_MIN = 0.25
CONTAINMENT_FRACTION = 0.9


@dataclass(frozen=True)
class SpatialExpr:
    """Parsed relation call: canonical relation name plus trimmed operands."""

    relation: str
    operand_a: str
    operand_b: str


def parse_3dsc(text: str) -> SpatialExpr:
    """Parse a relation call, raising ParseError with a character position.

    The full input must be consumed; trailing garbage after the closing
    parenthesis is an error.
    """
    if not isinstance(text, str):
        raise ParseError("input must be a string", position=0)
    n = len(text)

    def skip_ws(i: int) -> int:
        while i < n and text[i].isspace():
            i += 1
        return i

    i = skip_ws(0)
    start = i
    while i < n and (text[i].isalnum() or text[i] == "_"):
        i += 1
    if i == start:
        raise ParseError("expected a relation name", position=start)
    name = text[start:i]
    canonical = _CANONICAL.get(name.lower())
    if canonical is None:
        raise UnknownRelationError(name, position=start)

    i = skip_ws(i)
    if i >= n or text[i] != "(":
        raise ParseError("expected '(' after the relation name", position=i)
    i += 1

    def read_operand(i: int, terminator: str) -> tuple[str, int]:
        start = i
        while i < n and text[i] not in ",()":
            i += 1
        if i >= n:
            raise ParseError(f"expected '{terminator}'", position=n)
        if text[i] == "(":
            raise ParseError("'(' is not allowed inside an operand", position=i)
        if text[i] != terminator:
            raise ParseError(f"expected '{terminator}'", position=i)
        operand = text[start:i].strip()
        if not operand:
            raise ParseError("empty operand", position=start)
        return operand, i + 1

    operand_a, i = read_operand(i, ",")
    operand_b, i = read_operand(i, ")")
    i = skip_ws(i)
    if i != n:
        raise ParseError("trailing characters after ')'", position=i)
    return SpatialExpr(relation=canonical, operand_a=operand_a, operand_b=operand_b)


@dataclass
class ViewConfig:
    """Viewer frame and thresholds for viewer-dependent relations.

    The default looks along +y with +z up, so +x is to the viewer's right.
    Directions are normalized on construction.
    """

    viewing_direction: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))
    up_axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    margin: float = DIRECTIONAL_MARGIN_M
    support_tolerance: float = SUPPORT_TOLERANCE_M
    footprint_overlap: float = FOOTPRINT_OVERLAP_MIN
    containment_fraction: float = CONTAINMENT_FRACTION

    def __post_init__(self):
        self.viewing_direction = _unit(np.asarray(self.viewing_direction, dtype=np.float64),
                                       "viewing_direction")
        self.up_axis = _unit(np.asarray(self.up_axis, dtype=np.float64), "up_axis")
        if self.margin < 0 or self.support_tolerance < 0:
            raise InputError("margin and support_tolerance must be non-negative")
        if not 0 < self.footprint_overlap <= 1 or not 0 < self.containment_fraction <= 1:
            raise InputError("overlap and containment fractions must be in (0, 1]")

    def right_axis(self) -> np.ndarray:
        right = np.cross(self.viewing_direction, self.up_axis)
        norm = float(np.linalg.norm(right))
        if norm < 1e-9:
            raise InputError("viewing direction is parallel to the up axis")
        return right / norm


def _unit(v: np.ndarray, what: str) -> np.ndarray:
    if v.shape != (3,):
        raise InputError(f"{what} must be a 3-vector")
    norm = float(np.linalg.norm(v))
    if norm < 1e-12:
        raise InputError(f"{what} must be non-zero")
    return v / norm


@dataclass
class ResolvedObject:
    """An operand grounded in the map: the winning cluster of its query."""

    name: str
    indices: np.ndarray
    positions: np.ndarray  # (n, 3)
    centroid: np.ndarray
    aabb_min: np.ndarray
    aabb_max: np.ndarray

    @property
    def volume(self) -> float:
        return float(np.prod(self.aabb_max - self.aabb_min))

    @property
    def extents(self) -> np.ndarray:
        return self.aabb_max - self.aabb_min


VectorSource = Mapping[str, ConceptVector] | Callable[[str], ConceptVector]


def _lookup(source: VectorSource, name: str) -> ConceptVector:
    if callable(source):
        try:
            return source(name)
        except KeyError:
            raise ObjectNotFoundError(name) from None
    try:
        return source[name]
    except KeyError:
        raise ObjectNotFoundError(name) from None


def resolve_operand(
    surfels: SurfelMap,
    name: str,
    source: VectorSource,
    *,
    policy: ThresholdPolicy | None = None,
    eps: float | None = None,
    min_points: int | None = None,
) -> ResolvedObject:
    """Query the map for an operand and keep the best-scoring cluster."""
    vector = _lookup(source, name)
    kwargs = {}
    if eps is not None:
        kwargs["eps"] = eps
    if min_points is not None:
        kwargs["min_points"] = min_points
    result = run_query(surfels, vector, policy=policy, top_k=1, **kwargs)
    if not result.clusters:
        raise ObjectNotFoundError(name)
    best = result.clusters[0]
    return ResolvedObject(
        name=name,
        indices=best.indices,
        positions=surfels.positions[best.indices].copy(),
        centroid=best.centroid,
        aabb_min=best.aabb_min,
        aabb_max=best.aabb_max,
    )


# -- evaluators ------------------------------------------------------------


def eval_howfar(a: ResolvedObject, b: ResolvedObject) -> float:
    """Euclidean distance between cluster centroids, in meters."""
    return float(np.linalg.norm(a.centroid - b.centroid))


def eval_right_of(a: ResolvedObject, b: ResolvedObject, view: ViewConfig) -> bool:
    right = view.right_axis()
    return float(np.dot(a.centroid - b.centroid, right)) > view.margin


def eval_left_of(a: ResolvedObject, b: ResolvedObject, view: ViewConfig) -> bool:
    right = view.right_axis()
    return float(np.dot(a.centroid - b.centroid, right)) < -view.margin


def _height_interval(obj: ResolvedObject, up: np.ndarray) -> tuple[float, float]:
    heights = _corners(obj) @ up
    return float(heights.min()), float(heights.max())


def _corners(obj: ResolvedObject) -> np.ndarray:
    lo, hi = obj.aabb_min, obj.aabb_max
    return np.array([
        [x, y, z]
        for x in (lo[0], hi[0])
        for y in (lo[1], hi[1])
        for z in (lo[2], hi[2])
    ])


def _footprint_overlap(a: ResolvedObject, b: ResolvedObject, view: ViewConfig) -> float:
    """Overlap of the two aabb footprints in the plane orthogonal to up,
    as a fraction of the smaller footprint. Degenerate (zero-area)
    footprints cannot establish support and give 0."""
    up = view.up_axis
    seed = np.zeros(3)
    seed[int(np.argmin(np.abs(up)))] = 1.0
    b1 = _unit(np.cross(up, seed), "footprint basis")
    b2 = np.cross(up, b1)
    areas = []
    boxes = []
    for obj in (a, b):
        proj = _corners(obj) @ np.stack([b1, b2], axis=1)
        lo, hi = proj.min(axis=0), proj.max(axis=0)
        boxes.append((lo, hi))
        areas.append(float(np.prod(hi - lo)))
    (alo, ahi), (blo, bhi) = boxes
    inter = np.maximum(0.0, np.minimum(ahi, bhi) - np.maximum(alo, blo))
    inter_area = float(np.prod(inter))
    min_area = min(areas)
    if min_area <= 0.0:
        return 0.0
    return inter_area / min_area


def eval_on_top_of(a: ResolvedObject, b: ResolvedObject, view: ViewConfig) -> bool:
    """a rests on b: a's bottom sits at b's top (within the support
    tolerance, either side) and their footprints overlap enough."""
    up = view.up_axis
    a_bottom, _ = _height_interval(a, up)
    _, b_top = _height_interval(b, up)
    gap = a_bottom - b_top
    if abs(gap) > view.support_tolerance:
        return False
    return _footprint_overlap(a, b, view) >= view.footprint_overlap


def eval_under(a: ResolvedObject, b: ResolvedObject, view: ViewConfig) -> bool:
    return eval_on_top_of(b, a, view)


def eval_contained(a: ResolvedObject, b: ResolvedObject, view: ViewConfig) -> bool:
    """Nearly all of a's points sit inside b's box, and a is the smaller."""
    inside = np.all(
        (a.positions >= b.aabb_min) & (a.positions <= b.aabb_max), axis=1
    )
    frac = float(inside.mean())
    return frac >= view.containment_fraction and a.volume < b.volume


def eval_bigger(a: ResolvedObject, b: ResolvedObject) -> bool:
    return a.volume > b.volume


def eval_fits_inside(a: ResolvedObject, b: ResolvedObject) -> bool:
    """All three sorted box extents of a are strictly below b's, i.e. a
    could be rotated (axis-aligned) into b's empty box."""
    return bool(np.all(np.sort(a.extents) < np.sort(b.extents)))


@dataclass
class RelationResult:
    """Evaluation outcome plus the geometry that backs it up."""

    expr: SpatialExpr
    value: bool | float
    a: ResolvedObject
    b: ResolvedObject

    def to_dict(self) -> dict:
        def obj(o: ResolvedObject) -> dict:
            return {
                "name": o.name,
                "point_count": int(o.indices.size),
                "indices": [int(i) for i in o.indices],
                "centroid": [float(x) for x in o.centroid],
                "aabb": {
                    "min": [float(x) for x in o.aabb_min],
                    "max": [float(x) for x in o.aabb_max],
                },
            }

        return {
            "relation": self.expr.relation,
            "operands": [self.expr.operand_a, self.expr.operand_b],
            "value": self.value,
            "objects": [obj(self.a), obj(self.b)],
        }


def evaluate(
    surfels: SurfelMap,
    expr: SpatialExpr | str,
    source: VectorSource,
    *,
    view: ViewConfig | None = None,
    policy: ThresholdPolicy | None = None,
    eps: float | None = None,
    min_points: int | None = None,
) -> RelationResult:
    """Resolve both operands and evaluate the relation between them."""
    if isinstance(expr, str):
        expr = parse_3dsc(expr)
    view = view or ViewConfig()

    def resolve(name: str) -> ResolvedObject:
        return resolve_operand(
            surfels, name, source, policy=policy, eps=eps, min_points=min_points
        )

    a = resolve(expr.operand_a)
    b = resolve(expr.operand_b)

    if expr.relation == "howFar":
        value: bool | float = eval_howfar(a, b)
    elif expr.relation == "isToTheRight":
        value = eval_right_of(a, b, view)
    elif expr.relation == "isToTheLeft":
        value = eval_left_of(a, b, view)
    elif expr.relation == "onTopOf":
        value = eval_on_top_of(a, b, view)
    elif expr.relation == "under":
        value = eval_under(a, b, view)
    elif expr.relation == "isContained":
        value = eval_contained(a, b, view)
    elif expr.relation == "isBigger":
        value = eval_bigger(a, b)
    else:  # canFitInside; parse_3dsc admits nothing else
        value = eval_fits_inside(a, b)
    return RelationResult(expr=expr, value=value, a=a, b=b)
