"""Integer-exact 2D predicates on grid points.

Points are plain ``(x, y)`` tuples of ints; segments are pairs of points.
Every predicate has a scalar form (used by tests and small callers) and a
vectorised numpy form over int64 arrays (used by the action enumerator, which
is where the bulk of the calls happen).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

Point = tuple[int, int]
Segment = tuple[Point, Point]


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle ``[x0, x1] x [y0, y1]`` with positive area."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError(f"rectangle must have positive area: {self}")

    def contains_strictly(self, p: Point) -> bool:
        return self.x0 < p[0] < self.x1 and self.y0 < p[1] < self.y1


@dataclass
class HotPathCounter:
    """Call/time accumulator for the node-coverage predicate.

    Vectorised calls add the number of (segment, node) pairs they evaluate,
    so ``calls`` counts predicate evaluations rather than Python calls.
    """

    calls: int = 0
    seconds: float = 0.0

    def reset(self) -> None:
        self.calls = 0
        self.seconds = 0.0

    def snapshot(self) -> tuple[int, float]:
        return self.calls, self.seconds


COVERS_COUNTER = HotPathCounter()


def orientation(a: Point, b: Point, c: Point) -> int:
    """Twice the signed area of triangle abc (exact)."""
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _sign(v: int) -> int:
    return (v > 0) - (v < 0)


def segments_properly_intersect(s1: Segment, s2: Segment) -> bool:
    """True iff the open interiors of ``s1`` and ``s2`` share a point.

    Touching at an endpoint (hinge contact, T-junction) is not an
    intersection; collinear overlap of positive length is.
    """
    (p1, p2), (q1, q2) = s1, s2
    o1 = _sign(orientation(p1, p2, q1))
    o2 = _sign(orientation(p1, p2, q2))
    o3 = _sign(orientation(q1, q2, p1))
    o4 = _sign(orientation(q1, q2, p2))
    if o1 == o2 == o3 == o4 == 0:
        ox = min(max(p1[0], p2[0]), max(q1[0], q2[0])) - max(min(p1[0], p2[0]), min(q1[0], q2[0]))
        oy = min(max(p1[1], p2[1]), max(q1[1], q2[1])) - max(min(p1[1], p2[1]), min(q1[1], q2[1]))
        return ox > 0 or oy > 0
    return o1 * o2 < 0 and o3 * o4 < 0


def segment_covers_node(s: Segment, p: Point) -> bool:
    """True iff ``p`` lies on the closed segment ``s``.

    Callers pass points that are not endpoints of ``s``.
    """
    t0 = time.perf_counter()
    a, b = s
    hit = (
        orientation(a, b, p) == 0
        and min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
        and min(a[1], b[1]) <= p[1] <= max(a[1], b[1])
    )
    COVERS_COUNTER.calls += 1
    COVERS_COUNTER.seconds += time.perf_counter() - t0
    return hit


def segment_touches_region(s: Segment, r: Rect) -> bool:
    """True iff some point of ``s`` lies strictly inside ``r``.

    Parametrise the segment as ``a + t (b - a)`` with ``t`` in [0, 1]; each
    open slab of the rectangle restricts ``t`` to an open interval, and the
    segment enters the interior iff the intersection of those with [0, 1] is
    non-empty. Fractions keep boundary-grazing cases exact.
    """
    (ax, ay), (bx, by) = s
    if max(ax, bx) <= r.x0 or min(ax, bx) >= r.x1:
        return False
    if max(ay, by) <= r.y0 or min(ay, by) >= r.y1:
        return False
    lo, hi = Fraction(0), Fraction(1)
    lo_open = hi_open = False
    for p0, d, w0, w1 in ((ax, bx - ax, r.x0, r.x1), (ay, by - ay, r.y0, r.y1)):
        if d == 0:
            if not (w0 < p0 < w1):
                return False
            continue
        t0 = Fraction(w0 - p0, d)
        t1 = Fraction(w1 - p0, d)
        if t0 > t1:
            t0, t1 = t1, t0
        if t0 >= lo:
            lo, lo_open = t0, True
        if t1 <= hi:
            hi, hi_open = t1, True
    if lo_open or hi_open:
        return lo < hi
    return lo <= hi


def segment_length(s: Segment) -> float:
    (ax, ay), (bx, by) = s
    return math.hypot(bx - ax, by - ay)


# ---------------------------------------------------------------------------
# vectorised forms; all inputs are int64 arrays of shape (..., 2)


def orientation_v(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (
        c[..., 0] - a[..., 0]
    )


def properly_intersect_v(p1, p2, q1, q2) -> np.ndarray:
    """Broadcasting version of :func:`segments_properly_intersect`."""
    o1 = np.sign(orientation_v(p1, p2, q1))
    o2 = np.sign(orientation_v(p1, p2, q2))
    o3 = np.sign(orientation_v(q1, q2, p1))
    o4 = np.sign(orientation_v(q1, q2, p2))
    crossing = (o1 * o2 < 0) & (o3 * o4 < 0)
    collinear = (o1 == 0) & (o2 == 0) & (o3 == 0) & (o4 == 0)
    if not collinear.any():
        return crossing
    pmin, pmax = np.minimum(p1, p2), np.maximum(p1, p2)
    qmin, qmax = np.minimum(q1, q2), np.maximum(q1, q2)
    ov = np.minimum(pmax, qmax) - np.maximum(pmin, qmin)
    overlap = (ov[..., 0] > 0) | (ov[..., 1] > 0)
    return crossing | (collinear & overlap)


def covers_v(a: np.ndarray, b: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Broadcasting version of :func:`segment_covers_node`.

    Points coinciding with an endpoint are reported as not covered, so
    callers may pass whole node sets without masking endpoints first.
    """
    t0 = time.perf_counter()
    on_line = orientation_v(a, b, p) == 0
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    inside = (p >= lo).all(axis=-1) & (p <= hi).all(axis=-1)
    endpoint = (p == a).all(axis=-1) | (p == b).all(axis=-1)
    hit = on_line & inside & ~endpoint
    COVERS_COUNTER.calls += int(hit.size)
    COVERS_COUNTER.seconds += time.perf_counter() - t0
    return hit


def _bbox_overlap(p1, p2, q1, q2) -> np.ndarray:
    """(S, E) mask of closed bounding-box overlap between segment sets."""
    plo, phi = np.minimum(p1, p2), np.maximum(p1, p2)
    qlo, qhi = np.minimum(q1, q2), np.maximum(q1, q2)
    return (
        (plo[:, None, 0] <= qhi[None, :, 0])
        & (qlo[None, :, 0] <= phi[:, None, 0])
        & (plo[:, None, 1] <= qhi[None, :, 1])
        & (qlo[None, :, 1] <= phi[:, None, 1])
    )


def intersect_matrix(p1: np.ndarray, p2: np.ndarray, q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """(S, E) matrix of proper intersections between S segments and E segments."""
    out = np.zeros((len(p1), len(q1)), dtype=bool)
    if out.size == 0:
        return out
    si, ei = np.nonzero(_bbox_overlap(p1, p2, q1, q2))
    if len(si):
        out[si, ei] = properly_intersect_v(p1[si], p2[si], q1[ei], q2[ei])
    return out


def covers_matrix(a: np.ndarray, b: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """(S, Q) matrix: segment ``s`` covers point ``q`` (endpoints excluded)."""
    out = np.zeros((len(a), len(pts)), dtype=bool)
    if out.size == 0:
        return out
    t0 = time.perf_counter()
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    box = (
        (pts[None, :, 0] >= lo[:, None, 0])
        & (pts[None, :, 0] <= hi[:, None, 0])
        & (pts[None, :, 1] >= lo[:, None, 1])
        & (pts[None, :, 1] <= hi[:, None, 1])
    )
    si, qi = np.nonzero(box)
    if len(si):
        sa, sb, q = a[si], b[si], pts[qi]
        hit = (orientation_v(sa, sb, q) == 0) & ~(q == sa).all(axis=1) & ~(q == sb).all(axis=1)
        out[si, qi] = hit
    COVERS_COUNTER.calls += int(out.size)
    COVERS_COUNTER.seconds += time.perf_counter() - t0
    return out
