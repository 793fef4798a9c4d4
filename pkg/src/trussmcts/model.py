"""Design domains, truss configurations and their bookkeeping."""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .geometry import (
    Point,
    Rect,
    segment_covers_node,
    segment_length,
    segment_touches_region,
    segments_properly_intersect,
)

Element = tuple[Point, Point]


class InvalidConfiguration(ValueError):
    pass


def point_order(p: Point) -> tuple[int, int]:
    """Sort key used everywhere a deterministic node order is needed (row-major)."""
    return p[1], p[0]


def make_element(a: Point, b: Point) -> Element:
    a, b = tuple(a), tuple(b)
    if a == b:
        raise InvalidConfiguration(f"zero-length element at {a}")
    return (a, b) if point_order(a) <= point_order(b) else (b, a)


def element_order(e: Element) -> tuple[int, int, int, int]:
    return point_order(e[0]) + point_order(e[1])


@dataclass(frozen=True)
class Support:
    point: Point
    fix_x: bool
    fix_y: bool

    @property
    def restraints(self) -> int:
        return int(self.fix_x) + int(self.fix_y)


@dataclass(frozen=True)
class Load:
    point: Point
    fx: float
    fy: float


@dataclass(frozen=True)
class ElementProperties:
    young_modulus: float = 1.0e3
    area: float = 1.0

    def __post_init__(self):
        if not (self.young_modulus > 0 and self.area > 0):
            raise ValueError("young_modulus and area must be positive")


@dataclass(frozen=True)
class DesignDomain:
    """Grid of candidate node positions plus boundary conditions and limits.

    ``width`` and ``height`` count grid nodes, so valid coordinates are
    ``0 <= x < width`` and ``0 <= y < height``. Geometry works on these
    integer indices; ``spacing`` is the physical distance between adjacent
    nodes and scales every length, volume and stiffness computation.
    ``v_max`` and ``max_element_length`` are physical quantities.
    """

    width: int
    height: int
    supports: tuple[Support, ...] = ()
    external_loads: tuple[Load, ...] = ()
    passive_regions: tuple[Rect, ...] = ()
    v_max: float | None = None
    horizon_T: int | None = None
    target_node: Point | None = None
    max_element_length: float | None = None
    self_weight_density: float = 0.0
    spacing: float = 1.0

    def __post_init__(self):
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        if self.width < 2 or self.height < 2:
            raise ValueError("domain must be at least 2x2")
        for s in self.supports:
            self._check_on_grid(s.point, "support")
        for ld in self.external_loads:
            self._check_on_grid(ld.point, "load")
        if self.v_max is not None and self.v_max <= 0:
            raise ValueError("v_max must be positive")
        if (self.horizon_T is None) == (self.target_node is None):
            raise ValueError("exactly one of horizon_T and target_node must be set")
        if self.horizon_T is not None and self.horizon_T < 0:
            raise ValueError("horizon_T must be non-negative")
        if self.target_node is not None:
            self._check_on_grid(self.target_node, "target_node")
        if self.self_weight_density < 0:
            raise ValueError("self_weight_density must be >= 0")

    def _check_on_grid(self, p: Point, what: str) -> None:
        if not self.on_grid(p):
            raise ValueError(f"{what} {p} lies outside the {self.width}x{self.height} grid")

    @property
    def extent(self) -> tuple[float, float]:
        """Physical size of the domain."""
        return (self.width - 1) * self.spacing, (self.height - 1) * self.spacing

    def on_grid(self, p: Point) -> bool:
        return 0 <= p[0] < self.width and 0 <= p[1] < self.height

    @property
    def progressive(self) -> bool:
        return self.target_node is not None

    @cached_property
    def restraint_map(self) -> dict[Point, tuple[bool, bool]]:
        out: dict[Point, tuple[bool, bool]] = {}
        for s in self.supports:
            fx, fy = out.get(s.point, (False, False))
            out[s.point] = (fx or s.fix_x, fy or s.fix_y)
        return out

    def restraint_count(self, p: Point) -> int:
        fx, fy = self.restraint_map.get(p, (False, False))
        return int(fx) + int(fy)

    @cached_property
    def grid_points(self) -> np.ndarray:
        """All grid nodes as an int64 (W*H, 2) array, row-major (index = y*W + x)."""
        ys, xs = np.mgrid[0 : self.height, 0 : self.width]
        return np.stack([xs.ravel(), ys.ravel()], axis=1).astype(np.int64)

    def grid_index(self, p: Point) -> int:
        return p[1] * self.width + p[0]

    @cached_property
    def passive_cache(self) -> dict[tuple[Point, Point], bool]:
        # segment -> touches any passive region; filled lazily by the enumerator
        return {}

    def segment_in_passive(self, a: Point, b: Point) -> bool:
        key = (a, b) if point_order(a) <= point_order(b) else (b, a)
        hit = self.passive_cache.get(key)
        if hit is None:
            hit = any(segment_touches_region(key, r) for r in self.passive_regions)
            self.passive_cache[key] = hit
        return hit


@dataclass(frozen=True)
class Configuration:
    """Active nodes plus the elements joining them; an immutable value."""

    nodes: frozenset[Point]
    elements: frozenset[Element]

    @classmethod
    def build(cls, nodes=(), elements=()) -> "Configuration":
        els = frozenset(make_element(*e) for e in elements)
        ns = {tuple(p) for p in nodes}
        for a, b in els:
            ns.add(a)
            ns.add(b)
        return cls(frozenset(ns), els)

    @cached_property
    def sorted_nodes(self) -> tuple[Point, ...]:
        return tuple(sorted(self.nodes, key=point_order))

    @cached_property
    def sorted_elements(self) -> tuple[Element, ...]:
        return tuple(sorted(self.elements, key=element_order))

    @cached_property
    def key(self) -> bytes:
        return config_key(self)

    @cached_property
    def total_length(self) -> float:
        return math.fsum(segment_length(e) for e in self.sorted_elements)

    def __hash__(self):
        return hash(self.key)

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return self.nodes == other.nodes and self.elements == other.elements

    def __len__(self):
        return len(self.elements)


_EMPTY_DIGEST = hashlib.blake2b(b"", digest_size=16).digest()
#: key of a configuration with no elements
EMPTY_CONFIG_KEY = _EMPTY_DIGEST


def config_key(c: Configuration) -> bytes:
    """128-bit digest of the sorted element set.

    Two configurations with the same elements share a key irrespective of
    insertion order; the empty configuration maps to :data:`EMPTY_CONFIG_KEY`.
    """
    h = hashlib.blake2b(digest_size=16)
    for (ax, ay), (bx, by) in sorted(c.elements, key=element_order):
        h.update(f"{ax},{ay},{bx},{by};".encode())
    return h.digest()


def volume(c: Configuration, p: ElementProperties, spacing: float = 1.0) -> float:
    return p.area * spacing * c.total_length


def restraint_count(c: Configuration, d: DesignDomain) -> int:
    """Restrained DOFs among the active nodes only."""
    return sum(d.restraint_count(p) for p in c.nodes)


def is_statically_determinate(c: Configuration, d: DesignDomain) -> bool:
    return len(c.elements) + restraint_count(c, d) == 2 * len(c.nodes)


def violations(c: Configuration, d: DesignDomain | None = None) -> list[str]:
    """Brute-force check of every configuration invariant.

    Quadratic in the element count; meant for tests and validation of seeds,
    not for the search loop.
    """
    out = []
    els = c.sorted_elements
    for a, b in els:
        if a == b:
            out.append(f"zero-length element {a}")
        if a not in c.nodes or b not in c.nodes:
            out.append(f"element {(a, b)} has an inactive endpoint")
    for e in els:
        for p in c.nodes:
            if p != e[0] and p != e[1] and segment_covers_node(e, p):
                out.append(f"element {e} covers node {p}")
    for e1, e2 in itertools.combinations(els, 2):
        if segments_properly_intersect(e1, e2):
            out.append(f"elements {e1} and {e2} intersect")
    if d is not None:
        for p in c.nodes:
            if not d.on_grid(p):
                out.append(f"node {p} off grid")
        for e in els:
            if any(segment_touches_region(e, r) for r in d.passive_regions):
                out.append(f"element {e} enters a passive region")
    return out


def validate(c: Configuration, d: DesignDomain | None = None) -> None:
    bad = violations(c, d)
    if bad:
        raise InvalidConfiguration("; ".join(bad))


# ---------------------------------------------------------------------------
# serialisation


def _point(v, path: str) -> Point:
    if not (isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(i, int) for i in v)):
        raise SchemaError(path, f"expected [x, y] integer pair, got {v!r}")
    return (v[0], v[1])


class SchemaError(ValueError):
    """Malformed case/domain document; ``path`` names the offending field."""

    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


def _get(doc: dict, key: str, path: str, kind, default=...):
    if key not in doc:
        if default is ...:
            raise SchemaError(f"{path}.{key}", "missing required field")
        return default
    v = doc[key]
    if kind is float and isinstance(v, int) and not isinstance(v, bool):
        v = float(v)
    if v is not None and not isinstance(v, kind):
        raise SchemaError(f"{path}.{key}", f"expected {getattr(kind, '__name__', kind)}, got {v!r}")
    return v


def domain_from_dict(doc: dict, path: str = "domain") -> DesignDomain:
    if not isinstance(doc, dict):
        raise SchemaError(path, "expected an object")
    supports = []
    for i, s in enumerate(_get(doc, "supports", path, list, [])):
        sp = f"{path}.supports[{i}]"
        if not isinstance(s, dict):
            raise SchemaError(sp, "expected an object")
        supports.append(
            Support(_point(s.get("point"), f"{sp}.point"), _get(s, "fix_x", sp, bool), _get(s, "fix_y", sp, bool))
        )
    loads = []
    for i, ld in enumerate(_get(doc, "loads", path, list, [])):
        lp = f"{path}.loads[{i}]"
        if not isinstance(ld, dict):
            raise SchemaError(lp, "expected an object")
        loads.append(Load(_point(ld.get("point"), f"{lp}.point"), _get(ld, "fx", lp, float, 0.0), _get(ld, "fy", lp, float, 0.0)))
    regions = []
    for i, r in enumerate(_get(doc, "passive_regions", path, list, [])):
        rp = f"{path}.passive_regions[{i}]"
        if not (isinstance(r, list) and len(r) == 4 and all(isinstance(v, int) for v in r)):
            raise SchemaError(rp, "expected [x0, y0, x1, y1] integers")
        try:
            regions.append(Rect(*r))
        except ValueError as exc:
            raise SchemaError(rp, str(exc)) from None
    target = doc.get("target_node")
    try:
        return DesignDomain(
            width=_get(doc, "width", path, int),
            height=_get(doc, "height", path, int),
            supports=tuple(supports),
            external_loads=tuple(loads),
            passive_regions=tuple(regions),
            v_max=_get(doc, "v_max", path, float, None),
            horizon_T=_get(doc, "horizon_T", path, int, None),
            target_node=None if target is None else _point(target, f"{path}.target_node"),
            max_element_length=_get(doc, "max_element_length", path, float, None),
            self_weight_density=_get(doc, "self_weight_density", path, float, 0.0),
            spacing=_get(doc, "spacing", path, float, 1.0),
        )
    except ValueError as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(path, str(exc)) from None


def domain_to_dict(d: DesignDomain) -> dict:
    out = {
        "width": d.width,
        "height": d.height,
        "supports": [{"point": list(s.point), "fix_x": s.fix_x, "fix_y": s.fix_y} for s in d.supports],
        "loads": [{"point": list(ld.point), "fx": ld.fx, "fy": ld.fy} for ld in d.external_loads],
        "passive_regions": [[r.x0, r.y0, r.x1, r.y1] for r in d.passive_regions],
        "self_weight_density": d.self_weight_density,
        "spacing": d.spacing,
    }
    for name in ("v_max", "horizon_T", "max_element_length"):
        if getattr(d, name) is not None:
            out[name] = getattr(d, name)
    if d.target_node is not None:
        out["target_node"] = list(d.target_node)
    return out


def config_from_dict(doc: dict, path: str = "seed") -> Configuration:
    if not isinstance(doc, dict):
        raise SchemaError(path, "expected an object")
    nodes = [_point(p, f"{path}.nodes[{i}]") for i, p in enumerate(_get(doc, "nodes", path, list, []))]
    elements = []
    for i, e in enumerate(_get(doc, "elements", path, list)):
        ep = f"{path}.elements[{i}]"
        if not (isinstance(e, list) and len(e) == 2):
            raise SchemaError(ep, "expected [[x, y], [x, y]]")
        a, b = _point(e[0], f"{ep}[0]"), _point(e[1], f"{ep}[1]")
        if a == b:
            raise SchemaError(ep, "zero-length element")
        elements.append((a, b))
    return Configuration.build(nodes, elements)


def config_to_dict(c: Configuration) -> dict:
    return {
        "nodes": [list(p) for p in c.sorted_nodes],
        "elements": [[list(a), list(b)] for a, b in c.sorted_elements],
    }
