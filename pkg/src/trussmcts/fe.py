"""Linear static analysis of pin-jointed planar trusses (direct stiffness method)."""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import cho_solve

from .model import Configuration, DesignDomain, ElementProperties, Load, Point

# factorisation pivot below PIVOT_TOL * max(diag K) means a mechanism
PIVOT_TOL = 1e-12


class UnstableStructure(ArithmeticError):
    pass


class InvalidInput(ValueError):
    pass


LoadVector = dict[Point, tuple[float, float]]
DisplacementField = dict[Point, tuple[float, float]]


def loads_from(items) -> LoadVector:
    """Merge ``Load`` records (or ``(point, fx, fy)`` triples) into a load vector."""
    out: LoadVector = {}
    for it in items:
        p, fx, fy = (it.point, it.fx, it.fy) if isinstance(it, Load) else it
        ox, oy = out.get(p, (0.0, 0.0))
        out[p] = (ox + fx, oy + fy)
    return out


def _element_arrays(c: Configuration, index: dict[Point, int]):
    els = c.sorted_elements
    ia = np.fromiter((index[a] for a, _ in els), dtype=np.int64, count=len(els))
    ib = np.fromiter((index[b] for _, b in els), dtype=np.int64, count=len(els))
    return ia, ib


def assemble_stiffness(c: Configuration, p: ElementProperties, spacing: float = 1.0) -> tuple[np.ndarray, list[Point]]:
    """Global stiffness over all active-node DOFs, ordered as ``c.sorted_nodes``.

    DOF ``2*i`` is ux and ``2*i+1`` is uy of node ``i``; node positions are
    grid indices times ``spacing``.
    """
    nodes = list(c.sorted_nodes)
    index = {q: i for i, q in enumerate(nodes)}
    ndof = 2 * len(nodes)
    if not c.elements:
        return np.zeros((ndof, ndof)), nodes
    xy = np.asarray(nodes, dtype=float) * spacing
    ia, ib = _element_arrays(c, index)
    d = xy[ib] - xy[ia]
    length = np.hypot(d[:, 0], d[:, 1])
    cs = d / length[:, None]
    k = p.young_modulus * p.area / length
    # 2x2 block (EA/L) [c^2, cs; cs, s^2]; element matrix is [[B, -B], [-B, B]]
    blk = k[:, None, None] * (cs[:, :, None] * cs[:, None, :])  # outer product first keeps blk symmetric
    dofs = np.stack([2 * ia, 2 * ia + 1, 2 * ib, 2 * ib + 1], axis=1)
    ke = np.empty((len(k), 4, 4))
    ke[:, :2, :2] = blk
    ke[:, 2:, 2:] = blk
    ke[:, :2, 2:] = -blk
    ke[:, 2:, :2] = -blk
    rows = np.repeat(dofs, 4, axis=1)
    cols = np.tile(dofs, (1, 4))
    flat = np.bincount((rows * ndof + cols).ravel(), weights=ke.reshape(len(k), 16).ravel(), minlength=ndof * ndof)
    return flat.reshape(ndof, ndof), nodes


def _fixed_mask(nodes: list[Point], d: DesignDomain) -> np.ndarray:
    fixed = np.zeros(2 * len(nodes), dtype=bool)
    rmap = d.restraint_map
    for i, q in enumerate(nodes):
        fx, fy = rmap.get(q, (False, False))
        fixed[2 * i] = fx
        fixed[2 * i + 1] = fy
    return fixed


def _load_array(nodes: list[Point], loads: LoadVector) -> np.ndarray:
    index = {q: i for i, q in enumerate(nodes)}
    f = np.zeros(2 * len(nodes))
    for q, (fx, fy) in loads.items():
        if q not in index:
            raise InvalidInput(f"load applied at inactive node {q}")
        if not (math.isfinite(fx) and math.isfinite(fy)):
            raise InvalidInput(f"non-finite load at {q}")
        i = index[q]
        f[2 * i] += fx
        f[2 * i + 1] += fy
    return f


def solve_dofs(c: Configuration, p: ElementProperties, loads: LoadVector, d: DesignDomain):
    """Solve ``K U = F`` with homogeneous Dirichlet conditions.

    Returns ``(u, K, f, nodes, fixed)`` with ``u`` over all DOFs (zeros on
    the fixed ones). Raises :class:`UnstableStructure` for mechanisms.
    """
    K, nodes = assemble_stiffness(c, p, d.spacing)
    f = _load_array(nodes, loads)
    fixed = _fixed_mask(nodes, d)
    if not fixed.any():
        raise UnstableStructure("no restrained degrees of freedom")
    free = ~fixed
    u = np.zeros_like(f)
    if free.any():
        kff = K[np.ix_(free, free)]
        dmax = float(kff.diagonal().max()) if kff.size else 0.0
        if dmax <= 0.0:
            raise UnstableStructure("free DOF without stiffness")
        try:
            L = np.linalg.cholesky(kff)
        except np.linalg.LinAlgError:
            raise UnstableStructure("stiffness matrix is not positive definite") from None
        if float((L.diagonal() ** 2).min()) < PIVOT_TOL * dmax:
            raise UnstableStructure("stiffness matrix is numerically singular")
        u[free] = cho_solve((L, True), f[free], check_finite=False)
    return u, K, f, nodes, fixed


def solve_static(c: Configuration, p: ElementProperties, loads: LoadVector, d: DesignDomain) -> DisplacementField:
    u, _, _, nodes, _ = solve_dofs(c, p, loads, d)
    return {q: (float(u[2 * i]), float(u[2 * i + 1])) for i, q in enumerate(nodes)}


def reactions(c: Configuration, p: ElementProperties, loads: LoadVector, d: DesignDomain) -> DisplacementField:
    """Support reactions ``K U - F`` at restrained DOFs (zero elsewhere)."""
    u, K, f, nodes, fixed = solve_dofs(c, p, loads, d)
    r = np.where(fixed, K @ u - f, 0.0)
    return {q: (float(r[2 * i]), float(r[2 * i + 1])) for i, q in enumerate(nodes)}


def max_abs_displacement(u: DisplacementField) -> float:
    return max((max(abs(ux), abs(uy)) for ux, uy in u.values()), default=0.0)


def self_weight_loads(c: Configuration, p: ElementProperties, density: float, spacing: float = 1.0) -> LoadVector:
    """Lumped self-weight: half of each element's weight goes to each end node."""
    if density < 0:
        raise ValueError("density must be >= 0")
    out: LoadVector = {}
    if density == 0:
        return out
    for a, b in c.sorted_elements:
        w = 0.5 * density * p.area * spacing * math.hypot(b[0] - a[0], b[1] - a[1])
        for q in (a, b):
            fx, fy = out.get(q, (0.0, 0.0))
            out[q] = (fx, fy - w)
    return out


def add_loads(*vectors: LoadVector) -> LoadVector:
    out: LoadVector = {}
    for v in vectors:
        for q, (fx, fy) in v.items():
            ox, oy = out.get(q, (0.0, 0.0))
            out[q] = (ox + fx, oy + fy)
    return out
