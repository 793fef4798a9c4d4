"""D/T growth grammar: enumerate and apply the legal actions of a configuration.

Both operators activate one inactive node ``N`` next to an existing element
``A-B``:

* ``D`` keeps ``A-B`` and adds ``N-A`` and ``N-B``;
* ``T`` removes ``A-B`` and adds ``N-A``, ``N-B`` and ``N-C`` for a third
  active node ``C``.

Either way the node count grows by one and the element count by two, so the
counting balance ``m + r - 2n`` is preserved (it only grows when ``N`` itself
carries a support).
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .geometry import Point, covers_matrix, intersect_matrix
from .model import (
    Configuration,
    DesignDomain,
    Element,
    ElementProperties,
    element_order,
    make_element,
    point_order,
    restraint_count,
    violations,
)

D, T = "D", "T"
_REL_TOL = 1e-12


class IllegalAction(ValueError):
    pass


class Action(NamedTuple):
    node: Point
    element: Element
    op: str
    third: Point | None = None

    def sort_key(self):
        third = point_order(self.third) if self.third is not None else (-1, -1)
        return point_order(self.node), element_order(self.element), self.op, third

    def __str__(self):
        (ax, ay), (bx, by) = self.element
        s = f"{self.op} ({self.node[0]},{self.node[1]}) on ({ax},{ay})-({bx},{by})"
        if self.third is not None:
            s += f" +({self.third[0]},{self.third[1]})"
        return s


def new_elements(a: Action) -> list[Element]:
    out = [make_element(a.node, a.element[0]), make_element(a.node, a.element[1])]
    if a.op == T:
        out.append(make_element(a.node, a.third))
    return out


def apply_action(c: Configuration, a: Action) -> Configuration:
    """Structural application of ``a``; geometry is not re-checked here."""
    if a.op not in (D, T):
        raise IllegalAction(f"unknown operator {a.op!r}")
    if a.node in c.nodes:
        raise IllegalAction(f"node {a.node} is already active")
    e = make_element(*a.element)
    if e not in c.elements:
        raise IllegalAction(f"element {a.element} is not in the configuration")
    if a.op == D:
        if a.third is not None:
            raise IllegalAction("D actions take no third node")
        els = c.elements | {make_element(a.node, e[0]), make_element(a.node, e[1])}
    else:
        if a.third is None or a.third not in c.nodes or a.third in e:
            raise IllegalAction(f"T action needs an active third node distinct from {e}")
        els = (c.elements - {e}) | {
            make_element(a.node, e[0]),
            make_element(a.node, e[1]),
            make_element(a.node, a.third),
        }
    return Configuration(c.nodes | {a.node}, frozenset(els))


def _counting_ok(c: Configuration, node: Point, d: DesignDomain) -> bool:
    m, n = len(c.elements) + 2, len(c.nodes) + 1
    return m + restraint_count(c, d) + d.restraint_count(node) >= 2 * n


def _volume_limit(d: DesignDomain, p: ElementProperties) -> float:
    if d.v_max is None:
        return math.inf
    return d.v_max / (p.area * d.spacing) * (1 + _REL_TOL)


def _index_length_limit(d: DesignDomain) -> float:
    """``max_element_length`` expressed in grid-index units."""
    return d.max_element_length / d.spacing


def is_legal(c: Configuration, a: Action, d: DesignDomain, p: ElementProperties) -> bool:
    """Brute-force legality: apply ``a`` and check the whole successor directly.

    This is the reference the vectorised enumerator is tested against; it
    re-validates every pair of elements so it is slow by design.
    """
    if not d.on_grid(a.node) or a.node in c.nodes:
        return False
    try:
        c2 = apply_action(c, a)
    except IllegalAction:
        return False
    added = new_elements(a)
    if len(c2.elements) != len(c.elements) + 2 or len(set(added)) != len(added):
        return False
    if d.max_element_length is not None:
        lim = _index_length_limit(d) * (1 + _REL_TOL)
        if any(math.dist(*e) > lim for e in added):
            return False
    if c2.total_length > _volume_limit(d, p):
        return False
    if not _counting_ok(c, a.node, d):
        return False
    return not violations(c2, d)


def brute_force_actions(c: Configuration, d: DesignDomain, p: ElementProperties) -> list[Action]:
    """Filter every (node, element, op, third) tuple through :func:`is_legal`."""
    out = []
    for q in map(tuple, d.grid_points.tolist()):
        if q in c.nodes:
            continue
        for e in c.sorted_elements:
            cands = [Action(q, e, D)] + [Action(q, e, T, t) for t in c.sorted_nodes if t not in e]
            out.extend(a for a in cands if is_legal(c, a, d, p))
    out.sort(key=Action.sort_key)
    return out


def enumerate_actions(c: Configuration, d: DesignDomain, p: ElementProperties) -> list[Action]:
    """All legal actions of ``c``, sorted deterministically.

    Works on a table of candidate segments ``N-C`` (``N`` inactive, ``C``
    active). For each segment it records whether it is admissible on its own
    (length, passive regions, covering an active node) and which existing
    elements it crosses. A T action may cross exactly the element it removes,
    so storing the first blocker and a capped blocker count is enough.
    """
    if not c.elements:
        return []
    nodes = c.sorted_nodes
    els = c.sorted_elements
    n, m = len(nodes), len(els)
    act = np.asarray(nodes, dtype=np.int64)
    index = {q: i for i, q in enumerate(nodes)}
    ja = np.fromiter((index[a] for a, _ in els), dtype=np.int64, count=m)
    jb = np.fromiter((index[b] for _, b in els), dtype=np.int64, count=m)
    ea, eb = act[ja], act[jb]

    grid = d.grid_points
    free = np.ones(len(grid), dtype=bool)
    free[act[:, 1] * d.width + act[:, 0]] = False
    for r in d.passive_regions:
        gx, gy = grid[:, 0], grid[:, 1]
        free &= ~((gx > r.x0) & (gx < r.x1) & (gy > r.y0) & (gy < r.y1))
    cand = grid[free]
    if len(cand) == 0:
        return []

    d2 = ((cand[:, None, :] - act[None, :, :]) ** 2).sum(axis=2)
    if d.max_element_length is not None:
        reach = d2 <= _index_length_limit(d) ** 2 * (1 + _REL_TOL)
        keep = reach.sum(axis=1) >= 2
        cand, d2, reach = cand[keep], d2[keep], reach[keep]
        if len(cand) == 0:
            return []
    else:
        reach = np.ones(d2.shape, dtype=bool)
    K = len(cand)

    kk, jj = np.nonzero(reach)
    pidx = np.full((K, n), -1, dtype=np.int64)
    pidx[kk, jj] = np.arange(len(kk))
    sn, sc = cand[kk], act[jj]
    slen = np.sqrt(d2[kk, jj].astype(float))

    base = ~covers_matrix(sn, sc, act).any(axis=1)
    if d.passive_regions:
        lo, hi = np.minimum(sn, sc), np.maximum(sn, sc)
        near = np.zeros(len(sn), dtype=bool)
        for r in d.passive_regions:
            near |= (hi[:, 0] > r.x0) & (lo[:, 0] < r.x1) & (hi[:, 1] > r.y0) & (lo[:, 1] < r.y1)
        for i in np.nonzero(near & base)[0]:
            if d.segment_in_passive((int(sn[i, 0]), int(sn[i, 1])), (int(sc[i, 0]), int(sc[i, 1]))):
                base[i] = False

    hits = intersect_matrix(sn, sc, ea, eb)
    bcount = np.minimum(hits.sum(axis=1), 2)
    bfirst = hits.argmax(axis=1)
    ncov = covers_matrix(ea, eb, cand)  # (m, K): element covers candidate node
    ncount = np.minimum(ncov.sum(axis=0), 2)
    nfirst = ncov.argmax(axis=0)

    clean = base & (bcount == 0)
    length_now = c.total_length
    vlim = _volume_limit(d, p)
    r_now = restraint_count(c, d)
    rmap = d.restraint_map
    # counting balance depends only on the restraints of the new node
    extra = np.fromiter((sum(rmap.get((int(x), int(y)), (False, False))) for x, y in cand), dtype=np.int64, count=K)
    balanced = (m + 2) + r_now + extra >= 2 * (n + 1)

    # (candidate, element) pairs where the candidate reaches both endpoints
    kk, ii = np.nonzero(reach[:, ja] & reach[:, jb] & balanced[:, None])
    pa, pb = pidx[kk, ja[ii]], pidx[kk, jb[ii]]
    pair_len = slen[pa] + slen[pb]

    ok_d = clean[pa] & clean[pb] & (ncount[kk] == 0) & (length_now + pair_len <= vlim)

    # T: segments may cross only the removed element, and the new node may
    # lie only on the removed element
    def spare(seg, elem):
        return base[seg] & ((bcount[seg] == 0) | ((bcount[seg] == 1) & (bfirst[seg] == elem)))

    ok_t = spare(pa, ii) & spare(pb, ii) & ((ncount[kk] == 0) | ((ncount[kk] == 1) & (nfirst[kk] == ii)))
    rt = np.nonzero(ok_t)[0]
    sub = pidx[kk[rt]]  # (R, n) segment index from each candidate to every active node
    valid = sub >= 0
    rows = np.arange(len(rt))
    valid[rows, ja[ii[rt]]] = False
    valid[rows, jb[ii[rt]]] = False
    subc = np.where(valid, sub, 0)
    valid &= spare(subc, ii[rt][:, None])
    elem_len = np.sqrt(((ea - eb) ** 2).sum(axis=1).astype(float))
    total = length_now - elem_len[ii[rt]][:, None] + pair_len[rt][:, None] + slen[subc]
    valid &= total <= vlim
    tr, tj = np.nonzero(valid)

    # assemble (node, element, op, third) rows and sort them lexicographically
    rd = np.nonzero(ok_d)[0]
    node_k = np.concatenate([kk[rd], kk[rt[tr]]])
    elem_i = np.concatenate([ii[rd], ii[rt[tr]]])
    op = np.concatenate([np.zeros(len(rd), dtype=np.int64), np.ones(len(tr), dtype=np.int64)])
    third = np.concatenate([np.full(len(rd), -1, dtype=np.int64), tj])
    if len(op) == 0:
        return []
    nxy = cand[node_k]
    # els and nodes are already sorted, so their indices are ranks
    order = np.lexsort((third, op, elem_i, nxy[:, 0], nxy[:, 1]))
    out = []
    for r in order.tolist():
        q = (int(nxy[r, 0]), int(nxy[r, 1]))
        if op[r]:
            out.append(Action(q, els[elem_i[r]], T, nodes[third[r]]))
        else:
            out.append(Action(q, els[elem_i[r]], D))
    return out
