"""Acceptance checks; each test prints one PASS/FAIL line for its criterion."""

import math
import random
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trussmcts import bench, cli
from trussmcts.env import TrussEnv, reward_of
from trussmcts.fe import UnstableStructure, reactions, solve_dofs, solve_static
from trussmcts.geometry import covers_matrix, intersect_matrix
from trussmcts.grammar import apply_action, brute_force_actions, enumerate_actions
from trussmcts.mcts import SearchConfig, TreeNode, backpropagate, train, uct_score, uct_score_extended
from trussmcts.model import Configuration, DesignDomain, ElementProperties, Load, Support, restraint_count, volume
from trussmcts.oracle import exhaustive_enumerate, percentile_score

P = ElementProperties(1000.0, 1.0)
TRIANGLE = Configuration.build(elements=[((0, 0), (1, 0)), ((1, 0), (0, 1)), ((0, 1), (0, 0))])
PIN_ROLLER = (Support((0, 0), True, True), Support((1, 0), False, True))


@pytest.fixture(scope="module")
def oracle_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("oracle")


def fmt(x):
    return f"{x:.6g}"


# ---------------------------------------------------------------- 1: solver


def test_criterion_1_fe_solver(criterion):
    d = DesignDomain(3, 3, supports=PIN_ROLLER, horizon_T=0)
    u = solve_static(Configuration.build(elements=[((0, 0), (1, 0))]), P, {(1, 0): (10.0, 0.0)}, d)
    bar_err = abs(u[(1, 0)][0] - 0.01)

    d2 = DesignDomain(3, 2, supports=(Support((0, 0), True, True), Support((2, 0), True, True)), horizon_T=0)
    c2 = Configuration.build(elements=[((0, 0), (1, 1)), ((2, 0), (1, 1))])
    ux, uy = solve_static(c2, P, {(1, 1): (0.0, -10.0)}, d2)[(1, 1)]
    hand = -10.0 * math.sqrt(2) / 1000.0  # F L / (2 E A sin^2 45) with L = sqrt 2
    two_err = max(abs(ux), abs(uy - hand) / abs(hand))

    # random grammar-grown configurations under random loads
    rng = random.Random(7)
    worst_res = worst_eq = 0.0
    checked = 0
    envs = [bench.load_case(name).env() for name in ("case4", "case5", "case6")]
    attempts = 0
    while checked < 100 and attempts < 1000:
        env = envs[attempts % 3]
        attempts += 1
        s = env.reset()
        for _ in range(rng.randint(0, 4)):
            if env.is_terminal(s):
                break
            s = env.step(s, rng.choice(env.legal_actions(s)))
        c = s.config
        loads = {q: (rng.uniform(-10, 10), rng.uniform(-10, 10)) for q in c.sorted_nodes if rng.random() < 0.5}
        loads = loads or {c.sorted_nodes[-1]: (1.0, -1.0)}
        try:
            uu, K, f, _, fixed = solve_dofs(c, P, loads, env.domain)
        except UnstableStructure:
            continue
        norm = np.linalg.norm(f)
        worst_res = max(worst_res, np.linalg.norm((K @ uu - f)[~fixed]) / norm)
        r = reactions(c, P, loads, env.domain)
        for axis in (0, 1):
            tot = sum(v[axis] for v in r.values()) + sum(v[axis] for v in loads.values())
            worst_eq = max(worst_eq, abs(tot) / norm)
        checked += 1

    ok = bar_err <= 1e-12 and two_err <= 1e-10 and checked == 100 and worst_res <= 1e-9 and worst_eq <= 1e-9
    criterion(1, ok, f"single bar err {bar_err:.1e}; two-bar uy {uy:.10f} vs hand {hand:.10f} (rel {two_err:.1e}); "
                     f"{checked} random systems, max residual {worst_res:.1e}, max equilibrium {worst_eq:.1e}")
    assert ok


# ---------------------------------------------------------------- 2: grammar


def fast_violations(c: Configuration, d: DesignDomain, p: ElementProperties, seed: Configuration) -> list[str]:
    """Vectorised invariant check, independent of the enumerator's incremental tests.

    The length cap applies to grown elements only; seed elements are given.
    """
    out = []
    els = np.array([a + b for a, b in c.sorted_elements], dtype=np.int64).reshape(-1, 4)
    pts = np.array(c.sorted_nodes, dtype=np.int64).reshape(-1, 2)
    if len(els):
        a, b = els[:, :2], els[:, 2:]
        cross = intersect_matrix(a, b, a, b)
        np.fill_diagonal(cross, False)  # an element overlaps itself
        if cross.any():
            out.append("crossing elements")
        if covers_matrix(a, b, pts).any():
            out.append("element covers node")
        if d.max_element_length is not None:
            grown = np.array([e not in seed.elements for e in c.sorted_elements])
            lens = np.hypot(*(b - a).T) * d.spacing
            if (lens[grown] > d.max_element_length + 1e-9).any():
                out.append("element too long")
    if any(d.segment_in_passive(e[0], e[1]) for e in c.sorted_elements):
        out.append("element in passive region")
    if not all(d.on_grid(q) for q in c.nodes):
        out.append("node off grid")
    if any(q not in c.nodes for e in c.elements for q in e):
        out.append("dangling element")
    if d.v_max is not None and volume(c, p, d.spacing) > d.v_max + 1e-9:
        out.append("volume exceeded")
    return out


def test_criterion_2_grammar_invariants(criterion):
    rng = random.Random(2024)
    t0 = time.perf_counter()
    states = bad = unbalanced = 0
    for name in bench.BUILTIN_CASES:
        spec = bench.load_case(name)
        env, d = spec.env(), spec.domain
        seed_r = restraint_count(spec.seed, d)
        for _ in range(1000):
            s = env.reset()
            while True:
                c = s.config
                states += 1
                bad += bool(fast_violations(c, d, spec.props, spec.seed))
                acquired = restraint_count(c, d) - seed_r
                unbalanced += len(c.elements) + restraint_count(c, d) - acquired != 2 * len(c.nodes)
                if env.is_terminal(s):
                    break
                s = env.step(s, rng.choice(env.legal_actions(s)))
    rollout_secs = time.perf_counter() - t0
    # the checker itself must see real violations
    toy = DesignDomain(3, 3, supports=PIN_ROLLER, horizon_T=1)
    crossing = Configuration.build(elements=[((0, 0), (1, 1)), ((0, 1), (1, 0))])
    covering = Configuration.build(nodes=[(1, 0)], elements=[((0, 0), (2, 0))])
    assert fast_violations(crossing, toy, P, TRIANGLE) == ["crossing elements"]
    assert fast_violations(covering, toy, P, TRIANGLE) == ["element covers node"]

    # exhaustive agreement of the enumerator with the brute-force checker on a small toy
    d = DesignDomain(3, 3, supports=PIN_ROLLER, horizon_T=8)
    seen = {TRIANGLE.key: (TRIANGLE, 0)}
    stack = [(TRIANGLE, 0)]
    mismatches = 0
    while stack:
        c, t = stack.pop()
        acts = enumerate_actions(c, d, P)
        mismatches += acts != brute_force_actions(c, d, P)
        if t < d.horizon_T:
            for a in acts:
                c2 = apply_action(c, a)
                if c2.key not in seen:
                    seen[c2.key] = (c2, t + 1)
                    stack.append((c2, t + 1))

    ok = bad == 0 and unbalanced == 0 and mismatches == 0 and rollout_secs < 120
    criterion(2, ok, f"{9 * 1000} rollouts over {len(bench.BUILTIN_CASES)} cases, {states} states, "
                     f"{bad} invalid, {unbalanced} off the counting balance, {rollout_secs:.1f}s; "
                     f"3x3 toy {len(seen)} states, {mismatches} enumerator mismatches")
    assert ok


# ---------------------------------------------------------------- 3: small cases


def test_criterion_3_small_cases(criterion, oracle_dir):
    parts, ok = [], True
    for name in ("case1", "case2", "case3"):
        spec = bench.load_case(name)
        oracle = bench.oracle_summary(spec, oracle_dir)
        ref_fe = spec.reference["target_fe_runs"]
        for alpha in (0.3, 0.4, 0.5):
            rep = bench.run_benchmark(spec, 0, alpha=alpha, optimum=oracle.best_objective)
            hits = int((rep.percentiles(oracle) == 100.0).sum())
            fe = rep.fe_runs().mean()
            good = hits >= 9 and ref_fe / 3 <= fe <= 3 * ref_fe
            ok &= good
            parts.append(f"{name} a={alpha}: {hits}/10 optimal, FE {fe:.0f} vs {ref_fe}")
        parts[-3] += f" (optimum {fmt(oracle.best_objective)}, reference {spec.reference['target_objective']})"
    criterion(3, ok, "; ".join(parts))
    assert ok


# ---------------------------------------------------------------- 4: alpha trend


def test_criterion_4_alpha_trend(criterion, oracle_dir):
    spec = bench.load_case("case4")
    oracle = bench.oracle_summary(spec, oracle_dir)
    alphas = [0.1, 0.2, 0.3, 0.4, 0.5]
    reps = [bench.run_benchmark(spec, 0, alpha=a, optimum=oracle.best_objective) for a in alphas]
    pct = [float(r.percentiles(oracle).mean()) for r in reps]
    fe = [float(r.fe_runs().mean()) for r in reps]
    best = min(float(r.best_objectives().min()) for r in reps)
    mono_pct = all(b >= a for a, b in zip(pct, pct[1:]))
    mono_fe = all(b > a for a, b in zip(fe, fe[1:]))
    found = best <= oracle.best_objective * (1 + 1e-9)
    ok = mono_pct and mono_fe and pct[2] >= 99.5 and found
    table = ", ".join(f"a={a}: {p:.4f}%/{f:.0f} FE" for a, p, f in zip(alphas, pct, fe))
    criterion(4, ok, f"case4 {table}; best found {fmt(best)} vs optimum {fmt(oracle.best_objective)} "
                     f"over {len(oracle.samples)} designs")
    assert ok


# ---------------------------------------------------------------- 5: progressive


class SelfWeightCheckedEnv(TrussEnv):
    """Checks that gravity loads add up to density times volume on every FE solve."""

    checks = 0
    worst = 0.0

    def load_case(self, c):
        loads = super().load_case(c)
        d = self.domain
        want = d.self_weight_density * volume(c, self.props, d.spacing)
        ext = sum(ld.fy for ld in d.external_loads if ld.point in c.nodes)
        got = -(sum(fy for _, fy in loads.values()) - ext)
        SelfWeightCheckedEnv.checks += 1
        SelfWeightCheckedEnv.worst = max(SelfWeightCheckedEnv.worst, abs(got - want) / want)
        return loads


def test_criterion_5_progressive_cases(criterion, oracle_dir):
    spec = bench.load_case("cantilever_small")
    oracle = bench.oracle_summary(spec, oracle_dir)
    hits = 0
    for i in range(spec.runs):
        env = SelfWeightCheckedEnv(spec.domain, spec.seed, spec.props)
        res = train(env, SearchConfig(alpha=0.3, episodes=spec.search.episodes, rng_seed=i))
        hits += percentile_score(res.best_objective, oracle) == 100.0
    sw_ok = SelfWeightCheckedEnv.checks > 0 and SelfWeightCheckedEnv.worst <= 1e-12

    curves = []
    for name, episodes in (("cantilever", 200), ("bridge", 100)):
        full = bench.load_case(name)
        rep = bench.run_benchmark(full, 0, runs=1, episodes=episodes)
        (r,) = rep.runs
        mono = r.error is None and all(b <= a for a, b in zip(r.curve, r.curve[1:])) and len(r.curve) == episodes
        curves.append((name, mono, r.best_objective, full.reference.get("target_objective")))
    ok = hits == 10 and sw_ok and all(m for _, m, _, _ in curves)
    extra = "; ".join(f"{n} {e} episodes monotone={m} best {fmt(b)} (reference {ref}, different reconstruction)"
                      for (n, m, b, ref), e in zip(curves, (200, 100)))
    criterion(5, ok, f"cantilever_small {hits}/10 optimal (optimum {fmt(oracle.best_objective)}); "
                     f"self-weight checked on {SelfWeightCheckedEnv.checks} solves, worst rel {SelfWeightCheckedEnv.worst:.1e}; "
                     f"{extra}")
    assert ok


# ---------------------------------------------------------------- 6: selection arithmetic


def test_criterion_6_uct_arithmetic(criterion):
    def nd(n, v):
        x = TreeNode(None)
        x.n, x.v_sum = n, v
        return x

    a = uct_score(nd(1, 1.0), 1, 0.5)
    b = uct_score(nd(3, 2.0), 50, 0.0)
    c = uct_score(nd(2, 0.8), 10, 0.3)
    c_hand = 0.7 * 0.4 + 0.3 * math.sqrt(math.log(10))
    e = TreeNode(None)
    for r in (0.2, 0.8):
        backpropagate([e], r)
    x = uct_score_extended(e, 10, 0.3, 0.5)
    x_hand = 0.7 * 0.65 + 0.3 * math.sqrt(math.log(10) + 0.09)
    ok = (a == 0.5 and abs(b - 2 / 3) <= 1e-12 and abs(c - c_hand) <= 1e-12 and abs(c - 0.7352) <= 5e-5
          and abs(x - x_hand) <= 1e-12 and abs(x - 0.9191) <= 1e-4)
    criterion(6, ok, f"scores {a}, {b:.6f}, {c:.6f} (0.7352), extended {x:.6f} (0.9191 after rounding)")
    assert ok


# ---------------------------------------------------------------- 7: reproducibility


def test_criterion_7_cli_reproducible(criterion, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("TRUSSMCTS_CACHE", str(tmp_path / "cache"))
    args = ["run", "case1", "--seed", "7", "--runs", "10"]
    codes = [cli.main(args + ["--out", str(tmp_path / o)]) for o in ("a", "b")]
    capsys.readouterr()
    names = sorted(p.name for p in (tmp_path / "a").glob("*.csv"))
    same = all((tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() for n in names)
    ok = codes == [0, 0] and len(names) == 11 and same
    criterion(7, ok, f"two invocations, {len(names)} CSV files, byte-identical={same}")
    assert ok


# ---------------------------------------------------------------- 8: profile


def test_criterion_8_bridge_profile(criterion):
    spec = bench.load_case("bridge")
    res = train(spec.env(), SearchConfig(alpha=spec.search.alpha, episodes=1000, rng_seed=0))
    rep = bench.timing_report(res)
    sim = rep["percent"]["simulation"]
    ok = sim >= 50.0 and rep["covers_calls"] > 0
    shares = ", ".join(f"{k} {v:.1f}%" for k, v in rep["percent"].items())
    criterion(8, ok, f"bridge 1000 episodes in {rep['total_seconds']:.1f}s: {shares}; "
                     f"segment_covers_node {rep['covers_calls']} evaluations in {rep['covers_seconds']:.2f}s")
    assert ok


# ---------------------------------------------------------------- 9: properties

_PROP_FAILS: list[str] = []


def random_instance(w, h, T, lx, ly, fx, fy):
    d = DesignDomain(w, h, supports=PIN_ROLLER, external_loads=(Load((lx % w, ly % h), fx, fy),), horizon_T=T,
                     max_element_length=2.24)
    return d


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 4), st.integers(2, 3), st.integers(1, 2), st.integers(0, 9), st.integers(0, 9),
       st.floats(-10, 10), st.floats(-10, 10), st.integers(0, 10_000), st.integers(1, 80),
       st.sampled_from([0.0, 0.3, 0.5, 1.0]))
def _property_suite(w, h, T, lx, ly, fx, fy, seed, episodes, alpha):
    d = random_instance(w, h, T, lx, ly, fx, fy)
    env = TrussEnv(d, TRIANGLE, P)
    res = train(env, SearchConfig(alpha=alpha, episodes=episodes, rng_seed=seed))
    oracle = exhaustive_enumerate(TrussEnv(d, TRIANGLE, P))

    def walk(n):
        yield n
        for ch in n.children or ():
            yield from walk(ch)

    for n in walk(res.root):
        if n.n and not 0.0 <= n.mean <= 1.0:
            _PROP_FAILS.append("reward mean out of [0, 1]")
        if n.n != sum(k.n for k in n.children or ()) + n.launched:
            _PROP_FAILS.append("visit conservation")
    if any(b > a for a, b in zip(res.curve, res.curve[1:])):
        _PROP_FAILS.append("best-so-far curve not monotone")
    if len(oracle.samples):
        for v in (res.best_objective, oracle.best_objective, float(oracle.samples[-1])):
            if math.isfinite(v):
                pct = percentile_score(v, oracle)
                if (pct == 100.0) != (v <= oracle.best_objective * (1 + 1e-12)):
                    _PROP_FAILS.append("percentile 100 not equivalent to optimum")
                if not 0.0 <= reward_of(v) <= 1.0:
                    _PROP_FAILS.append("reward out of [0, 1]")
    if _PROP_FAILS:
        raise AssertionError(_PROP_FAILS[-1])


def test_criterion_9_property_suite(criterion):
    err = None
    try:
        _property_suite()
    except AssertionError as exc:
        err = str(exc)
    ok = err is None
    criterion(9, ok, "reward bounds, visit conservation, monotone curves and percentile-100 iff optimum on "
                     f"25 random instances" + ("" if ok else f": {err}"))
    assert ok
