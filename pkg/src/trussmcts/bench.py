"""Case definitions, multi-run statistics, alpha sweeps, timing tables and export."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .env import TrussEnv
from .mcts import PHASES, RunResult, SearchConfig, train
from .model import (
    Configuration,
    DesignDomain,
    ElementProperties,
    SchemaError,
    config_from_dict,
    config_to_dict,
    domain_from_dict,
    domain_to_dict,
    is_statically_determinate,
    violations,
)
from .oracle import SearchSpaceSummary, exhaustive_enumerate, objective_ratio, percentile_score

BUILTIN_CASES = ("case1", "case2", "case3", "case4", "case5", "case6", "cantilever", "bridge", "cantilever_small")


@dataclass(frozen=True)
class CaseSpec:
    name: str
    domain: DesignDomain
    seed: Configuration
    props: ElementProperties = ElementProperties()
    search: SearchConfig = SearchConfig()
    runs: int = 10
    reference: dict = field(default_factory=dict, compare=False, hash=False)

    def env(self) -> TrussEnv:
        return TrussEnv(self.domain, self.seed, self.props)

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "domain": domain_to_dict(self.domain),
            "seed": config_to_dict(self.seed),
            "properties": {"young_modulus": self.props.young_modulus, "area": self.props.area},
            "search": {
                "alpha": self.search.alpha,
                "beta": self.search.beta,
                "uct_variant": self.search.uct_variant,
                "episodes": self.search.episodes,
            },
            "runs": self.runs,
        }
        if self.reference:
            out["reference"] = dict(self.reference)
        return out

    def fingerprint(self) -> str:
        """Digest of everything that determines the reachable design space."""
        doc = {k: v for k, v in self.to_dict().items() if k in ("domain", "seed", "properties")}
        return hashlib.blake2b(json.dumps(doc, sort_keys=True).encode(), digest_size=8).hexdigest()


def _num(doc: dict, key: str, path: str, default):
    v = doc.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(f"{path}.{key}", f"expected a number, got {v!r}")
    return v


def case_from_dict(doc: dict, origin: str = "case") -> CaseSpec:
    if not isinstance(doc, dict):
        raise SchemaError(origin, "expected an object")
    name = doc.get("name", Path(origin).stem)
    if not isinstance(name, str):
        raise SchemaError("name", "expected a string")
    if "domain" not in doc:
        raise SchemaError("domain", "missing required field")
    if "seed" not in doc:
        raise SchemaError("seed", "missing required field")
    domain = domain_from_dict(doc["domain"], "domain")
    seed = config_from_dict(doc["seed"], "seed")
    bad = violations(seed, domain)
    if bad:
        raise SchemaError("seed", "; ".join(bad))
    if not is_statically_determinate(seed, domain):
        raise SchemaError("seed", "seed is not statically determinate (m + r != 2n)")

    pdoc = doc.get("properties", {})
    if not isinstance(pdoc, dict):
        raise SchemaError("properties", "expected an object")
    try:
        props = ElementProperties(_num(pdoc, "young_modulus", "properties", 1.0e3), _num(pdoc, "area", "properties", 1.0))
    except SchemaError:
        raise
    except ValueError as exc:
        raise SchemaError("properties", str(exc)) from None

    sdoc = doc.get("search", {})
    if not isinstance(sdoc, dict):
        raise SchemaError("search", "expected an object")
    episodes = sdoc.get("episodes", 1000)
    if isinstance(episodes, bool) or not isinstance(episodes, int):
        raise SchemaError("search.episodes", f"expected an integer, got {episodes!r}")
    variant = sdoc.get("uct_variant", "standard")
    try:
        search = SearchConfig(
            alpha=float(_num(sdoc, "alpha", "search", 0.3)),
            beta=float(_num(sdoc, "beta", "search", 0.0)),
            uct_variant=variant,
            episodes=episodes,
        )
    except SchemaError:
        raise
    except ValueError as exc:
        raise SchemaError("search", str(exc)) from None

    runs = doc.get("runs", 10)
    if isinstance(runs, bool) or not isinstance(runs, int) or runs < 1:
        raise SchemaError("runs", f"expected a positive integer, got {runs!r}")
    ref = doc.get("reference", {})
    if not isinstance(ref, dict):
        raise SchemaError("reference", "expected an object")
    return CaseSpec(name, domain, seed, props, search, runs, ref)


def load_case(name_or_path: str | os.PathLike) -> CaseSpec:
    """Load a built-in case by name or a case file by path."""
    s = str(name_or_path)
    if s in BUILTIN_CASES:
        text = resources.files("trussmcts").joinpath("cases", f"{s}.json").read_text()
        origin = s
    else:
        p = Path(s)
        if not p.is_file():
            raise FileNotFoundError(f"no built-in case or file named {s!r}")
        text = p.read_text()
        origin = p.name
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}") from None
    return case_from_dict(doc, origin)


# ---------------------------------------------------------------------------
# oracle cache


def default_cache_dir() -> Path:
    return Path(os.environ.get("TRUSSMCTS_CACHE", Path.home() / ".cache" / "trussmcts"))


def oracle_summary(spec: CaseSpec, cache_dir: str | os.PathLike | None = None, cap: int | None = None) -> SearchSpaceSummary:
    """Exhaustive summary for ``spec``, computed once and stored on disk."""
    root = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    stem = root / f"{spec.name}-{spec.fingerprint()}" if cap is None else root / f"{spec.name}-{spec.fingerprint()}-cap{cap}"
    if stem.with_suffix(".json").exists() and stem.with_suffix(".npy").exists():
        return SearchSpaceSummary.load(stem)
    summary = exhaustive_enumerate(spec.env(), cap=cap)
    summary.save(stem)
    return summary


# ---------------------------------------------------------------------------
# benchmark runs


@dataclass
class RunRecord:
    """The serialisable part of a :class:`RunResult` (no tree)."""

    seed: int
    curve: list[float]
    fe_curve: list[int]
    best_objective: float
    best_config: Configuration | None
    best_actions: list[str]
    best_episode: int
    fe_evals: int
    fe_to_best: int
    timings: dict[str, float]
    covers_calls: int
    covers_seconds: float
    error: str | None = None

    @classmethod
    def from_result(cls, seed: int, r: RunResult) -> "RunRecord":
        return cls(
            seed=seed,
            curve=list(r.curve),
            fe_curve=list(r.fe_curve),
            best_objective=r.best_objective,
            best_config=r.best_config,
            best_actions=[str(a) for a in r.best_actions],
            best_episode=r.best_episode,
            fe_evals=r.fe_evals,
            fe_to_best=r.fe_at_best,
            timings=dict(r.timings),
            covers_calls=r.covers_calls,
            covers_seconds=r.covers_seconds,
        )


def _one_run(spec: CaseSpec, cfg: SearchConfig) -> RunRecord:
    try:
        return RunRecord.from_result(cfg.rng_seed, train(spec.env(), cfg))
    except Exception as exc:  # one failing run must not abort its siblings
        return RunRecord(cfg.rng_seed, [], [], math.inf, None, [], -1, 0, 0, dict.fromkeys(PHASES, 0.0), 0, 0.0,
                         error=f"{type(exc).__name__}: {exc}")


@dataclass
class BenchReport:
    spec: CaseSpec
    config: SearchConfig
    master_seed: int
    runs: list[RunRecord]
    optimum: float | None = None  # oracle minimum when available

    @property
    def ok_runs(self) -> list[RunRecord]:
        return [r for r in self.runs if r.error is None]

    def curves(self) -> np.ndarray:
        return np.array([r.curve for r in self.ok_runs], dtype=float)

    def mean_curve(self) -> np.ndarray:
        return _nan_inf_mean(self.curves())

    def std_curve(self) -> np.ndarray:
        c = self.curves()
        if len(c) < 2:
            return np.zeros(c.shape[1] if c.ndim == 2 else 0)
        with np.errstate(invalid="ignore"):
            return np.std(c, axis=0, ddof=1)

    def best_objectives(self) -> np.ndarray:
        return np.array([r.best_objective for r in self.ok_runs], dtype=float)

    def percentiles(self, summary: SearchSpaceSummary) -> np.ndarray:
        return np.array([percentile_score(r.best_objective, summary) for r in self.ok_runs])

    def ratios(self) -> np.ndarray:
        if self.optimum is None:
            return np.array([])
        return np.array([objective_ratio(self.optimum, r.best_objective) if math.isfinite(r.best_objective) else 0.0
                         for r in self.ok_runs])

    def hits(self, rel: float = 1e-9) -> int:
        if self.optimum is None:
            return 0
        return sum(r.best_objective <= self.optimum * (1 + rel) for r in self.ok_runs)

    def fe_runs(self) -> np.ndarray:
        return np.array([r.fe_evals for r in self.ok_runs], dtype=float)

    def fe_to_best(self) -> np.ndarray:
        return np.array([r.fe_to_best for r in self.ok_runs], dtype=float)

    def summary(self, oracle: SearchSpaceSummary | None = None) -> dict:
        best = self.best_objectives()
        out = {
            "case": self.spec.name,
            "alpha": self.config.alpha,
            "beta": self.config.beta,
            "uct_variant": self.config.uct_variant,
            "episodes": self.config.episodes,
            "runs": len(self.runs),
            "failed_runs": [r.seed for r in self.runs if r.error is not None],
            "master_seed": self.master_seed,
            "best_objective_mean": _finite_mean(best),
            "best_objective_min": float(best.min()) if len(best) else math.inf,
            "fe_runs_mean": float(self.fe_runs().mean()) if len(best) else 0.0,
            "fe_to_best_mean": float(self.fe_to_best().mean()) if len(best) else 0.0,
        }
        if self.optimum is not None:
            out["optimum"] = self.optimum
            out["hits"] = self.hits()
            out["objective_ratio_mean"] = float(self.ratios().mean()) if len(best) else 0.0
        if oracle is not None and len(oracle.samples):
            pct = self.percentiles(oracle)
            out["percentile_mean"] = float(pct.mean()) if len(pct) else 0.0
            out["percentile_std"] = float(np.std(pct, ddof=1)) if len(pct) > 1 else 0.0
            out["oracle_truncated"] = oracle.truncated
        return out


def _finite_mean(a: np.ndarray) -> float:
    return float(a.mean()) if len(a) else math.inf


def _nan_inf_mean(c: np.ndarray) -> np.ndarray:
    if c.size == 0:
        return np.zeros(0)
    return c.mean(axis=0)


def run_benchmark(
    spec: CaseSpec,
    master_seed: int = 0,
    *,
    runs: int | None = None,
    alpha: float | None = None,
    episodes: int | None = None,
    uct_variant: str | None = None,
    beta: float | None = None,
    optimum: float | None = None,
    workers: int = 1,
) -> BenchReport:
    """Independent trainings with seeds ``master_seed + i``.

    ``workers > 1`` runs them in a process pool; results are identical to
    the serial path because every run owns its environment and generator.
    """
    base = spec.search
    cfg = replace(
        base,
        alpha=base.alpha if alpha is None else alpha,
        episodes=base.episodes if episodes is None else episodes,
        uct_variant=base.uct_variant if uct_variant is None else uct_variant,
        beta=base.beta if beta is None else beta,
    )
    n = spec.runs if runs is None else runs
    if n < 1:
        raise ValueError("runs must be >= 1")
    cfgs = [replace(cfg, rng_seed=master_seed + i) for i in range(n)]
    if workers > 1 and n > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_one_run, [spec] * n, cfgs))
    else:
        records = [_one_run(spec, c) for c in cfgs]
    return BenchReport(spec, cfg, master_seed, records, optimum)


def alpha_sweep(spec: CaseSpec, alphas, master_seed: int = 0, oracle: SearchSpaceSummary | None = None, **kw) -> list[dict]:
    """One benchmark per alpha; rows carry percentile and FE-run columns."""
    rows = []
    for a in alphas:
        if not 0.0 <= a <= 1.0:
            raise ValueError(f"alpha {a} outside [0, 1]")
        rep = run_benchmark(spec, master_seed, alpha=a,
                            optimum=oracle.best_objective if oracle is not None else None, **kw)
        s = rep.summary(oracle)
        rows.append({
            "alpha": a,
            "percentile_mean": s.get("percentile_mean", math.nan),
            "percentile_std": s.get("percentile_std", math.nan),
            "hits": s.get("hits", 0),
            "fe_runs_mean": s["fe_runs_mean"],
            "fe_to_best_mean": s["fe_to_best_mean"],
            "best_objective_mean": s["best_objective_mean"],
        })
    return rows


def timing_report(result: RunResult | RunRecord | list) -> dict:
    """Per-phase seconds and shares plus the node-coverage predicate counters.

    Accepts one run or a list of runs (summed).
    """
    items = result if isinstance(result, list) else [result]
    secs = dict.fromkeys(PHASES, 0.0)
    calls, csecs = 0, 0.0
    for r in items:
        for ph in PHASES:
            secs[ph] += r.timings.get(ph, 0.0)
        calls += r.covers_calls
        csecs += r.covers_seconds
    total = sum(secs.values())
    pct = {ph: (100.0 * s / total if total > 0 else 0.0) for ph, s in secs.items()}
    return {"seconds": secs, "percent": pct, "total_seconds": total,
            "covers_calls": calls, "covers_seconds": csecs}


def format_timing(rep: dict) -> str:
    lines = [f"{'phase':<16}{'seconds':>12}{'share':>10}"]
    for ph in PHASES:
        lines.append(f"{ph:<16}{rep['seconds'][ph]:>12.4f}{rep['percent'][ph]:>9.2f}%")
    lines.append(f"{'total':<16}{rep['total_seconds']:>12.4f}")
    lines.append(f"segment_covers_node: {rep['covers_calls']} evaluations, {rep['covers_seconds']:.4f} s")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# export


def write_run_csv(rec: RunRecord, path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["episode", "best_objective", "fe_evals"])
        for ep, (obj, fe) in enumerate(zip(rec.curve, rec.fe_curve)):
            w.writerow([ep + 1, repr(float(obj)), fe])


def write_aggregate_csv(rep: BenchReport, path: str | os.PathLike) -> None:
    mean, std = rep.mean_curve(), rep.std_curve()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["episode", "mean_best_objective", "std_best_objective"])
        for ep in range(len(mean)):
            w.writerow([ep + 1, repr(float(mean[ep])), repr(float(std[ep]))])


def run_record_to_dict(r: RunRecord) -> dict:
    return {
        "seed": r.seed,
        "best_objective": r.best_objective,
        "best_episode": r.best_episode,
        "best_config": config_to_dict(r.best_config) if r.best_config is not None else None,
        "best_actions": r.best_actions,
        "fe_evals": r.fe_evals,
        "fe_to_best": r.fe_to_best,
        "timings": r.timings,
        "covers_calls": r.covers_calls,
        "covers_seconds": r.covers_seconds,
        "error": r.error,
    }


def write_report(rep: BenchReport, outdir: str | os.PathLike, oracle: SearchSpaceSummary | None = None) -> Path:
    """Per-run CSVs, an aggregate CSV and ``summary.json``; returns the summary path."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    for i, r in enumerate(rep.runs):
        if r.error is None:
            write_run_csv(r, out / f"run_{i:03d}.csv")
    if rep.ok_runs:
        write_aggregate_csv(rep, out / "aggregate.csv")
    doc = {
        "summary": rep.summary(oracle),
        "case": rep.spec.to_dict(),
        "runs": [run_record_to_dict(r) for r in rep.runs],
    }
    path = out / "summary.json"
    path.write_text(json.dumps(doc, indent=2, default=_json_default))
    return path


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serialisable: {type(o)}")


def load_report(path: str | os.PathLike) -> dict:
    p = Path(path)
    if p.is_dir():
        p = p / "summary.json"
    return json.loads(p.read_text())


def records_from_report(doc: dict) -> list[RunRecord]:
    out = []
    for r in doc["runs"]:
        best = r.get("best_config")
        out.append(RunRecord(
            seed=r["seed"], curve=[], fe_curve=[], best_objective=r["best_objective"],
            best_config=config_from_dict(best) if best else None, best_actions=r.get("best_actions", []),
            best_episode=r.get("best_episode", -1), fe_evals=r.get("fe_evals", 0), fe_to_best=r.get("fe_to_best", 0),
            timings=r.get("timings", {}), covers_calls=r.get("covers_calls", 0),
            covers_seconds=r.get("covers_seconds", 0.0), error=r.get("error"),
        ))
    return out


# ---------------------------------------------------------------------------
# rendering


def render_design(c: Configuration, d: DesignDomain, path: str | os.PathLike, title: str | None = None,
                  scale: float = 60.0) -> None:
    """Write an SVG of the grid, passive regions, supports, loads and elements."""
    pad = 40.0
    w = (d.width - 1) * scale + 2 * pad
    h = (d.height - 1) * scale + 2 * pad + (20 if title else 0)

    def X(x):
        return pad + x * scale

    def Y(y):  # y grows upwards in the domain
        return h - pad - y * scale

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0f}" height="{h:.0f}" viewBox="0 0 {w:.1f} {h:.1f}">',
             '<rect width="100%" height="100%" fill="white"/>']
    if title:
        parts.append(f'<text x="{pad:.1f}" y="20" font-family="sans-serif" font-size="14">{_esc(title)}</text>')
    for r in d.passive_regions:
        parts.append(f'<rect class="passive" x="{X(r.x0):.1f}" y="{Y(r.y1):.1f}" width="{(r.x1 - r.x0) * scale:.1f}" '
                     f'height="{(r.y1 - r.y0) * scale:.1f}" fill="#ddd" stroke="#999"/>')
    for x in range(d.width):
        for y in range(d.height):
            parts.append(f'<circle class="grid" cx="{X(x):.1f}" cy="{Y(y):.1f}" r="2" fill="#bbb"/>')
    for a, b in c.sorted_elements:
        parts.append(f'<line class="element" x1="{X(a[0]):.1f}" y1="{Y(a[1]):.1f}" x2="{X(b[0]):.1f}" y2="{Y(b[1]):.1f}" '
                     'stroke="#1f4e9c" stroke-width="3"/>')
    for q in c.sorted_nodes:
        parts.append(f'<circle class="node" cx="{X(q[0]):.1f}" cy="{Y(q[1]):.1f}" r="4" fill="#1f4e9c"/>')
    for s in d.supports:
        x, y = X(s.point[0]), Y(s.point[1])
        fill = "#c0392b" if (s.fix_x and s.fix_y) else "white"
        parts.append(f'<polygon class="support" points="{x:.1f},{y:.1f} {x - 9:.1f},{y + 14:.1f} {x + 9:.1f},{y + 14:.1f}" '
                     f'fill="{fill}" stroke="#c0392b" stroke-width="2"/>')
    for ld in d.external_loads:
        x, y = X(ld.point[0]), Y(ld.point[1])
        norm = math.hypot(ld.fx, ld.fy) or 1.0
        dx, dy = 30 * ld.fx / norm, -30 * ld.fy / norm
        parts.append(f'<line class="load" x1="{x - dx:.1f}" y1="{y - dy:.1f}" x2="{x:.1f}" y2="{y:.1f}" '
                     'stroke="#27ae60" stroke-width="2"/>')
        parts.append(f'<circle class="load-head" cx="{x:.1f}" cy="{y:.1f}" r="3" fill="#27ae60"/>')
    if d.target_node is not None:
        x, y = X(d.target_node[0]), Y(d.target_node[1])
        parts.append(f'<circle class="target" cx="{x:.1f}" cy="{y:.1f}" r="8" fill="none" stroke="#e67e22" stroke-width="2"/>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
