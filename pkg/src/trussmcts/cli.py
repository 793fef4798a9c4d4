"""Command-line entry point: ``trussmcts {run,sweep,exhaustive,render,timing}``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import bench
from .model import SchemaError, config_from_dict, domain_from_dict
from .oracle import write_samples_csv


def _add_search_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("case", help="built-in case name or path to a case JSON file")
    p.add_argument("--episodes", type=int, help="episodes per run (default: from the case)")
    p.add_argument("--runs", type=int, help="independent runs (default: from the case)")
    p.add_argument("--seed", type=int, default=0, help="master seed; run i uses seed+i")
    p.add_argument("--uct", choices=("standard", "extended"), help="selection score variant")
    p.add_argument("--beta", type=float, help="best-value weight of the extended score")
    p.add_argument("--workers", type=int, default=1, help="parallel processes for independent runs")
    p.add_argument("--oracle", choices=("auto", "on", "off"), default="auto",
                   help="compare against the exhaustive optimum (auto: when the case marks it feasible)")
    p.add_argument("--cache-dir", help="directory for cached oracle summaries")


def _oracle_for(spec: bench.CaseSpec, mode: str, cache_dir):
    if mode == "off" or (mode == "auto" and not spec.reference.get("enumerable", False)):
        return None
    return bench.oracle_summary(spec, cache_dir)


def cmd_run(args) -> int:
    spec = bench.load_case(args.case)
    oracle = _oracle_for(spec, args.oracle, args.cache_dir)
    rep = bench.run_benchmark(
        spec, args.seed, runs=args.runs, alpha=args.alpha, episodes=args.episodes,
        uct_variant=args.uct, beta=args.beta, workers=args.workers,
        optimum=oracle.best_objective if oracle is not None else None,
    )
    out = Path(args.out) if args.out else Path("results") / spec.name
    path = bench.write_report(rep, out, oracle)
    s = rep.summary(oracle)
    print(f"case {spec.name}: {s['runs']} runs x {s['episodes']} episodes, alpha={s['alpha']}")
    print(f"  best objective  mean {s['best_objective_mean']:.6g}  min {s['best_objective_min']:.6g}")
    print(f"  FE runs         mean {s['fe_runs_mean']:.1f}  (to best design {s['fe_to_best_mean']:.1f})")
    if "optimum" in s:
        print(f"  optimum {s['optimum']:.6g}  hits {s['hits']}/{len(rep.ok_runs)}  ratio {s['objective_ratio_mean']:.2f}%")
    if "percentile_mean" in s:
        print(f"  percentile      mean {s['percentile_mean']:.3f}%")
    for r in rep.runs:
        if r.error:
            print(f"  run seed {r.seed} failed: {r.error}", file=sys.stderr)
    print(f"wrote {path}")
    return 1 if len(rep.ok_runs) == 0 else 0


def cmd_sweep(args) -> int:
    spec = bench.load_case(args.case)
    oracle = _oracle_for(spec, args.oracle, args.cache_dir)
    rows = bench.alpha_sweep(spec, args.alphas, args.seed, oracle=oracle, runs=args.runs,
                             episodes=args.episodes, uct_variant=args.uct, beta=args.beta, workers=args.workers)
    print(f"{'alpha':>6} {'percentile':>11} {'hits':>5} {'FE runs':>9} {'FE to best':>11} {'best mean':>12}")
    for r in rows:
        pct = "n/a" if math.isnan(r["percentile_mean"]) else f"{r['percentile_mean']:.3f}%"
        print(f"{r['alpha']:>6.2f} {pct:>11} {r['hits']:>5} {r['fe_runs_mean']:>9.1f} {r['fe_to_best_mean']:>11.1f} "
              f"{r['best_objective_mean']:>12.6g}")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(rows, indent=2))
    return 0


def cmd_exhaustive(args) -> int:
    spec = bench.load_case(args.case)
    if args.cap is not None and args.cap <= 0:
        raise ValueError("--cap must be positive")
    s = bench.oracle_summary(spec, args.cache_dir, cap=args.cap)
    print(f"case {spec.name}: {s.terminal_designs} terminal designs ({s.unstable} unstable), "
          f"{s.dead_ends} dead ends, {s.sequences} action sequences, {s.states} states"
          + (" [truncated]" if s.truncated else ""))
    print(f"  optimum {s.best_objective!r}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_samples_csv(s, out / f"{spec.name}_objectives.csv")
        s.save(out / f"{spec.name}_summary")
        print(f"wrote {out}")
    return 0


def cmd_render(args) -> int:
    src = Path(args.result)
    if src.exists():
        doc = bench.load_report(src)
        domain = domain_from_dict(doc["case"]["domain"])
        runs = [r for r in doc["runs"] if r.get("best_config")]
        if not runs:
            raise ValueError(f"{src} holds no stable design to render")
        best = min(runs, key=lambda r: r["best_objective"])
        config = config_from_dict(best["best_config"])
        title = f"{doc['case']['name']}: objective {best['best_objective']:.6g}"
    else:
        spec = bench.load_case(args.result)
        domain, config, title = spec.domain, spec.seed, f"{spec.name}: seed"
    bench.render_design(config, domain, args.output, title=title)
    print(f"wrote {args.output}")
    return 0


def cmd_timing(args) -> int:
    doc = bench.load_report(args.result)
    rep = bench.timing_report(bench.records_from_report(doc))
    print(bench.format_timing(rep))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="trussmcts", description="Truss design synthesis by Monte Carlo tree search.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="train on a case and report multi-run statistics")
    _add_search_args(p)
    p.add_argument("--alpha", type=float, help="exploration weight (default: from the case)")
    p.add_argument("--out", help="output directory (default: results/<case>)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="repeat the benchmark for several alpha values")
    _add_search_args(p)
    p.add_argument("--alphas", type=float, nargs="+", required=True)
    p.add_argument("--out", help="write the table as JSON here")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("exhaustive", help="enumerate the whole reachable design space")
    p.add_argument("case")
    p.add_argument("--cap", type=int, help="stop after this many terminal designs")
    p.add_argument("--cache-dir")
    p.add_argument("--out", help="directory for the objective CSV and summary")
    p.set_defaults(func=cmd_exhaustive)

    p = sub.add_parser("render", help="draw the best design of a result (or a case seed) as SVG")
    p.add_argument("result", help="run output directory / summary.json, or a case name")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("timing", help="phase timing table of a run result")
    p.add_argument("result", help="run output directory or summary.json")
    p.set_defaults(func=cmd_timing)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SchemaError as exc:
        print(f"trussmcts: invalid case file: {exc}", file=sys.stderr)
    except (OSError, ValueError, KeyError) as exc:
        print(f"trussmcts: error: {exc}", file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
