"""Exhaustive enumeration of the reachable design space.

Provides ground-truth optima, the objective distribution of all terminal
designs and percentile scoring of searched designs against it.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .env import EpisodeState, TrussEnv
from .grammar import apply_action
from .model import Configuration, config_from_dict, config_to_dict


class CapExceeded(ValueError):
    pass


@dataclass
class SearchSpaceSummary:
    samples: np.ndarray  # sorted objectives of distinct stable terminal designs
    best_config: Configuration | None
    best_objective: float
    truncated: bool = False
    terminal_designs: int = 0  # distinct terminal configurations reached, stable or not
    unstable: int = 0
    dead_ends: int = 0  # distinct non-goal states without legal actions
    sequences: int = 0  # action sequences from the seed to a goal state
    states: int = 0  # distinct configurations visited
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "samples": len(self.samples),
            "best_objective": self.best_objective,
            "best_config": config_to_dict(self.best_config) if self.best_config is not None else None,
            "truncated": self.truncated,
            "terminal_designs": self.terminal_designs,
            "unstable": self.unstable,
            "dead_ends": self.dead_ends,
            "sequences": self.sequences,
            "states": self.states,
            **self.extra,
        }

    def save(self, stem: str | Path) -> None:
        stem = Path(stem)
        stem.parent.mkdir(parents=True, exist_ok=True)
        np.save(stem.with_suffix(".npy"), self.samples)
        stem.with_suffix(".json").write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, stem: str | Path) -> "SearchSpaceSummary":
        stem = Path(stem)
        meta = json.loads(stem.with_suffix(".json").read_text())
        samples = np.load(stem.with_suffix(".npy"))
        best = meta.pop("best_config")
        meta.pop("samples")
        known = {"best_objective", "truncated", "terminal_designs", "unstable", "dead_ends", "sequences", "states"}
        return cls(
            samples=samples,
            best_config=config_from_dict(best) if best else None,
            extra={k: v for k, v in meta.items() if k not in known},
            **{k: meta[k] for k in known},
        )


def exhaustive_enumerate(env: TrussEnv, cap: int | None = None) -> SearchSpaceSummary:
    """Depth-first traversal of every action sequence from the seed.

    Subtrees are memoised by configuration key: a configuration fixes the
    decision step (each action adds one node), so equal keys root identical
    subtrees. Sequence counts are accumulated through the memo, so the raw
    number of action sequences is exact without replaying duplicates.
    ``cap`` stops the traversal after that many distinct goal terminals.
    """
    if cap is not None and cap <= 0:
        raise CapExceeded("cap must be positive")
    memo: dict[bytes, int] = {}
    objectives: list[float] = []
    best_obj, best_cfg = math.inf, None
    unstable = dead = 0
    truncated = False

    def leaf_count(s: EpisodeState) -> int | None:
        """Sequence count for terminal ``s`` (recording it), or None if it needs expanding."""
        nonlocal best_obj, best_cfg, unstable, dead
        if env.goal_reached(s):
            obj = env.objective(s)
            if math.isinf(obj):
                unstable += 1
            else:
                objectives.append(obj)
                if obj < best_obj:
                    best_obj, best_cfg = obj, s.config
            return 1
        if not env.legal_actions(s):
            dead += 1
            return 0
        return None

    root = env.reset()
    stack: list[list] = []
    first = leaf_count(root)
    if first is not None:
        memo[root.key] = first
    else:
        # frame: [state, actions, next index, running sequence count]
        stack = [[root, env.legal_actions(root), 0, 0]]
        while stack:
            frame = stack[-1]
            s, acts, i, _ = frame
            if i == len(acts):
                memo[s.key] = frame[3]
                stack.pop()
                if stack:
                    stack[-1][3] += frame[3]
                continue
            frame[2] = i + 1
            child = EpisodeState(apply_action(s.config, acts[i]), s.t + 1)
            key = child.key
            hit = memo.get(key)
            if hit is not None:
                frame[3] += hit
                continue
            cnt = leaf_count(child)
            if cnt is not None:
                memo[key] = cnt
                frame[3] += cnt
                if cap is not None and len(objectives) + unstable >= cap:
                    truncated = True
                    break
                continue
            stack.append([child, list(env.legal_actions(child)), 0, 0])

    samples = np.sort(np.asarray(objectives, dtype=float))
    return SearchSpaceSummary(
        samples=samples,
        best_config=best_cfg,
        best_objective=best_obj,
        truncated=truncated,
        terminal_designs=len(objectives) + unstable,
        unstable=unstable,
        dead_ends=dead,
        # partial count when truncated
        sequences=memo[root.key] if root.key in memo else sum(f[3] for f in stack),
        states=len(memo),
    )


def percentile_score(achieved: float, summary: SearchSpaceSummary) -> float:
    """Share (in %) of enumerated designs that are no better than ``achieved``.

    Values within 1e-12 relative of ``achieved`` count as ties.
    """
    samples = summary.samples
    if len(samples) == 0:
        raise ValueError("empty search-space summary")
    thresh = achieved - 1e-12 * abs(achieved)
    worse_or_equal = len(samples) - int(np.searchsorted(samples, thresh, side="left"))
    return 100.0 * worse_or_equal / len(samples)


def objective_ratio(optimal: float, achieved: float) -> float:
    if achieved <= 0:
        raise ValueError("achieved objective must be positive")
    return 100.0 * optimal / achieved


def write_samples_csv(summary: SearchSpaceSummary, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["objective"])
        for v in summary.samples:
            w.writerow([repr(float(v))])
