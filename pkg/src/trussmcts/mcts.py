"""Monte Carlo tree search over grammar-generated truss designs."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .env import EpisodeState, TrussEnv
from .geometry import COVERS_COUNTER
from .grammar import Action, apply_action
from .model import Configuration

PHASES = ("selection", "expansion", "simulation", "backpropagation", "other")


class NoStableDesign(RuntimeError):
    pass


@dataclass(eq=False)
class TreeNode:
    state: EpisodeState
    action: Action | None = None
    n: int = 0
    v_sum: float = 0.0
    v_best: float = 0.0
    v_sq_sum: float = 0.0
    # running mean and squared-deviation sum (Welford): exact zero variance for constant streams
    w_mean: float = 0.0
    w_m2: float = 0.0
    children: list["TreeNode"] | None = None  # None until expanded
    terminal: bool = False
    objective: float | None = None
    launched: int = 0  # rollouts started here while the node had no children

    @property
    def mean(self) -> float:
        return self.v_sum / self.n if self.n else 0.0

    @property
    def variance(self) -> float:
        return self.w_m2 / self.n if self.n else 0.0


@dataclass(frozen=True)
class SearchConfig:
    alpha: float = 0.3
    beta: float = 0.0
    uct_variant: str = "standard"
    episodes: int = 1000
    rng_seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0 and 0.0 <= self.beta <= 1.0):
            raise ValueError("alpha and beta must lie in [0, 1]")
        if self.episodes < 0:
            raise ValueError("episodes must be >= 0")
        if self.uct_variant not in ("standard", "extended"):
            raise ValueError(f"unknown uct variant {self.uct_variant!r}")


def uct_score(child: TreeNode, parent_total: int, alpha: float) -> float:
    """``(1-a) v_sum/n + a sqrt(2 ln N / n)`` with N the visits over all siblings."""
    return (1.0 - alpha) * (child.v_sum / child.n) + alpha * math.sqrt(2.0 * math.log(parent_total) / child.n)


def uct_score_extended(child: TreeNode, parent_total: int, alpha: float, beta: float) -> float:
    """UCT variant mixing in the best seen reward and the reward variance."""
    exploit = (1.0 - beta) * child.v_sum / child.n + beta * child.v_best
    explore = math.sqrt(2.0 * math.log(parent_total) / child.n + child.variance)
    return (1.0 - alpha) * exploit + alpha * explore


def select_child(node: TreeNode, cfg: SearchConfig) -> TreeNode:
    best, best_score = None, -math.inf
    total = 0
    for ch in node.children:
        if ch.n == 0:
            return ch
        total += ch.n
    for ch in node.children:
        if cfg.uct_variant == "extended":
            s = uct_score_extended(ch, total, cfg.alpha, cfg.beta)
        else:
            s = uct_score(ch, total, cfg.alpha)
        if s > best_score:
            best, best_score = ch, s
    return best


def select_path(root: TreeNode, cfg: SearchConfig) -> list[TreeNode]:
    """Descend by UCT until an unexpanded or terminal node.

    Unvisited children win over any scored sibling, first in child order.
    """
    path = [root]
    node = root
    while node.children and not node.terminal:
        node = select_child(node, cfg)
        path.append(node)
    return path


def expand(leaf: TreeNode, env: TrussEnv) -> list[TreeNode]:
    """Create one child per legal action and evaluate each child's objective."""
    if leaf.children is not None:
        raise RuntimeError("node already expanded")
    if leaf.terminal:
        raise RuntimeError("cannot expand a terminal node")
    s = leaf.state
    kids = []
    for a in env.legal_actions(s):
        cs = EpisodeState(apply_action(s.config, a), s.t + 1)
        kid = TreeNode(cs, a, objective=env.objective(cs))
        kid.terminal = env.goal_reached(cs)
        kids.append(kid)
    leaf.children = kids
    if not kids:
        leaf.terminal = True
    return kids


def rollout(state: EpisodeState, env: TrussEnv, rng: np.random.Generator) -> tuple[EpisodeState, list[Action]]:
    """Uniformly random legal actions until a terminal state."""
    taken = []
    while not env.goal_reached(state):
        acts = env.legal_actions(state)
        if not acts:
            break
        a = acts[int(rng.integers(len(acts)))]
        state = EpisodeState(apply_action(state.config, a), state.t + 1)
        env.objective(state)
        taken.append(a)
    return state, taken


def backpropagate(path: list[TreeNode], r: float) -> None:
    for node in path:
        node.n += 1
        node.v_sum += r
        node.v_sq_sum += r * r
        delta = r - node.w_mean
        node.w_mean += delta / node.n
        node.w_m2 += delta * (r - node.w_mean)
        if r > node.v_best:
            node.v_best = r


@dataclass
class RunResult:
    config: SearchConfig
    curve: list[float] = field(default_factory=list)  # best objective so far, per episode
    fe_curve: list[int] = field(default_factory=list)  # cumulative FE runs, per episode
    best_objective: float = math.inf
    best_config: Configuration | None = None
    best_actions: list[Action] = field(default_factory=list)
    best_episode: int = -1
    fe_evals: int = 0
    timings: dict[str, float] = field(default_factory=lambda: dict.fromkeys(PHASES, 0.0))
    covers_calls: int = 0
    covers_seconds: float = 0.0
    root: TreeNode | None = field(default=None, repr=False)

    @property
    def fe_at_best(self) -> int:
        return self.fe_curve[self.best_episode] if self.best_episode >= 0 else self.fe_evals


def train(env: TrussEnv, cfg: SearchConfig) -> RunResult:
    rng = np.random.default_rng(cfg.rng_seed)
    res = RunResult(cfg)
    root = TreeNode(env.reset())
    root.terminal = env.goal_reached(root.state)
    res.root = root
    tm = res.timings
    calls0, secs0 = COVERS_COUNTER.snapshot()
    fe0 = env.fe_evals
    clock = time.perf_counter
    start = clock()

    for ep in range(cfg.episodes):
        t0 = clock()
        path = select_path(root, cfg)
        leaf = path[-1]
        t1 = clock()
        if not leaf.terminal and leaf.children is None:
            kids = expand(leaf, env)
            if kids:
                path.append(kids[int(rng.integers(len(kids)))])
        t2 = clock()
        last = path[-1]
        if not last.children:
            last.launched += 1
        final, tail = rollout(last.state, env, rng)
        r = env.terminal_reward(final)
        if r > 0.0:
            obj = env.objective(final)
            if obj < res.best_objective:
                res.best_objective = obj
                res.best_config = final.config
                res.best_actions = [nd.action for nd in path[1:]] + tail
                res.best_episode = ep
        t3 = clock()
        backpropagate(path, r)
        t4 = clock()
        tm["selection"] += t1 - t0
        tm["expansion"] += t2 - t1
        tm["simulation"] += t3 - t2
        tm["backpropagation"] += t4 - t3
        res.curve.append(res.best_objective)
        res.fe_curve.append(env.fe_evals - fe0)

    if cfg.episodes:
        total = clock() - start
        tm["other"] = max(0.0, total - sum(tm[p] for p in PHASES[:-1]))
    res.fe_evals = env.fe_evals - fe0
    calls1, secs1 = COVERS_COUNTER.snapshot()
    res.covers_calls = calls1 - calls0
    res.covers_seconds = secs1 - secs0
    return res


class BestDesign(NamedTuple):
    config: Configuration
    actions: list[Action]
    objective: float
    greedy_actions: list[Action]
    greedy_config: Configuration


def greedy_path(root: TreeNode) -> list[TreeNode]:
    """Follow the child with the highest mean return from the root."""
    path = [root]
    node = root
    while node.children:
        visited = [ch for ch in node.children if ch.n > 0]
        if not visited:
            break
        node = max(visited, key=lambda ch: ch.mean)
        path.append(node)
    return path


def extract_best_design(result: RunResult) -> BestDesign:
    if result.best_config is None:
        raise NoStableDesign("no stable terminal design was reached during training")
    if result.root is not None:
        gp = greedy_path(result.root)
    else:
        gp = []
    return BestDesign(
        result.best_config,
        list(result.best_actions),
        result.best_objective,
        [nd.action for nd in gp[1:]],
        gp[-1].state.config if gp else result.best_config,
    )
