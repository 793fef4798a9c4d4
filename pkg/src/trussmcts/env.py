"""Episodic design environment: transitions, termination, objective and reward."""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass

from .fe import UnstableStructure, add_loads, loads_from, max_abs_displacement, self_weight_loads, solve_static
from .grammar import Action, IllegalAction, apply_action, enumerate_actions
from .model import Configuration, DesignDomain, ElementProperties, InvalidConfiguration, validate, restraint_count


@dataclass(frozen=True)
class EpisodeState:
    config: Configuration
    t: int = 0

    @property
    def key(self) -> bytes:
        return self.config.key


def reward_of(objective: float) -> float:
    """``1 / (1 + objective)``; 0 for mechanisms (infinite objective)."""
    if math.isinf(objective):
        return 0.0
    if objective < 0:
        raise ValueError("objective must be non-negative")
    return 1.0 / (1.0 + objective)


class TrussEnv:
    """Deterministic simulator wrapping grammar, FE solver and reward.

    Objective values are cached per configuration key; ``fe_evals`` counts
    cache misses, i.e. distinct configurations actually solved.
    """

    def __init__(self, domain: DesignDomain, seed: Configuration, props: ElementProperties | None = None,
                 action_cache_size: int = 512):
        self.domain = domain
        self.seed = seed
        self.props = props or ElementProperties()
        validate(seed, domain)
        if restraint_count(seed, domain) == 0:
            raise InvalidConfiguration("seed configuration has no restrained DOF")
        self.cache: dict[bytes, float] = {}
        self.fe_evals = 0
        self._actions: OrderedDict[bytes, list[Action]] = OrderedDict()
        self._action_cache_size = action_cache_size

    def reset(self) -> EpisodeState:
        return EpisodeState(self.seed, 0)

    def legal_actions(self, s: EpisodeState) -> list[Action]:
        key = s.key
        hit = self._actions.get(key)
        if hit is not None:
            self._actions.move_to_end(key)
            return hit
        acts = enumerate_actions(s.config, self.domain, self.props)
        self._actions[key] = acts
        if len(self._actions) > self._action_cache_size:
            self._actions.popitem(last=False)
        return acts

    def goal_reached(self, s: EpisodeState) -> bool:
        d = self.domain
        if d.progressive:
            return d.target_node in s.config.nodes
        return s.t >= d.horizon_T

    def is_terminal(self, s: EpisodeState) -> bool:
        return self.goal_reached(s) or not self.legal_actions(s)

    def is_dead_end(self, s: EpisodeState) -> bool:
        return not self.goal_reached(s) and not self.legal_actions(s)

    def step(self, s: EpisodeState, a: Action) -> EpisodeState:
        if self.goal_reached(s):
            raise IllegalAction("state is terminal")
        if a not in self.legal_actions(s):
            raise IllegalAction(f"action {a} is not legal here")
        return EpisodeState(apply_action(s.config, a), s.t + 1)

    def load_case(self, c: Configuration):
        ext = loads_from(ld for ld in self.domain.external_loads if ld.point in c.nodes)
        if self.domain.self_weight_density > 0:
            return add_loads(ext, self_weight_loads(c, self.props, self.domain.self_weight_density, self.domain.spacing))
        return ext

    def objective(self, s: EpisodeState | Configuration) -> float:
        """Max absolute nodal displacement; ``inf`` for mechanisms."""
        c = s.config if isinstance(s, EpisodeState) else s
        key = c.key
        val = self.cache.get(key)
        if val is None:
            self.fe_evals += 1
            try:
                val = max_abs_displacement(solve_static(c, self.props, self.load_case(c), self.domain))
            except UnstableStructure:
                val = math.inf
            self.cache[key] = val
        return val

    def terminal_reward(self, s: EpisodeState) -> float:
        """``1 / (1 + objective)`` on stable goal states, 0 on dead ends and mechanisms."""
        if not self.goal_reached(s):
            return 0.0
        return reward_of(self.objective(s))
