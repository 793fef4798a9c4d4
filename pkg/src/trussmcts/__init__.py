"""Truss design synthesis by Monte Carlo tree search over a D/T growth grammar."""

from .env import EpisodeState, TrussEnv
from .fe import UnstableStructure, max_abs_displacement, self_weight_loads, solve_static
from .geometry import Rect, segment_covers_node, segment_length, segment_touches_region, segments_properly_intersect
from .grammar import Action, IllegalAction, apply_action, enumerate_actions
from .mcts import NoStableDesign, RunResult, SearchConfig, TreeNode, extract_best_design, train
from .model import (
    Configuration,
    DesignDomain,
    ElementProperties,
    Load,
    Support,
    config_key,
    is_statically_determinate,
    volume,
)
from .oracle import SearchSpaceSummary, exhaustive_enumerate, objective_ratio, percentile_score

__all__ = [
    "Action",
    "Configuration",
    "DesignDomain",
    "ElementProperties",
    "EpisodeState",
    "IllegalAction",
    "Load",
    "NoStableDesign",
    "Rect",
    "RunResult",
    "SearchConfig",
    "SearchSpaceSummary",
    "Support",
    "TreeNode",
    "TrussEnv",
    "UnstableStructure",
    "apply_action",
    "config_key",
    "enumerate_actions",
    "exhaustive_enumerate",
    "extract_best_design",
    "is_statically_determinate",
    "max_abs_displacement",
    "objective_ratio",
    "percentile_score",
    "segment_covers_node",
    "segment_length",
    "segment_touches_region",
    "segments_properly_intersect",
    "self_weight_loads",
    "solve_static",
    "train",
    "volume",
]
