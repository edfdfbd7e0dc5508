"""Exact inference for separable temporal ERGMs on many small dynamic networks."""

__version__ = "0.1.0"

from .graph import (
    AttributeTable,
    Decision,
    EnumerationBudgetError,
    Game,
    Panel,
    SmallGraph,
    Snapshot,
    TransitionView,
    dyad_index,
    reconstruct_target,
    split_transition,
)
from .inference import FitConfig, FitResult, chisq_sf, fit_per_time, lr_test, maximize, wald_tests
from .likelihood import ThetaVector, panel_loglik, stat_bounds, transition_loglik
from .simulate import SimConfig, WealthRule, sample_transition, simulate_panel
from .statistics import AbsDiff, Edges, ModelSpec, NodeMatch, Triangles
from .terms import parse_terms, render_terms

__all__ = [
    "AbsDiff",
    "AttributeTable",
    "Decision",
    "Edges",
    "EnumerationBudgetError",
    "FitConfig",
    "FitResult",
    "Game",
    "ModelSpec",
    "NodeMatch",
    "Panel",
    "SimConfig",
    "SmallGraph",
    "Snapshot",
    "ThetaVector",
    "TransitionView",
    "Triangles",
    "WealthRule",
    "chisq_sf",
    "dyad_index",
    "fit_per_time",
    "lr_test",
    "maximize",
    "panel_loglik",
    "parse_terms",
    "reconstruct_target",
    "render_terms",
    "sample_transition",
    "simulate_panel",
    "split_transition",
    "stat_bounds",
    "transition_loglik",
    "wald_tests",
]
