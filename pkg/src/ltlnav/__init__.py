"""LTL task planning and decentralized navigation-function control for spherical agents."""

from .buchi import BuchiAutomaton, accepts_lasso, translate
from .ltl import eval_word, lasso, normalize, parse_formula
from .planner import Plan, plan_agent
from .workspace import Scenario, load_fixture, load_scenario

__version__ = "0.1.0"

__all__ = [
    "BuchiAutomaton",
    "Plan",
    "Scenario",
    "accepts_lasso",
    "eval_word",
    "lasso",
    "load_fixture",
    "load_scenario",
    "normalize",
    "parse_formula",
    "plan_agent",
    "translate",
]
