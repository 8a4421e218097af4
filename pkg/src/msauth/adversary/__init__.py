"""Symbolic attacker: term algebra, knowledge saturation, attack scenarios."""

from .knowledge import Fact, KnowledgeSet, consistent_guesses, derivable, guess_is_verifiable, saturate
from .scenarios import TITLES, ScenarioResult, build_fixture, results_json, run_all, run_scenario
from .terms import Binding, Term, h, name, trunc, xor_terms

__all__ = [
    "Binding",
    "Fact",
    "KnowledgeSet",
    "ScenarioResult",
    "TITLES",
    "Term",
    "build_fixture",
    "consistent_guesses",
    "derivable",
    "guess_is_verifiable",
    "h",
    "name",
    "results_json",
    "run_all",
    "run_scenario",
    "saturate",
    "trunc",
    "xor_terms",
]
