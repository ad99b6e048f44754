"""Randomized identity and lemma suites."""

from .workflow import VERIFIERS, global_evaluation, run_verification

__all__ = ["VERIFIERS", "global_evaluation", "run_verification"]
