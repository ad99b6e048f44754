"""Shared plumbing for the randomized verifier suites."""

import logging
import zlib
from collections.abc import Callable, Iterable
from dataclasses import dataclass

import numpy as np

from ..operator_core import PrimalVector, SpdOperator
from ..shared_libraries.sampling import random_bracketed, random_direction, random_spd
from ..shared_libraries.types import CheckEvaluation, Verdict, VerifyRequest

logger = logging.getLogger(__name__)

TAU_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True)
class Verifier:
    """A named suite of randomized checks.

    `run` receives the request and returns one CheckEvaluation per check; the
    workflow publishes them under `output_key`.
    """
    name: str
    description: str
    output_key: str
    run: Callable[[VerifyRequest], list[CheckEvaluation]]


@dataclass(frozen=True, eq=False)
class Sample:
    a: SpdOperator
    g: SpdOperator
    u: PrimalVector
    tau: float


def derive_rng(seed: int, key: str) -> np.random.Generator:
    """Independent stream per (seed, suite)."""
    return np.random.default_rng([seed, zlib.crc32(key.encode())])


def draw_sample(
    rng: np.random.Generator,
    n_max: int,
    index: int,
    lo_range: tuple[float, float] = (0.25, 1.0),
    hi_range: tuple[float, float] = (1.0, 4.0),
    max_cond: float = 1e2,
) -> Sample:
    """Random (A, G, u, tau) with G bracketed between lo A and hi A."""
    n = int(rng.integers(1, n_max + 1))
    a = random_spd(n, rng, max_cond)
    lo = float(rng.uniform(*lo_range))
    hi = float(rng.uniform(*hi_range))
    g = random_bracketed(a, rng, lo, max(hi, lo))
    return Sample(a, g, random_direction(n, rng), TAU_GRID[index % len(TAU_GRID)])


def aggregate(name: str, results: Iterable[dict], what: str) -> CheckEvaluation:
    """Fold tool results ({'status', 'slack'} dicts) into one evaluation.

    A check passes when every slack is nonnegative; a tool error makes the
    evaluation NOT_AVAILABLE unless something already failed.
    """
    slacks, errors = [], []
    for result in results:
        if result["status"] == "error":
            errors.append(result["error_message"])
        else:
            slacks.append(result["slack"])
    failures = sum(1 for s in slacks if s < 0)
    worst = min(slacks) if slacks else None
    if failures:
        verdict = Verdict.FAIL
    elif errors or not slacks:
        verdict = Verdict.NOT_AVAILABLE
    else:
        verdict = Verdict.PASS
    text = f"{what}: {len(slacks) - failures}/{len(slacks)} samples hold"
    if errors:
        text += f"; {len(errors)} errors, first: {errors[0]}"
    logger.debug("%s -> %s (worst slack %s)", name, verdict.value, worst)
    return CheckEvaluation(name=name, verdict=verdict, evaluation=text, worst_slack=worst, samples=len(slacks))
