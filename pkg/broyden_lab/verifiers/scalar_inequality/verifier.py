import math

from ...shared_libraries.types import CheckEvaluation, VerifyRequest
from ..base import Verifier, aggregate
from .tools import CONSTANTS, check_log_argument, check_scalar_pair, log_spaced_pairs

OUTPUT_KEY = "scalar_inequality"


def grid_side(trials: int) -> int:
    # 1000 trials give the 100 x 100 grid
    return max(10, math.ceil(math.sqrt(10 * trials)))


def run_scalar_inequality(request: VerifyRequest) -> list[CheckEvaluation]:
    pairs = log_spaced_pairs(grid_side(request.trials))
    evaluations = [
        aggregate(
            f"scalar_gap_{label}",
            (check_scalar_pair(alpha, beta, constant) for alpha, beta in pairs),
            f"scalar inequality with constant {constant:.6f}",
        )
        for label, constant in CONSTANTS.items()
    ]
    evaluations.append(aggregate(
        "log_argument",
        (check_log_argument(alpha, beta) for alpha, beta in pairs),
        "alpha + 1/beta - 1 >= 1",
    ))
    return evaluations


scalar_inequality_verifier = Verifier(
    name="scalar_inequality",
    description="Deterministic grid check of the scalar inequality behind the psi decrease",
    output_key=OUTPUT_KEY,
    run=run_scalar_inequality,
)
