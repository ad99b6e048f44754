import numpy as np

from ...potentials import SIX_THIRTEENTHS, SQRT3_CONSTANT, scalar_gap, tolerance
from ...shared_libraries.errors import BroydenLabError

BETA_RANGE = (1e-6, 1e6)
RATIO_RANGE = (1.0, 1e6)


def log_spaced_pairs(side: int) -> list[tuple[float, float]]:
    """side x side pairs alpha >= beta > 0: beta log-spaced, alpha = beta * ratio."""
    betas = np.geomspace(*BETA_RANGE, side)
    ratios = np.geomspace(*RATIO_RANGE, side)
    return [(float(b * r), float(b)) for b in betas for r in ratios]


def check_scalar_pair(alpha: float, beta: float, constant: float) -> dict:
    """Evaluates alpha - ln beta - 1 >= constant * ln(alpha + 1/beta - 1) at one point.

    Args:
        alpha (float): first argument, at least beta
        beta (float): positive second argument
        constant (float): multiplier of the right-hand side

    Returns:
        dict: 'status'; on success 'lhs', 'rhs' and 'slack'.
    """
    try:
        lhs, rhs = scalar_gap(alpha, beta, constant)
    except BroydenLabError as exc:
        return {"status": "error", "error_message": str(exc)}
    return {"status": "success", "lhs": lhs, "rhs": rhs, "slack": lhs - rhs + tolerance(lhs)}


def check_log_argument(alpha: float, beta: float) -> dict:
    """alpha + 1/beta - 1 >= 1, so the right-hand side is never negative."""
    arg = alpha + 1.0 / beta - 1.0
    return {"status": "success", "argument": arg, "slack": arg - 1.0 + 1e-12 * (alpha + 1.0 / beta)}


CONSTANTS = {"sqrt3": SQRT3_CONSTANT, "six_thirteenths": SIX_THIRTEENTHS}
