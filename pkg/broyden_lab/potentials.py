"""
Potential functions for measuring how far G is from a target A, and the
lower bounds on their decrease after one update.

V(A, G)   = ln Det(A^-1, G)                      log-det barrier, >= 0 when A <= G
psi(G, A) = ln Det(A^-1, G) - <G^-1, G - A>      augmented barrier, always >= 0
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .broyden_update import TauParam, broyd, nu
from .operator_core import OperatorRole, PrimalVector, SpdOperator, rel_eigen_range
from .shared_libraries.errors import InvalidParameterError, RoleMismatchError

logger = logging.getLogger(__name__)

ABS_SLACK = 1e-9
REL_SLACK = 1e-9

SIX_THIRTEENTHS = 6.0 / 13.0
SQRT3_CONSTANT = math.sqrt(3.0) / (2.0 + math.sqrt(3.0))


@dataclass(frozen=True)
class PotentialSnapshot:
    v: float
    psi: float
    nu: float


def _check_primal_to_dual(*ops: SpdOperator) -> None:
    for op in ops:
        if op.role is not OperatorRole.PRIMAL_TO_DUAL:
            raise RoleMismatchError("potentials compare operators mapping E to E*")
    if len({op.dim for op in ops}) != 1:
        raise InvalidParameterError("operators must have the same dimension")


def logdet_barrier(a: SpdOperator, g: SpdOperator) -> float:
    _check_primal_to_dual(a, g)
    return g.logdet - a.logdet


def augmented_barrier(g: SpdOperator, a: SpdOperator) -> float:
    _check_primal_to_dual(g, a)
    trace = float(np.trace(g.solve_array(a.entries)))
    return g.logdet - a.logdet - g.dim + trace


def logdet_bregman(g: SpdOperator, a: SpdOperator, b: SpdOperator) -> float:
    """
    Bregman divergence of d(X) = -ln Det(B^-1, X) between A and the center G.

    Equals augmented_barrier(G, A) for every reference B.
    """
    _check_primal_to_dual(g, a, b)

    def d(x: SpdOperator) -> float:
        return -(x.logdet - b.logdet)

    # grad d(G) = -G^-1
    grad_pairing = -float(np.trace(g.solve_array(a.entries - g.entries)))
    return d(a) - d(g) - grad_pairing


def potential_snapshot(a: SpdOperator, g: SpdOperator, u: PrimalVector) -> PotentialSnapshot:
    return PotentialSnapshot(
        v=logdet_barrier(a, g), psi=augmented_barrier(g, a), nu=nu(a, g, u)
    )


def _check_at_least_one(**params: float) -> None:
    for name, value in params.items():
        if not value >= 1.0:
            raise InvalidParameterError(f"{name} must be at least 1, got {value!r}")


def progress_lb_V(eta: float, tau: TauParam | float, nu_value: float) -> float:
    """Guaranteed decrease of V(A, .) under one update when A <= G <= eta A."""
    _check_at_least_one(eta=eta)
    t = TauParam.coerce(tau).tau
    return math.log1p((t / eta + 1.0 - t) * nu_value ** 2)


def progress_lb_psi(xi: float, eta: float, tau: TauParam | float, nu_value: float) -> float:
    """Guaranteed decrease of psi(., A) under one update when A / xi <= G <= eta A."""
    _check_at_least_one(xi=xi, eta=eta)
    t = TauParam.coerce(tau).tau
    return SIX_THIRTEENTHS * math.log1p((t / (xi * eta) + 1.0 - t) * nu_value ** 2)


def scalar_gap(alpha: float, beta: float, constant: float = SIX_THIRTEENTHS) -> tuple[float, float]:
    """
    Both sides of alpha - ln beta - 1 >= constant * ln(alpha + 1/beta - 1).

    The inequality holds for alpha >= beta > 0 with constant sqrt(3)/(2+sqrt(3))
    and hence with 6/13.
    """
    if not (beta > 0 and alpha >= beta):
        raise InvalidParameterError(f"need alpha >= beta > 0, got alpha={alpha!r}, beta={beta!r}")
    if constant > SQRT3_CONSTANT:
        raise InvalidParameterError("constant exceeds sqrt(3)/(2+sqrt(3))")
    lhs = alpha - math.log(beta) - 1.0
    rhs = constant * math.log(alpha + 1.0 / beta - 1.0)
    return lhs, rhs


def metric_change_lb(
    a: SpdOperator, g: SpdOperator, u: PrimalVector, tau: TauParam | float
) -> tuple[float, float]:
    """
    Returns (nu^2, rhs) with rhs = <(G-A) G+^-1 (G-A) u, u> / ((1 + xi) <Gu, u>)
    for the tight xi = 1 / lambda_min(G relative to A).
    """
    xi = 1.0 / rel_eigen_range(g, a).min_rel
    result = broyd(a, g, u, tau)
    w = g.entries @ u.coords - a.entries @ u.coords
    num = float(w @ (result.g_plus_inv.entries @ w))
    den = float(u.coords @ (g.entries @ u.coords))
    return nu(a, g, u) ** 2, num / ((1.0 + xi) * den)


def tolerance(lhs: float) -> float:
    return ABS_SLACK + REL_SLACK * abs(lhs)


def slack(lhs: float, rhs: float) -> float:
    """lhs - rhs; the inequality lhs >= rhs is accepted when this is >= -tolerance(lhs)."""
    return lhs - rhs


def holds(lhs: float, rhs: float) -> bool:
    return slack(lhs, rhs) >= -tolerance(lhs)
