"""
Convex Broyden class of quasi-Newton updates.

Broyd_tau(A, G, u) moves the approximation G towards the target A along the
direction u. tau weights the DFP member in the inverse update; phi_tau is the
corresponding weight in the primal update. tau = 1 is DFP, tau = 0 is BFGS.
"""

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .operator_core import (
    DualVector,
    OperatorRole,
    PrimalVector,
    SpdOperator,
    norm_dual,
    norm_primal,
)
from .shared_libraries.errors import (
    DimensionMismatchError,
    InvalidParameterError,
    RoleMismatchError,
    UndefinedDirectionError,
)

logger = logging.getLogger(__name__)

ZERO_DIRECTION_NORM = 1e-300


@dataclass(frozen=True)
class TauParam:
    tau: float

    def __post_init__(self):
        t = float(self.tau)
        if not (0.0 <= t <= 1.0):
            raise InvalidParameterError(f"tau must lie in [0, 1], got {self.tau!r}")
        object.__setattr__(self, "tau", t)

    @classmethod
    def coerce(cls, value: "TauParam | float") -> "TauParam":
        return value if isinstance(value, TauParam) else cls(value)


BFGS = TauParam(0.0)
DFP = TauParam(1.0)


@dataclass(frozen=True, eq=False)
class UpdateResult:
    g_plus: SpdOperator
    g_plus_inv: SpdOperator
    phi: float
    det_ratio: float


class _Curvatures(NamedTuple):
    """Rayleigh quantities of (A, G) along u."""
    u: np.ndarray
    au: np.ndarray
    gu: np.ndarray
    p: np.ndarray      # G^-1 A u
    a: float           # <Au, u>
    g: float           # <Gu, u>
    c: float           # <A G^-1 A u, u>


def _check_pair(a: SpdOperator, g: SpdOperator, u: PrimalVector) -> None:
    if a.role is not OperatorRole.PRIMAL_TO_DUAL or g.role is not OperatorRole.PRIMAL_TO_DUAL:
        raise RoleMismatchError("target and approximation must both map E to E*")
    if not isinstance(u, PrimalVector):
        raise RoleMismatchError("the update direction must be a primal vector")
    if not (a.dim == g.dim == u.dim):
        raise DimensionMismatchError(f"dimensions differ: A {a.dim}, G {g.dim}, u {u.dim}")


def is_zero_direction(u: PrimalVector) -> bool:
    return float(np.linalg.norm(u.coords)) <= ZERO_DIRECTION_NORM


def _curvatures(
    a: SpdOperator, g: SpdOperator, u: PrimalVector, g_inv: SpdOperator | None = None
) -> _Curvatures:
    _check_pair(a, g, u)
    if is_zero_direction(u):
        raise UndefinedDirectionError("direction u must be nonzero")
    uc = u.coords
    au = a.entries @ uc
    gu = g.entries @ uc
    p = g_inv.entries @ au if g_inv is not None else g.solve_array(au)
    return _Curvatures(uc, au, gu, p, float(au @ uc), float(gu @ uc), float(au @ p))


def _phi_from(cv: _Curvatures, tau: float) -> float:
    dfp_part = tau * cv.a / cv.c
    denom = dfp_part + (1.0 - tau) * cv.g / cv.a
    if not denom > 0:
        raise ArithmeticError(f"phi denominator is not positive ({denom!r})")
    return dfp_part / denom


def phi_tau(a: SpdOperator, g: SpdOperator, u: PrimalVector, tau: TauParam | float) -> float:
    """Weight of the DFP term in the primal update equivalent to tau."""
    t = TauParam.coerce(tau).tau
    return _phi_from(_curvatures(a, g, u), t)


def _dfp_matrix(g: SpdOperator, cv: _Curvatures) -> np.ndarray:
    cross = np.outer(cv.au, cv.gu)
    return (
        g.entries
        - (cross + cross.T) / cv.a
        + (cv.g / cv.a + 1.0) * np.outer(cv.au, cv.au) / cv.a
    )


def _bfgs_matrix(g: SpdOperator, cv: _Curvatures) -> np.ndarray:
    return g.entries - np.outer(cv.gu, cv.gu) / cv.g + np.outer(cv.au, cv.au) / cv.a


def dfp_bracket(a: SpdOperator, g: SpdOperator, u: PrimalVector) -> SpdOperator:
    """The DFP term of the update (phi = 1)."""
    return SpdOperator.from_matrix(_dfp_matrix(g, _curvatures(a, g, u)))


def bfgs_bracket(a: SpdOperator, g: SpdOperator, u: PrimalVector) -> SpdOperator:
    """The BFGS term of the update (phi = 0)."""
    return SpdOperator.from_matrix(_bfgs_matrix(g, _curvatures(a, g, u)))


def _inverse_matrix(h: np.ndarray, cv: _Curvatures, tau: float) -> np.ndarray:
    uu = np.outer(cv.u, cv.u)
    dfp = h - np.outer(cv.p, cv.p) / cv.c + uu / cv.a
    cross = np.outer(cv.p, cv.u)
    bfgs = h - (cross + cross.T) / cv.a + (cv.c / cv.a + 1.0) * uu / cv.a
    return tau * dfp + (1.0 - tau) * bfgs


def _det_ratio_from(cv: _Curvatures, tau: float) -> float:
    return tau * cv.a / cv.c + (1.0 - tau) * cv.g / cv.a


def broyd(
    a: SpdOperator,
    g: SpdOperator,
    u: PrimalVector,
    tau: TauParam | float,
    g_inv: SpdOperator | None = None,
) -> UpdateResult:
    """
    Apply Broyd_tau(A, G, u).

    The inverse of the result is assembled from its own rank-two formula, not by
    inverting G_plus. Pass g_inv (the current G^-1) to skip one factorization
    solve. A zero direction leaves G unchanged and reports phi as nan.
    """
    t = TauParam.coerce(tau).tau
    _check_pair(a, g, u)
    if g_inv is not None and (g_inv.role is not OperatorRole.DUAL_TO_PRIMAL or g_inv.dim != g.dim):
        raise RoleMismatchError("g_inv must be a DualToPrimal operator of the same dimension")
    if is_zero_direction(u):
        inv = g_inv if g_inv is not None else g.inverse()
        return UpdateResult(g, inv, math.nan, 1.0)

    cv = _curvatures(a, g, u, g_inv)
    phi = _phi_from(cv, t)
    g_plus = phi * _dfp_matrix(g, cv) + (1.0 - phi) * _bfgs_matrix(g, cv)
    h = g_inv.entries if g_inv is not None else g.solve_array(np.eye(g.dim))
    h_plus = _inverse_matrix(h, cv, t)
    return UpdateResult(
        g_plus=SpdOperator.from_matrix(g_plus),
        g_plus_inv=SpdOperator.from_matrix(h_plus, OperatorRole.DUAL_TO_PRIMAL),
        phi=phi,
        det_ratio=_det_ratio_from(cv, t),
    )


def broyd_inverse(
    a: SpdOperator, g: SpdOperator, u: PrimalVector, tau: TauParam | float
) -> SpdOperator:
    """Inverse of Broyd_tau(A, G, u), from the inverse-update formula."""
    t = TauParam.coerce(tau).tau
    cv = _curvatures(a, g, u)
    h = g.solve_array(np.eye(g.dim))
    return SpdOperator.from_matrix(_inverse_matrix(h, cv, t), OperatorRole.DUAL_TO_PRIMAL)


def broyd_det_ratio(
    a: SpdOperator, g: SpdOperator, u: PrimalVector, tau: TauParam | float
) -> float:
    """Det(G_plus^-1, G)."""
    t = TauParam.coerce(tau).tau
    return _det_ratio_from(_curvatures(a, g, u), t)


def nu(a: SpdOperator, g: SpdOperator, u: PrimalVector) -> float:
    """||(G - A) u||*_G / ||u||_A."""
    _check_pair(a, g, u)
    if is_zero_direction(u):
        raise UndefinedDirectionError("nu is undefined for u = 0")
    w = DualVector(g.entries @ u.coords - a.entries @ u.coords)
    return norm_dual(g, w) / norm_primal(a, u)


def nu_squared_rayleigh(a: SpdOperator, g: SpdOperator, u: PrimalVector) -> float:
    """nu^2 expanded as <Gu,u>/<Au,u> + <AG^-1Au,u>/<Au,u> - 2."""
    cv = _curvatures(a, g, u)
    return cv.g / cv.a + cv.c / cv.a - 2.0


def inverse_residual(g_plus: SpdOperator, g_plus_inv: SpdOperator) -> float:
    """Spectral norm of G_plus H_plus - I."""
    prod = g_plus.entries @ g_plus_inv.entries
    return float(np.linalg.norm(prod - np.eye(g_plus.dim), 2))


def secant_error(result: UpdateResult, a: SpdOperator, u: PrimalVector) -> float:
    """||G_plus u - A u|| relative to ||A u||."""
    au = a.entries @ u.coords
    scale = float(np.linalg.norm(au))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(result.g_plus.entries @ u.coords - au)) / scale
