"""
Operators between the primal space E and its dual E*, in a fixed basis.

Primal and dual vectors are both coordinate arrays; the wrapper types only
record which space a value lives in. Symmetric positive definite operators
carry a role (E -> E* or E* -> E) and their Cholesky factor, so that inverses
are applied through triangular solves.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import linalg

from .shared_libraries.errors import (
    DimensionMismatchError,
    InvalidParameterError,
    NotPositiveDefiniteError,
    RoleMismatchError,
)

logger = logging.getLogger(__name__)

SYMMETRY_RTOL = 1e-12
PIVOT_RTOL = 1e-14
LOEWNER_TOL = 1e-10


class OperatorRole(str, Enum):
    PRIMAL_TO_DUAL = "PrimalToDual"
    DUAL_TO_PRIMAL = "DualToPrimal"

    @property
    def flipped(self) -> "OperatorRole":
        if self is OperatorRole.PRIMAL_TO_DUAL:
            return OperatorRole.DUAL_TO_PRIMAL
        return OperatorRole.PRIMAL_TO_DUAL


def _frozen_coords(coords) -> np.ndarray:
    arr = np.array(coords, dtype=float).reshape(-1)
    if arr.size == 0:
        raise DimensionMismatchError("vectors must have at least one coordinate")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector coordinates must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PrimalVector:
    """A point or direction in E (x, u, h)."""
    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", _frozen_coords(self.coords))

    @property
    def dim(self) -> int:
        return self.coords.shape[0]

    @classmethod
    def zeros(cls, n: int) -> "PrimalVector":
        return cls(np.zeros(n))

    def __add__(self, other: "PrimalVector") -> "PrimalVector":
        _check_same_type(self, other)
        return PrimalVector(self.coords + other.coords)

    def __sub__(self, other: "PrimalVector") -> "PrimalVector":
        _check_same_type(self, other)
        return PrimalVector(self.coords - other.coords)

    def scaled(self, c: float) -> "PrimalVector":
        return PrimalVector(c * self.coords)


@dataclass(frozen=True, eq=False)
class DualVector:
    """A linear functional on E (s, gradients, b)."""
    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", _frozen_coords(self.coords))

    @property
    def dim(self) -> int:
        return self.coords.shape[0]

    @classmethod
    def zeros(cls, n: int) -> "DualVector":
        return cls(np.zeros(n))

    def __add__(self, other: "DualVector") -> "DualVector":
        _check_same_type(self, other)
        return DualVector(self.coords + other.coords)

    def __sub__(self, other: "DualVector") -> "DualVector":
        _check_same_type(self, other)
        return DualVector(self.coords - other.coords)

    def scaled(self, c: float) -> "DualVector":
        return DualVector(c * self.coords)


def _check_same_type(a, b) -> None:
    if type(a) is not type(b):
        raise RoleMismatchError(f"cannot combine {type(a).__name__} with {type(b).__name__}")
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dimensions differ: {a.dim} != {b.dim}")


@dataclass(frozen=True, eq=False)
class SpdOperator:
    """Self-adjoint positive definite operator, validated by a Cholesky factorization."""
    entries: np.ndarray
    role: OperatorRole = OperatorRole.PRIMAL_TO_DUAL
    _chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m = np.array(self.entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatchError(f"operator must be square, got shape {m.shape}")
        if m.shape[0] == 0:
            raise DimensionMismatchError("operator dimension must be positive")
        if not np.all(np.isfinite(m)):
            raise NotPositiveDefiniteError("operator has non-finite entries")
        scale = float(np.max(np.abs(m)))
        asym = float(np.max(np.abs(m - m.T)))
        if asym > SYMMETRY_RTOL * scale:
            raise NotPositiveDefiniteError(f"operator is not symmetric (asymmetry {asym:.3e})")
        try:
            chol = linalg.cholesky(m, lower=True, check_finite=False)
        except linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError(f"Cholesky factorization failed: {exc}") from exc
        pivots = np.diag(chol) ** 2
        if float(np.min(pivots)) <= PIVOT_RTOL * scale:
            raise NotPositiveDefiniteError(
                f"smallest Cholesky pivot {float(np.min(pivots)):.3e} below threshold"
            )
        m.setflags(write=False)
        chol.setflags(write=False)
        object.__setattr__(self, "entries", m)
        object.__setattr__(self, "role", OperatorRole(self.role))
        object.__setattr__(self, "_chol", chol)

    @classmethod
    def from_matrix(
        cls, m, role: OperatorRole = OperatorRole.PRIMAL_TO_DUAL, symmetrize: bool = True
    ) -> "SpdOperator":
        arr = np.asarray(m, dtype=float)
        if symmetrize and arr.ndim == 2 and arr.shape[0] == arr.shape[1]:
            arr = 0.5 * (arr + arr.T)
        return cls(arr, role)

    @classmethod
    def identity(cls, n: int, role: OperatorRole = OperatorRole.PRIMAL_TO_DUAL) -> "SpdOperator":
        if n < 1:
            raise DimensionMismatchError("operator dimension must be positive")
        return cls(np.eye(n), role)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self._chol))))

    @property
    def spectral_norm(self) -> float:
        return float(linalg.eigvalsh(self.entries, subset_by_index=[self.dim - 1, self.dim - 1])[0])

    def scaled(self, c: float) -> "SpdOperator":
        if c <= 0:
            raise InvalidParameterError("SPD operators can only be scaled by positive factors")
        return SpdOperator(c * self.entries, self.role)

    def apply(self, v):
        """Map a vector of the domain space to the codomain space."""
        _check_dim(self, v)
        if self.role is OperatorRole.PRIMAL_TO_DUAL:
            if not isinstance(v, PrimalVector):
                raise RoleMismatchError("a PrimalToDual operator acts on primal vectors")
            return DualVector(self.entries @ v.coords)
        if not isinstance(v, DualVector):
            raise RoleMismatchError("a DualToPrimal operator acts on dual vectors")
        return PrimalVector(self.entries @ v.coords)

    def solve_array(self, rhs: np.ndarray) -> np.ndarray:
        return linalg.cho_solve((self._chol, True), rhs, check_finite=False)

    def solve(self, v):
        """Apply the inverse operator through the stored factorization."""
        _check_dim(self, v)
        if self.role is OperatorRole.PRIMAL_TO_DUAL:
            if not isinstance(v, DualVector):
                raise RoleMismatchError("inverse of a PrimalToDual operator acts on dual vectors")
            return PrimalVector(self.solve_array(v.coords))
        if not isinstance(v, PrimalVector):
            raise RoleMismatchError("inverse of a DualToPrimal operator acts on primal vectors")
        return DualVector(self.solve_array(v.coords))

    def inverse(self) -> "SpdOperator":
        inv = self.solve_array(np.eye(self.dim))
        return SpdOperator.from_matrix(inv, self.role.flipped)

    def whiten(self, m: np.ndarray) -> np.ndarray:
        """Return C^-1 M C^-T for the Cholesky factor C of this operator."""
        left = linalg.solve_triangular(self._chol, m, lower=True, check_finite=False)
        return linalg.solve_triangular(self._chol, left.T, lower=True, check_finite=False).T


@dataclass(frozen=True)
class EigenRange:
    """Bracket of relative eigenvalues: min_rel * A <= G <= max_rel * A."""
    min_rel: float
    max_rel: float

    def __post_init__(self):
        if not (self.min_rel > 0 and self.max_rel > 0):
            raise InvalidParameterError("relative eigenvalues must be positive")
        if self.min_rel > self.max_rel:
            raise InvalidParameterError("min_rel must not exceed max_rel")

    @property
    def xi(self) -> float:
        """Smallest xi >= 1 with A / xi <= G."""
        return max(1.0, 1.0 / self.min_rel)

    @property
    def eta(self) -> float:
        """Smallest eta >= 1 with G <= eta * A."""
        return max(1.0, self.max_rel)

    def within(self, other: "EigenRange", tol: float = 1e-9) -> bool:
        return self.min_rel >= other.min_rel - tol and self.max_rel <= other.max_rel + tol


def _check_dim(a, b) -> None:
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dimensions differ: {a.dim} != {b.dim}")


def _require_role(op: SpdOperator, role: OperatorRole, what: str) -> None:
    if op.role is not role:
        raise RoleMismatchError(f"{what} must have role {role.value}, got {op.role.value}")


def pair(s: DualVector, x: PrimalVector) -> float:
    """<s, x>."""
    if not isinstance(s, DualVector) or not isinstance(x, PrimalVector):
        raise RoleMismatchError("pair expects a dual vector and a primal vector")
    _check_dim(s, x)
    return float(s.coords @ x.coords)


def rel_trace(h: SpdOperator, a: SpdOperator) -> float:
    """<H, A> = Tr(HA)."""
    _require_role(h, OperatorRole.DUAL_TO_PRIMAL, "H")
    _require_role(a, OperatorRole.PRIMAL_TO_DUAL, "A")
    _check_dim(h, a)
    return float(np.einsum("ij,ji->", h.entries, a.entries))


def rel_logdet(h: SpdOperator, a: SpdOperator) -> float:
    """ln Det(HA), as logdet A - logdet H^-1."""
    _require_role(h, OperatorRole.DUAL_TO_PRIMAL, "H")
    _require_role(a, OperatorRole.PRIMAL_TO_DUAL, "A")
    _check_dim(h, a)
    return a.logdet + h.logdet


def rel_det(h: SpdOperator, a: SpdOperator) -> float:
    """Det(H, A) = Det(HA)."""
    return math.exp(rel_logdet(h, a))


def norm_primal(a: SpdOperator, h: PrimalVector) -> float:
    """||h||_A = <Ah, h>^(1/2)."""
    _require_role(a, OperatorRole.PRIMAL_TO_DUAL, "A")
    _check_dim(a, h)
    return math.sqrt(max(float(h.coords @ (a.entries @ h.coords)), 0.0))


def norm_dual(a: SpdOperator, s: DualVector) -> float:
    """||s||*_A = <s, A^-1 s>^(1/2), via the factorization of A."""
    _require_role(a, OperatorRole.PRIMAL_TO_DUAL, "A")
    _check_dim(a, s)
    z = linalg.solve_triangular(a._chol, s.coords, lower=True, check_finite=False)
    return float(np.linalg.norm(z))


def rel_eigen_range(g: SpdOperator, a: SpdOperator) -> EigenRange:
    """Extreme eigenvalues of G relative to A."""
    if g.role is not a.role:
        raise RoleMismatchError("relative spectrum needs operators of the same role")
    _check_dim(g, a)
    reduced = a.whiten(g.entries)
    eigs = linalg.eigvalsh(0.5 * (reduced + reduced.T))
    lo, hi = float(eigs[0]), float(eigs[-1])
    if lo <= 0:
        raise NotPositiveDefiniteError("relative spectrum has a nonpositive eigenvalue")
    return EigenRange(lo, hi)


def loewner_margin(a1: SpdOperator, a2: SpdOperator) -> float:
    """Smallest eigenvalue of A2 - A1, relative to ||A2||."""
    if a1.role is not a2.role:
        raise RoleMismatchError("Loewner comparison needs operators of the same role")
    _check_dim(a1, a2)
    diff = a2.entries - a1.entries
    lo = float(linalg.eigvalsh(0.5 * (diff + diff.T), subset_by_index=[0, 0])[0])
    return lo / a2.spectral_norm


def loewner_leq(a1: SpdOperator, a2: SpdOperator, tol: float = LOEWNER_TOL) -> bool:
    """A1 <= A2 in the Loewner order, up to tol * ||A2||."""
    return loewner_margin(a1, a2) >= -tol


def spd_solve(a: SpdOperator, s: DualVector) -> PrimalVector:
    """Solve A x = s."""
    _require_role(a, OperatorRole.PRIMAL_TO_DUAL, "A")
    return a.solve(s)
