"""
Problem instances with certified constants.

Two families are supported:

* quadratics f(x) = 1/2 <Ax, x> - <b, x> with mu B <= A <= L B (M = 0);
* regularized log-sum-exp f(x) = ln sum_i exp(<a_i, x> + b_i) + mu/2 <Bx, x>,
  with gamma = max_i ||a_i||*, L = gamma^2 + mu and M = 2 gamma^3 / mu^(3/2).

Every instance exposes value / gradient / hessian oracles and its constants
(n, mu, L, M, B) through ProblemInstance.
"""

import hashlib
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy import optimize, special

from .operator_core import (
    DualVector,
    PrimalVector,
    SpdOperator,
    loewner_margin,
    norm_dual,
    norm_primal,
    rel_eigen_range,
)
from .shared_libraries.errors import DimensionMismatchError, InvalidParameterError
from .shared_libraries.sampling import make_rng, random_orthogonal
from .shared_libraries.types import InstanceSpec, ProblemKind

logger = logging.getLogger(__name__)

CONSTANT_TOL = 1e-12
SANDWICH_TOL = 1e-8
GRADIENT_EPS = float(np.finfo(float).eps)


@dataclass(frozen=True, eq=False)
class QuadraticProblem:
    a_op: SpdOperator
    b: DualVector
    b_ref: SpdOperator
    mu: float
    ell: float

    def __post_init__(self):
        if not (self.a_op.dim == self.b.dim == self.b_ref.dim):
            raise DimensionMismatchError("A, b and B must share the dimension")
        if not (0 < self.mu <= self.ell):
            raise InvalidParameterError(f"need 0 < mu <= L, got mu={self.mu}, L={self.ell}")
        rng_ = rel_eigen_range(self.a_op, self.b_ref)
        if rng_.min_rel < self.mu * (1 - 1e-10) or rng_.max_rel > self.ell * (1 + 1e-10):
            raise InvalidParameterError(
                f"A has relative spectrum [{rng_.min_rel:.6g}, {rng_.max_rel:.6g}] "
                f"outside [mu, L] = [{self.mu:.6g}, {self.ell:.6g}]"
            )

    @property
    def n(self) -> int:
        return self.a_op.dim

    @property
    def m_const(self) -> float:
        return 0.0

    def value(self, x: PrimalVector) -> float:
        return 0.5 * float(x.coords @ (self.a_op.entries @ x.coords)) - float(self.b.coords @ x.coords)

    def gradient(self, x: PrimalVector) -> DualVector:
        return DualVector(self.a_op.entries @ x.coords - self.b.coords)

    def hessian(self, x: PrimalVector) -> SpdOperator:
        return self.a_op


@dataclass(frozen=True, eq=False)
class LogSumExpProblem:
    a_rows: np.ndarray
    b_shift: np.ndarray
    mu: float
    b_ref: SpdOperator
    gamma: float
    m: int = field(init=False)

    def __post_init__(self):
        rows = np.array(self.a_rows, dtype=float)
        shifts = np.array(self.b_shift, dtype=float).reshape(-1)
        if rows.ndim != 2 or rows.shape[1] != self.b_ref.dim:
            raise DimensionMismatchError("a_rows must be an m x n array")
        if shifts.shape[0] != rows.shape[0]:
            raise DimensionMismatchError("b_shift must have one entry per row")
        if self.mu <= 0:
            raise InvalidParameterError("mu must be positive")
        tight = max_dual_norm(rows, self.b_ref)
        if self.gamma < tight - CONSTANT_TOL:
            raise InvalidParameterError(f"gamma={self.gamma} is below max ||a_i||* = {tight}")
        rows.setflags(write=False)
        shifts.setflags(write=False)
        object.__setattr__(self, "a_rows", rows)
        object.__setattr__(self, "b_shift", shifts)
        object.__setattr__(self, "m", rows.shape[0])

    @property
    def n(self) -> int:
        return self.b_ref.dim

    @property
    def ell(self) -> float:
        return self.gamma ** 2 + self.mu

    @property
    def m_const(self) -> float:
        return 2.0 * self.gamma ** 3 / self.mu ** 1.5

    def value(self, x: PrimalVector) -> float:
        return lse_value_grad_hess(self, x).value

    def gradient(self, x: PrimalVector) -> DualVector:
        pi = softmax_weights(self, x)
        return DualVector(self.a_rows.T @ pi + self.mu * (self.b_ref.entries @ x.coords))

    def hessian(self, x: PrimalVector) -> SpdOperator:
        return SpdOperator.from_matrix(_lse_hessian_matrix(self, x.coords))


def max_dual_norm(rows: np.ndarray, b_ref: SpdOperator) -> float:
    return max(norm_dual(b_ref, DualVector(row)) for row in rows)


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    kind: ProblemKind
    payload: QuadraticProblem | LogSumExpProblem

    def __post_init__(self):
        expected = QuadraticProblem if self.kind is ProblemKind.QUADRATIC else LogSumExpProblem
        if not isinstance(self.payload, expected):
            raise InvalidParameterError(f"{self.kind.value} instance needs a {expected.__name__}")

    @classmethod
    def wrap(cls, p: "ProblemInstance | QuadraticProblem | LogSumExpProblem") -> "ProblemInstance":
        if isinstance(p, ProblemInstance):
            return p
        if isinstance(p, QuadraticProblem):
            return cls(ProblemKind.QUADRATIC, p)
        return cls(ProblemKind.LOG_SUM_EXP, p)

    @property
    def n(self) -> int:
        return self.payload.n

    @property
    def mu(self) -> float:
        return self.payload.mu

    @property
    def ell(self) -> float:
        return self.payload.ell

    @property
    def m_const(self) -> float:
        return self.payload.m_const

    @property
    def b_ref(self) -> SpdOperator:
        return self.payload.b_ref

    def value(self, x: PrimalVector) -> float:
        return self.payload.value(x)

    def gradient(self, x: PrimalVector) -> DualVector:
        return self.payload.gradient(x)

    def hessian(self, x: PrimalVector) -> SpdOperator:
        return self.payload.hessian(x)


class LseEvaluation(NamedTuple):
    value: float
    gradient: DualVector
    hessian: SpdOperator


@dataclass(frozen=True, eq=False)
class IntegralHessian:
    j_op: SpdOperator
    quad_order: int
    est_error: float

    @property
    def rel_error(self) -> float:
        return self.est_error / self.j_op.spectral_norm


def quad_make(
    spectrum,
    b: DualVector | None = None,
    seed: int | None = 0,
    b_ref: SpdOperator | None = None,
    mu: float | None = None,
    ell: float | None = None,
) -> QuadraticProblem:
    """Quadratic whose Hessian has the given eigenvalues relative to B."""
    d = np.asarray(spectrum, dtype=float).reshape(-1)
    if d.size == 0:
        raise DimensionMismatchError("spectrum must be nonempty")
    if np.any(d <= 0) or not np.all(np.isfinite(d)):
        raise InvalidParameterError("spectrum entries must be positive and finite")
    n = d.shape[0]
    rng = make_rng(seed)
    b_ref = b_ref if b_ref is not None else SpdOperator.identity(n)
    if b_ref.dim != n:
        raise DimensionMismatchError("B must match the spectrum length")
    q = random_orthogonal(n, rng)
    chol = np.linalg.cholesky(b_ref.entries)
    a = chol @ ((q * d) @ q.T) @ chol.T
    if b is None:
        b = DualVector(rng.standard_normal(n))
    return QuadraticProblem(
        a_op=SpdOperator.from_matrix(a),
        b=b,
        b_ref=b_ref,
        mu=float(d.min()) if mu is None else mu,
        ell=float(d.max()) if ell is None else ell,
    )


def lse_make(
    a_rows,
    b_shift,
    mu: float,
    gamma: float | None = None,
    b_ref: SpdOperator | None = None,
) -> LogSumExpProblem:
    rows = np.atleast_2d(np.asarray(a_rows, dtype=float))
    b_ref = b_ref if b_ref is not None else SpdOperator.identity(rows.shape[1])
    tight = max_dual_norm(rows, b_ref)
    return LogSumExpProblem(
        a_rows=rows, b_shift=b_shift, mu=mu, b_ref=b_ref,
        gamma=tight if gamma is None else gamma,
    )


def lse_random(
    n: int,
    m: int,
    gamma: float,
    mu: float,
    seed: int | None = 0,
    b_ref: SpdOperator | None = None,
    b_shift=None,
) -> LogSumExpProblem:
    """Random rows with dual norms in [gamma/2, gamma]; the largest is exactly gamma."""
    rng = make_rng(seed)
    b_ref = b_ref if b_ref is not None else SpdOperator.identity(n)
    raw = rng.standard_normal((m, n))
    norms = np.array([norm_dual(b_ref, DualVector(row)) for row in raw])
    target = gamma * rng.uniform(0.5, 1.0, size=m)
    target[int(np.argmax(target))] = gamma
    rows = raw * (target / norms)[:, None]
    if b_shift is None:
        b_shift = rng.standard_normal(m)
    return lse_make(rows, b_shift, mu, b_ref=b_ref)


def softmax_weights(p: LogSumExpProblem, x: PrimalVector) -> np.ndarray:
    """pi_i(x), shifted by the largest exponent."""
    return special.softmax(p.a_rows @ x.coords + p.b_shift)


def _lse_hessian_matrix(p: LogSumExpProblem, x: np.ndarray) -> np.ndarray:
    pi = special.softmax(p.a_rows @ x + p.b_shift)
    g0 = p.a_rows.T @ pi
    return (p.a_rows.T * pi) @ p.a_rows - np.outer(g0, g0) + p.mu * p.b_ref.entries


def lse_value_grad_hess(p: LogSumExpProblem, x: PrimalVector) -> LseEvaluation:
    z = p.a_rows @ x.coords + p.b_shift
    bx = p.b_ref.entries @ x.coords
    f0 = float(special.logsumexp(z))
    pi = special.softmax(z)
    g0 = p.a_rows.T @ pi
    h = (p.a_rows.T * pi) @ p.a_rows - np.outer(g0, g0) + p.mu * p.b_ref.entries
    return LseEvaluation(
        value=f0 + 0.5 * p.mu * float(x.coords @ bx),
        gradient=DualVector(g0 + p.mu * bx),
        hessian=SpdOperator.from_matrix(h),
    )


@lru_cache(maxsize=16)
def _unit_interval_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = special.roots_legendre(order)
    return 0.5 * (nodes + 1.0), 0.5 * weights


def _segment_average(p: LogSumExpProblem, x: np.ndarray, u: np.ndarray, order: int) -> np.ndarray:
    ts, ws = _unit_interval_rule(order)
    total = np.zeros((x.shape[0], x.shape[0]))
    for t, w in zip(ts, ws):
        total += w * _lse_hessian_matrix(p, x + t * u)
    return total


def integral_hessian(
    p: ProblemInstance | QuadraticProblem | LogSumExpProblem,
    x: PrimalVector,
    u: PrimalVector,
    order: int = 16,
) -> IntegralHessian:
    """
    J = int_0^1 hess f(x + t u) dt by Gauss-Legendre quadrature on [0, 1].

    est_error is the spectral norm of the difference between the `order` and
    `2 * order` rules.
    """
    if order < 2:
        raise InvalidParameterError("quadrature order must be at least 2")
    inst = ProblemInstance.wrap(p)
    if inst.kind is ProblemKind.QUADRATIC:
        return IntegralHessian(inst.payload.a_op, order, 0.0)
    if not np.any(u.coords):
        return IntegralHessian(inst.hessian(x), order, 0.0)
    coarse = _segment_average(inst.payload, x.coords, u.coords, order)
    fine = _segment_average(inst.payload, x.coords, u.coords, 2 * order)
    est = float(np.linalg.norm(coarse - fine, 2))
    return IntegralHessian(SpdOperator.from_matrix(coarse), order, est)


@dataclass(frozen=True)
class SandwichReport:
    r: float
    est_error: float
    margins: dict[str, float]
    tol: float = SANDWICH_TOL

    @property
    def passed(self) -> bool:
        return all(m >= -self.tol for m in self.margins.values())

    @property
    def worst_margin(self) -> float:
        return min(self.margins.values())


def _difference_margin(lower: np.ndarray, upper: np.ndarray) -> float:
    """lambda_min(upper - lower) relative to the larger of the two norms."""
    diff = upper - lower
    lo = float(np.linalg.eigvalsh(0.5 * (diff + diff.T))[0])
    scale = max(np.linalg.norm(upper, 2), np.linalg.norm(lower, 2), np.finfo(float).tiny)
    return lo / scale


def sandwich_check(
    p: ProblemInstance | QuadraticProblem | LogSumExpProblem,
    x: PrimalVector,
    y: PrimalVector,
    order: int = 16,
    samples: int = 2,
    seed: int | None = 0,
    tol: float = SANDWICH_TOL,
) -> SandwichReport:
    """
    Check the segment-Hessian sandwiches
        hess f(x) / c <= J <= c hess f(x),   hess f(y) / c <= J <= c hess f(y),
    with c = 1 + M r / 2 and r = ||y - x||_x, and spot-check
        hess f(y) - hess f(x) <= M ||y - x||_z hess f(w)
    at `samples` random points z, w of the ball of radius ||y - x|| around x.
    """
    inst = ProblemInstance.wrap(p)
    h_x = inst.hessian(x)
    h_y = inst.hessian(y)
    step = y - x
    integral = integral_hessian(inst, x, step, order)
    r = norm_primal(h_x, step)
    c = 1.0 + 0.5 * inst.m_const * r
    j = integral.j_op
    margins = {
        "hess_x_lower": loewner_margin(h_x.scaled(1.0 / c), j),
        "hess_x_upper": loewner_margin(j, h_x.scaled(c)),
        "hess_y_lower": loewner_margin(h_y.scaled(1.0 / c), j),
        "hess_y_upper": loewner_margin(j, h_y.scaled(c)),
    }
    rng = make_rng(seed)
    radius = float(np.linalg.norm(step.coords))
    for i in range(samples):
        z = PrimalVector(x.coords + radius * rng.uniform(-1.0, 1.0, size=inst.n))
        w = PrimalVector(x.coords + radius * rng.uniform(-1.0, 1.0, size=inst.n))
        bound = inst.m_const * norm_primal(inst.hessian(z), step) * inst.hessian(w).entries
        margins[f"self_concordance_{i}"] = _difference_margin(h_y.entries - h_x.entries, bound)
    return SandwichReport(r=r, est_error=integral.est_error, margins=margins, tol=tol)


def local_gradient_norm(p: ProblemInstance | QuadraticProblem | LogSumExpProblem, x: PrimalVector) -> float:
    """lambda(x) = ||grad f(x)||*_x."""
    inst = ProblemInstance.wrap(p)
    return norm_dual(inst.hessian(x), inst.gradient(x))


def gradient_roundoff(p: ProblemInstance | QuadraticProblem | LogSumExpProblem, x: PrimalVector) -> float:
    """
    Euclidean size of the rounding error in the computed gradient at x.

    Near a minimizer away from the origin the gradient is a cancellation of
    terms of size ||A|| ||x|| + ||b|| (quadratic) or gamma (1 + max |<a_i, x> + b_i|)
    plus mu ||B|| ||x|| (log-sum-exp); the rounding level follows those terms,
    not the gradient itself.
    """
    inst = ProblemInstance.wrap(p)
    scale = math.sqrt(inst.n) * GRADIENT_EPS
    x_norm = float(np.linalg.norm(x.coords))
    if inst.kind is ProblemKind.QUADRATIC:
        q = inst.payload
        return scale * (q.a_op.spectral_norm * x_norm + float(np.linalg.norm(q.b.coords)))
    lse = inst.payload
    z = lse.a_rows @ x.coords + lse.b_shift
    row_scale = float(np.max(np.linalg.norm(lse.a_rows, axis=1)))
    return scale * (
        row_scale * (1.0 + float(np.max(np.abs(z)))) + lse.mu * lse.b_ref.spectral_norm * x_norm
    )


def minimizer(
    p: ProblemInstance | QuadraticProblem | LogSumExpProblem, tol: float = 1e-14
) -> PrimalVector:
    """The unique minimizer, polished by Newton steps to lambda <= tol."""
    inst = ProblemInstance.wrap(p)
    if inst.kind is ProblemKind.QUADRATIC:
        return inst.payload.a_op.solve(inst.payload.b)

    res = optimize.minimize(
        lambda z: inst.value(PrimalVector(z)),
        np.zeros(inst.n),
        jac=lambda z: inst.gradient(PrimalVector(z)).coords,
        hess=lambda z: inst.hessian(PrimalVector(z)).entries,
        method="trust-exact",
        options={"gtol": 1e-10},
    )
    x = PrimalVector(res.x)
    for _ in range(20):
        h = inst.hessian(x)
        grad = inst.gradient(x)
        if norm_dual(h, grad) <= tol:
            break
        x = x - h.solve(grad)
    logger.debug("Minimizer found after %d trust-region iterations", res.nit)
    return x


def start_at_local_norm(
    p: ProblemInstance | QuadraticProblem | LogSumExpProblem,
    target_lambda: float,
    seed: int | None = 0,
    x_star: PrimalVector | None = None,
) -> PrimalVector:
    """Point on a seeded ray from the minimizer with lambda(x0) = target_lambda."""
    if not target_lambda > 0:
        raise InvalidParameterError("target lambda must be positive")
    inst = ProblemInstance.wrap(p)
    x_star = x_star if x_star is not None else minimizer(inst)
    rng = make_rng(seed)
    d = rng.standard_normal(inst.n)
    d /= norm_primal(inst.b_ref, PrimalVector(d))

    def excess(t: float) -> float:
        return local_gradient_norm(inst, PrimalVector(x_star.coords + t * d)) - target_lambda

    hi = target_lambda / math.sqrt(inst.ell)
    for _ in range(200):
        if excess(hi) >= 0:
            break
        hi *= 2.0
    else:
        raise InvalidParameterError(f"could not bracket lambda = {target_lambda}")
    t = optimize.brentq(excess, 0.0, hi, xtol=1e-15 * max(hi, 1.0), rtol=1e-14)
    return PrimalVector(x_star.coords + t * d)


def random_ball_start(
    n: int, radius: float, seed: int | None = 0, center: PrimalVector | None = None
) -> PrimalVector:
    """Uniform point in the Euclidean ball of the given radius."""
    rng = make_rng(seed)
    d = rng.standard_normal(n)
    d /= np.linalg.norm(d)
    point = radius * rng.uniform() ** (1.0 / n) * d
    if center is not None:
        point = point + center.coords
    return PrimalVector(point)


def build_instance(spec: InstanceSpec, seed: int = 0) -> ProblemInstance:
    """Realize an instance definition; the spec's own seed wins over `seed`."""
    seed = spec.seed if spec.seed is not None else seed
    b_ref = SpdOperator.from_matrix(spec.b_ref) if spec.b_ref is not None else SpdOperator.identity(spec.n)
    if spec.kind is ProblemKind.QUADRATIC:
        if spec.spectrum is not None:
            spectrum = spec.spectrum
        else:
            spectrum = np.geomspace(spec.mu, spec.ell, spec.n) if spec.n > 1 else [spec.mu]
        b = DualVector(spec.b) if spec.b is not None else None
        payload = quad_make(spectrum, b, seed, b_ref, mu=spec.mu, ell=spec.ell)
        return ProblemInstance(ProblemKind.QUADRATIC, payload)

    if spec.a_rows is not None:
        rows = np.asarray(spec.a_rows, dtype=float)
        shifts = spec.b if spec.b is not None else make_rng(seed).standard_normal(rows.shape[0])
        payload = lse_make(rows, shifts, spec.mu, gamma=spec.gamma, b_ref=b_ref)
    else:
        payload = lse_random(spec.n, spec.m, spec.gamma, spec.mu, seed, b_ref=b_ref, b_shift=spec.b)
    return ProblemInstance(ProblemKind.LOG_SUM_EXP, payload)


def instance_hash(p: ProblemInstance | QuadraticProblem | LogSumExpProblem) -> str:
    """sha256 over the kind, constants and defining arrays."""
    inst = ProblemInstance.wrap(p)
    digest = hashlib.sha256()
    digest.update(inst.kind.value.encode())
    digest.update(np.array([inst.n, inst.mu, inst.ell, inst.m_const], dtype=float).tobytes())
    digest.update(inst.b_ref.entries.tobytes())
    if inst.kind is ProblemKind.QUADRATIC:
        digest.update(inst.payload.a_op.entries.tobytes())
        digest.update(inst.payload.b.coords.tobytes())
    else:
        digest.update(inst.payload.a_rows.tobytes())
        digest.update(inst.payload.b_shift.tobytes())
    return digest.hexdigest()
