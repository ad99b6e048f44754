"""
Quasi-Newton schemes with unit steps and Broyden-class updates.

Both schemes start from G_0 = L B, step with x_{k+1} = x_k - G_k^-1 grad f(x_k)
and update G_{k+1} = Broyd_{tau_k}(T_k, G_k, u_k). The target T_k is A for
quadratics and the integral Hessian J_k over [x_k, x_{k+1}] in general.
G_k^-1 is carried along by the inverse-update formula; G_k itself is never
refactorized for stepping.

Every iteration is recorded with the quantities the convergence analysis
tracks (lambda_k, r_k, xi_k, nu_k, potentials, relative spectra).
"""

import logging
import math
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .broyden_update import TauParam, broyd, is_zero_direction, nu
from .operator_core import (
    DualVector,
    EigenRange,
    PrimalVector,
    SpdOperator,
    norm_dual,
    norm_primal,
    rel_eigen_range,
)
from .potentials import augmented_barrier, logdet_barrier
from .problems import (
    LogSumExpProblem,
    ProblemInstance,
    QuadraticProblem,
    gradient_roundoff,
    integral_hessian,
)
from .shared_libraries.errors import (
    DivergenceError,
    InvalidParameterError,
    MissingSnapshotsError,
    NotPositiveDefiniteError,
    QuadratureError,
)
from .shared_libraries.types import ProblemKind, ScheduleKind, ScheduleSpec, SolverConfig

logger = logging.getLogger(__name__)

NAN = float("nan")

# A gradient change within this many rounding levels of the oracle is not checked.
SECANT_RESOLUTION = 1e2
# Relative residual allowance per unit of relative oracle rounding.
SECANT_ROUNDOFF_FACTOR = 10.0


@dataclass(frozen=True)
class TauSchedule:
    kind: ScheduleKind
    taus: tuple[float, ...]

    def __post_init__(self):
        if not self.taus:
            raise InvalidParameterError("a schedule needs at least one tau")
        object.__setattr__(self, "taus", tuple(TauParam(t).tau for t in self.taus))

    @classmethod
    def bfgs(cls) -> "TauSchedule":
        return cls(ScheduleKind.BFGS, (0.0,))

    @classmethod
    def dfp(cls) -> "TauSchedule":
        return cls(ScheduleKind.DFP, (1.0,))

    @classmethod
    def constant(cls, tau: float) -> "TauSchedule":
        return cls(ScheduleKind.CONSTANT, (tau,))

    @classmethod
    def sequence(cls, taus: Sequence[float]) -> "TauSchedule":
        return cls(ScheduleKind.SEQUENCE, tuple(taus))

    @classmethod
    def from_spec(cls, spec: ScheduleSpec) -> "TauSchedule":
        if spec.kind is ScheduleKind.BFGS:
            return cls.bfgs()
        if spec.kind is ScheduleKind.DFP:
            return cls.dfp()
        if spec.kind is ScheduleKind.CONSTANT:
            return cls.constant(spec.tau)
        return cls.sequence(spec.taus)

    def tau_at(self, k: int) -> float:
        """tau_k; a sequence repeats its last entry."""
        return self.taus[min(k, len(self.taus) - 1)]

    def taus_upto(self, k: int) -> list[float]:
        """[tau_0, ..., tau_{k-1}]."""
        return [self.tau_at(i) for i in range(k)]

    @property
    def sup_tau(self) -> float:
        return max(self.taus)

    @property
    def label(self) -> str:
        if self.kind is ScheduleKind.CONSTANT:
            return f"constant({self.taus[0]:g})"
        return self.kind.value


@dataclass(frozen=True, eq=False)
class IterationRecord:
    """
    State at iterate k. The step fields (u, r, nu, ...) describe the move from
    x_k to x_{k+1} and are empty or nan on the terminal record.
    """
    k: int
    x: PrimalVector
    grad: DualVector
    lam: float
    g_norm: float
    xi: float
    eig_range: EigenRange
    tau: float
    u: PrimalVector | None = None
    r: float = NAN
    xi_next: float = NAN
    nu: float = NAN
    v: float = NAN
    psi: float = NAN
    v_after: float = NAN
    psi_after: float = NAN
    target_range: EigenRange | None = None
    phi: float = NAN
    det_ratio: float = NAN
    quad_error: float = 0.0
    skipped_update: bool = False
    g_op: SpdOperator | None = field(default=None, repr=False)
    h_op: SpdOperator | None = field(default=None, repr=False)
    j_op: SpdOperator | None = field(default=None, repr=False)

    @property
    def terminal(self) -> bool:
        return self.u is None


@dataclass(eq=False)
class IterationTrace:
    kind: ProblemKind
    n: int
    mu: float
    ell: float
    m_const: float
    schedule: TauSchedule
    general_path: bool
    records: list[IterationRecord] = field(default_factory=list)
    stop_reason: str = ""
    wall_time: float = 0.0

    @property
    def converged(self) -> bool:
        return self.stop_reason == "converged"

    @property
    def iterations(self) -> int:
        return max(len(self.records) - 1, 0)

    @property
    def lambda0(self) -> float:
        return self.records[0].lam

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([rec.lam for rec in self.records])

    @property
    def xis(self) -> np.ndarray:
        return np.array([rec.xi for rec in self.records])

    @property
    def taus(self) -> list[float]:
        return [rec.tau for rec in self.records]

    @property
    def steps(self) -> list[IterationRecord]:
        return [rec for rec in self.records if not rec.terminal]

    @property
    def has_snapshots(self) -> bool:
        return bool(self.records) and all(rec.g_op is not None for rec in self.records)


IterationCallback = Callable[[IterationRecord], None]


def _initial_operator(p: ProblemInstance) -> SpdOperator:
    return p.b_ref.scaled(p.ell)


def _finite(*arrays: np.ndarray) -> bool:
    return all(np.all(np.isfinite(a)) for a in arrays)


def _run(
    p: ProblemInstance,
    x0: PrimalVector,
    sched: TauSchedule,
    cfg: SolverConfig,
    general_path: bool,
    callback: IterationCallback | None,
) -> IterationTrace:
    if x0.dim != p.n:
        raise InvalidParameterError(f"x0 has dimension {x0.dim}, instance has {p.n}")
    started = time.perf_counter()
    trace = IterationTrace(
        kind=p.kind, n=p.n, mu=p.mu, ell=p.ell, m_const=p.m_const,
        schedule=sched, general_path=general_path,
    )
    m_const = p.m_const
    g_op = _initial_operator(p)
    h_op = g_op.inverse()
    x = x0
    xi = 1.0
    k = 0

    logger.info(
        "Running %s scheme: kind=%s n=%d mu=%g L=%g M=%g schedule=%s",
        "general" if general_path else "quadratic",
        p.kind.value, p.n, p.mu, p.ell, m_const, sched.label,
    )

    while True:
        try:
            grad = p.gradient(x)
            hess = p.hessian(x)
        except ValueError as exc:
            raise DivergenceError(k, f"oracle failed ({exc})") from exc
        if not _finite(x.coords, grad.coords):
            raise DivergenceError(k)

        g_norm = math.sqrt(max(float(grad.coords @ (h_op.entries @ grad.coords)), 0.0))
        lam = norm_dual(hess, grad) if cfg.compute_lambda else NAN
        measure = lam if cfg.compute_lambda else g_norm
        eig = rel_eigen_range(g_op, hess)
        tau = sched.tau_at(k)
        snapshots = (
            {"g_op": g_op, "h_op": h_op} if cfg.record_operators else {}
        )

        zero_grad = not np.any(grad.coords)
        if zero_grad or measure <= cfg.grad_tol or k >= cfg.max_iter:
            trace.stop_reason = "converged" if (zero_grad or measure <= cfg.grad_tol) else "max_iter"
            record = IterationRecord(
                k=k, x=x, grad=grad, lam=lam, g_norm=g_norm, xi=xi, eig_range=eig, tau=tau,
                **snapshots,
            )
            if p.kind is ProblemKind.QUADRATIC:
                record = _with_terminal_potentials(record, p.payload.a_op, g_op)
            trace.records.append(record)
            if callback is not None:
                callback(record)
            break

        step = -(h_op.entries @ grad.coords)
        if not _finite(step, x.coords + step):
            raise DivergenceError(k + 1)
        u = PrimalVector(step)
        x_next = x + u
        r = norm_primal(hess, u)

        if general_path:
            integral = integral_hessian(p, x, u, cfg.quad_order)
            limit = cfg.quad_rel_tol * integral.j_op.spectral_norm
            if integral.est_error > limit:
                raise QuadratureError(k, integral.est_error, limit)
            target, quad_error = integral.j_op, integral.est_error
        else:
            target, quad_error = p.payload.a_op, 0.0

        target_range = rel_eigen_range(g_op, target)
        skipped = is_zero_direction(u)
        if skipped:
            logger.debug("Zero step at iteration %d, keeping G", k)
            step_fields = dict(det_ratio=1.0)
            g_next, h_next = g_op, h_op
        else:
            try:
                result = broyd(target, g_op, u, TauParam(tau), g_inv=h_op)
            except NotPositiveDefiniteError as exc:
                raise DivergenceError(k, f"update lost positive definiteness ({exc})") from exc
            g_next, h_next = result.g_plus, result.g_plus_inv
            step_fields = dict(
                nu=nu(target, g_op, u),
                v=logdet_barrier(target, g_op),
                psi=augmented_barrier(g_op, target),
                v_after=logdet_barrier(target, g_next),
                psi_after=augmented_barrier(g_next, target),
                phi=result.phi,
                det_ratio=result.det_ratio,
            )

        xi_next = 1.0 if m_const == 0 else xi * math.exp(m_const * r)
        if cfg.record_operators:
            snapshots["j_op"] = target
        record = IterationRecord(
            k=k, x=x, grad=grad, lam=lam, g_norm=g_norm, xi=xi, eig_range=eig, tau=tau,
            u=u, r=r, xi_next=xi_next, target_range=target_range, quad_error=quad_error,
            skipped_update=skipped, **step_fields, **snapshots,
        )
        trace.records.append(record)
        if callback is not None:
            callback(record)

        x, g_op, h_op, xi = x_next, g_next, h_next, xi_next
        k += 1

    trace.wall_time = time.perf_counter() - started
    logger.info(
        "Stopped after %d iterations (%s), lambda=%.3e",
        trace.iterations, trace.stop_reason, trace.records[-1].lam,
    )
    return trace


def _with_terminal_potentials(
    record: IterationRecord, a_op: SpdOperator, g_op: SpdOperator
) -> IterationRecord:
    return replace(
        record,
        v=logdet_barrier(a_op, g_op),
        psi=augmented_barrier(g_op, a_op),
        target_range=rel_eigen_range(g_op, a_op),
    )


def run_quadratic(
    p: QuadraticProblem | ProblemInstance,
    x0: PrimalVector,
    sched: TauSchedule,
    cfg: SolverConfig | None = None,
    callback: IterationCallback | None = None,
) -> IterationTrace:
    """Quadratic scheme: every update targets the constant Hessian A."""
    inst = ProblemInstance.wrap(p)
    if inst.kind is not ProblemKind.QUADRATIC:
        raise InvalidParameterError("run_quadratic needs a quadratic instance")
    return _run(inst, x0, sched, cfg or SolverConfig(), False, callback)


def run_general(
    p: ProblemInstance | QuadraticProblem | LogSumExpProblem,
    x0: PrimalVector,
    sched: TauSchedule,
    cfg: SolverConfig | None = None,
    callback: IterationCallback | None = None,
) -> IterationTrace:
    """General scheme: every update targets the integral Hessian along the step."""
    return _run(ProblemInstance.wrap(p), x0, sched, cfg or SolverConfig(), True, callback)


class SecantStep(NamedTuple):
    residual: float
    roundoff: float

    def within(self, tol: float) -> bool:
        """Residual below tol plus the share explained by oracle rounding."""
        return self.residual <= tol + SECANT_ROUNDOFF_FACTOR * self.roundoff


def secant_report(
    trace: IterationTrace, p: ProblemInstance | QuadraticProblem | LogSumExpProblem
) -> list[SecantStep]:
    """
    Per step, ||G_{k+1} u_k - y_k|| / ||y_k|| with y_k = grad f(x_{k+1}) - grad f(x_k),
    next to the rounding level of y_k relative to ||y_k||. Skipped updates and
    steps whose gradient change is within SECANT_RESOLUTION rounding levels of
    the oracle are nan.
    """
    if not trace.has_snapshots:
        raise MissingSnapshotsError("trace was recorded without operator snapshots")
    inst = ProblemInstance.wrap(p)
    out = []
    for rec, nxt in zip(trace.records, trace.records[1:]):
        y = inst.gradient(nxt.x).coords - inst.gradient(rec.x).coords
        scale = float(np.linalg.norm(y))
        noise = gradient_roundoff(inst, rec.x) + gradient_roundoff(inst, nxt.x)
        if rec.skipped_update or scale <= SECANT_RESOLUTION * noise:
            out.append(SecantStep(NAN, NAN))
            continue
        residual = float(np.linalg.norm(nxt.g_op.entries @ rec.u.coords - y)) / scale
        out.append(SecantStep(residual, noise / scale))
    return out


def secant_residual(
    trace: IterationTrace, p: ProblemInstance | QuadraticProblem | LogSumExpProblem
) -> list[float]:
    """Relative secant residual per step; nan where secant_report skips the step."""
    return [step.residual for step in secant_report(trace, p)]
