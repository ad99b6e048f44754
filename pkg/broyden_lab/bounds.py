"""
Theoretical envelopes on lambda_k and the thresholds that go with them.

Scalar envelopes are functions of (n, mu, L, M, taus, k, lambda_0). They are
evaluated in log space; the plain variants saturate at the largest double
instead of overflowing. Trace envelopes compare a recorded run against the
scalar ones and produce an EnvelopeReport per bound.
"""

import logging
import math
import sys
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import linalg

from .problems import ProblemInstance, QuadraticProblem
from .shared_libraries.errors import InvalidParameterError
from .shared_libraries.types import EnvelopeName, EnvelopeSummary, ProblemKind
from .solver import IterationTrace

logger = logging.getLogger(__name__)

REL_TOL = 1e-8
ABS_TOL = 1e-14
PSI_EXPONENT = 13.0 / 6.0
REGION_CONSTANT = math.log(1.5) / 1.5 ** 1.5
_LOG_MAX = math.log(sys.float_info.max)


def _check_constants(mu: float, ell: float) -> None:
    if not (mu > 0 and ell >= mu):
        raise InvalidParameterError(f"need L >= mu > 0, got mu={mu}, L={ell}")


def _check_k(k: int) -> None:
    if k < 1:
        raise InvalidParameterError("superlinear envelopes are defined for k >= 1")


def _from_log(log_value: float) -> float:
    if log_value == -math.inf:
        return 0.0
    if log_value >= _LOG_MAX:
        return sys.float_info.max
    return math.exp(log_value)


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def _log_expm1(x: float) -> float:
    """ln(e^x - 1) without overflow."""
    if x <= 0:
        return -math.inf
    if x > 30.0:
        return x + math.log1p(-math.exp(-x))
    return math.log(math.expm1(x))


def _taus_for(taus: Sequence[float], k: int) -> list[float]:
    """tau_0 .. tau_{k-1}; a short list repeats its last entry."""
    if not taus:
        raise InvalidParameterError("need at least one tau")
    return [float(taus[min(i, len(taus) - 1)]) for i in range(k)]


def _mean_log(values: Sequence[float]) -> float:
    return sum(_log(v) for v in values) / len(values)


def env_quad_linear(mu: float, ell: float, k: int, lambda0: float) -> float:
    """(1 - mu/L)^k lambda_0."""
    _check_constants(mu, ell)
    return (1.0 - mu / ell) ** k * lambda0


def _log_quad_superlinear(
    n: int, mu: float, ell: float, taus, k: int, lambda0: float,
    exponent: float, factor: float | None,
) -> float:
    _check_constants(mu, ell)
    _check_k(k)
    factor = n * math.log(ell / mu) if factor is None else factor
    ps = [t * mu / ell + 1.0 - t for t in _taus_for(taus, k)]
    log_inner = math.log(2.0) - _mean_log(ps) + _log_expm1(exponent * factor / k)
    return 0.5 * k * log_inner + 0.5 * math.log(ell / mu) + _log(lambda0)


def log_env_quad_superlinear(n, mu, ell, taus, k, lambda0, factor: float | None = None) -> float:
    return _log_quad_superlinear(n, mu, ell, taus, k, lambda0, 1.0, factor)


def env_quad_superlinear(
    n: int, mu: float, ell: float, taus: Sequence[float], k: int, lambda0: float,
    factor: float | None = None,
) -> float:
    """
    [2 / prod_i p_i^(1/k) (e^(D/k) - 1)]^(k/2) sqrt(L/mu) lambda_0,
    p_i = tau_i mu/L + 1 - tau_i and D = n ln(L/mu) unless `factor` is given.
    """
    return _from_log(log_env_quad_superlinear(n, mu, ell, taus, k, lambda0, factor))


def log_env_quad_superlinear_psi(n, mu, ell, taus, k, lambda0, factor: float | None = None) -> float:
    return _log_quad_superlinear(n, mu, ell, taus, k, lambda0, PSI_EXPONENT, factor)


def env_quad_superlinear_psi(
    n: int, mu: float, ell: float, taus: Sequence[float], k: int, lambda0: float,
    factor: float | None = None,
) -> float:
    """The same envelope with the exponent scaled by 13/6."""
    return _from_log(log_env_quad_superlinear_psi(n, mu, ell, taus, k, lambda0, factor))


def env_quad_sharpened_factor(p: QuadraticProblem | ProblemInstance) -> float:
    """ln Det(A^-1, L B) = sum_i ln(L / lambda_i) over the eigenvalues of A relative to B."""
    inst = ProblemInstance.wrap(p)
    if inst.kind is not ProblemKind.QUADRATIC:
        raise InvalidParameterError("the sharpened factor is defined for quadratics")
    eigs = linalg.eigh(inst.payload.a_op.entries, inst.b_ref.entries, eigvals_only=True)
    return float(np.sum(np.log(inst.ell / eigs)))


def k0(n: int, mu: float, ell: float, sup_tau: float) -> int:
    """Starting moment of superlinear convergence for the general scheme."""
    _check_constants(mu, ell)
    if not 0.0 <= sup_tau <= 1.0:
        raise InvalidParameterError("sup_tau must lie in [0, 1]")
    if sup_tau == 0.0:
        return math.ceil(8 * n * math.log(2 * ell / mu))
    if sup_tau == 1.0:
        return math.ceil(18 * n * ell / mu * math.log(2 * ell / mu))
    weight = sup_tau * 4.0 * mu / (9.0 * ell) + 1.0 - sup_tau
    return math.ceil(8 * n * math.log(2 * ell / mu) / weight)


def region_radius(mu: float, ell: float, n: int, sup_tau: float, m_const: float) -> float:
    """Largest lambda_0 admitted by the local starting condition; inf when M = 0."""
    if m_const < 0:
        raise InvalidParameterError("M must be nonnegative")
    if m_const == 0:
        return math.inf
    k = k0(n, mu, ell, sup_tau)
    return REGION_CONSTANT * max(mu / (2.0 * ell), 1.0 / (k + 9)) / m_const


def log_env_xi_linear(mu: float, ell: float, xis: Sequence[float], k: int, lambda0: float) -> float:
    """ln of sqrt(xi_k) lambda_0 prod_{i<k} q_i, q_i = max{1 - mu/(xi_{i+1} L), xi_{i+1} - 1}."""
    _check_constants(mu, ell)
    log_q = sum(_log(max(1.0 - mu / (xis[i + 1] * ell), xis[i + 1] - 1.0)) for i in range(k))
    return 0.5 * math.log(xis[k]) + _log(lambda0) + log_q


def env_region_linear(mu: float, ell: float, k: int, lambda0: float) -> float:
    """(1 - mu/(2L))^k sqrt(3/2) lambda_0."""
    _check_constants(mu, ell)
    return (1.0 - mu / (2.0 * ell)) ** k * math.sqrt(1.5) * lambda0


def log_env_xi_superlinear(
    n: int, mu: float, ell: float, taus: Sequence[float], xis: Sequence[float], k: int, lambda0: float,
) -> float:
    """
    ln of the measured-xi superlinear envelope; xis must hold xi_0 .. xi_{k+1}.
    """
    _check_constants(mu, ell)
    _check_k(k)
    ts = _taus_for(taus, k)
    weights = [t * mu / (xis[i + 1] ** 2 * ell) + 1.0 - t for i, t in enumerate(ts)]
    xi_next = xis[k + 1]
    distortion = xi_next * math.log(xi_next) + math.log(ell / mu)
    log_inner = (
        math.log(1.0 + xis[k]) - _mean_log(weights)
        + _log_expm1(PSI_EXPONENT * n * distortion / k)
    )
    return 0.5 * k * log_inner + 0.5 * math.log(xis[k] * ell / mu) + _log(lambda0)


def log_env_region_superlinear(
    n: int, mu: float, ell: float, taus: Sequence[float], k: int, lambda0: float
) -> float:
    _check_constants(mu, ell)
    _check_k(k)
    weights = [t * 4.0 * mu / (9.0 * ell) + 1.0 - t for t in _taus_for(taus, k)]
    log_inner = (
        math.log(2.5) - _mean_log(weights)
        + _log_expm1(PSI_EXPONENT * n * math.log(2.0 * ell / mu) / k)
    )
    return 0.5 * k * log_inner + 0.5 * math.log(1.5 * ell / mu) + _log(lambda0)


def env_region_superlinear(
    n: int, mu: float, ell: float, taus: Sequence[float], k: int, lambda0: float
) -> float:
    return _from_log(log_env_region_superlinear(n, mu, ell, taus, k, lambda0))


class StartingMomentEnvelopes(NamedTuple):
    prev: float
    new: float | None
    start_prev: float
    start_new: float


def env_starting_moments(n: int, mu: float, ell: float, k: int, lambda0: float, method: str) -> StartingMomentEnvelopes:
    """
    Earlier and new superlinear estimates for BFGS or DFP with their starting
    moments. The simplified new estimate is only valid from start_new on and is
    None before it.
    """
    _check_constants(mu, ell)
    _check_k(k)
    kappa = ell / mu
    method = method.lower()
    if method == "bfgs":
        scale = 1.0
    elif method == "dfp":
        scale = kappa
    else:
        raise InvalidParameterError(f"unknown method {method!r}")
    start_prev = n * kappa * scale
    start_new = 4.0 * n * scale * math.log(kappa)
    prev = _from_log(0.5 * k * math.log(start_prev / k) + _log(lambda0))
    new = None
    if k >= start_new:
        new = _from_log(0.5 * k * _log(start_new / k) + _log(lambda0))
    return StartingMomentEnvelopes(prev, new, start_prev, start_new)


env_section6 = env_starting_moments


class SimplificationSlacks(NamedTuple):
    exp_linearization: float
    condition_absorption: float


def simplification_slacks(n: int, ratio: float, k: int) -> SimplificationSlacks:
    """
    Slacks of e^((n/k) ln r) - 1 <= (4n/(3k)) ln r and sqrt(r) <= (3/2)^(k/2),
    both valid for k >= 4 n ln r. The second is compared in log space.
    """
    if ratio < 1:
        raise InvalidParameterError("ratio L/mu must be at least 1")
    log_r = math.log(ratio)
    if k < 4 * n * log_r:
        raise InvalidParameterError(f"k={k} is below 4 n ln(L/mu) = {4 * n * log_r:.6g}")
    first = 4.0 * n / (3.0 * k) * log_r - math.expm1(n / k * log_r)
    second = 0.5 * k * math.log(1.5) - 0.5 * log_r
    return SimplificationSlacks(first, second)


def first_superlinear_crossing(
    n: int, mu: float, ell: float, tau: float, k_max: int
) -> int | None:
    """First k whose superlinear envelope (constant tau) lies below the linear one, up to k_max."""
    _check_constants(mu, ell)
    log_kappa = math.log(ell / mu)
    log_p = math.log(tau * mu / ell + 1.0 - tau)
    log_rate = _log(1.0 - mu / ell)
    for k in range(1, k_max + 1):
        log_sup = 0.5 * k * (math.log(2.0) - log_p + _log_expm1(n * log_kappa / k)) + 0.5 * log_kappa
        if log_sup < k * log_rate:
            return k
    return None


@dataclass(frozen=True)
class EnvelopeRow:
    k: int
    measured: float
    bound: float
    log_bound: float
    provisional: bool = False

    @property
    def satisfied(self) -> bool:
        return self.measured <= self.bound * (1.0 + REL_TOL) + ABS_TOL

    @property
    def slack(self) -> float:
        """Relative headroom (bound - measured) / bound."""
        if self.bound > 0:
            return (self.bound - self.measured) / self.bound
        return 0.0 if self.measured <= ABS_TOL else -math.inf


@dataclass
class EnvelopeReport:
    name: str
    rows: list[EnvelopeRow]
    enforced: bool = True
    k0: int | None = None
    region_radius: float | None = None
    note: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def checked_rows(self) -> list[EnvelopeRow]:
        return [row for row in self.rows if not row.provisional]

    @property
    def first_violation(self) -> int | None:
        for row in self.checked_rows:
            if not row.satisfied:
                return row.k
        return None

    @property
    def min_slack(self) -> float | None:
        rows = self.checked_rows
        return min(row.slack for row in rows) if rows else None

    @property
    def passed(self) -> bool:
        return not self.enforced or self.first_violation is None

    def to_summary(self) -> EnvelopeSummary:
        return EnvelopeSummary(
            name=self.name,
            enforced=self.enforced,
            first_violation=self.first_violation,
            min_slack=self.min_slack,
            k0=self.k0,
            region_radius=self.region_radius,
        )


def _require_lambdas(trace: IterationTrace) -> np.ndarray:
    lams = trace.lambdas
    if not trace.records or np.any(np.isnan(lams)):
        raise InvalidParameterError("envelopes need a trace recorded with lambda_k")
    return lams


def _row(k: int, measured: float, log_bound: float, provisional: bool = False) -> EnvelopeRow:
    return EnvelopeRow(k, float(measured), _from_log(log_bound), log_bound, provisional)


def start_condition_held(trace: IterationTrace, mu: float | None = None) -> bool:
    """Whether M lambda_0 is inside the local region of the general scheme."""
    mu = trace.mu if mu is None else mu
    radius = region_radius(mu, trace.ell, trace.n, trace.schedule.sup_tau, trace.m_const)
    return trace.lambda0 <= radius


def env_quadratic_reports(
    trace: IterationTrace,
    names: Sequence[EnvelopeName],
    problem: QuadraticProblem | ProblemInstance | None = None,
    mu: float | None = None,
) -> list[EnvelopeReport]:
    """Quadratic-scheme envelopes against a recorded quadratic run."""
    if trace.kind is not ProblemKind.QUADRATIC:
        raise InvalidParameterError("quadratic envelopes need a quadratic trace")
    lams = _require_lambdas(trace)
    mu = trace.mu if mu is None else mu
    n, ell, lam0 = trace.n, trace.ell, float(lams[0])
    taus = trace.taus
    reports = []
    for name in names:
        if name is EnvelopeName.QUAD_LINEAR:
            rows = [_row(k, lams[k], _log(env_quad_linear(mu, ell, k, lam0))) for k in range(len(lams))]
            reports.append(EnvelopeReport(name.value, rows))
        elif name is EnvelopeName.QUAD_SUPERLINEAR:
            rows = [
                _row(k, lams[k], log_env_quad_superlinear(n, mu, ell, taus, k, lam0))
                for k in range(1, len(lams))
            ]
            reports.append(EnvelopeReport(name.value, rows))
        elif name is EnvelopeName.QUAD_SUPERLINEAR_PSI:
            rows = [
                _row(k, lams[k], log_env_quad_superlinear_psi(n, mu, ell, taus, k, lam0))
                for k in range(1, len(lams))
            ]
            reports.append(EnvelopeReport(name.value, rows))
        elif name is EnvelopeName.QUAD_SHARPENED:
            if problem is None:
                raise InvalidParameterError("the sharpened envelope needs the problem instance")
            factor = env_quad_sharpened_factor(problem)
            rows = [
                _row(k, lams[k], log_env_quad_superlinear(n, mu, ell, taus, k, lam0, factor))
                for k in range(1, len(lams))
            ]
            reports.append(EnvelopeReport(name.value, rows, extra={"factor": factor}))
        else:
            raise InvalidParameterError(f"{name.value} is not a quadratic envelope")
    return reports


def _region_fields(trace: IterationTrace, mu: float) -> dict:
    sup_tau = trace.schedule.sup_tau
    return {
        "k0": k0(trace.n, mu, trace.ell, sup_tau),
        "region_radius": region_radius(mu, trace.ell, trace.n, sup_tau, trace.m_const),
    }


def env_general_linear(trace: IterationTrace, mu: float | None = None) -> list[EnvelopeReport]:
    """
    [measured-xi linear envelope, local-region linear envelope]. The second is
    enforced only when the starting condition held.
    """
    lams = _require_lambdas(trace)
    mu = trace.mu if mu is None else mu
    ell, lam0 = trace.ell, float(lams[0])
    xis = list(trace.xis)
    xi_rows = [_row(k, lams[k], log_env_xi_linear(mu, ell, xis, k, lam0)) for k in range(len(lams))]
    region_rows = [_row(k, lams[k], _log(env_region_linear(mu, ell, k, lam0))) for k in range(len(lams))]
    held = start_condition_held(trace, mu)
    region = _region_fields(trace, mu)
    return [
        EnvelopeReport("general_linear_xi", xi_rows, True, **region),
        EnvelopeReport(
            "general_linear_region", region_rows, held, **region,
            note="" if held else "starting condition not met; reported only",
        ),
    ]


def env_general_superlinear(trace: IterationTrace, mu: float | None = None) -> list[EnvelopeReport]:
    """
    [measured-xi superlinear envelope, local-region superlinear envelope].

    The measured-xi bound at k uses xi_{k+1}; on the terminal record that value
    does not exist, so xi_k stands in and the row is marked provisional.
    """
    lams = _require_lambdas(trace)
    mu = trace.mu if mu is None else mu
    n, ell, lam0 = trace.n, trace.ell, float(lams[0])
    taus = trace.taus
    xis = list(trace.xis)
    last = len(lams) - 1
    xi_rows = []
    for k in range(1, len(lams)):
        if k < last:
            xi_rows.append(_row(k, lams[k], log_env_xi_superlinear(n, mu, ell, taus, xis, k, lam0)))
        else:
            padded = xis + [xis[-1]]
            xi_rows.append(
                _row(k, lams[k], log_env_xi_superlinear(n, mu, ell, taus, padded, k, lam0), True)
            )
    region_rows = [
        _row(k, lams[k], log_env_region_superlinear(n, mu, ell, taus, k, lam0))
        for k in range(1, len(lams))
    ]
    held = start_condition_held(trace, mu)
    region = _region_fields(trace, mu)
    if xi_rows and xi_rows[-1].provisional:
        logger.info("Superlinear envelope row k=%d is provisional", xi_rows[-1].k)
    return [
        EnvelopeReport("general_superlinear_xi", xi_rows, True, **region),
        EnvelopeReport(
            "general_superlinear_region", region_rows, held, **region,
            note="" if held else "starting condition not met; reported only",
        ),
    ]


def default_envelopes(kind: ProblemKind) -> list[EnvelopeName]:
    if kind is ProblemKind.QUADRATIC:
        return [
            EnvelopeName.QUAD_LINEAR,
            EnvelopeName.QUAD_SUPERLINEAR,
            EnvelopeName.QUAD_SUPERLINEAR_PSI,
        ]
    return [EnvelopeName.GENERAL_LINEAR, EnvelopeName.GENERAL_SUPERLINEAR]


def evaluate_envelopes(
    trace: IterationTrace,
    names: Sequence[EnvelopeName] | None = None,
    problem: ProblemInstance | QuadraticProblem | None = None,
    mu_scale: float = 1.0,
) -> list[EnvelopeReport]:
    """All requested envelopes; mu_scale multiplies the mu the envelopes see."""
    names = list(names) if names else default_envelopes(trace.kind)
    mu = trace.mu * mu_scale
    if mu > trace.ell:
        raise InvalidParameterError("scaled mu exceeds L")
    reports = []
    quad_names = [nm for nm in names if nm.value.startswith("quad_")]
    if quad_names:
        reports.extend(env_quadratic_reports(trace, quad_names, problem, mu))
    if EnvelopeName.GENERAL_LINEAR in names:
        reports.extend(env_general_linear(trace, mu))
    if EnvelopeName.GENERAL_SUPERLINEAR in names:
        reports.extend(env_general_superlinear(trace, mu))
    for report in reports:
        if report.enforced and report.first_violation is not None:
            logger.warning(
                "Envelope %s violated first at k=%d (min slack %.3e)",
                report.name, report.first_violation, report.min_slack,
            )
    return reports
