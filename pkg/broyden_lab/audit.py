"""
Per-trace invariant checks.

Each check walks the records of one run and returns a CheckEvaluation with the
smallest slack it saw. Slacks are relative where the compared quantities are
eigenvalue ratios, absolute otherwise; a check fails below -AUDIT_TOL.
"""

import logging
import math

from .bounds import start_condition_held
from .potentials import progress_lb_psi, progress_lb_V, tolerance
from .problems import ProblemInstance
from .shared_libraries.errors import MissingSnapshotsError
from .shared_libraries.types import CheckEvaluation, ProblemKind, Verdict
from .solver import SECANT_ROUNDOFF_FACTOR, IterationTrace, secant_report

logger = logging.getLogger(__name__)

AUDIT_TOL = 1e-8
STEP_TOL = 1e-10
XI_RTOL = 1e-12
SECANT_TOL = 1e-8


def _evaluation(name: str, slacks: list[float], what: str, tol: float = AUDIT_TOL) -> CheckEvaluation:
    if not slacks:
        return CheckEvaluation(
            name=name, verdict=Verdict.NOT_AVAILABLE, evaluation=f"no samples for {what}",
        )
    worst = min(slacks)
    failures = sum(1 for s in slacks if s < -tol)
    verdict = Verdict.PASS if failures == 0 else Verdict.FAIL
    text = f"{what}: {len(slacks) - failures}/{len(slacks)} iterations within tolerance"
    return CheckEvaluation(
        name=name, verdict=verdict, evaluation=text, worst_slack=worst, samples=len(slacks),
    )


def _bracket_slack(lo_measured: float, hi_measured: float, lo: float, hi: float) -> float:
    return min((lo_measured - lo) / lo, (hi - hi_measured) / hi)


def check_quadratic_sandwich(trace: IterationTrace) -> CheckEvaluation:
    """A <= G_k <= (L/mu) A."""
    ratio = trace.ell / trace.mu
    slacks = [
        _bracket_slack(rec.eig_range.min_rel, rec.eig_range.max_rel, 1.0, ratio)
        for rec in trace.records
    ]
    return _evaluation("quadratic_sandwich", slacks, "A <= G_k <= (L/mu) A")


def check_hessian_sandwich(trace: IterationTrace) -> CheckEvaluation:
    """hess f(x_k) / xi_k <= G_k <= xi_k (L/mu) hess f(x_k)."""
    ratio = trace.ell / trace.mu
    slacks = [
        _bracket_slack(rec.eig_range.min_rel, rec.eig_range.max_rel, 1.0 / rec.xi, rec.xi * ratio)
        for rec in trace.records
    ]
    return _evaluation("hessian_xi_sandwich", slacks, "Hessian sandwich with xi_k")


def check_integral_sandwich(trace: IterationTrace) -> CheckEvaluation:
    """J_k / xi_{k+1} <= G_k <= xi_{k+1} (L/mu) J_k."""
    ratio = trace.ell / trace.mu
    slacks = [
        _bracket_slack(
            rec.target_range.min_rel, rec.target_range.max_rel, 1.0 / rec.xi_next, rec.xi_next * ratio,
        )
        for rec in trace.steps
    ]
    return _evaluation("integral_xi_sandwich", slacks, "integral-Hessian sandwich with xi_{k+1}")


def check_step_bound(trace: IterationTrace) -> CheckEvaluation:
    """r_k <= xi_k lambda_k."""
    slacks = [rec.xi * rec.lam - rec.r for rec in trace.steps]
    return _evaluation("step_bound", slacks, "r_k <= xi_k lambda_k", STEP_TOL)


def check_xi_recursion(trace: IterationTrace) -> CheckEvaluation:
    slacks = []
    if trace.records and trace.records[0].xi != 1.0:
        slacks.append(-math.inf)
    for rec, nxt in zip(trace.records, trace.records[1:]):
        if trace.m_const == 0:
            slacks.append(0.0 if nxt.xi == 1.0 else -math.inf)
            continue
        expected = rec.xi * math.exp(trace.m_const * rec.r)
        slacks.append(XI_RTOL - abs(nxt.xi - expected) / expected)
    return _evaluation("xi_recursion", slacks, "xi_{k+1} = xi_k exp(M r_k)", 0.0)


def check_potential_decrease(trace: IterationTrace) -> list[CheckEvaluation]:
    """Decrease of V (quadratics) and psi (all instances) per update against the update target."""
    v_slacks, psi_slacks = [], []
    for rec in trace.steps:
        if rec.skipped_update:
            continue
        tr = rec.target_range
        eta = max(1.0, tr.max_rel)
        xi = max(1.0, 1.0 / tr.min_rel)
        drop_psi = rec.psi - rec.psi_after
        psi_slacks.append(drop_psi - progress_lb_psi(xi, eta, rec.tau, rec.nu) + tolerance(drop_psi))
        if trace.kind is ProblemKind.QUADRATIC:
            drop_v = rec.v - rec.v_after
            v_slacks.append(drop_v - progress_lb_V(eta, rec.tau, rec.nu) + tolerance(drop_v))
    checks = [_evaluation("psi_progress", psi_slacks, "augmented-barrier decrease per update")]
    if trace.kind is ProblemKind.QUADRATIC:
        checks.insert(0, _evaluation("v_progress", v_slacks, "log-det barrier decrease per update"))
    return checks


def check_local_sandwich(trace: IterationTrace) -> CheckEvaluation:
    """(2/3) hess f(x_k) <= G_k <= (3L/(2mu)) hess f(x_k) inside the local region."""
    if not start_condition_held(trace):
        return CheckEvaluation(
            name="local_sandwich", verdict=Verdict.NOT_AVAILABLE,
            evaluation="starting condition not met; sandwich not asserted",
        )
    hi = 1.5 * trace.ell / trace.mu
    slacks = [
        _bracket_slack(rec.eig_range.min_rel, rec.eig_range.max_rel, 2.0 / 3.0, hi)
        for rec in trace.records
    ]
    return _evaluation("local_sandwich", slacks, "(2/3) hess f <= G_k <= (3L/2mu) hess f", 1e-7)


def check_secant(trace: IterationTrace, problem: ProblemInstance) -> CheckEvaluation:
    try:
        steps = secant_report(trace, problem)
    except MissingSnapshotsError as exc:
        return CheckEvaluation(name="secant", verdict=Verdict.NOT_AVAILABLE, evaluation=str(exc))
    slacks = [
        SECANT_TOL + SECANT_ROUNDOFF_FACTOR * s.roundoff - s.residual
        for s in steps if not math.isnan(s.residual)
    ]
    return _evaluation("secant", slacks, "secant residual", 0.0)


def check_monotone_lambda(trace: IterationTrace) -> CheckEvaluation:
    """Diagnostic only: reports increases of lambda_k after the first step."""
    lams = trace.lambdas
    increases = [k for k in range(2, len(lams)) if lams[k] >= lams[k - 1]]
    if increases:
        logger.warning("lambda_k did not decrease at iterations %s", increases[:10])
    return CheckEvaluation(
        name="monotone_lambda",
        verdict=Verdict.PASS,
        evaluation=f"{len(increases)} non-decreasing steps after k=1",
        samples=max(len(lams) - 2, 0),
    )


def audit_trace(trace: IterationTrace, problem: ProblemInstance | None = None) -> list[CheckEvaluation]:
    """All invariant checks that apply to the trace's instance kind."""
    checks = []
    if trace.kind is ProblemKind.QUADRATIC:
        checks.append(check_quadratic_sandwich(trace))
    else:
        checks.append(check_hessian_sandwich(trace))
        checks.append(check_integral_sandwich(trace))
        checks.append(check_local_sandwich(trace))
    if not math.isnan(trace.lambda0):
        checks.append(check_step_bound(trace))
        checks.append(check_monotone_lambda(trace))
    checks.append(check_xi_recursion(trace))
    checks.extend(check_potential_decrease(trace))
    if problem is not None and trace.has_snapshots:
        checks.append(check_secant(trace, problem))
    return checks
