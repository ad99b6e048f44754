from ...broyden_update import broyd, nu
from ...operator_core import SpdOperator, rel_eigen_range
from ...potentials import (
    augmented_barrier,
    logdet_barrier,
    logdet_bregman,
    metric_change_lb,
    progress_lb_psi,
    progress_lb_V,
    tolerance,
)
from ...shared_libraries.errors import BroydenLabError
from ..base import Sample

BREGMAN_RTOL = 1e-8


def _error(exc: Exception) -> dict:
    return {"status": "error", "error_message": f"{type(exc).__name__}: {exc}"}


def check_bregman_identity(sample: Sample, reference: SpdOperator) -> dict:
    """psi(G, A) is nonnegative and equals the log-det Bregman divergence for any reference.

    Args:
        sample (Sample): the pair (A, G)
        reference (SpdOperator): an arbitrary reference operator B

    Returns:
        dict: 'status'; on success 'psi', 'bregman' and the smaller of the two slacks.
    """
    try:
        psi = augmented_barrier(sample.g, sample.a)
        bregman = logdet_bregman(sample.g, sample.a, reference)
    except BroydenLabError as exc:
        return _error(exc)
    gap = BREGMAN_RTOL * (1.0 + abs(psi)) - abs(bregman - psi)
    return {"status": "success", "psi": psi, "bregman": bregman, "slack": min(psi + tolerance(psi), gap)}


def check_logdet_progress(sample: Sample) -> dict:
    """Decrease of V(A, .) against its lower bound; the sample must satisfy A <= G.

    Returns:
        dict: 'status'; on success 'decrease', 'bound' and 'slack'.
    """
    try:
        eta = rel_eigen_range(sample.g, sample.a).eta
        result = broyd(sample.a, sample.g, sample.u, sample.tau)
        drop = logdet_barrier(sample.a, sample.g) - logdet_barrier(sample.a, result.g_plus)
        bound = progress_lb_V(eta, sample.tau, nu(sample.a, sample.g, sample.u))
    except BroydenLabError as exc:
        return _error(exc)
    return {"status": "success", "decrease": drop, "bound": bound, "slack": drop - bound + tolerance(drop)}


def check_augmented_progress(sample: Sample) -> dict:
    """Decrease of psi(., A) against its lower bound, with the tight xi and eta of the sample."""
    try:
        bracket = rel_eigen_range(sample.g, sample.a)
        result = broyd(sample.a, sample.g, sample.u, sample.tau)
        drop = augmented_barrier(sample.g, sample.a) - augmented_barrier(result.g_plus, sample.a)
        bound = progress_lb_psi(bracket.xi, bracket.eta, sample.tau, nu(sample.a, sample.g, sample.u))
    except BroydenLabError as exc:
        return _error(exc)
    return {"status": "success", "decrease": drop, "bound": bound, "slack": drop - bound + tolerance(drop)}


def check_metric_change(sample: Sample) -> dict:
    """nu^2 dominates the weighted residual measured in the updated metric."""
    try:
        nu_sq, rhs = metric_change_lb(sample.a, sample.g, sample.u, sample.tau)
    except BroydenLabError as exc:
        return _error(exc)
    return {"status": "success", "nu_squared": nu_sq, "bound": rhs, "slack": nu_sq - rhs + tolerance(nu_sq)}
