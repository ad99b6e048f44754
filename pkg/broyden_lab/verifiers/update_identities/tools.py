import numpy as np

from ...broyden_update import bfgs_bracket, broyd, dfp_bracket, inverse_residual, secant_error
from ...operator_core import PrimalVector, SpdOperator, rel_eigen_range
from ...shared_libraries.errors import BroydenLabError
from ..base import Sample

INVERSE_TOL = 1e-10
DET_RATIO_RTOL = 1e-9
SECANT_TOL = 1e-10
BRACKET_RTOL = 1e-9
COMBINATION_RTOL = 1e-10
AFFINE_RTOL = 1e-8


def _error(exc: Exception) -> dict:
    return {"status": "error", "error_message": f"{type(exc).__name__}: {exc}"}


def check_inverse_identity(sample: Sample) -> dict:
    """Checks that the rank-two inverse formula really inverts the updated operator.

    Args:
        sample (Sample): target A, approximation G, direction u and tau

    Returns:
        dict: 'status' ('success' or 'error'). On success, 'residual' is the
              spectral norm of G_plus H_plus - I and 'slack' is INVERSE_TOL minus it.
              On error, 'error_message'.
    """
    try:
        result = broyd(sample.a, sample.g, sample.u, sample.tau)
        residual = inverse_residual(result.g_plus, result.g_plus_inv)
    except BroydenLabError as exc:
        return _error(exc)
    return {"status": "success", "residual": residual, "slack": INVERSE_TOL - residual}


def check_det_ratio(sample: Sample) -> dict:
    """Compares the closed-form determinant ratio with the factorized determinants.

    Returns:
        dict: 'status'; on success 'relative_error' and 'slack'.
    """
    try:
        result = broyd(sample.a, sample.g, sample.u, sample.tau)
    except BroydenLabError as exc:
        return _error(exc)
    measured = float(np.exp(sample.g.logdet - result.g_plus.logdet))
    rel = abs(result.det_ratio - measured) / measured
    return {"status": "success", "relative_error": rel, "slack": DET_RATIO_RTOL - rel}


def check_secant_equation(sample: Sample) -> dict:
    """G_plus u = A u, relative to ||A u||."""
    try:
        result = broyd(sample.a, sample.g, sample.u, sample.tau)
    except BroydenLabError as exc:
        return _error(exc)
    err = secant_error(result, sample.a, sample.u)
    return {"status": "success", "relative_error": err, "slack": SECANT_TOL - err}


def check_bracket_preserved(sample: Sample) -> dict:
    """If A / xi <= G <= eta A with xi, eta >= 1, the update keeps the same bracket.

    Returns:
        dict: 'status'; on success the brackets before and after and a
              relative 'slack' that is negative when the update leaves the bracket.
    """
    try:
        before = rel_eigen_range(sample.g, sample.a)
        result = broyd(sample.a, sample.g, sample.u, sample.tau)
        after = rel_eigen_range(result.g_plus, sample.a)
    except BroydenLabError as exc:
        return _error(exc)
    lo = min(before.min_rel, 1.0)
    hi = max(before.max_rel, 1.0)
    slack = min((after.min_rel - lo) / lo, (hi - after.max_rel) / hi) + BRACKET_RTOL
    return {
        "status": "success",
        "before": [before.min_rel, before.max_rel],
        "after": [after.min_rel, after.max_rel],
        "slack": slack,
    }


def check_convex_combination(sample: Sample) -> dict:
    """The update equals phi * DFP + (1 - phi) * BFGS with phi in [0, 1]."""
    try:
        result = broyd(sample.a, sample.g, sample.u, sample.tau)
        dfp = dfp_bracket(sample.a, sample.g, sample.u).entries
        bfgs = bfgs_bracket(sample.a, sample.g, sample.u).entries
    except BroydenLabError as exc:
        return _error(exc)
    mixed = result.phi * dfp + (1.0 - result.phi) * bfgs
    scale = float(np.linalg.norm(result.g_plus.entries))
    rel = float(np.linalg.norm(result.g_plus.entries - mixed)) / scale
    phi_slack = min(result.phi, 1.0 - result.phi) + COMBINATION_RTOL
    return {
        "status": "success",
        "phi": result.phi,
        "relative_error": rel,
        "slack": min(COMBINATION_RTOL - rel, phi_slack),
    }


def check_affine_invariance(sample: Sample, transform: np.ndarray) -> dict:
    """Updating in transformed coordinates commutes with the change of basis.

    Args:
        sample (Sample): the instance in the original coordinates
        transform (np.ndarray): invertible n x n change of basis T

    Returns:
        dict: 'status'; on success the relative Frobenius distance between
              Broyd(T^T A T, T^T G T, T^-1 u) and T^T Broyd(A, G, u) T.
    """
    try:
        t = transform
        a_t = SpdOperator.from_matrix(t.T @ sample.a.entries @ t)
        g_t = SpdOperator.from_matrix(t.T @ sample.g.entries @ t)
        u_t = PrimalVector(np.linalg.solve(t, sample.u.coords))
        moved = broyd(a_t, g_t, u_t, sample.tau).g_plus.entries
        expected = t.T @ broyd(sample.a, sample.g, sample.u, sample.tau).g_plus.entries @ t
    except BroydenLabError as exc:
        return _error(exc)
    rel = float(np.linalg.norm(moved - expected)) / float(np.linalg.norm(expected))
    return {"status": "success", "relative_error": rel, "slack": AFFINE_RTOL - rel}
