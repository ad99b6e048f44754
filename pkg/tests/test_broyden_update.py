import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from pytest import mark, raises

from broyden_lab.broyden_update import (
    BFGS,
    DFP,
    TauParam,
    bfgs_bracket,
    broyd,
    broyd_det_ratio,
    broyd_inverse,
    dfp_bracket,
    inverse_residual,
    nu,
    nu_squared_rayleigh,
    phi_tau,
    secant_error,
)
from broyden_lab.operator_core import OperatorRole, PrimalVector, SpdOperator
from broyden_lab.shared_libraries.errors import (
    InvalidParameterError,
    RoleMismatchError,
    UndefinedDirectionError,
)
from broyden_lab.shared_libraries.sampling import make_rng, random_bracketed, random_direction, random_spd

TAU_GRID = [0.0, 0.25, 0.5, 0.75, 1.0]

A2 = SpdOperator(np.diag([1.0, 2.0]))
G2 = SpdOperator(np.diag([3.0, 3.0]))
U2 = PrimalVector([1.0, 1.0])


def random_triple(rng, n=5):
    a = random_spd(n, rng, 1e2)
    g = random_bracketed(a, rng, 0.3, 3.0)
    return a, g, random_direction(n, rng)


def test_tau_param_range():
    assert TauParam(0.5).tau == 0.5
    assert BFGS.tau == 0.0 and DFP.tau == 1.0
    for bad in (-0.1, 1.5):
        with raises(InvalidParameterError):
            TauParam(bad)


def test_phi_endpoints_and_fixed_point(rng):
    a, g, u = random_triple(rng)
    assert phi_tau(a, g, u, 1.0) == 1.0
    assert phi_tau(a, g, u, 0.0) == 0.0
    for tau in TAU_GRID:
        assert_allclose(phi_tau(a, a, u, tau), tau, rtol=1e-12, atol=1e-15)
        assert 0.0 <= phi_tau(a, g, u, tau) <= 1.0


def test_phi_rejects_zero_direction(rng):
    a, g, _ = random_triple(rng)
    with raises(UndefinedDirectionError):
        phi_tau(a, g, PrimalVector.zeros(5), 0.5)


def test_bfgs_two_by_two_against_textbook():
    gu = G2.entries @ U2.coords
    au = A2.entries @ U2.coords
    expected = G2.entries - np.outer(gu, gu) / (gu @ U2.coords) + np.outer(au, au) / (au @ U2.coords)
    assert_allclose(broyd(A2, G2, U2, BFGS).g_plus.entries, expected, rtol=1e-14)
    assert_allclose(bfgs_bracket(A2, G2, U2).entries, expected, rtol=1e-14)


def test_dfp_two_by_two_inverse():
    result = broyd(A2, G2, U2, DFP)
    assert_allclose(result.g_plus_inv.entries, np.linalg.inv(result.g_plus.entries), rtol=1e-12)
    assert_allclose(broyd_inverse(A2, G2, U2, DFP).entries, result.g_plus_inv.entries, rtol=1e-13)
    assert_allclose(dfp_bracket(A2, G2, U2).entries, result.g_plus.entries, rtol=1e-13)


@mark.parametrize("tau", TAU_GRID)
def test_fixed_point_and_zero_direction(rng, tau):
    a, g, u = random_triple(rng)
    assert_allclose(broyd(a, a, u, tau).g_plus.entries, a.entries, rtol=1e-11, atol=1e-12)
    assert_allclose(broyd_inverse(a, a, u, tau).entries, a.inverse().entries, rtol=1e-9, atol=1e-12)
    unchanged = broyd(a, g, PrimalVector.zeros(5), tau)
    assert unchanged.g_plus is g
    assert unchanged.det_ratio == 1.0
    assert math.isnan(unchanged.phi)


@mark.parametrize("tau", [0.0, 0.5, 1.0])
def test_inverse_maps_target_image_back(rng, tau):
    a, g, u = random_triple(rng, 6)
    h_plus = broyd_inverse(a, g, u, tau)
    assert h_plus.role is OperatorRole.DUAL_TO_PRIMAL
    assert_allclose(h_plus.entries @ (a.entries @ u.coords), u.coords, rtol=1e-10, atol=1e-12)


def test_det_ratio_examples(rng):
    a, g, u = random_triple(rng)
    assert_allclose(broyd_det_ratio(a, a, u, 0.3), 1.0, rtol=1e-12)
    eye = SpdOperator.identity(3)
    assert_allclose(broyd_det_ratio(eye, eye.scaled(2.0), PrimalVector([1.0, -2.0, 0.5]), 0.0), 2.0)
    result = broyd(a, g, u, 0.5)
    measured = math.exp(g.logdet - result.g_plus.logdet)
    assert_allclose(result.det_ratio, measured, rtol=1e-9)


def test_nu_examples(rng):
    a, g, u = random_triple(rng, 4)
    assert nu(a, a, u) == 0.0
    assert_allclose(nu(a, a.scaled(2.0), u), 1.0 / math.sqrt(2.0), rtol=1e-10)
    assert_allclose(nu(a, g, u) ** 2, nu_squared_rayleigh(a, g, u), rtol=1e-9, atol=1e-12)
    with raises(UndefinedDirectionError):
        nu(a, g, PrimalVector.zeros(4))


def test_role_checks(rng):
    a, g, u = random_triple(rng)
    with raises(RoleMismatchError):
        broyd(a.inverse(), g, u, 0.0)
    with raises(RoleMismatchError):
        broyd(a, g, u, 0.0, g_inv=g)


@settings(max_examples=60, deadline=None)
@given(
    st.integers(min_value=1, max_value=8),
    st.sampled_from(TAU_GRID + [0.1, 0.9]),
    st.integers(min_value=0, max_value=2 ** 32 - 1),
)
def test_secant_and_inverse_identities(n, tau, seed):
    rng = make_rng(seed)
    a, g, u = random_triple(rng, n)
    result = broyd(a, g, u, tau, g_inv=g.inverse())
    assert secant_error(result, a, u) <= 1e-10
    assert inverse_residual(result.g_plus, result.g_plus_inv) <= 1e-10
