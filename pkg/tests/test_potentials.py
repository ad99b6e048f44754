import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from pytest import mark, raises

from broyden_lab.broyden_update import broyd, nu
from broyden_lab.operator_core import SpdOperator, rel_eigen_range
from broyden_lab.potentials import (
    SIX_THIRTEENTHS,
    SQRT3_CONSTANT,
    augmented_barrier,
    holds,
    logdet_barrier,
    logdet_bregman,
    metric_change_lb,
    potential_snapshot,
    progress_lb_psi,
    progress_lb_V,
    scalar_gap,
    tolerance,
)
from broyden_lab.shared_libraries.errors import InvalidParameterError
from broyden_lab.shared_libraries.sampling import (
    make_rng,
    random_bracketed,
    random_direction,
    random_spd,
)

TAU_GRID = [0.0, 0.25, 0.5, 0.75, 1.0]


def test_logdet_barrier_examples(rng):
    a = random_spd(3, rng)
    assert_allclose(logdet_barrier(a, a), 0.0, atol=1e-12)
    assert_allclose(logdet_barrier(a, a.scaled(2.0)), 3 * math.log(2.0), rtol=1e-12)
    b = random_spd(4, rng)
    assert_allclose(logdet_barrier(b.scaled(0.5), b.scaled(20.0)), 4 * math.log(40.0), rtol=1e-12)


def test_augmented_barrier_examples(rng):
    a = random_spd(2, rng)
    assert_allclose(augmented_barrier(a, a), 0.0, atol=1e-12)
    assert_allclose(augmented_barrier(a.scaled(2.0), a), 2 * math.log(2.0) - 1.0, rtol=1e-10)
    b = SpdOperator.identity(5)
    a = random_bracketed(b, rng, 1.0, 100.0)
    assert augmented_barrier(b.scaled(100.0), a) <= 5 * math.log(100.0) + 1e-9


def test_bregman_form_matches_for_any_reference(rng):
    a = random_spd(4, rng)
    g = random_bracketed(a, rng, 0.2, 5.0)
    psi = augmented_barrier(g, a)
    for _ in range(3):
        assert_allclose(logdet_bregman(g, a, random_spd(4, rng)), psi, rtol=1e-9, atol=1e-10)


@mark.parametrize("eta tau nu_value expected".split(), [
    (3.0, 0.5, 0.0, 0.0),
    (7.0, 0.0, 1.0, math.log(2.0)),
    (4.0, 1.0, 2.0, math.log(2.0)),
])
def test_progress_lb_v_examples(eta, tau, nu_value, expected):
    assert_allclose(progress_lb_V(eta, tau, nu_value), expected)


@mark.parametrize("xi eta tau nu_value expected".split(), [
    (1.0, 1.0, 0.3, 0.0, 0.0),
    (5.0, 5.0, 0.0, 1.0, SIX_THIRTEENTHS * math.log(2.0)),
    (2.0, 2.0, 1.0, 2.0, SIX_THIRTEENTHS * math.log(2.0)),
])
def test_progress_lb_psi_examples(xi, eta, tau, nu_value, expected):
    assert_allclose(progress_lb_psi(xi, eta, tau, nu_value), expected)


def test_progress_bounds_reject_small_brackets():
    with raises(InvalidParameterError):
        progress_lb_V(0.5, 0.0, 1.0)
    with raises(InvalidParameterError):
        progress_lb_psi(1.0, 0.9, 0.0, 1.0)


def test_scalar_gap_examples():
    assert scalar_gap(1.0, 1.0) == (0.0, 0.0)
    lhs, rhs = scalar_gap(2.0, 1.0)
    assert_allclose([lhs, rhs], [1.0, 0.3199], atol=1e-4)
    lhs, rhs = scalar_gap(4.0, 4.0)
    assert_allclose([lhs, rhs], [3.0 - math.log(4.0), SIX_THIRTEENTHS * math.log(3.25)])
    assert lhs >= rhs
    lhs_sqrt3, rhs_sqrt3 = scalar_gap(4.0, 4.0, SQRT3_CONSTANT)
    assert rhs_sqrt3 > rhs and lhs_sqrt3 >= rhs_sqrt3


def test_scalar_gap_preconditions():
    with raises(InvalidParameterError):
        scalar_gap(1.0, 2.0)
    with raises(InvalidParameterError):
        scalar_gap(1.0, 0.0)
    with raises(InvalidParameterError):
        scalar_gap(2.0, 1.0, 0.5)


def test_metric_change_examples(rng):
    a = random_spd(3, rng)
    u = random_direction(3, rng)
    assert_allclose(metric_change_lb(a, a, u, 0.5), (0.0, 0.0), atol=1e-12)
    nu_sq, rhs = metric_change_lb(a, a.scaled(2.0), u, 0.0)
    assert_allclose(nu_sq, 0.5, rtol=1e-10)
    assert nu_sq >= rhs


def test_snapshot_fields(rng):
    a = random_spd(4, rng)
    g = random_bracketed(a, rng, 1.0, 3.0)
    u = random_direction(4, rng)
    snap = potential_snapshot(a, g, u)
    assert snap.v >= -1e-9 and snap.psi >= -1e-9
    assert_allclose(snap.nu, nu(a, g, u))


@settings(max_examples=80, deadline=None)
@given(
    st.integers(min_value=1, max_value=12),
    st.sampled_from(TAU_GRID),
    st.integers(min_value=0, max_value=2 ** 32 - 1),
)
def test_potential_lemmas_hold(n, tau, seed):
    rng = make_rng(seed)
    a = random_spd(n, rng, 1e2)
    u = random_direction(n, rng)

    above = random_bracketed(a, rng, 1.0, 6.0)
    eta = rel_eigen_range(above, a).eta
    drop_v = logdet_barrier(a, above) - logdet_barrier(a, broyd(a, above, u, tau).g_plus)
    assert holds(drop_v, progress_lb_V(eta, tau, nu(a, above, u)))

    g = random_bracketed(a, rng, 0.2, 5.0)
    bracket = rel_eigen_range(g, a)
    g_plus = broyd(a, g, u, tau).g_plus
    drop_psi = augmented_barrier(g, a) - augmented_barrier(g_plus, a)
    assert holds(drop_psi, progress_lb_psi(bracket.xi, bracket.eta, tau, nu(a, g, u)))
    assert augmented_barrier(g, a) >= -1e-9

    nu_sq, rhs = metric_change_lb(a, g, u, tau)
    assert nu_sq - rhs >= -tolerance(nu_sq)


def test_scalar_inequality_on_grid():
    betas = np.geomspace(1e-6, 1e6, 60)
    ratios = np.geomspace(1.0, 1e6, 60)
    for beta in betas:
        for ratio in ratios:
            alpha = beta * ratio
            for constant in (SQRT3_CONSTANT, SIX_THIRTEENTHS):
                lhs, rhs = scalar_gap(alpha, beta, constant)
                assert holds(lhs, rhs)
            assert alpha + 1.0 / beta - 1.0 >= 1.0 - 1e-12
