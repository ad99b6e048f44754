import math

import numpy as np
from numpy.testing import assert_allclose
from pytest import mark, raises

from broyden_lab.audit import check_quadratic_sandwich
from broyden_lab.bounds import (
    REGION_CONSTANT,
    EnvelopeReport,
    EnvelopeRow,
    env_quad_linear,
    env_quad_sharpened_factor,
    env_quad_superlinear,
    env_quad_superlinear_psi,
    env_section6,
    env_starting_moments,
    env_region_linear,
    env_region_superlinear,
    evaluate_envelopes,
    first_superlinear_crossing,
    k0,
    region_radius,
    simplification_slacks,
    start_condition_held,
)
from broyden_lab.problems import lse_random, quad_make, random_ball_start, start_at_local_norm
from broyden_lab.shared_libraries.errors import InvalidParameterError
from broyden_lab.shared_libraries.sampling import log_spaced_spectrum
from broyden_lab.shared_libraries.types import EnvelopeName, SolverConfig, Verdict
from broyden_lab.solver import TauSchedule, run_general, run_quadratic


def test_quad_linear_examples():
    assert_allclose(env_quad_linear(1.0, 100.0, 100, 1.0), 0.99 ** 100, rtol=1e-12)
    assert_allclose(env_quad_linear(1.0, 100.0, 100, 1.0), 0.3660, atol=1e-4)
    assert env_quad_linear(2.0, 2.0, 3, 5.0) == 0.0
    assert env_quad_linear(1.0, 10.0, 0, 0.7) == 0.7


def test_quad_superlinear_closed_form():
    # n=2, L/mu=10, BFGS, k=1: sqrt(2 (e^{2 ln 10} - 1)) sqrt(10)
    expected = math.sqrt(2.0 * 99.0) * math.sqrt(10.0)
    assert_allclose(env_quad_superlinear(2, 1.0, 10.0, [0.0], 1, 1.0), expected, rtol=1e-12)


def test_quad_superlinear_vanishes_when_well_conditioned():
    assert env_quad_superlinear(5, 3.0, 3.0, [0.0], 4, 1.0) == 0.0
    assert env_quad_superlinear_psi(5, 3.0, 3.0, [1.0], 4, 1.0) == 0.0


@mark.parametrize("tau", [0.0, 0.5, 1.0])
@mark.parametrize("k", [1, 5, 40, 400])
def test_psi_envelope_dominates_plain_envelope(tau, k):
    plain = env_quad_superlinear(4, 1.0, 50.0, [tau], k, 1.0)
    psi = env_quad_superlinear_psi(4, 1.0, 50.0, [tau], k, 1.0)
    assert psi >= plain


def test_superlinear_envelope_saturates_instead_of_overflowing():
    assert env_quad_superlinear(200, 1.0, 1e6, [1.0], 1, 1.0) == float(np.finfo(float).max)


def test_superlinear_taus_repeat_last_entry():
    short = env_quad_superlinear(3, 1.0, 20.0, [1.0, 0.0], 6, 1.0)
    full = env_quad_superlinear(3, 1.0, 20.0, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0], 6, 1.0)
    assert_allclose(short, full, rtol=1e-14)


def test_superlinear_needs_positive_k():
    with raises(InvalidParameterError):
        env_quad_superlinear(3, 1.0, 10.0, [0.0], 0, 1.0)
    with raises(InvalidParameterError):
        env_region_superlinear(3, 1.0, 10.0, [0.0], 0, 1.0)


def test_constants_are_validated():
    with raises(InvalidParameterError):
        env_quad_linear(0.0, 1.0, 1, 1.0)
    with raises(InvalidParameterError):
        env_quad_linear(2.0, 1.0, 1, 1.0)


def test_sharpened_factor_extremes():
    top = quad_make([10.0] * 4, seed=1, mu=1.0, ell=10.0)
    assert_allclose(env_quad_sharpened_factor(top), 0.0, atol=1e-12)
    bottom = quad_make([1.0] * 4, seed=1, mu=1.0, ell=10.0)
    assert_allclose(env_quad_sharpened_factor(bottom), 4 * math.log(10.0), rtol=1e-12)


def test_sharpened_factor_never_exceeds_plain_factor():
    for seed in range(5):
        p = quad_make(log_spaced_spectrum(6, 1.0, 30.0), seed=seed)
        assert env_quad_sharpened_factor(p) <= 6 * math.log(30.0) + 1e-12


def test_k0_examples():
    assert k0(5, 1.0, 10.0, 0.0) == math.ceil(40 * math.log(20.0)) == 120
    assert k0(5, 1.0, 10.0, 1.0) == math.ceil(900 * math.log(20.0)) == 2697


def test_k0_end_points():
    rng = np.random.default_rng(6)
    for _ in range(1000):
        n = int(rng.integers(1, 50))
        mu = float(rng.uniform(0.01, 1.0))
        ell = mu * float(10 ** rng.uniform(0, 4))
        assert k0(n, mu, ell, 0.0) == math.ceil(8 * n * math.log(2 * ell / mu))
        assert k0(n, mu, ell, 1.0) == math.ceil(18 * n * ell / mu * math.log(2 * ell / mu))


def test_k0_grows_with_tau():
    values = [k0(4, 1.0, 30.0, t) for t in (0.0, 0.25, 0.5, 0.75, 1.0)]
    assert values == sorted(values)
    with raises(InvalidParameterError):
        k0(4, 1.0, 30.0, 1.5)


def test_region_radius():
    assert math.isinf(region_radius(1.0, 10.0, 5, 0.0, 0.0))
    expected = REGION_CONSTANT * max(1.0 / 20.0, 1.0 / (120 + 9))
    assert_allclose(region_radius(1.0, 10.0, 5, 0.0, 1.0), expected, rtol=1e-14)
    assert_allclose(region_radius(1.0, 10.0, 5, 0.0, 4.0), expected / 4.0, rtol=1e-14)
    with raises(InvalidParameterError):
        region_radius(1.0, 10.0, 5, 0.0, -1.0)


def test_region_linear_starts_above_lambda0():
    assert_allclose(env_region_linear(1.0, 4.0, 0, 2.0), 2.0 * math.sqrt(1.5))
    assert_allclose(env_region_linear(1.0, 4.0, 2, 1.0), 0.875 ** 2 * math.sqrt(1.5))


def test_starting_moments():
    bfgs = env_starting_moments(10, 1.0, 100.0, 200, 1.0, "bfgs")
    assert_allclose(bfgs.start_prev, 1000.0)
    assert_allclose(bfgs.start_new, 40 * math.log(100.0))
    assert_allclose(bfgs.start_new, 184.2, atol=0.05)
    dfp = env_starting_moments(10, 1.0, 100.0, 200, 1.0, "DFP")
    assert_allclose(dfp.start_prev, 1e5)
    assert_allclose(dfp.start_new, 18420.68, atol=0.01)
    assert dfp.new is None
    assert env_section6 is env_starting_moments
    assert env_section6(10, 1.0, 100.0, 200, 1.0, "bfgs") == bfgs


def test_new_estimate_is_tighter_once_valid():
    env = env_starting_moments(10, 1.0, 100.0, 200, 1.0, "bfgs")
    assert env.new is not None
    assert env.new < env.prev
    assert env_starting_moments(10, 1.0, 100.0, 100, 1.0, "bfgs").new is None
    with raises(InvalidParameterError):
        env_starting_moments(10, 1.0, 100.0, 100, 1.0, "sr1")


@mark.parametrize("n", [1, 3, 10])
@mark.parametrize("ratio", [1.0, 2.0, 100.0, 1e6])
@mark.parametrize("stretch", [1.0, 1.5, 10.0])
def test_simplification_slacks_nonnegative(n, ratio, stretch):
    k = max(1, math.ceil(stretch * 4 * n * math.log(ratio)))
    slacks = simplification_slacks(n, ratio, k)
    assert slacks.exp_linearization >= -1e-15
    assert slacks.condition_absorption >= 0.0


def test_simplification_slacks_below_threshold():
    with raises(InvalidParameterError):
        simplification_slacks(3, 100.0, 5)
    with raises(InvalidParameterError):
        simplification_slacks(3, 0.5, 5)


@mark.parametrize("n, ratio, tau", [(2, 10.0, 0.0), (5, 100.0, 0.0), (3, 30.0, 0.5)])
def test_first_superlinear_crossing(n, ratio, tau):
    k = first_superlinear_crossing(n, 1.0, ratio, tau, 10 ** 5)
    assert k is not None
    assert env_quad_superlinear(n, 1.0, ratio, [tau], k, 1.0) < env_quad_linear(1.0, ratio, k, 1.0)
    if k > 1:
        assert env_quad_superlinear(n, 1.0, ratio, [tau], k - 1, 1.0) >= env_quad_linear(
            1.0, ratio, k - 1, 1.0
        ) * (1 - 1e-9)


def test_crossing_not_reached():
    assert first_superlinear_crossing(5, 1.0, 100.0, 0.0, 3) is None


def test_envelope_row_tolerance():
    assert EnvelopeRow(1, 1.0, 1.0, 0.0).satisfied
    assert EnvelopeRow(1, 1.0 + 1e-9, 1.0, 0.0).satisfied
    assert EnvelopeRow(1, 0.0, 0.0, -math.inf).satisfied
    bad = EnvelopeRow(1, 1.01, 1.0, 0.0)
    assert not bad.satisfied
    assert_allclose(bad.slack, -0.01)
    assert EnvelopeRow(1, 1.0, 0.0, -math.inf).slack == -math.inf


def test_report_ignores_provisional_rows():
    rows = [EnvelopeRow(1, 0.5, 1.0, 0.0), EnvelopeRow(2, 3.0, 1.0, 0.0, provisional=True)]
    report = EnvelopeReport("general_superlinear_xi", rows)
    assert report.passed
    assert report.first_violation is None
    assert_allclose(report.min_slack, 0.5)
    failing = EnvelopeReport("x", [EnvelopeRow(1, 3.0, 1.0, 0.0)])
    assert failing.first_violation == 1
    assert not failing.passed
    assert EnvelopeReport("x", failing.rows, enforced=False).passed


@mark.parametrize("seed", range(20))
def test_random_quadratics_stay_inside_envelopes(seed):
    n = 2 + seed % 5
    cond = 10 ** (1 + (seed % 3) / 2)
    sched = [TauSchedule.bfgs(), TauSchedule.dfp(), TauSchedule.constant(0.5)][seed % 3]
    p = quad_make(log_spaced_spectrum(n, 1.0, cond), seed=seed)
    trace = run_quadratic(p, random_ball_start(n, 1.0, seed=seed), sched, SolverConfig(max_iter=400))
    names = [
        EnvelopeName.QUAD_LINEAR,
        EnvelopeName.QUAD_SUPERLINEAR,
        EnvelopeName.QUAD_SUPERLINEAR_PSI,
        EnvelopeName.QUAD_SHARPENED,
    ]
    reports = evaluate_envelopes(trace, names, p)
    assert [r.name for r in reports] == [nm.value for nm in names]
    for report in reports:
        assert report.passed, (report.name, report.first_violation, report.min_slack)


def test_overstated_mu_is_caught():
    p = quad_make([1.0] * 4, seed=2, mu=1.0, ell=10.0)
    trace = run_quadratic(p, random_ball_start(4, 1.0, seed=2), TauSchedule.bfgs(), SolverConfig(max_iter=5))
    assert_allclose(trace.lambdas[1], 0.9 * trace.lambdas[0], rtol=1e-10)
    (report,) = evaluate_envelopes(trace, [EnvelopeName.QUAD_LINEAR], p, mu_scale=2.0)
    assert report.first_violation == 1
    assert not report.passed
    with raises(InvalidParameterError):
        evaluate_envelopes(trace, [EnvelopeName.QUAD_LINEAR], p, mu_scale=20.0)


def test_sharpened_envelope_needs_problem(small_quadratic):
    trace = run_quadratic(small_quadratic, random_ball_start(5, 1.0), TauSchedule.bfgs())
    with raises(InvalidParameterError):
        evaluate_envelopes(trace, [EnvelopeName.QUAD_SHARPENED])


@mark.parametrize("sched", [TauSchedule.bfgs(), TauSchedule.dfp()])
def test_log_sum_exp_inside_local_region(sched):
    p = lse_random(8, 20, 1.0, 0.1, seed=11)
    radius = region_radius(p.mu, p.ell, p.n, sched.sup_tau, p.m_const)
    x0 = start_at_local_norm(p, 0.5 * radius, seed=11)
    trace = run_general(p, x0, sched, SolverConfig(max_iter=600, grad_tol=1e-11))
    assert trace.converged
    assert start_condition_held(trace)
    reports = evaluate_envelopes(trace, problem=p)
    assert [r.name for r in reports] == [
        "general_linear_xi",
        "general_linear_region",
        "general_superlinear_xi",
        "general_superlinear_region",
    ]
    for report in reports:
        assert report.enforced
        assert report.passed, (report.name, report.first_violation, report.min_slack)
        assert report.k0 == k0(p.n, p.mu, p.ell, sched.sup_tau)


def test_region_envelopes_are_reported_only_outside_region(lse_problem):
    x0 = start_at_local_norm(lse_problem, 0.05, seed=1)
    trace = run_general(lse_problem, x0, TauSchedule.bfgs(), SolverConfig(max_iter=50))
    assert not start_condition_held(trace)
    reports = {r.name: r for r in evaluate_envelopes(trace, problem=lse_problem)}
    assert not reports["general_linear_region"].enforced
    assert reports["general_linear_region"].passed
    assert "starting condition" in reports["general_superlinear_region"].note


def acceptance_quadratic(n, cond, seed):
    rng = np.random.default_rng(seed)
    spectrum = np.exp(rng.uniform(0.0, math.log(cond), size=n))
    spectrum[0], spectrum[-1] = 1.0, cond
    return quad_make(spectrum, seed=seed, mu=1.0, ell=cond)


@mark.slow
@mark.parametrize("seed", range(5))
@mark.parametrize("cond", [10.0, 1e3])
@mark.parametrize("n", [5, 20])
def test_acceptance_quadratics_stay_inside_envelopes(n, cond, seed):
    p = acceptance_quadratic(n, cond, seed)
    x0 = random_ball_start(n, 1.0, seed=seed)
    names = [EnvelopeName.QUAD_LINEAR, EnvelopeName.QUAD_SUPERLINEAR, EnvelopeName.QUAD_SUPERLINEAR_PSI]
    for sched in (TauSchedule.bfgs(), TauSchedule.dfp(), TauSchedule.constant(0.5)):
        trace = run_quadratic(p, x0, sched, SolverConfig(max_iter=2000))
        sandwich = check_quadratic_sandwich(trace)
        assert sandwich.verdict is Verdict.PASS, (sched.label, sandwich.evaluation)
        for report in evaluate_envelopes(trace, names, p):
            assert report.passed, (sched.label, report.name, report.first_violation, report.min_slack)


@mark.slow
def test_bfgs_is_superlinear_on_ill_conditioned_quadratic():
    n = 20
    p = acceptance_quadratic(n, 1e3, seed=0)
    trace = run_quadratic(p, random_ball_start(n, 1.0, seed=0), TauSchedule.bfgs(), SolverConfig(max_iter=3 * n))
    lams = trace.lambdas
    assert lams.min() <= 1e-10 * lams[0]


def test_simplification_slacks_over_full_grid():
    for n in range(1, 51):
        for ratio in (2.0, 10.0, 1e2, 1e4):
            start = math.ceil(4 * n * math.log(ratio))
            for k in [*range(start, start + 300), 10 * start, 10 ** 6]:
                slacks = simplification_slacks(n, ratio, k)
                assert slacks.exp_linearization >= 0.0, (n, ratio, k)
                assert slacks.condition_absorption >= 0.0, (n, ratio, k)
