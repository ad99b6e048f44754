import csv
import json

from numpy.testing import assert_allclose
from pydantic import ValidationError
from pytest import mark, raises

from broyden_lab import reporting
from broyden_lab.bounds import k0
from broyden_lab.shared_libraries.errors import ConfigError
from broyden_lab.shared_libraries.sampling import log_spaced_spectrum
from broyden_lab.shared_libraries.types import (
    EnvelopeName,
    ExperimentConfig,
    InstanceSpec,
    ScheduleSpec,
    SolverConfig,
    StartSpec,
    SweepGrid,
)
from broyden_lab.workflow import (
    apply_seed_override,
    execute_experiment,
    output_dir_for,
    run_experiment,
    run_suite,
    run_sweep,
)


def quadratic_config(name="quad", method="bfgs", **overrides):
    fields = dict(
        name=name,
        instance=InstanceSpec(kind="quadratic", n=5, mu=1.0, spectrum=log_spaced_spectrum(5, 1.0, 100.0).tolist()),
        method=ScheduleSpec(kind=method),
        solver=SolverConfig(max_iter=300),
        seed=3,
    )
    fields.update(overrides)
    return ExperimentConfig(**fields)


def negative_control_config(name="negative"):
    return ExperimentConfig(
        name=name,
        instance=InstanceSpec(kind="quadratic", n=4, mu=1.0, ell=10.0, spectrum=[1.0] * 4),
        method=ScheduleSpec(kind="bfgs"),
        solver=SolverConfig(max_iter=20),
        envelopes=[EnvelopeName.QUAD_LINEAR],
        envelope_mu_scale=2.0,
    )


def lse_region_config(method="dfp"):
    return ExperimentConfig(
        name=f"lse_region_{method}",
        instance=InstanceSpec(kind="log_sum_exp", n=8, m=20, gamma=1.0, mu=0.1),
        method=ScheduleSpec(kind=method),
        x0=StartSpec(mode="region", region_fraction=0.5),
        solver=SolverConfig(max_iter=600, grad_tol=1e-11),
        seed=11,
    )


def test_run_experiment_writes_outputs(tmp_path):
    result = run_experiment(quadratic_config(), out_root=tmp_path)
    assert result.passed
    assert result.converged
    out = tmp_path / "quad"
    for name in (reporting.TRACE_FILE, reporting.ENVELOPES_FILE, reporting.SUMMARY_FILE):
        assert (out / name).is_file()
    assert str(out / reporting.SUMMARY_FILE) in result.files

    with open(out / reporting.TRACE_FILE, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == reporting.TRACE_COLUMNS
    assert len(rows) == result.iterations + 1
    assert rows[0]["k"] == "0"

    summary = json.loads((out / reporting.SUMMARY_FILE).read_text())
    assert summary["passed"] is True
    assert summary["iterations"] == result.iterations
    assert len(summary["instance_hash"]) == 64
    assert [e["name"] for e in summary["envelopes"]] == [
        "quad_linear", "quad_superlinear", "quad_superlinear_psi",
    ]


def test_envelopes_csv_has_one_column_pair_per_report(tmp_path):
    run_experiment(quadratic_config(envelopes=[EnvelopeName.QUAD_LINEAR, EnvelopeName.QUAD_SHARPENED]), tmp_path)
    with open(tmp_path / "quad" / reporting.ENVELOPES_FILE, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    assert reader.fieldnames == [
        "k", "measured",
        "bound_quad_linear", "satisfied_quad_linear",
        "bound_quad_sharpened", "satisfied_quad_sharpened",
    ]
    assert rows[0]["bound_quad_sharpened"] == ""
    assert all(row["satisfied_quad_linear"] == "1" for row in rows)


def test_negative_control_fails(tmp_path):
    result = run_experiment(negative_control_config(), tmp_path)
    assert not result.passed
    assert result.first_violation == 1
    assert result.min_slack < 0
    assert "quad_linear" in result.message
    summary = json.loads((tmp_path / "negative" / reporting.SUMMARY_FILE).read_text())
    assert summary["passed"] is False
    assert summary["first_violation"] == 1


@mark.parametrize(
    "instance, error",
    [
        (
            InstanceSpec(kind="log_sum_exp", n=2, a_rows=[[3.0, 0.0], [0.0, 1.0]], gamma=1.0, mu=0.1),
            "InvalidParameterError",
        ),
        (
            InstanceSpec(kind="quadratic", n=2, mu=1.0, spectrum=[1.0, 4.0], b_ref=[[1.0, 0.0], [0.0, -1.0]]),
            "NotPositiveDefiniteError",
        ),
    ],
)
def test_inconsistent_instance_is_rejected_before_writing(tmp_path, instance, error):
    config = quadratic_config(name="broken", instance=instance)
    with raises(ConfigError, match=error):
        run_experiment(config, tmp_path)
    assert not (tmp_path / "broken").exists()


@mark.parametrize(
    "fields",
    [
        dict(mu=2.0, spectrum=[1.0, 4.0]),
        dict(mu=1.0, ell=3.0, spectrum=[1.0, 4.0]),
    ],
)
def test_spectrum_outside_constants_is_a_validation_error(fields):
    with raises(ValidationError):
        InstanceSpec(kind="quadratic", n=2, **fields)


def test_region_start_needs_self_concordance():
    with raises(ConfigError, match="M > 0"):
        execute_experiment(quadratic_config(x0=StartSpec(mode="region", region_fraction=0.5)))


def test_log_sum_exp_region_experiment():
    config = lse_region_config("dfp")
    outcome = execute_experiment(config)
    result = outcome.result
    assert result.passed, result.message
    assert result.converged
    region = {e.name: e for e in result.envelopes}["general_superlinear_region"]
    assert region.enforced
    assert region.k0 == k0(8, 0.1, 1.1, 1.0)
    assert_allclose(outcome.trace.lambda0, 0.5 * region.region_radius, rtol=1e-8)


def test_log_sum_exp_config_rejects_quadratic_envelopes():
    with raises(ValidationError):
        ExperimentConfig(
            instance=InstanceSpec(kind="log_sum_exp", n=3, m=4, gamma=1.0, mu=0.1),
            method=ScheduleSpec(kind="bfgs"),
            envelopes=[EnvelopeName.QUAD_LINEAR],
        )


def test_explicit_start_must_match_dimension():
    with raises(ValidationError):
        quadratic_config(x0=StartSpec(mode="explicit", coords=[0.0, 1.0]))


def test_same_seed_same_instance(tmp_path):
    first = run_experiment(quadratic_config(name="a"), tmp_path)
    second = run_experiment(quadratic_config(name="b"), tmp_path)
    hash_a = json.loads((tmp_path / "a" / reporting.SUMMARY_FILE).read_text())["instance_hash"]
    hash_b = json.loads((tmp_path / "b" / reporting.SUMMARY_FILE).read_text())["instance_hash"]
    assert hash_a == hash_b
    assert first.iterations == second.iterations


def test_output_dir_precedence(tmp_path):
    config = quadratic_config(output_dir=str(tmp_path / "custom"))
    assert output_dir_for(config) == tmp_path / "custom"
    assert output_dir_for(config, tmp_path) == tmp_path / "quad"


def test_suite_runs_every_experiment(tmp_path):
    configs = [quadratic_config("one"), quadratic_config("two", method="dfp"), negative_control_config()]
    suite = run_suite(configs, jobs=2, out_root=tmp_path)
    assert [r.name for r in suite.experiments] == ["one", "two", "negative"]
    assert [r.passed for r in suite.experiments] == [True, True, False]
    assert not suite.passed
    assert (tmp_path / "two" / reporting.SUMMARY_FILE).is_file()


def test_suite_rejects_shared_directories(tmp_path):
    with raises(ConfigError):
        run_suite([quadratic_config("same"), quadratic_config("same")], out_root=tmp_path)


def test_suite_with_an_unrealizable_experiment_writes_nothing(tmp_path):
    broken = quadratic_config(
        name="broken",
        instance=InstanceSpec(kind="log_sum_exp", n=2, a_rows=[[3.0, 0.0], [0.0, 1.0]], gamma=1.0, mu=0.1),
    )
    with raises(ConfigError, match="broken"):
        run_suite([quadratic_config("good"), broken], jobs=2, out_root=tmp_path)
    assert list(tmp_path.iterdir()) == []


def test_seed_override():
    config = quadratic_config()
    assert apply_seed_override(config, None) is config
    assert apply_seed_override(config, 99).seed == 99


def test_sweep_rows(tmp_path):
    grid = SweepGrid(dims=[2, 4], condition_numbers=[10.0, 100.0], methods=["bfgs", "dfp"])
    rows = run_sweep(grid)
    assert len(rows) == 8
    for row in rows:
        assert row.passed
        assert row.iters_to_tol is not None
        assert row.K0_new < row.K0_prev
        assert row.first_k_superlinear_env_below_linear_env is not None
    path = reporting.write_sweep_csv(rows, tmp_path / reporting.SWEEP_FILE)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        assert reader.fieldnames == reporting.SWEEP_COLUMNS
        assert len(list(reader)) == 8
