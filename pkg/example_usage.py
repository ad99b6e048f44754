"""
Example usage of the broyden_lab harness with structured experiment configs.

This demonstrates how to run experiments programmatically and read their
envelope verdicts, suitable for notebook or API integration.
"""

import json

from broyden_lab.shared_libraries.types import ExperimentConfig
from broyden_lab.workflow import run_experiment


def evaluate_experiment(config_data: dict):
    """
    Run one experiment in memory and summarize its verdict.

    Args:
        config_data: Dictionary containing:
            - name: str - Experiment name
            - instance: dict - Problem instance definition
            - method: dict - Tau schedule (bfgs, dfp, constant, sequence)
            - x0: dict - Starting point rule (optional)

    Returns:
        Compact summary with the verdict and every envelope's first violation
    """
    # Validate input
    config = ExperimentConfig(**config_data)

    result = run_experiment(config, write_files=False)

    return {
        "passed": result.passed,
        "iterations": result.iterations,
        "converged": result.converged,
        "envelopes": {
            e.name: {"enforced": e.enforced, "first_violation": e.first_violation, "min_slack": e.min_slack}
            for e in result.envelopes
        },
    }


# Example usage
if __name__ == "__main__":
    # Example 1: BFGS on an ill-conditioned quadratic
    quadratic_bfgs = {
        "name": "quadratic_bfgs",
        "instance": {"kind": "quadratic", "n": 10, "mu": 1.0, "ell": 100.0},
        "method": {"kind": "bfgs"},
        "seed": 1,
    }

    # Example 2: DFP on a log-sum-exp instance started inside the local region
    lse_region_dfp = {
        "name": "lse_region_dfp",
        "instance": {"kind": "log_sum_exp", "n": 8, "m": 20, "gamma": 1.0, "mu": 0.1},
        "method": {"kind": "dfp"},
        "x0": {"mode": "region", "region_fraction": 0.5},
        "solver": {"max_iter": 600, "grad_tol": 1e-11},
        "seed": 11,
    }

    # Example 3: Negative control (mu overstated to the envelopes, must fail)
    negative_control = {
        "name": "negative_control",
        "instance": {"kind": "quadratic", "n": 4, "mu": 1.0, "ell": 10.0, "spectrum": [1.0, 1.0, 1.0, 1.0]},
        "method": {"kind": "bfgs"},
        "envelopes": ["quad_linear"],
        "envelope_mu_scale": 2.0,
    }

    for title, config in (
        ("QUADRATIC BFGS", quadratic_bfgs),
        ("LOG-SUM-EXP DFP IN THE LOCAL REGION", lse_region_dfp),
        ("NEGATIVE CONTROL", negative_control),
    ):
        print("=" * 80)
        print(title)
        print("=" * 80)
        print(json.dumps(config, indent=2))
        print("\nRunning experiment...")
        print(json.dumps(evaluate_experiment(config), indent=2))
        print()
