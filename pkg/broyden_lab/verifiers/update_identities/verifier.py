from ...shared_libraries.sampling import random_invertible
from ...shared_libraries.types import CheckEvaluation, VerifyRequest
from ..base import Verifier, aggregate, derive_rng, draw_sample
from .tools import (
    check_affine_invariance,
    check_bracket_preserved,
    check_convex_combination,
    check_det_ratio,
    check_inverse_identity,
    check_secant_equation,
)

OUTPUT_KEY = "update_identities"

_CHECKS = {
    "inverse_identity": (check_inverse_identity, "G_plus H_plus = I"),
    "det_ratio": (check_det_ratio, "closed-form determinant ratio"),
    "secant": (check_secant_equation, "G_plus u = A u"),
    "bracket_preserved": (check_bracket_preserved, "eigenvalue bracket preserved"),
    "convex_combination": (check_convex_combination, "phi-combination of DFP and BFGS"),
}


def run_update_identities(request: VerifyRequest) -> list[CheckEvaluation]:
    rng = derive_rng(request.seed, OUTPUT_KEY)
    results = {name: [] for name in _CHECKS}
    results["affine_invariance"] = []
    for i in range(request.trials):
        sample = draw_sample(rng, request.n_max, i)
        for name, (tool, _) in _CHECKS.items():
            results[name].append(tool(sample))
        transform = random_invertible(sample.a.dim, rng, 10.0)
        results["affine_invariance"].append(check_affine_invariance(sample, transform))
    evaluations = [aggregate(name, results[name], what) for name, (_, what) in _CHECKS.items()]
    evaluations.append(aggregate("affine_invariance", results["affine_invariance"], "affine invariance"))
    return evaluations


update_identities_verifier = Verifier(
    name="update_identities",
    description="Randomized checks of the algebraic identities of one Broyden-class update",
    output_key=OUTPUT_KEY,
    run=run_update_identities,
)
