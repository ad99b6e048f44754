from ...shared_libraries.sampling import random_spd
from ...shared_libraries.types import CheckEvaluation, VerifyRequest
from ..base import Verifier, aggregate, derive_rng, draw_sample
from .tools import (
    check_augmented_progress,
    check_bregman_identity,
    check_logdet_progress,
    check_metric_change,
)

OUTPUT_KEY = "potential_lemmas"


def run_potential_lemmas(request: VerifyRequest) -> list[CheckEvaluation]:
    rng = derive_rng(request.seed, OUTPUT_KEY)
    bregman, logdet, augmented, metric = [], [], [], []
    for i in range(request.trials):
        sample = draw_sample(rng, request.n_max, i)
        bregman.append(check_bregman_identity(sample, random_spd(sample.a.dim, rng, 1e2)))
        augmented.append(check_augmented_progress(sample))
        metric.append(check_metric_change(sample))
        # V only decreases by the bound when A <= G
        above = draw_sample(rng, request.n_max, i, lo_range=(1.0, 1.0), hi_range=(1.0, 8.0))
        logdet.append(check_logdet_progress(above))
    return [
        aggregate("bregman_identity", bregman, "psi >= 0 and equals the Bregman divergence"),
        aggregate("logdet_progress", logdet, "decrease of V against its lower bound"),
        aggregate("augmented_progress", augmented, "decrease of psi against its lower bound"),
        aggregate("metric_change", metric, "nu^2 against the updated-metric residual"),
    ]


potential_lemmas_verifier = Verifier(
    name="potential_lemmas",
    description="Randomized checks of the potential-decrease lemmas",
    output_key=OUTPUT_KEY,
    run=run_potential_lemmas,
)
