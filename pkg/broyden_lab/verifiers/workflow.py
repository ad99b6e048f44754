"""
Verification workflow.

The three suites run concurrently, each publishing its checks under its
output key; a global evaluator then folds every check into one verdict:
any FAIL fails the report, otherwise any NOT_AVAILABLE makes it
NOT_AVAILABLE, otherwise it passes.
"""

import logging
import traceback
from concurrent.futures import ThreadPoolExecutor

from ..shared_libraries.types import CheckEvaluation, Verdict, VerificationReport, VerifyRequest
from .base import Verifier
from .potential_lemmas import potential_lemmas_verifier
from .scalar_inequality import scalar_inequality_verifier
from .update_identities import update_identities_verifier

logger = logging.getLogger(__name__)

VERIFIERS = (update_identities_verifier, potential_lemmas_verifier, scalar_inequality_verifier)


def _run_verifier(verifier: Verifier, request: VerifyRequest) -> list[CheckEvaluation]:
    logger.info("Running verifier %s", verifier.name)
    try:
        return verifier.run(request)
    except Exception as e:
        logger.error(traceback.format_exc())
        return [CheckEvaluation(
            name="suite",
            verdict=Verdict.NOT_AVAILABLE,
            evaluation=f"verifier crashed: {type(e).__name__}: {e}",
        )]


def global_evaluation(evaluations: dict[str, CheckEvaluation]) -> CheckEvaluation:
    verdicts = [e.verdict for e in evaluations.values()]
    if Verdict.FAIL in verdicts:
        verdict = Verdict.FAIL
    elif Verdict.NOT_AVAILABLE in verdicts or not verdicts:
        verdict = Verdict.NOT_AVAILABLE
    else:
        verdict = Verdict.PASS
    failed = [name for name, e in evaluations.items() if e.verdict is not Verdict.PASS]
    slacks = [e.worst_slack for e in evaluations.values() if e.worst_slack is not None]
    text = f"{len(verdicts) - len(failed)}/{len(verdicts)} checks passed"
    if failed:
        text += "; not passed: " + ", ".join(failed)
    return CheckEvaluation(
        name="global",
        verdict=verdict,
        evaluation=text,
        worst_slack=min(slacks) if slacks else None,
        samples=sum(e.samples for e in evaluations.values()),
    )


def run_verification(
    request: VerifyRequest, verifiers: tuple[Verifier, ...] = VERIFIERS
) -> VerificationReport:
    with ThreadPoolExecutor(max_workers=len(verifiers)) as pool:
        outputs = list(pool.map(lambda v: _run_verifier(v, request), verifiers))
    evaluations = {
        f"{verifier.output_key}.{check.name}": check
        for verifier, checks in zip(verifiers, outputs)
        for check in checks
    }
    report = VerificationReport(evaluations=evaluations, global_evaluation=global_evaluation(evaluations))
    logger.info("Verification finished: %s", report.global_evaluation.verdict.value)
    return report
