"""
Campaign job.

Runs config.trials independent trials of one campaign, each with a seed
derived from (master seed, trial index), so results do not depend on how
many trials run at once. Trials run in worker threads, at most
settings.threads at a time. A failing trial is logged and counted in
aggregate.errors; the campaign continues.

Aggregation only looks at the rows, sorted by trial, so it is independent
of completion order. The report is persisted to config.output.
"""
import asyncio
import logging
import math
import time
from collections import defaultdict
from typing import Callable

from ..core.config import settings
from ..core.logging import trial_timer
from ..core.schemas import (
    Campaign,
    CampaignAggregate,
    CampaignReport,
    ExperimentConfig,
    ProbabilisticTally,
    ReportRow,
)
from ..repositories.report_repository import emit_report, is_violation
from ..services.bounds import PROBABILISTIC
from ..services.families import trial_seed
from .bound_jobs import bounds_all_trial, pac_cor1_trial, worstcase_trial
from .env_jobs import env_bc_trial, env_gail_trial
from .policy_jobs import bc_policy_trial, gail_policy_trial

logger = logging.getLogger(__name__)

TrialRunner = Callable[[ExperimentConfig, int, int], list[ReportRow]]

TRIALS: dict[Campaign, TrialRunner] = {
    Campaign.BC_POLICY: bc_policy_trial,
    Campaign.GAIL_POLICY: gail_policy_trial,
    Campaign.ENV_BC: env_bc_trial,
    Campaign.ENV_GAIL: env_gail_trial,
    Campaign.BOUNDS_ALL: bounds_all_trial,
    Campaign.WORSTCASE: worstcase_trial,
    Campaign.PAC_COR1: pac_cor1_trial,
}

PROBABILISTIC_IDS = frozenset(bound_id.value for bound_id in PROBABILISTIC)

# Allowed miss frequency is delta plus this many binomial standard deviations.
MISS_MARGIN_SIGMAS = 3.0


def _run_trial(runner: TrialRunner, config: ExperimentConfig, trial: int, seed: int) -> list[ReportRow]:
    with trial_timer(config.campaign.value, trial, seed) as extra:
        rows = runner(config, trial, seed)
        extra["reports"] = len(rows)
        extra["violations"] = sum(is_violation(row) for row in rows)
    return rows


def miss_allowance(delta: float, trials: int) -> float:
    return delta + MISS_MARGIN_SIGMAS * math.sqrt(delta * (1.0 - delta) / trials)


def aggregate(rows: list[ReportRow], delta: float, trials: int, errors: int, runtime_s: float) -> CampaignAggregate:
    """
    Summarize report rows.

    violations counts every finite-RHS report that fails. Only failures of
    deterministic bounds count in deterministic_violations; probabilistic
    bounds are tallied per bound id and compared against miss_allowance.
    """
    violations = [row for row in rows if is_violation(row)]
    misses: dict[str, list[int]] = defaultdict(lambda: [0, 0])
    for row in rows:
        if row.bound_id in PROBABILISTIC_IDS:
            misses[row.bound_id][0] += 1
            misses[row.bound_id][1] += int(not row.holds)

    tallies = []
    for bound_id in sorted(misses):
        total, missed = misses[bound_id]
        frequency = missed / total
        allowed = miss_allowance(delta, total)
        tallies.append(
            ProbabilisticTally(
                bound_id=bound_id,
                trials=total,
                misses=missed,
                frequency=frequency,
                allowed=allowed,
                exceeded=frequency > allowed,
            )
        )

    return CampaignAggregate(
        trials=trials,
        reports=len(rows),
        violations=len(violations),
        deterministic_violations=sum(row.bound_id not in PROBABILISTIC_IDS for row in violations),
        vacuous=sum(math.isinf(row.rhs) for row in rows),
        errors=errors,
        max_abs_slack_on_failure=max((abs(row.slack) for row in violations), default=0.0),
        runtime_s=runtime_s,
        probabilistic=tallies,
    )


async def run_campaign(config: ExperimentConfig, persist: bool = True) -> CampaignReport:
    """
    Main entry point for a configured campaign.

    Returns:
        CampaignReport with rows ordered by trial and the aggregate summary.

    Raises:
        OSError: if the report cannot be written to config.output.path
    """
    start = time.perf_counter()
    runner = TRIALS[config.campaign]
    semaphore = asyncio.Semaphore(settings.threads)

    async def one(trial: int) -> list[ReportRow] | None:
        seed = trial_seed(config.seed, trial)
        async with semaphore:
            try:
                return await asyncio.to_thread(_run_trial, runner, config, trial, seed)
            except Exception:
                # already logged with its traceback by trial_timer
                return None

    results = await asyncio.gather(*(one(trial) for trial in range(config.trials)))
    rows = [row for result in results if result is not None for row in result]
    errors = sum(result is None for result in results)

    report = CampaignReport(
        config=config,
        rows=rows,
        aggregate=aggregate(rows, config.delta, config.trials, errors, time.perf_counter() - start),
    )
    summary = report.aggregate
    logger.info(
        "Campaign %s completed: trials=%d reports=%d violations=%d deterministic=%d vacuous=%d errors=%d runtime=%.2fs",
        config.campaign.value,
        summary.trials,
        summary.reports,
        summary.violations,
        summary.deterministic_violations,
        summary.vacuous,
        summary.errors,
        summary.runtime_s,
    )
    if summary.errors:
        logger.warning("Campaign %s: %d of %d trials crashed", config.campaign.value, summary.errors, summary.trials)
    for tally in summary.probabilistic:
        log = logger.warning if tally.exceeded else logger.info
        log(
            "Campaign %s: %s missed %d/%d (%.3f, allowed %.3f)",
            config.campaign.value, tally.bound_id, tally.misses, tally.trials, tally.frequency, tally.allowed,
        )

    if persist:
        emit_report(report, config.output.format, config.output.path)
    return report
