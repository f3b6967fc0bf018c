"""
Unit tests for src/imitlab/jobs/campaign_job.py

Covers:
  - reproducibility of campaign output under different thread counts
  - error counting when a trial raises
  - aggregation of deterministic and probabilistic verdicts
"""
import math

import pytest

from imitlab.core.config import settings
from imitlab.core.schemas import Campaign, ExperimentConfig, ReportRow
from imitlab.jobs import campaign_job
from imitlab.jobs.campaign_job import aggregate, miss_allowance, run_campaign
from imitlab.repositories.report_repository import render_report


def _config(tmp_path, campaign: str = "bounds_all", trials: int = 4, **overrides) -> ExperimentConfig:
    data = {
        "seed": 123,
        "mdp_family": {"n_states": 3, "n_actions": 2, "gammas": [0.5, 0.9]},
        "campaign": campaign,
        "trials": trials,
        "sample_sizes": [10],
        "output": {"path": str(tmp_path / "out" / f"{campaign}.csv")},
    }
    data.update(overrides)
    return ExperimentConfig.model_validate(data)


def _row(bound_id: str, holds: bool, trial: int = 0, rhs: float = 1.0, lhs: float = 0.5) -> ReportRow:
    return ReportRow(
        campaign="c", trial=trial, seed=0, gamma=0.5, bound_id=bound_id,
        lhs=lhs, rhs=rhs, slack=rhs - lhs, holds=holds,
    )


class TestRunCampaign:
    """End-to-end campaigns on small random families."""

    @pytest.mark.asyncio
    async def test_bounds_all_has_no_violations(self, tmp_path):
        config = _config(tmp_path)
        report = await run_campaign(config)
        assert report.aggregate.trials == 4
        assert report.aggregate.errors == 0
        assert report.aggregate.deterministic_violations == 0
        assert not report.aggregate.failed
        assert config.output.path.exists()
        assert [row.trial for row in report.rows] == sorted(row.trial for row in report.rows)

    @pytest.mark.asyncio
    async def test_output_independent_of_thread_count(self, tmp_path, monkeypatch):
        config = _config(tmp_path, trials=6)
        monkeypatch.setattr(settings, "threads", 1)
        serial = await run_campaign(config, persist=False)
        monkeypatch.setattr(settings, "threads", 4)
        parallel = await run_campaign(config, persist=False)
        assert render_report(serial, "csv") == render_report(parallel, "csv")

    @pytest.mark.asyncio
    async def test_worstcase_campaign(self, tmp_path):
        report = await run_campaign(_config(tmp_path, campaign="worstcase", trials=1), persist=False)
        thm1 = [row for row in report.rows if row.bound_id == "THM1"]
        assert [row.gamma for row in thm1] == [0.5, 0.9]
        assert thm1[1].lhs == pytest.approx(0.9, abs=1e-9)
        assert all(row.holds for row in report.rows)

    @pytest.mark.asyncio
    async def test_pac_cor1_rows_carry_sample_size(self, tmp_path):
        report = await run_campaign(_config(tmp_path, campaign="pac_cor1", trials=2), persist=False)
        assert report.rows
        assert {row.bound_id for row in report.rows} == {"COR1"}
        assert {row.m for row in report.rows} == {10}

    @pytest.mark.asyncio
    async def test_bc_policy_campaign(self, tmp_path):
        report = await run_campaign(_config(tmp_path, campaign="bc_policy", trials=2), persist=False)
        assert report.aggregate.errors == 0
        assert report.aggregate.deterministic_violations == 0
        assert {row.algorithm for row in report.rows} == {"bc", "dagger"}
        assert {row.bound_id for row in report.rows} >= {"THM1", "LEM1_KL", "PINSKER"}

    @pytest.mark.asyncio
    async def test_gail_policy_campaign(self, tmp_path):
        config = _config(
            tmp_path, campaign="gail_policy", trials=2,
            learners={"js_steps": 200, "class_members": 4, "rademacher_draws": 200},
        )
        report = await run_campaign(config, persist=False)
        assert report.aggregate.errors == 0
        assert report.aggregate.deterministic_violations == 0
        assert {"gail_lp", "gail_js"} <= {row.algorithm for row in report.rows}
        assert "LEM2" in {row.bound_id for row in report.rows}

    @pytest.mark.asyncio
    async def test_env_bc_campaign(self, tmp_path):
        report = await run_campaign(_config(tmp_path, campaign="env_bc", trials=2), persist=False)
        assert report.aggregate.errors == 0
        assert report.aggregate.deterministic_violations == 0
        assert {row.bound_id for row in report.rows} == {"LEM_C1", "LEM3", "THM3"}
        assert {row.algorithm for row in report.rows} == {"bc_env"}

    @pytest.mark.asyncio
    async def test_env_gail_campaign(self, tmp_path):
        config = _config(
            tmp_path, campaign="env_gail", trials=1,
            learners={"env_steps": 200, "env_outer": 4, "env_model_iters": 2, "class_members": 4},
        )
        report = await run_campaign(config, persist=False)
        assert report.aggregate.errors == 0
        assert report.aggregate.deterministic_violations == 0
        assert {row.algorithm for row in report.rows} == {"gail_env_direct_js", "gail_env_algorithm1"}

    @pytest.mark.asyncio
    async def test_failing_trial_is_counted(self, tmp_path, monkeypatch):
        real = campaign_job.TRIALS[Campaign.BOUNDS_ALL]

        def flaky(config, trial, seed):
            if trial == 1:
                raise RuntimeError("boom")
            return real(config, trial, seed)

        monkeypatch.setitem(campaign_job.TRIALS, Campaign.BOUNDS_ALL, flaky)
        report = await run_campaign(_config(tmp_path, trials=3), persist=False)
        assert report.aggregate.errors == 1
        assert {row.trial for row in report.rows} == {0, 2}
        assert report.aggregate.failed

    @pytest.mark.asyncio
    async def test_violation_fails_campaign(self, tmp_path, monkeypatch):
        monkeypatch.setitem(
            campaign_job.TRIALS,
            Campaign.BOUNDS_ALL,
            lambda config, trial, seed: [_row("THM1", False, trial=trial, lhs=2.0)],
        )
        report = await run_campaign(_config(tmp_path, trials=2), persist=False)
        assert report.aggregate.deterministic_violations == 2
        assert report.aggregate.max_abs_slack_on_failure == pytest.approx(1.0)
        assert report.aggregate.failed


class TestAggregate:
    """Summaries computed from rows alone."""

    def test_vacuous_rows_are_not_violations(self):
        rows = [_row("LEM1_KL", True, rhs=math.inf), _row("THM1", True)]
        summary = aggregate(rows, delta=0.1, trials=1, errors=0, runtime_s=0.0)
        assert summary.vacuous == 1
        assert summary.violations == 0

    def test_probabilistic_misses_within_allowance(self):
        rows = [_row("LEM2", trial != 0, trial=trial, lhs=2.0 if trial == 0 else 0.5) for trial in range(20)]
        summary = aggregate(rows, delta=0.1, trials=20, errors=0, runtime_s=0.0)
        (tally,) = summary.probabilistic
        assert tally.misses == 1
        assert tally.frequency == pytest.approx(0.05)
        assert not tally.exceeded
        assert summary.violations == 1
        assert summary.deterministic_violations == 0
        assert not summary.failed

    def test_probabilistic_misses_beyond_allowance(self):
        rows = [_row("COR1", False, trial=trial, lhs=2.0) for trial in range(10)]
        summary = aggregate(rows, delta=0.1, trials=10, errors=0, runtime_s=0.0)
        assert summary.probabilistic[0].exceeded
        assert summary.failed

    def test_miss_allowance(self):
        assert miss_allowance(0.1, 100) == pytest.approx(0.1 + 3 * 0.03)
