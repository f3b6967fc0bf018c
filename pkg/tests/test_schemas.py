"""
Unit tests for src/imitlab/core/schemas.py
"""
import math

import pytest
from pydantic import ValidationError

from imitlab.core.schemas import (
    Campaign,
    CampaignAggregate,
    ExperimentConfig,
    OutputFormat,
    ProbabilisticTally,
    ReportRow,
    format_extended,
    parse_extended,
)


def _config(**overrides) -> dict:
    data = {
        "seed": 7,
        "mdp_family": {"n_states": 3, "n_actions": 2, "gammas": [0.5, 0.9]},
        "campaign": "bounds_all",
        "trials": 4,
        "output": {"path": "out/report.csv"},
    }
    data.update(overrides)
    return data


def _row(**overrides) -> ReportRow:
    data = dict(
        campaign="bounds_all", trial=0, seed=1, gamma=0.9, bound_id="THM1",
        lhs=0.5, rhs=1.0, slack=0.5, holds=True,
    )
    data.update(overrides)
    return ReportRow(**data)


class TestExperimentConfig:
    """Validation of experiment configuration."""

    def test_defaults(self):
        config = ExperimentConfig.model_validate(_config())
        assert config.campaign is Campaign.BOUNDS_ALL
        assert config.sample_sizes == [100]
        assert config.delta == 0.1
        assert config.output.format is OutputFormat.CSV
        assert config.learners.js_steps == 2000

    @pytest.mark.parametrize(
        "overrides",
        [
            {"trials": 0},
            {"seed": -1},
            {"delta": 0.0},
            {"delta": 1.0},
            {"sample_sizes": [0]},
            {"sample_sizes": []},
            {"campaign": "nonsense"},
            {"mdp_family": {"n_states": 0, "n_actions": 2}},
            {"mdp_family": {"n_states": 2, "n_actions": 2, "gammas": [1.0]}},
            {"mdp_family": {"n_states": 2, "n_actions": 2, "gammas": []}},
            {"mdp_family": {"n_states": 2, "n_actions": 2, "dirichlet_alpha": 0.0}},
        ],
    )
    def test_invalid(self, overrides):
        with pytest.raises(ValidationError):
            ExperimentConfig.model_validate(_config(**overrides))

    def test_json_output_format(self):
        config = ExperimentConfig.model_validate(_config(output={"path": "r.json", "format": "json"}))
        assert config.output.format is OutputFormat.JSON


class TestExtendedFloats:
    """Non-finite reals on the wire."""

    def test_format(self):
        assert format_extended(math.inf) == "+inf"
        assert format_extended(-math.inf) == "-inf"
        assert format_extended(math.nan) == "nan"
        assert format_extended(1.5) == 1.5

    def test_parse(self):
        assert parse_extended("+inf") == math.inf
        assert parse_extended("-inf") == -math.inf
        assert math.isnan(parse_extended("nan"))
        assert parse_extended(2.0) == 2.0

    def test_row_json_uses_strings(self):
        text = _row(rhs=math.inf, slack=math.inf).model_dump_json()
        assert '"rhs":"+inf"' in text
        restored = ReportRow.model_validate_json(text)
        assert restored.rhs == math.inf
        assert restored.lhs == 0.5

    def test_inputs_share_the_row_encoding(self):
        inputs = {"divergence": math.inf, "floor": -math.inf, "kind": "kl", "m": 3}
        text = _row(rhs=math.inf, slack=math.inf, inputs=inputs).model_dump_json()
        assert "Infinity" not in text
        assert '"divergence":"+inf"' in text
        assert '"floor":"-inf"' in text
        restored = ReportRow.model_validate_json(text)
        assert restored.inputs == inputs


class TestCampaignAggregate:
    def test_failed_on_deterministic_violation(self):
        assert CampaignAggregate(deterministic_violations=1).failed
        assert not CampaignAggregate(violations=3).failed

    def test_failed_on_crashed_trial(self):
        assert CampaignAggregate(trials=3, errors=3).failed
        assert CampaignAggregate(trials=3, errors=1, reports=10).failed
        assert not CampaignAggregate(trials=3, reports=10).failed

    def test_failed_on_exceeded_tally(self):
        tally = ProbabilisticTally(bound_id="LEM2", trials=10, misses=9, frequency=0.9, allowed=0.5, exceeded=True)
        assert CampaignAggregate(probabilistic=[tally]).failed
