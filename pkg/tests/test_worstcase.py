"""
Unit tests for src/imitlab/services/worstcase.py
"""
import math

import numpy as np
import pytest

from imitlab.services.bounds import thm1_rhs
from imitlab.services.mdp_core import policy_value
from imitlab.services.worstcase import KAPPA, closed_forms, hard_instance, sweep, tightness_ratio

GAMMAS = [0.5, 0.9, 0.95, 0.99]


class TestClosedForms:
    """Hand-derived values on the hard instance."""

    def test_kappa(self):
        assert KAPPA == pytest.approx(0.0108961, abs=1e-7)

    def test_values_at_point_nine(self):
        forms = closed_forms(0.9)
        assert forms.v_e == pytest.approx(7.2)
        assert forms.v_i == pytest.approx(6.3)
        assert forms.gap == pytest.approx(0.9)
        assert forms.epsilon == pytest.approx(0.00108961, abs=1e-8)

    @pytest.mark.parametrize("gamma, expected", [(0.9, 8.260), (0.99, 9.086)])
    def test_ratio_values(self, gamma, expected):
        assert tightness_ratio(gamma) == pytest.approx(expected, abs=1e-3)

    @pytest.mark.parametrize("gamma", GAMMAS)
    def test_ratio_over_gamma_is_constant(self, gamma):
        assert tightness_ratio(gamma) / gamma == pytest.approx(1.0 / (10.0 * KAPPA), rel=1e-12)

    def test_ratio_undefined_at_zero(self):
        with pytest.raises(ValueError):
            tightness_ratio(0.0)

    @pytest.mark.parametrize("gamma", GAMMAS)
    def test_gap_within_thm1(self, gamma):
        forms = closed_forms(gamma)
        assert forms.gap <= thm1_rhs(forms.epsilon, gamma, 1.0)


class TestHardInstance:
    """Engine values agree with the closed forms."""

    @pytest.mark.parametrize("gamma", GAMMAS)
    def test_engine_matches(self, gamma):
        instance = hard_instance(gamma)
        forms = closed_forms(gamma)
        assert policy_value(instance.mdp, instance.pi_e) == pytest.approx(forms.v_e, abs=1e-9)
        assert policy_value(instance.mdp, instance.pi_i) == pytest.approx(forms.v_i, abs=1e-9)

    def test_layout(self):
        instance = hard_instance(0.5)
        np.testing.assert_array_equal(instance.mdp.transition[1, :, 1], [1.0, 1.0])
        np.testing.assert_array_equal(instance.mdp.init_dist, [1.0, 0.0, 0.0])
        assert instance.mdp.r_max == 1.0


class TestSweep:
    """Sweep rows computed by the engine."""

    def test_rows_match_closed_forms(self):
        for row in sweep(GAMMAS):
            forms = closed_forms(row.gamma)
            assert row.gap == pytest.approx(forms.gap, abs=1e-9)
            assert row.epsilon == pytest.approx(forms.epsilon, rel=1e-9)
            assert row.ratio == pytest.approx(tightness_ratio(row.gamma), rel=1e-6)
            assert row.gap <= row.thm1_rhs

    def test_zero_discount_row(self):
        (row,) = sweep([0.0])
        assert row.gap == pytest.approx(0.0, abs=1e-15)
        assert math.isnan(row.ratio)
