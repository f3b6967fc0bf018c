"""
Unit tests for src/imitlab/services/bounds.py

Covers:
  - verdict semantics of make_report
  - closed-form right-hand sides and their ratios
  - soundness of every deterministic check on fuzzed instances
  - generalization checks on small exact-Rademacher samples
  - miss frequencies of the high-probability bounds over resampled data (slow)
  - deterministic bounds on fitted learners (slow)
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings, strategies as st

from imitlab.core.errors import InfeasibleError
from imitlab.core.schemas import MdpFamily
from imitlab.services.bounds import (
    LEMMA1_CONSTANTS,
    BoundId,
    check_cor1,
    check_cor1_trial,
    check_lemma1,
    check_lemma2,
    check_model_bounds,
    check_policy_bounds,
    check_thm1,
    check_thm2,
    empirical_gap_inputs,
    horizon_ratio,
    lemma1_rhs,
    make_report,
    model_bias_coefficients,
    thm1_rhs,
    thm3_rhs,
)
from imitlab.services.divergences import FDivKind, MonteCarloMode, indicator_class, random_class, zero_class
from imitlab.services.env_learning import DirectJsMode, bc_env_fit, gail_env_fit
from imitlab.services.families import random_deterministic_policy, random_mdp, random_policy
from imitlab.services.imitators import ArgmaxSmoothed, bc_fit, gail_fit_js, gail_fit_lp
from imitlab.services.mdp_core import Policy, sample_occupancy, state_action_occupancy
from imitlab.services.worstcase import hard_instance


def _instance(seed: int, gamma: float, n_states: int = 3, n_actions: int = 2):
    mdp = random_mdp(MdpFamily(n_states=n_states, n_actions=n_actions), seed, gamma)
    rng = np.random.default_rng(seed + 1)
    return mdp, random_policy(n_states, n_actions, rng), random_policy(n_states, n_actions, rng)


# ── Verdicts ─────────────────────────────────────────────────

class TestMakeReport:
    """holds / slack semantics."""

    def test_holds_with_slack(self):
        report = make_report(BoundId.THM1, 0.5, 2.0)
        assert report.holds
        assert report.slack == pytest.approx(1.5)
        assert not report.vacuous

    def test_violation(self):
        report = make_report(BoundId.THM1, 2.0, 1.0)
        assert not report.holds
        assert report.slack == pytest.approx(-1.0)

    def test_tolerance_absorbs_roundoff(self):
        assert make_report(BoundId.PINSKER, 1.0 + 1e-13, 1.0).holds

    def test_infinite_rhs_is_vacuous_and_holds(self):
        report = make_report(BoundId.LEM1_KL, 3.0, math.inf)
        assert report.holds
        assert report.vacuous
        assert report.slack == math.inf

    def test_probabilistic_flag(self):
        assert make_report(BoundId.COR1, 0.0, 1.0).probabilistic
        assert make_report(BoundId.LEM2, 0.0, 1.0).probabilistic
        assert not make_report(BoundId.THM3, 0.0, 1.0).probabilistic

    def test_inputs_are_kept(self):
        assert make_report(BoundId.THM1, 0.0, 1.0, epsilon=0.1).inputs == {"epsilon": 0.1}


# ── Closed forms ─────────────────────────────────────────────

class TestRightHandSides:
    """Constants and ratios of the closed-form bounds."""

    def test_thm1_value(self):
        assert thm1_rhs(0.01, 0.9, 1.0) == pytest.approx(2 * math.sqrt(2) / 0.01 * 0.1)

    def test_thm1_infinite_epsilon(self):
        assert thm1_rhs(math.inf, 0.5, 1.0) == math.inf

    def test_zero_reward_scale_wins_over_infinity(self):
        assert thm1_rhs(math.inf, 0.5, 0.0) == 0.0

    @pytest.mark.parametrize(
        "kind, constant",
        [
            (FDivKind.JS, 2 * math.sqrt(2)),
            (FDivKind.KL, math.sqrt(2)),
            (FDivKind.REVERSE_KL, math.sqrt(2)),
            (FDivKind.CHI2, 1.0),
            (FDivKind.HELLINGER, 2.0),
        ],
    )
    def test_lemma1_constants(self, kind, constant):
        assert LEMMA1_CONSTANTS[kind] == pytest.approx(constant)
        assert lemma1_rhs(kind, 0.04, 0.5, 1.0) == pytest.approx(constant * 2.0 * 0.2)

    def test_lemma1_rejects_tv(self):
        with pytest.raises(ValueError):
            lemma1_rhs(FDivKind.TV, 0.1, 0.5, 1.0)

    @pytest.mark.parametrize("gamma", [0.0, 0.5, 0.9, 0.99])
    def test_horizon_ratio(self, gamma):
        assert horizon_ratio(gamma) == pytest.approx(1.0 / (1.0 - gamma))

    @pytest.mark.parametrize("gamma", [0.5, 0.9, 0.99])
    def test_model_bias_ratio(self, gamma):
        adversarial, one_step = model_bias_coefficients(gamma, 1.0)
        assert adversarial / one_step == pytest.approx(2.0 * (1.0 - gamma) / gamma)

    def test_thm3_without_policy_shift(self):
        assert thm3_rhs(0.01, 0.0, 0.5, 1.0) == pytest.approx(2 * math.sqrt(2) * 0.1 / 0.5)

    def test_cor1_arithmetic(self):
        expected = 2.0 / 0.25 * (math.log(16) + math.log(10)) / 100
        assert check_cor1(16, 100, 0.1, 1.0, 0.5) == pytest.approx(expected)

    @pytest.mark.parametrize("args", [(0, 10, 0.1), (4, 0, 0.1), (4, 10, 0.0), (4, 10, 1.0)])
    def test_cor1_rejects_bad_inputs(self, args):
        with pytest.raises(ValueError):
            check_cor1(*args, r_max=1.0, gamma=0.5)


# ── Soundness on fuzzed instances ────────────────────────────

class TestDeterministicSoundness:
    """Every deterministic bound holds on arbitrary instances."""

    @hyp_settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), gamma=st.sampled_from([0.0, 0.3, 0.6, 0.9, 0.95]))
    def test_policy_bounds_hold(self, seed, gamma):
        mdp, pi_e, pi_i = _instance(seed, gamma)
        for report in check_policy_bounds(mdp, pi_e, pi_i):
            assert report.holds, f"{report.bound_id.value}: lhs={report.lhs} rhs={report.rhs}"

    @hyp_settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), gamma=st.sampled_from([0.0, 0.3, 0.6, 0.9]))
    def test_model_bounds_hold(self, seed, gamma):
        mdp, pi_d, pi = _instance(seed, gamma)
        model = np.random.default_rng(seed + 7).dirichlet(np.ones(3), size=(3, 2))
        for report in check_model_bounds(mdp, model, pi_d, pi):
            assert report.holds, f"{report.bound_id.value}: lhs={report.lhs} rhs={report.rhs}"

    def test_identical_policies_have_zero_gap(self):
        mdp, pi_e, _ = _instance(11, 0.9)
        report = check_thm1(mdp, pi_e, pi_e)
        assert report.lhs == pytest.approx(0.0, abs=1e-12)
        assert report.rhs == pytest.approx(0.0, abs=1e-12)
        assert report.holds

    def test_true_model_has_no_model_error(self):
        mdp, pi_d, _ = _instance(4, 0.8)
        reports = check_model_bounds(mdp, mdp.transition, pi_d, pi_d)
        assert [r.bound_id for r in reports] == [BoundId.LEM_C1, BoundId.LEM3, BoundId.THM3]
        for report in reports:
            assert report.lhs == pytest.approx(0.0, abs=1e-10)

    def test_hard_instance_is_within_thm1(self):
        instance = hard_instance(0.9)
        report = check_thm1(instance.mdp, instance.pi_e, instance.pi_i)
        assert report.holds
        assert report.lhs == pytest.approx(0.9, abs=1e-9)

    def test_unsupported_imitator_makes_reverse_kl_bound_vacuous(self):
        instance = hard_instance(0.5)
        deterministic = Policy.deterministic([0, 0, 0], 2)
        report = check_lemma1(instance.mdp, instance.pi_e, deterministic, FDivKind.REVERSE_KL)
        assert report.vacuous
        assert report.holds


class TestCor1Trial:
    """One realizable finite-class draw."""

    def test_identical_imitator(self):
        instance = hard_instance(0.5)
        report = check_cor1_trial(instance.mdp, instance.pi_e, instance.pi_e, 8, 50, 0.1)
        assert report.probabilistic
        assert report.lhs == pytest.approx(0.0, abs=1e-12)
        assert report.inputs["pi_class_size"] == 8


# ── Generalization ───────────────────────────────────────────

class TestGeneralization:
    """Empirical gap inputs, LEM2 and THM2 on exact-Rademacher samples."""

    def _samples(self, seed: int, m: int = 10):
        mdp, pi_e, pi_i = _instance(seed, 0.5)
        sample_e = sample_occupancy(mdp, pi_e, m, seed=seed)
        sample_i = sample_occupancy(mdp, pi_i, m, seed=seed + 1)
        return mdp, pi_e, pi_i, sample_e, sample_i

    def test_gap_inputs_are_non_negative(self):
        mdp, _, _, sample_e, sample_i = self._samples(3)
        inputs = empirical_gap_inputs(mdp, indicator_class(6), sample_e, sample_i)
        assert inputs.appr >= -1e-12
        assert inputs.eps_hat >= 0.0
        assert inputs.eps_hat == pytest.approx(max(0.0, inputs.empirical_distance - inputs.appr))

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_lemma2_report(self, seed):
        mdp, pi_e, pi_i, sample_e, sample_i = self._samples(seed)
        dclass = indicator_class(6)
        inputs = empirical_gap_inputs(mdp, dclass, sample_e, sample_i)
        report = check_lemma2(
            dclass,
            sample_e,
            sample_i,
            state_action_occupancy(mdp, pi_e).rho,
            state_action_occupancy(mdp, pi_i).rho,
            inputs.appr,
            inputs.eps_hat,
            delta=0.1,
        )
        assert report.bound_id is BoundId.LEM2
        assert report.probabilistic
        assert report.inputs["hypothesis_ok"]
        assert report.inputs["estm"] >= 12.0 * math.sqrt(math.log(20.0) / 10)
        assert report.holds

    def test_thm2_report(self):
        mdp, pi_e, pi_i, sample_e, sample_i = self._samples(5)
        dclass = indicator_class(6)
        inputs = empirical_gap_inputs(mdp, dclass, sample_e, sample_i)
        report = check_thm2(mdp, dclass, pi_e, pi_i, sample_e, sample_i, inputs.appr, inputs.eps_hat, delta=0.1)
        assert report.bound_id is BoundId.THM2
        assert report.inputs["compatible_coefficient"] > 0.0
        assert report.rhs >= 0.0
        assert report.holds

    def test_thm2_needs_reward_in_span(self):
        mdp, pi_e, pi_i, sample_e, sample_i = self._samples(5)
        with pytest.raises(InfeasibleError):
            check_thm2(mdp, zero_class(6), pi_e, pi_i, sample_e, sample_i, 0.0, 0.0, delta=0.1)


# ── Resampling frequencies and fitted learners ───────────────

def _miss_frequency(reports) -> float:
    return sum(not report.holds for report in reports) / len(reports)


@pytest.mark.slow
class TestResamplingFrequency:
    """High-probability bounds miss at most about delta of the time on a fixed instance."""

    @pytest.mark.parametrize("m", [20, 50, 100])
    def test_cor1_consistent_learner(self, m):
        delta = 0.1
        mdp = random_mdp(MdpFamily(n_states=4, n_actions=2), 21, 0.5)
        pi_e = random_deterministic_policy(4, 2, np.random.default_rng(22))
        reports = []
        for resample in range(500):
            demos = sample_occupancy(mdp, pi_e, m, seed=1000 + resample)
            fit = bc_fit(demos, 4, 2, fallback=ArgmaxSmoothed(0.0))
            reports.append(check_cor1_trial(mdp, pi_e, fit.policy, 16, m, delta))
        assert _miss_frequency(reports) <= delta + 0.04

    @pytest.mark.parametrize("m", [50, 200])
    def test_lemma2_and_thm2_on_lp_imitator(self, m):
        delta = 0.1
        mdp = random_mdp(MdpFamily(n_states=3, n_actions=2), 31, 0.5)
        pi_e = random_policy(3, 2, np.random.default_rng(32))
        dclass = random_class(6, 15, seed=33, delta=1.0, symmetric=False)
        assert len(dclass) == 16
        rho_e = state_action_occupancy(mdp, pi_e).rho

        lemma2, thm2 = [], []
        for resample in range(200):
            sample_e = sample_occupancy(mdp, pi_e, m, seed=5000 + 2 * resample)
            pi_i = gail_fit_lp(mdp, dclass, sample_e.empirical_rho()).policy
            sample_i = sample_occupancy(mdp, pi_i, m, seed=5001 + 2 * resample)
            inputs = empirical_gap_inputs(mdp, dclass, sample_e, sample_i)
            mode = MonteCarloMode(draws=2000, seed=resample)
            rho_i = state_action_occupancy(mdp, pi_i).rho
            lemma2.append(
                check_lemma2(dclass, sample_e, sample_i, rho_e, rho_i, inputs.appr, inputs.eps_hat, delta, mode)
            )
            thm2.append(
                check_thm2(mdp, dclass, pi_e, pi_i, sample_e, sample_i, inputs.appr, inputs.eps_hat, delta, mode)
            )
        assert _miss_frequency(lemma2) <= delta + 0.05
        assert _miss_frequency(thm2) <= delta + 0.05


@pytest.mark.slow
class TestFittedLearners:
    """Deterministic bounds hold for fitted BC, GAIL and environment models, not only random policies."""

    @hyp_settings(max_examples=1000, deadline=None)
    @given(
        seed=st.integers(0, 2**31 - 1),
        n_states=st.integers(2, 8),
        n_actions=st.integers(1, 4),
        gamma=st.sampled_from([0.5, 0.8, 0.9, 0.99]),
    )
    def test_bounds_hold_on_fitted_outputs(self, seed, n_states, n_actions, gamma):
        mdp = random_mdp(MdpFamily(n_states=n_states, n_actions=n_actions), seed, gamma)
        pi_e = random_policy(n_states, n_actions, np.random.default_rng(seed + 1))
        demos = sample_occupancy(mdp, pi_e, 30, seed=seed + 2)
        target = demos.empirical_rho()
        dclass = random_class(n_states * n_actions, 4, seed=seed + 3)

        reports = []
        for policy in (
            bc_fit(demos, n_states, n_actions).policy,
            gail_fit_lp(mdp, dclass, target).policy,
            gail_fit_js(mdp, target, steps=50, step_size=10.0, seed=seed + 4).policy,
        ):
            reports += check_policy_bounds(mdp, pi_e, policy)

        triples = sample_occupancy(mdp, pi_e, 30, seed=seed + 5, with_next=True)
        bc_model = bc_env_fit(triples, n_states, n_actions)
        gail_model = gail_env_fit(
            mdp, pi_e, None, DirectJsMode(steps=50, step_size=20.0, seed=seed + 6), init=bc_model
        )
        shifted = pi_e.mix(Policy.uniform(n_states, n_actions), 0.8)
        for model in (bc_model, gail_model):
            reports += check_model_bounds(mdp, model, pi_e, pi_e)
            reports += check_model_bounds(mdp, model, pi_e, shifted)

        for report in reports:
            assert report.holds, f"{report.bound_id.value}: lhs={report.lhs} rhs={report.rhs}"
