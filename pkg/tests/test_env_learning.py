"""
Unit tests for src/imitlab/services/env_learning.py
"""
import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings, strategies as st

from imitlab.core.errors import ShapeError
from imitlab.core.schemas import MdpFamily
from imitlab.services.divergences import DiscriminatorClass, random_class
from imitlab.services.env_learning import (
    Algorithm1Mode,
    DirectJsMode,
    LearnedModel,
    bc_env_fit,
    eval_in_model,
    gail_env_fit,
    joint_distribution,
    joint_js,
    logistic_best_response,
    model_kl_error,
)
from imitlab.services.families import random_mdp, random_policy
from imitlab.services.imitators import js_objective
from imitlab.services.mdp_core import (
    Demonstrations,
    dual_mdp,
    policy_value,
    sample_occupancy,
    state_action_occupancy,
)


def _instance(seed: int = 0, gamma: float = 0.5, alpha: float = 1.0):
    mdp = random_mdp(MdpFamily(n_states=3, n_actions=2, dirichlet_alpha=alpha), seed, gamma)
    pi_d = random_policy(3, 2, np.random.default_rng(seed + 1))
    return mdp, pi_d


def _uniform_model(mdp) -> np.ndarray:
    return np.full(mdp.transition.shape, 1.0 / mdp.n_states)


class TestJointDistribution:
    """Joint (s, a, s') distributions and evaluation inside a model."""

    def test_marginal_is_occupancy(self):
        mdp, pi_d = _instance()
        joint = joint_distribution(mdp.transition, mdp, pi_d)
        assert joint.table.sum() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(joint.pair_marginal(), state_action_occupancy(mdp, pi_d).rho, atol=1e-12)

    def test_eval_in_true_model(self):
        mdp, pi_d = _instance(3)
        assert eval_in_model(mdp.transition, mdp, pi_d) == pytest.approx(policy_value(mdp, pi_d), abs=1e-12)

    def test_learned_model_is_accepted(self):
        mdp, pi_d = _instance(3)
        model = LearnedModel(mdp.transition)
        assert eval_in_model(model, mdp, pi_d) == pytest.approx(policy_value(mdp, pi_d), abs=1e-12)

    def test_true_model_has_zero_errors(self):
        mdp, pi_d = _instance(5)
        assert model_kl_error(mdp, mdp.transition, pi_d) == pytest.approx(0.0, abs=1e-15)
        assert joint_js(mdp, mdp.transition, pi_d) == pytest.approx(0.0, abs=1e-15)

    def test_wrong_model_has_positive_errors(self):
        mdp, pi_d = _instance(5)
        assert model_kl_error(mdp, _uniform_model(mdp), pi_d) > 0.0
        assert joint_js(mdp, _uniform_model(mdp), pi_d) > 0.0

    def test_shape_mismatch(self):
        mdp, pi_d = _instance()
        with pytest.raises(ShapeError):
            eval_in_model(np.full((2, 2, 2), 0.5), mdp, pi_d)

    def test_learned_model_must_be_square(self):
        with pytest.raises(ShapeError):
            LearnedModel(np.full((2, 2, 3), 1 / 3))


class TestBcEnvFit:
    """Tabular transition MLE."""

    def test_counts_and_fallback(self):
        triples = Demonstrations.from_triples([[0, 0, 1], [0, 0, 1], [0, 0, 0], [1, 1, 1]], 2, 2)
        model = bc_env_fit(triples, 2, 2)
        np.testing.assert_allclose(model.transition[0, 0], [1 / 3, 2 / 3])
        np.testing.assert_allclose(model.transition[1, 1], [0.0, 1.0])
        np.testing.assert_allclose(model.transition[0, 1], [0.5, 0.5])
        assert model.diagnostics["algorithm"] == "bc_env"

    def test_needs_next_states(self):
        with pytest.raises(ShapeError):
            bc_env_fit(Demonstrations([[0, 0]], 2, 2), 2, 2)

    def test_large_sample_recovers_visited_rows(self):
        mdp, pi_d = _instance(9)
        triples = sample_occupancy(mdp, pi_d, 100_000, seed=2, with_next=True)
        model = bc_env_fit(triples, 3, 2)
        counts = np.bincount(triples.pair_indices(), minlength=6).reshape(3, 2)
        for s, a in zip(*np.nonzero(counts >= 500)):
            np.testing.assert_allclose(model.transition[s, a], mdp.transition[s, a], atol=0.1)


class TestLogisticBestResponse:
    """Discriminator choice over a finite class."""

    def test_prefers_member_separating_the_joints(self):
        dclass = DiscriminatorClass(
            np.array([[0.0, 0.0], [3.0, -3.0], [-3.0, 3.0]]), delta=3.0, includes_zero=True
        )
        model_joint = np.array([1.0, 0.0])
        expert_joint = np.array([0.0, 1.0])
        assert logistic_best_response(dclass, model_joint, expert_joint) == 1
        assert logistic_best_response(dclass, expert_joint, model_joint) == 2


class TestGailEnvFit:
    """Adversarial transition learning in both modes."""

    def test_direct_js_improves_on_uniform_start(self):
        mdp, pi_d = _instance(4, alpha=5.0)
        start = _uniform_model(mdp)
        model = gail_env_fit(mdp, pi_d, None, DirectJsMode(steps=200, step_size=1.0, seed=0), init=start)
        assert model.diagnostics["joint_js"] < joint_js(mdp, start, pi_d)
        assert model.diagnostics["joint_js"] == pytest.approx(joint_js(mdp, model.transition, pi_d), abs=1e-12)

    @hyp_settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 10_000), gamma=st.sampled_from([0.0, 0.5, 0.9]))
    def test_direct_js_gradient_matches_central_differences(self, seed, gamma):
        mdp, pi_d = _instance(seed, gamma=gamma)
        dual = dual_mdp(mdp, pi_d)
        target = joint_distribution(mdp.transition, mdp, pi_d).table.reshape(6, 3)
        logits = np.random.default_rng(seed).normal(size=(6, 3))
        _, grad = js_objective(dual, logits, target)
        h = 1e-5
        numeric = np.zeros_like(logits)
        for index in np.ndindex(logits.shape):
            up, down = logits.copy(), logits.copy()
            up[index] += h
            down[index] -= h
            numeric[index] = (js_objective(dual, up, target)[0] - js_objective(dual, down, target)[0]) / (2 * h)
        assert np.abs(grad - numeric).max() <= 1e-5

    def test_direct_js_recovers_four_state_model(self):
        mdp = random_mdp(MdpFamily(n_states=4, n_actions=2), 11, 0.5)
        pi_d = random_policy(4, 2, np.random.default_rng(12))
        model = gail_env_fit(mdp, pi_d, None, DirectJsMode(steps=5000, step_size=20.0, seed=0))
        assert model.diagnostics["joint_js"] <= 1e-5

    def test_direct_js_without_init(self):
        mdp, pi_d = _instance(4, alpha=5.0)
        model = gail_env_fit(mdp, pi_d, None, DirectJsMode(steps=50, step_size=1.0, seed=1))
        assert model.diagnostics["joint_js"] <= model.diagnostics["initial_js"] + 1e-12

    def test_algorithm1_best_iterate_not_worse_than_start(self):
        mdp, pi_d = _instance(6)
        dclass = random_class(18, 6, seed=0, delta=3.0)
        mode = Algorithm1Mode(outer=10, model_iters=2, disc_iters=1, seed=3)
        model = gail_env_fit(mdp, pi_d, dclass, mode)
        assert model.diagnostics["joint_js"] <= joint_js(mdp, _uniform_model(mdp), pi_d) + 1e-15
        assert model.diagnostics["reward_clip"] == 30.0

    def test_algorithm1_sampled_is_deterministic(self):
        mdp, pi_d = _instance(6)
        dclass = random_class(18, 4, seed=1, delta=3.0)
        mode = Algorithm1Mode(outer=3, model_iters=1, disc_iters=2, seed=8, batch_size=50)
        a = gail_env_fit(mdp, pi_d, dclass, mode)
        b = gail_env_fit(mdp, pi_d, dclass, mode)
        np.testing.assert_array_equal(a.transition, b.transition)

    def test_algorithm1_needs_class(self):
        mdp, pi_d = _instance()
        with pytest.raises(ValueError):
            gail_env_fit(mdp, pi_d, None, Algorithm1Mode(outer=1, model_iters=1, disc_iters=1, seed=0))

    def test_class_must_cover_triples(self):
        mdp, pi_d = _instance()
        with pytest.raises(ShapeError):
            gail_env_fit(mdp, pi_d, random_class(6, 2, seed=0), Algorithm1Mode(1, 1, 1, seed=0))
