"""
Transition-model imitation.

A transition model M(s'|s,a) is treated as a policy of the dual MDP whose
states are (s, a) pairs and whose actions are next states. Under that view
the dual occupancy of the model is exactly the joint (s, a, s') distribution
of the data-collecting policy inside the model, so BC and GAIL machinery
for policies carries over unchanged.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import log_expit

from ..core.errors import ShapeError
from ..core.validation import SOLVE_TOL, as_distribution, check_shape, frozen, validate_count
from .divergences import DiscriminatorClass, FDivKind, f_divergence, rowwise_divergence
from .imitators import (
    Fallback,
    UniformFallback,
    bc_fit,
    gail_fit_js,
    scale_rewards,
    soft_policy_step,
    softmax_policy,
)
from .mdp_core import (
    Demonstrations,
    Policy,
    TabularMdp,
    action_values,
    dual_mdp,
    dual_policy_as_model,
    model_as_dual_policy,
    policy_value,
    sample_occupancy,
    state_action_occupancy,
)

logger = logging.getLogger(__name__)

REWARD_CLIP = 30.0


@dataclass(frozen=True, eq=False)
class LearnedModel:
    """Row-stochastic transition tensor (s, a, s') plus how it was obtained."""

    transition: np.ndarray
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        transition = as_distribution(self.transition, name="learned model")
        if transition.ndim != 3 or transition.shape[0] != transition.shape[2]:
            raise ShapeError(f"learned model must be (s, a, s), got {transition.shape}")
        object.__setattr__(self, "transition", frozen(transition))


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """mu(s, a, s') = M(s'|s,a) rho(s,a) for a data-collecting policy inside M."""

    table: np.ndarray

    def __post_init__(self) -> None:
        table = np.array(self.table, dtype=float)
        if table.ndim != 3:
            raise ShapeError("joint distribution must be (s, a, s')")
        flat = as_distribution(table.ravel(), tol=SOLVE_TOL, name="joint distribution")
        object.__setattr__(self, "table", frozen(flat.reshape(table.shape)))

    def pair_marginal(self) -> np.ndarray:
        return self.table.sum(axis=2)


def _transition_of(model) -> np.ndarray:
    return model.transition if isinstance(model, LearnedModel) else np.asarray(model, dtype=float)


# ── Joint distributions and evaluation ───────────────────────

def joint_distribution(model, reward_mdp: TabularMdp, pi_d: Policy) -> JointDistribution:
    """Joint of pi_d run inside model, using reward_mdp's gamma and d0 only."""
    transition = _transition_of(model)
    check_shape(transition, reward_mdp.transition.shape, "model")
    rho = state_action_occupancy(reward_mdp.with_transition(transition), pi_d).rho
    return JointDistribution(rho[:, :, None] * transition)


def eval_in_model(model, reward_mdp: TabularMdp, pi: Policy) -> float:
    """V^pi inside the model, with reward_mdp's reward, gamma and d0."""
    transition = _transition_of(model)
    check_shape(transition, reward_mdp.transition.shape, "model")
    return policy_value(reward_mdp.with_transition(transition), pi)


def model_kl_error(true_mdp: TabularMdp, model, pi_d: Policy) -> float:
    """E_{(s,a) ~ rho*_{pi_d}}[KL(M*(.|s,a), M(.|s,a))]."""
    transition = _transition_of(model)
    check_shape(transition, true_mdp.transition.shape, "model")
    rho = state_action_occupancy(true_mdp, pi_d).rho
    per_pair = rowwise_divergence(FDivKind.KL, true_mdp.transition, transition)
    with np.errstate(invalid="ignore"):
        weighted = np.where(rho > 0, rho * per_pair, 0.0)
    return float(weighted.sum())


def joint_js(true_mdp: TabularMdp, model, pi_d: Policy) -> float:
    """JS(mu^M, mu^M*) for pi_d, the model-bias quantity bounded in terms of the value gap."""
    mine = joint_distribution(model, true_mdp, pi_d).table
    truth = joint_distribution(true_mdp.transition, true_mdp, pi_d).table
    return f_divergence(FDivKind.JS, mine, truth)


# ── BC transition learning ───────────────────────────────────

def bc_env_fit(
    triples: Demonstrations,
    n_states: int,
    n_actions: int,
    fallback: Fallback = UniformFallback(),
    smoothing: float = 0.0,
) -> LearnedModel:
    """Tabular MLE M(s'|s,a) = count(s,a,s') / count(s,a), fitted as a dual-MDP policy."""
    if triples.triples is None:
        raise ShapeError("transition learning needs next states")
    dual_pairs = np.stack([triples.pair_indices(), triples.triples[:, 2]], axis=1)
    dual_demos = Demonstrations(dual_pairs, n_states=n_states * n_actions, n_actions=n_states)
    fit = bc_fit(dual_demos, n_states * n_actions, n_states, fallback=fallback, smoothing=smoothing)
    return LearnedModel(
        dual_policy_as_model(fit.policy, n_states, n_actions),
        diagnostics={"algorithm": "bc_env", "train_metric": fit.train_metric, **fit.diagnostics},
    )


# ── Adversarial transition learning ──────────────────────────

@dataclass(frozen=True)
class Algorithm1Mode:
    """Alternate model collection, logistic best response and soft policy iteration on the dual MDP.

    batch_size=None uses exact joint distributions in place of sampled buffers.
    """

    outer: int
    model_iters: int
    disc_iters: int
    seed: int
    eta: float = 1.0
    batch_size: int | None = None


@dataclass(frozen=True)
class DirectJsMode:
    steps: int
    step_size: float
    seed: int
    init_scale: float = 0.1


def _buffer(mdp: TabularMdp, pi_d: Policy, batch_size: int | None, seeds: list[int]) -> np.ndarray:
    """Exact joint, or the pooled empirical joint of len(seeds) sampled buffers."""
    if batch_size is None:
        rho = state_action_occupancy(mdp, pi_d).rho
        return rho[:, :, None] * mdp.transition
    tables = [sample_occupancy(mdp, pi_d, batch_size, seed=s, with_next=True).empirical_joint() for s in seeds]
    return np.mean(tables, axis=0)


def logistic_best_response(dclass: DiscriminatorClass, model_joint: np.ndarray, expert_joint: np.ndarray) -> int:
    """Member h maximizing E_model[log sigmoid(h)] + E_expert[log(1 - sigmoid(h))]."""
    model_joint = np.ravel(model_joint)
    expert_joint = np.ravel(expert_joint)
    scores = log_expit(dclass.members) @ model_joint + log_expit(-dclass.members) @ expert_joint
    return int(np.argmax(scores))


def _fit_algorithm1(
    true_mdp: TabularMdp,
    pi_d: Policy,
    dclass: DiscriminatorClass,
    mode: Algorithm1Mode,
    init: np.ndarray,
) -> LearnedModel:
    validate_count(mode.outer, "outer")
    validate_count(mode.model_iters, "model_iters")
    validate_count(mode.disc_iters, "disc_iters")
    n_s, n_a = true_mdp.n_states, true_mdp.n_actions
    seeds = [int(s) for s in np.random.SeedSequence(mode.seed).generate_state(1 + mode.outer * mode.disc_iters)]

    expert_joint = _buffer(true_mdp, pi_d, mode.batch_size, seeds[:1])
    dual = dual_mdp(true_mdp, pi_d)
    model = init
    best_js = joint_js(true_mdp, model, pi_d)
    best_model, best_iter = model, 0
    step = 0

    for k in range(1, mode.outer + 1):
        batch_seeds = seeds[1 + (k - 1) * mode.disc_iters: 1 + k * mode.disc_iters]
        model_joint = _buffer(true_mdp.with_transition(model), pi_d, mode.batch_size, batch_seeds)

        member = logistic_best_response(dclass, model_joint, expert_joint)
        logits = dclass.members[member].reshape(n_s * n_a, n_s)
        reward = np.clip(-log_expit(logits), -REWARD_CLIP, REWARD_CLIP)
        reward, _ = scale_rewards(reward, model_joint.reshape(n_s * n_a, n_s))

        dual_pi = model_as_dual_policy(model)
        for _ in range(mode.model_iters):
            step += 1
            q, _ = action_values(dual, dual_pi, reward)
            dual_pi = soft_policy_step(dual_pi, q, mode.eta / math.sqrt(step))
        model = LearnedModel(dual_policy_as_model(dual_pi, n_s, n_a)).transition

        js = joint_js(true_mdp, model, pi_d)
        if js < best_js:
            best_js, best_model, best_iter = js, model, k
        logger.debug("Env GAIL outer %d/%d: member=%d JS=%.6g", k, mode.outer, member, js)

    return LearnedModel(
        best_model,
        diagnostics={
            "algorithm": "gail_env_algorithm1",
            "joint_js": best_js,
            "best_iteration": best_iter,
            "final_js": joint_js(true_mdp, model, pi_d),
            "reward_clip": REWARD_CLIP,
            "seed": mode.seed,
        },
    )


def _fit_direct_js(true_mdp: TabularMdp, pi_d: Policy, mode: DirectJsMode, init: np.ndarray | None) -> LearnedModel:
    n_s, n_a = true_mdp.n_states, true_mdp.n_actions
    truth = joint_distribution(true_mdp.transition, true_mdp, pi_d).table
    dual = dual_mdp(true_mdp, pi_d)
    fit = gail_fit_js(
        dual,
        truth.reshape(n_s * n_a, n_s),
        steps=mode.steps,
        step_size=mode.step_size,
        seed=mode.seed,
        init=None if init is None else model_as_dual_policy(init),
        init_scale=mode.init_scale,
    )
    candidate = dual_policy_as_model(softmax_policy(fit.diagnostics["best_logits"]), n_s, n_a)
    best_js = joint_js(true_mdp, candidate, pi_d)
    best_model = candidate

    if init is not None:
        init_js = joint_js(true_mdp, init, pi_d)
        if init_js <= best_js:
            best_js, best_model = init_js, init

    return LearnedModel(
        best_model,
        diagnostics={
            "algorithm": "gail_env_direct_js",
            "joint_js": best_js,
            "initial_js": fit.diagnostics["initial_js"],
            "final_js": fit.diagnostics["final_js"],
            "steps": fit.iterations,
            "gradient": fit.diagnostics["gradient"],
            "seed": mode.seed,
        },
    )


def gail_env_fit(
    true_mdp: TabularMdp,
    pi_d: Policy,
    dclass: DiscriminatorClass | None,
    mode: Algorithm1Mode | DirectJsMode,
    init=None,
) -> LearnedModel:
    """Adversarial transition learning; returns the best iterate by JS of the joints.

    dclass (over flattened (s, a, s') triples, entries read as logits) is
    required by Algorithm1Mode and ignored by DirectJsMode.
    """
    init_transition = None if init is None else _transition_of(init)
    if init_transition is not None:
        check_shape(init_transition, true_mdp.transition.shape, "init model")

    if isinstance(mode, DirectJsMode):
        result = _fit_direct_js(true_mdp, pi_d, mode, init_transition)
    else:
        if dclass is None:
            raise ValueError("Algorithm1Mode needs a discriminator class over triples")
        expected = true_mdp.n_states * true_mdp.n_actions * true_mdp.n_states
        if dclass.size != expected:
            raise ShapeError(f"discriminator covers {dclass.size} points, triples space has {expected}")
        if init_transition is None:
            init_transition = np.full(true_mdp.transition.shape, 1.0 / true_mdp.n_states)
        result = _fit_algorithm1(true_mdp, pi_d, dclass, mode, init_transition)

    logger.info(
        "Environment model fitted (%s): JS=%.3e",
        result.diagnostics["algorithm"],
        result.diagnostics["joint_js"],
    )
    return result
