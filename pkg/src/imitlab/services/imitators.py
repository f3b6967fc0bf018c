"""
Policy imitation at tabular scale.

  - bc_fit / dagger_fit: maximum-likelihood cloning and its expert-query loop
  - gail_fit_lp: exact occupancy matching under a discriminator class (LP)
  - gail_fit_js: first-order JS minimization through the occupancy solve
  - wgail_fit_iterative: alternating best-response critic and soft policy
    iteration on centered, range-scaled rewards
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

import numpy as np
from scipy.special import softmax

from ..core.errors import DistributionError, NonFiniteGradientError, SolverError
from ..core.simplex import solve_lp
from ..core.validation import as_distribution, validate_count
from .divergences import (
    DiscriminatorClass,
    FDivKind,
    f_divergence,
    js_gradient,
    nn_distance,
)
from .mdp_core import (
    Demonstrations,
    OccupancyMeasure,
    Policy,
    TabularMdp,
    action_values,
    policy_from_occupancy,
    sample_actions,
    sample_occupancy,
    state_action_occupancy,
)

logger = logging.getLogger(__name__)

FLOW_RESIDUAL_TOL = 1e-8
RANGE_GUARD = 1e-12


@dataclass
class ImitationResult:
    policy: Policy
    train_metric: float
    iterations: int
    converged: bool
    algorithm: str
    seed: int | None = None
    diagnostics: dict[str, Any] = field(default_factory=dict)


# ── Behavioral cloning ────────────────────────────────────────

@dataclass(frozen=True)
class UniformFallback:
    """Unvisited states get the uniform row."""


@dataclass(frozen=True)
class ArgmaxSmoothed:
    """Unvisited states get (1 - alpha) on the most demonstrated action plus alpha / |A|."""

    alpha: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")


Fallback = UniformFallback | ArgmaxSmoothed


def _fallback_row(fallback: Fallback, counts: np.ndarray) -> np.ndarray:
    n_actions = counts.shape[1]
    uniform = np.full(n_actions, 1.0 / n_actions)
    if isinstance(fallback, UniformFallback):
        return uniform
    favourite = np.zeros(n_actions)
    favourite[int(np.argmax(counts.sum(axis=0)))] = 1.0
    return (1.0 - fallback.alpha) * favourite + fallback.alpha * uniform


def bc_objective(demos: Demonstrations, pi: Policy) -> float:
    """Empirical negative log-likelihood -(1/m) sum_i log pi(a_i|s_i); +inf on a zero-probability pair."""
    probs = pi.table[demos.pairs[:, 0], demos.pairs[:, 1]]
    if np.any(probs <= 0.0):
        return math.inf
    return float(-np.log(probs).mean())


def bc_fit(
    demos: Demonstrations,
    n_states: int,
    n_actions: int,
    fallback: Fallback = UniformFallback(),
    smoothing: float = 0.0,
    reference: Policy | None = None,
) -> ImitationResult:
    """Tabular MLE pi(a|s) = count(s,a) / count(s), with a fallback on unvisited states.

    train_metric is the visit-weighted KL from the empirical conditional (or from
    reference, when given) to the fitted policy over visited states.
    """
    if demos.n_states != n_states or demos.n_actions != n_actions:
        raise DistributionError("demonstrations do not match the requested dimensions")
    if smoothing < 0:
        raise ValueError(f"smoothing must be >= 0, got {smoothing}")

    counts = np.bincount(demos.pair_indices(), minlength=n_states * n_actions)
    counts = counts.reshape(n_states, n_actions).astype(float)
    visits = counts.sum(axis=1)
    visited = visits > 0

    table = np.empty((n_states, n_actions))
    table[visited] = (counts[visited] + smoothing) / (visits[visited, None] + smoothing * n_actions)
    table[~visited] = _fallback_row(fallback, counts)
    policy = Policy(table)

    source = counts / np.where(visited, visits, 1.0)[:, None] if reference is None else reference.table
    weights = visits / demos.m
    train_metric = 0.0
    for s in np.flatnonzero(visited):
        train_metric += weights[s] * f_divergence(FDivKind.KL, source[s], policy.table[s])

    logger.debug("BC fit: %d/%d states visited, m=%d", int(visited.sum()), n_states, demos.m)
    return ImitationResult(
        policy=policy,
        train_metric=train_metric,
        iterations=1,
        converged=True,
        algorithm="bc",
        diagnostics={"visited_states": int(visited.sum()), "unvisited_states": int((~visited).sum())},
    )


def _default_mix(round_index: int) -> float:
    return 1.0 if round_index == 1 else 0.0


def dagger_fit(
    mdp: TabularMdp,
    expert: Policy,
    rounds: int,
    per_round: int,
    seed: int,
    mix_beta: Callable[[int], float] = _default_mix,
    fallback: Fallback = UniformFallback(),
) -> ImitationResult:
    """Roll out beta_k * expert + (1 - beta_k) * learner, label visited states
    with expert actions, and refit BC on the growing aggregate.
    """
    rounds = validate_count(rounds, "rounds")
    per_round = validate_count(per_round, "per_round")
    seeds = np.random.SeedSequence(seed).generate_state(2 * rounds)

    learner = Policy.uniform(mdp.n_states, mdp.n_actions)
    labelled: list[np.ndarray] = []
    fit: ImitationResult | None = None

    for k in range(1, rounds + 1):
        beta = float(mix_beta(k))
        rollout = expert.mix(learner, beta)
        visited = sample_occupancy(mdp, rollout, per_round, seed=int(seeds[2 * k - 2]))
        states = visited.pairs[:, 0]
        actions = sample_actions(expert, states, np.random.default_rng(int(seeds[2 * k - 1])))
        labelled.append(np.stack([states, actions], axis=1))

        aggregate = Demonstrations(np.concatenate(labelled), mdp.n_states, mdp.n_actions)
        fit = bc_fit(aggregate, mdp.n_states, mdp.n_actions, fallback=fallback)
        learner = fit.policy
        logger.debug("DAgger round %d/%d: beta=%.3f aggregate=%d", k, rounds, beta, aggregate.m)

    return ImitationResult(
        policy=learner,
        train_metric=fit.train_metric,
        iterations=rounds,
        converged=True,
        algorithm="dagger",
        seed=seed,
        diagnostics={"aggregate_size": rounds * per_round},
    )


# ── Occupancy matching by LP ─────────────────────────────────

def flow_matrix(mdp: TabularMdp) -> np.ndarray:
    """E with E @ rho.ravel() = (1 - gamma) d0 exactly for the occupancies of mdp."""
    n_s, n_a = mdp.n_states, mdp.n_actions
    outflow = np.kron(np.eye(n_s), np.ones(n_a))
    inflow = mdp.transition.reshape(n_s * n_a, n_s).T
    return outflow - mdp.gamma * inflow


def gail_fit_lp(mdp: TabularMdp, dclass: DiscriminatorClass, target_rho) -> ImitationResult:
    """min t over the occupancy polytope s.t. <D_i, target> - <D_i, rho> <= t for every member.

    Raises:
        SolverError: if the LP fails or the recovered occupancy leaves the polytope.
    """
    target = as_distribution(np.ravel(target_rho), tol=1e-9, name="target_rho")
    n = mdp.n_states * mdp.n_actions
    if target.size != n or dclass.size != n:
        raise DistributionError(f"target/class must cover {n} state-action pairs")

    k = len(dclass)
    # Variables: rho (n), t_plus, t_minus.
    cost = np.concatenate([np.zeros(n), [1.0, -1.0]])
    a_ub = np.hstack([-dclass.members, -np.ones((k, 1)), np.ones((k, 1))])
    b_ub = -(dclass.members @ target)
    a_eq = np.hstack([flow_matrix(mdp), np.zeros((mdp.n_states, 2))])
    b_eq = (1.0 - mdp.gamma) * mdp.init_dist
    solution = solve_lp(cost, a_ub=a_ub, b_ub=b_ub, a_eq=a_eq, b_eq=b_eq)

    rho = solution.x[:n].reshape(mdp.n_states, mdp.n_actions)
    occupancy = OccupancyMeasure(d=rho.sum(axis=1), rho=rho, gamma=mdp.gamma)
    residual = occupancy.flow_residual(mdp)
    if residual > FLOW_RESIDUAL_TOL:
        raise SolverError(
            "LP occupancy violates the Bellman flow constraints",
            iterations=solution.iterations,
            certificate={"flow_residual": residual},
        )
    t = solution.value
    policy = policy_from_occupancy(occupancy.rho)
    logger.debug("Occupancy LP: t=%.6g after %d pivots", t, solution.iterations)
    return ImitationResult(
        policy=policy,
        train_metric=t,
        iterations=solution.iterations,
        converged=True,
        algorithm="gail_lp",
        diagnostics={"rho": occupancy.rho, "flow_residual": residual},
    )


def gail_fit_enumerated(
    mdp: TabularMdp,
    dclass: DiscriminatorClass,
    target_rho,
    policies: Iterable[Policy],
) -> ImitationResult:
    """Restricted-class variant: the policy in the list minimizing d_D(target, rho_pi)."""
    target = np.ravel(np.asarray(target_rho, dtype=float))
    best: tuple[float, Policy] | None = None
    count = 0
    for pi in policies:
        count += 1
        value = nn_distance(dclass, target, state_action_occupancy(mdp, pi).rho).value
        if best is None or value < best[0]:
            best = (value, pi)
    if best is None:
        raise ValueError("policy list is empty")
    return ImitationResult(
        policy=best[1],
        train_metric=best[0],
        iterations=count,
        converged=True,
        algorithm="gail_enumerated",
    )


# ── Direct JS minimization ───────────────────────────────────

def softmax_policy(logits: np.ndarray) -> Policy:
    return Policy(softmax(logits, axis=1))


def policy_gradient(mdp: TabularMdp, logits: np.ndarray, reward: np.ndarray) -> np.ndarray:
    """d <reward, rho_pi> / d logits = d(s) pi(a|s) (Q(s,a) - V(s)) for softmax rows."""
    pi = softmax_policy(logits)
    q, v = action_values(mdp, pi, reward)
    d = state_action_occupancy(mdp, pi).d
    return d[:, None] * pi.table * (q - v[:, None])


def js_objective(mdp: TabularMdp, logits: np.ndarray, target_rho) -> tuple[float, np.ndarray]:
    """JS(target, rho_pi) and its exact gradient with respect to the logits."""
    target = np.asarray(target_rho, dtype=float).reshape(mdp.n_states, mdp.n_actions)
    rho = state_action_occupancy(mdp, softmax_policy(logits)).rho
    value = f_divergence(FDivKind.JS, target, rho)
    grad = policy_gradient(mdp, logits, js_gradient(target, rho))
    if not np.all(np.isfinite(grad)):
        raise NonFiniteGradientError("JS gradient contains non-finite entries")
    return value, grad


def gail_fit_js(
    mdp: TabularMdp,
    target_rho,
    steps: int,
    step_size: float,
    seed: int,
    init: Policy | None = None,
    init_scale: float = 0.1,
) -> ImitationResult:
    """Fixed-step gradient descent on JS(target, rho_pi) over per-state softmax logits.

    Returns the final iterate unless it ended above the initial JS, in which case
    the best iterate is returned. Both values are in diagnostics.
    """
    steps = validate_count(steps, "steps")
    if step_size <= 0:
        raise ValueError(f"step_size must be > 0, got {step_size}")

    if init is None:
        logits = init_scale * np.random.default_rng(seed).standard_normal((mdp.n_states, mdp.n_actions))
    else:
        with np.errstate(divide="ignore"):
            logits = np.maximum(np.log(init.table), -50.0)

    value, grad = js_objective(mdp, logits, target_rho)
    initial = value
    best = (value, logits.copy(), grad, 0)
    taken = 0
    for step in range(1, steps + 1):
        if value == 0.0:
            break
        logits = logits - step_size * grad
        value, grad = js_objective(mdp, logits, target_rho)
        taken = step
        if value < best[0]:
            best = (value, logits.copy(), grad, step)

    final_value, final_grad = value, grad
    if final_value <= initial:
        out_value, out_logits, out_grad = final_value, logits, final_grad
    else:
        out_value, out_logits, out_grad, _ = best

    logger.debug("JS descent: %d steps, initial=%.3e final=%.3e best=%.3e", taken, initial, final_value, best[0])
    return ImitationResult(
        policy=softmax_policy(out_logits),
        train_metric=out_value,
        iterations=taken,
        converged=bool(np.abs(out_grad).max() <= 1e-10),
        algorithm="gail_js",
        seed=seed,
        diagnostics={
            "initial_js": initial,
            "final_js": final_value,
            "best_js": best[0],
            "best_step": best[3],
            "gradient": out_grad,
            "logits": out_logits,
            "best_logits": best[1],
        },
    )


# ── Alternating WGAIL loop ───────────────────────────────────

def scale_rewards(reward: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, bool]:
    """Subtract the weights-average and divide by the range.

    Returns the scaled table and whether the range guard skipped the division.
    """
    centred = reward - float((weights * reward).sum())
    spread = float(reward.max() - reward.min())
    if spread < RANGE_GUARD:
        return centred, True
    return centred / spread, False


def soft_policy_step(pi: Policy, q: np.ndarray, eta: float) -> Policy:
    """pi'(a|s) proportional to pi(a|s) exp(eta Q(s,a))."""
    with np.errstate(divide="ignore"):
        log_pi = np.log(pi.table)
    return Policy(softmax(log_pi + eta * q, axis=1))


def wgail_fit_iterative(
    mdp: TabularMdp,
    dclass: DiscriminatorClass,
    demos: Demonstrations,
    outer: int,
    policy_iters: int,
    disc_iters: int,
    seed: int,
    eta: float = 1.0,
    samples_per_iter: int | None = None,
    init: Policy | None = None,
) -> ImitationResult:
    """Alternate an exact critic best response with soft policy iteration.

    The critic is argmax_D <D, rho_E - rho_pi> over the class, so it scores
    expert-like pairs high; the policy step maximizes it as a reward, after
    centering by the current occupancy and dividing by its range. With
    samples_per_iter=None the exact occupancy replaces each sampled batch;
    otherwise every critic step pools disc_iters batches of that size.
    """
    outer = validate_count(outer, "outer")
    policy_iters = validate_count(policy_iters, "policy_iters")
    disc_iters = validate_count(disc_iters, "disc_iters")
    if eta <= 0:
        raise ValueError(f"eta must be > 0, got {eta}")

    expert_rho = demos.empirical_rho()
    batch_seeds = np.random.SeedSequence(seed).generate_state(outer * disc_iters)
    pi = init if init is not None else Policy.uniform(mdp.n_states, mdp.n_actions)

    def measured(policy: Policy) -> float:
        return nn_distance(dclass, expert_rho, state_action_occupancy(mdp, policy).rho).value

    best_value, best_policy, best_iter = measured(pi), pi, 0
    skipped_scaling = 0
    step = 0
    for k in range(1, outer + 1):
        if samples_per_iter is None:
            current = state_action_occupancy(mdp, pi).rho
        else:
            batches = [
                sample_occupancy(mdp, pi, samples_per_iter, seed=int(batch_seeds[(k - 1) * disc_iters + j]))
                for j in range(disc_iters)
            ]
            current = np.mean([b.empirical_rho() for b in batches], axis=0)

        critic = dclass.members[nn_distance(dclass, expert_rho, current).argmax]
        reward, skipped = scale_rewards(critic.reshape(mdp.n_states, mdp.n_actions), current)
        skipped_scaling += int(skipped)

        for _ in range(policy_iters):
            step += 1
            q, _ = action_values(mdp, pi, reward)
            pi = soft_policy_step(pi, q, eta / math.sqrt(step))

        value = measured(pi)
        if value < best_value:
            best_value, best_policy, best_iter = value, pi, k
        logger.debug("WGAIL outer %d/%d: d_D=%.6g", k, outer, value)

    final_value = measured(pi)
    if skipped_scaling:
        logger.warning("WGAIL: reward range below guard on %d/%d iterations; scaling skipped", skipped_scaling, outer)
    return ImitationResult(
        policy=best_policy,
        train_metric=best_value,
        iterations=outer,
        converged=best_value <= 1e-9,
        algorithm="wgail",
        seed=seed,
        diagnostics={
            "final_metric": final_value,
            "best_metric": best_value,
            "best_iteration": best_iter,
            "scaling_skipped": skipped_scaling,
            "final_policy": pi,
        },
    )
