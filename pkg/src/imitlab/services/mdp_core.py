"""
Tabular MDP core – exact representation of finite MDPs and policies.

Responsibility:
  - Own the value types (TabularMdp, Policy, OccupancyMeasure, Demonstrations)
  - Compute discounted occupancies and policy values by dense LU solves
  - Sample i.i.d. from an occupancy with the geometric-horizon trick
  - Build the dual MDP that turns a transition model into a policy

Every value object is immutable after construction (arrays are read-only);
operations are pure given an explicit seed.
"""
import itertools
import logging
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy import linalg

from ..core.errors import DistributionError, ShapeError, SolverError
from ..core.validation import (
    SOLVE_TOL,
    as_distribution,
    check_shape,
    frozen,
    validate_count,
    validate_gamma,
)

logger = logging.getLogger(__name__)

_VALUE_CROSS_CHECK_TOL = 1e-8


# ── Value types ───────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class TabularMdp:
    """Finite MDP: transition[s, a, s'] = M(s'|s,a), reward[s, a], discount and d0."""

    transition: np.ndarray
    reward: np.ndarray
    gamma: float
    init_dist: np.ndarray
    r_max: float | None = None

    def __post_init__(self) -> None:
        transition = as_distribution(self.transition, name="transition")
        if transition.ndim != 3:
            raise ShapeError(f"transition must be 3-D (s, a, s'), got ndim={transition.ndim}")
        n_states, n_actions, n_next = transition.shape
        if n_next != n_states:
            raise ShapeError("transition next-state axis must match the state axis")

        reward = np.array(self.reward, dtype=float)
        check_shape(reward, (n_states, n_actions), "reward")
        init_dist = as_distribution(self.init_dist, name="init_dist")
        check_shape(init_dist, (n_states,), "init_dist")

        bound = float(np.abs(reward).max()) if self.r_max is None else float(self.r_max)
        if bound < 0 or np.abs(reward).max() > bound + 1e-12:
            raise DistributionError(f"|reward| exceeds r_max={bound}")

        object.__setattr__(self, "transition", frozen(transition))
        object.__setattr__(self, "reward", frozen(reward))
        object.__setattr__(self, "init_dist", frozen(init_dist))
        object.__setattr__(self, "gamma", validate_gamma(self.gamma))
        object.__setattr__(self, "r_max", bound)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    def with_transition(self, transition: np.ndarray) -> "TabularMdp":
        """Same reward, discount and d0 on top of another transition tensor."""
        return TabularMdp(
            transition=transition,
            reward=self.reward,
            gamma=self.gamma,
            init_dist=self.init_dist,
            r_max=self.r_max,
        )


@dataclass(frozen=True, eq=False)
class Policy:
    """Row-stochastic table, entry (s, a) = pi(a|s)."""

    table: np.ndarray

    def __post_init__(self) -> None:
        table = as_distribution(self.table, name="policy")
        if table.ndim != 2:
            raise ShapeError(f"policy table must be 2-D (s, a), got ndim={table.ndim}")
        object.__setattr__(self, "table", frozen(table))

    @property
    def n_states(self) -> int:
        return self.table.shape[0]

    @property
    def n_actions(self) -> int:
        return self.table.shape[1]

    @classmethod
    def uniform(cls, n_states: int, n_actions: int) -> "Policy":
        return cls(np.full((n_states, n_actions), 1.0 / n_actions))

    @classmethod
    def deterministic(cls, actions, n_actions: int) -> "Policy":
        actions = np.asarray(actions, dtype=int)
        if actions.min() < 0 or actions.max() >= n_actions:
            raise DistributionError("deterministic action index out of range")
        table = np.zeros((actions.size, n_actions))
        table[np.arange(actions.size), actions] = 1.0
        return cls(table)

    def is_deterministic(self) -> bool:
        return bool(np.all((self.table == 0.0) | (self.table == 1.0)))

    def greedy_actions(self) -> np.ndarray:
        return self.table.argmax(axis=1)

    def mix(self, other: "Policy", beta: float) -> "Policy":
        """beta * self + (1 - beta) * other, state by state."""
        if not 0.0 <= beta <= 1.0:
            raise ValueError(f"beta must be in [0, 1], got {beta}")
        check_shape(other.table, self.table.shape, "mixed policy")
        return Policy(beta * self.table + (1.0 - beta) * other.table)


@dataclass(frozen=True, eq=False)
class OccupancyMeasure:
    """Discounted stationary state (d) and state-action (rho) distributions."""

    d: np.ndarray
    rho: np.ndarray
    gamma: float

    def __post_init__(self) -> None:
        d = as_distribution(self.d, tol=SOLVE_TOL, name="state occupancy")
        rho = np.array(self.rho, dtype=float)
        if rho.ndim != 2 or rho.shape[0] != d.size:
            raise ShapeError("rho must be (n_states, n_actions) matching d")
        flat = as_distribution(rho.ravel(), tol=SOLVE_TOL, name="state-action occupancy")
        rho = flat.reshape(rho.shape)
        if np.max(np.abs(rho.sum(axis=1) - d)) > SOLVE_TOL:
            raise DistributionError("rho marginal does not match d")
        object.__setattr__(self, "d", frozen(d))
        object.__setattr__(self, "rho", frozen(rho))

    def flow_residual(self, mdp: TabularMdp) -> float:
        """Max over s of |sum_a rho(s,a) - (1-g) d0(s) - g sum M(s|s',a') rho(s',a')|."""
        inflow = np.einsum("sat,sa->t", mdp.transition, self.rho)
        residual = self.rho.sum(axis=1) - (1.0 - mdp.gamma) * mdp.init_dist - mdp.gamma * inflow
        return float(np.abs(residual).max())


@dataclass(frozen=True, eq=False)
class Demonstrations:
    """m sampled (s, a) pairs, optionally with the observed next state."""

    pairs: np.ndarray
    n_states: int
    n_actions: int
    triples: np.ndarray | None = None

    def __post_init__(self) -> None:
        pairs = np.array(self.pairs, dtype=np.int64).reshape(-1, 2)
        if pairs.shape[0] == 0:
            raise DistributionError("demonstrations must contain at least one sample")
        if pairs[:, 0].min() < 0 or pairs[:, 0].max() >= self.n_states:
            raise DistributionError("state index out of range")
        if pairs[:, 1].min() < 0 or pairs[:, 1].max() >= self.n_actions:
            raise DistributionError("action index out of range")
        object.__setattr__(self, "pairs", frozen(pairs))

        if self.triples is not None:
            triples = np.array(self.triples, dtype=np.int64).reshape(-1, 3)
            if triples.shape[0] != pairs.shape[0] or not np.array_equal(triples[:, :2], pairs):
                raise DistributionError("triples must extend pairs one-to-one")
            if triples[:, 2].min() < 0 or triples[:, 2].max() >= self.n_states:
                raise DistributionError("next-state index out of range")
            object.__setattr__(self, "triples", frozen(triples))

    @classmethod
    def from_triples(cls, triples, n_states: int, n_actions: int) -> "Demonstrations":
        triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
        return cls(pairs=triples[:, :2], n_states=n_states, n_actions=n_actions, triples=triples)

    @property
    def m(self) -> int:
        return self.pairs.shape[0]

    def pair_indices(self) -> np.ndarray:
        """Flat index s * |A| + a of every pair."""
        return self.pairs[:, 0] * self.n_actions + self.pairs[:, 1]

    def triple_indices(self) -> np.ndarray:
        """Flat index (s * |A| + a) * |S| + s' of every triple."""
        if self.triples is None:
            raise DistributionError("demonstrations carry no next states")
        return self.pair_indices() * self.n_states + self.triples[:, 2]

    def empirical_rho(self) -> np.ndarray:
        counts = np.bincount(self.pair_indices(), minlength=self.n_states * self.n_actions)
        return (counts / self.m).reshape(self.n_states, self.n_actions)

    def empirical_joint(self) -> np.ndarray:
        size = self.n_states * self.n_actions * self.n_states
        counts = np.bincount(self.triple_indices(), minlength=size)
        return (counts / self.m).reshape(self.n_states, self.n_actions, self.n_states)


# ── Internal helpers ──────────────────────────────────────────

def _check_pair(mdp: TabularMdp, pi: Policy) -> None:
    if pi.table.shape != (mdp.n_states, mdp.n_actions):
        raise ShapeError(
            f"policy shape {pi.table.shape} does not match MDP ({mdp.n_states}, {mdp.n_actions})"
        )


def _solve(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Dense LU solve; a singular system here is an internal fault."""
    try:
        lu = linalg.lu_factor(matrix, check_finite=True)
        return linalg.lu_solve(lu, rhs)
    except (linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"occupancy linear system is singular: {exc}") from exc


def _categorical(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    """One draw per row of probs (rows sum to 1)."""
    cumulative = np.cumsum(probs, axis=1)
    u = rng.random(probs.shape[0])[:, None]
    idx = (cumulative < u * cumulative[:, -1:]).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1)


# ── Operations ────────────────────────────────────────────────

def policy_transition_matrix(mdp: TabularMdp, pi: Policy) -> np.ndarray:
    """P_pi[s, s'] = sum_a pi(a|s) M(s'|s,a)."""
    _check_pair(mdp, pi)
    return np.einsum("sa,sat->st", pi.table, mdp.transition)


def state_occupancy(mdp: TabularMdp, pi: Policy) -> np.ndarray:
    """d_pi = (1 - gamma) (I - gamma P_pi^T)^{-1} d0, by a dense solve."""
    P = policy_transition_matrix(mdp, pi)
    system = np.eye(mdp.n_states) - mdp.gamma * P.T
    d = (1.0 - mdp.gamma) * _solve(system, mdp.init_dist)
    return as_distribution(np.where(np.abs(d) < 1e-15, 0.0, d), tol=SOLVE_TOL, name="state occupancy")


def state_action_occupancy(mdp: TabularMdp, pi: Policy) -> OccupancyMeasure:
    """rho(s, a) = pi(a|s) d_pi(s)."""
    d = state_occupancy(mdp, pi)
    return OccupancyMeasure(d=d, rho=d[:, None] * pi.table, gamma=mdp.gamma)


def action_values(mdp: TabularMdp, pi: Policy, reward: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Exact (Q, V) of pi for the given reward table (defaults to mdp.reward).

    V solves V = r_pi + gamma P_pi V; Q(s,a) = r(s,a) + gamma sum_s' M(s'|s,a) V(s').
    """
    _check_pair(mdp, pi)
    r = mdp.reward if reward is None else np.asarray(reward, dtype=float)
    check_shape(r, (mdp.n_states, mdp.n_actions), "reward")
    P = policy_transition_matrix(mdp, pi)
    r_pi = (pi.table * r).sum(axis=1)
    v = _solve(np.eye(mdp.n_states) - mdp.gamma * P, r_pi)
    q = r + mdp.gamma * mdp.transition @ v
    return q, v


def policy_value(mdp: TabularMdp, pi: Policy) -> float:
    """V^pi = 1/(1-gamma) E_rho[r], cross-checked against the Bellman solve <d0, v>."""
    occ = state_action_occupancy(mdp, pi)
    via_occupancy = float((occ.rho * mdp.reward).sum() / (1.0 - mdp.gamma))

    _, v = action_values(mdp, pi)
    via_bellman = float(mdp.init_dist @ v)

    gap = abs(via_occupancy - via_bellman)
    if gap > _VALUE_CROSS_CHECK_TOL * max(1.0, abs(via_bellman)):
        raise SolverError(
            "policy value cross-check failed",
            certificate={"occupancy": via_occupancy, "bellman": via_bellman, "gap": gap},
        )
    return via_occupancy


def sample_occupancy(
    mdp: TabularMdp,
    pi: Policy,
    m: int,
    seed: int,
    with_next: bool = False,
) -> Demonstrations:
    """Draw m i.i.d. state-action pairs from rho_pi.

    Each sample starts at s ~ d0, runs t ~ Geometric(1 - gamma) - 1 steps
    under pi and emits the step-t pair (plus the next state when asked).
    """
    _check_pair(mdp, pi)
    m = validate_count(m, "m")
    rng = np.random.default_rng(seed)

    if mdp.gamma == 0.0:
        horizons = np.zeros(m, dtype=np.int64)
    else:
        horizons = rng.geometric(1.0 - mdp.gamma, size=m) - 1

    states = _categorical(rng, np.broadcast_to(mdp.init_dist, (m, mdp.n_states)))
    remaining = horizons.copy()
    while (active := np.flatnonzero(remaining > 0)).size:
        s = states[active]
        a = _categorical(rng, pi.table[s])
        states[active] = _categorical(rng, mdp.transition[s, a])
        remaining[active] -= 1

    actions = _categorical(rng, pi.table[states])
    pairs = np.stack([states, actions], axis=1)
    triples = None
    if with_next:
        next_states = _categorical(rng, mdp.transition[states, actions])
        triples = np.concatenate([pairs, next_states[:, None]], axis=1)

    logger.debug("Sampled %d occupancy draws (max horizon %d)", m, int(horizons.max()))
    return Demonstrations(pairs=pairs, n_states=mdp.n_states, n_actions=mdp.n_actions, triples=triples)


def dual_mdp(mdp: TabularMdp, pi_d: Policy) -> TabularMdp:
    """MDP whose states are source (s, a) pairs and whose actions are next states.

    Dual state (s, a) has index s * |A| + a. Taking dual action s' moves to
    (s', a') with probability pi_d(a'|s'). The dual reward is zero; callers
    assign rewards.
    """
    _check_pair(mdp, pi_d)
    n_s, n_a = mdp.n_states, mdp.n_actions
    landing = np.zeros((n_s, n_s * n_a))
    for s_next in range(n_s):
        landing[s_next, s_next * n_a:(s_next + 1) * n_a] = pi_d.table[s_next]
    transition = np.broadcast_to(landing, (n_s * n_a, n_s, n_s * n_a)).copy()
    init = (mdp.init_dist[:, None] * pi_d.table).ravel()
    return TabularMdp(
        transition=transition,
        reward=np.zeros((n_s * n_a, n_s)),
        gamma=mdp.gamma,
        init_dist=init,
        r_max=0.0,
    )


def model_as_dual_policy(transition: np.ndarray) -> Policy:
    """Read a (s, a, s') transition tensor as a policy on the dual MDP."""
    transition = np.asarray(transition, dtype=float)
    n_s, n_a, _ = transition.shape
    return Policy(transition.reshape(n_s * n_a, n_s))


def dual_policy_as_model(pi: Policy, n_states: int, n_actions: int) -> np.ndarray:
    """Inverse of model_as_dual_policy."""
    check_shape(pi.table, (n_states * n_actions, n_states), "dual policy")
    return pi.table.reshape(n_states, n_actions, n_states).copy()


def all_deterministic_policies(n_states: int, n_actions: int) -> Iterator[Policy]:
    """Every deterministic policy, |A|^|S| of them, in lexicographic order."""
    for actions in itertools.product(range(n_actions), repeat=n_states):
        yield Policy.deterministic(actions, n_actions)


def policy_from_occupancy(rho: np.ndarray) -> Policy:
    """pi(a|s) = rho(s,a) / sum_a rho(s,a); uniform on zero-mass states."""
    rho = np.clip(np.asarray(rho, dtype=float), 0.0, None)
    mass = rho.sum(axis=1, keepdims=True)
    uniform = np.full_like(rho, 1.0 / rho.shape[1])
    with np.errstate(invalid="ignore", divide="ignore"):
        table = np.where(mass > 1e-15, rho / np.where(mass > 0, mass, 1.0), uniform)
    return Policy(table)


def sample_actions(pi: Policy, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw one action from pi(.|s) for every state in states."""
    return _categorical(rng, pi.table[np.asarray(states, dtype=np.int64)])
