"""
Random MDP families for fuzzing campaigns.

Transition rows are i.i.d. Dirichlet(alpha), rewards uniform in
[-reward_scale, reward_scale], d0 Dirichlet(1). Everything is drawn from
one numpy Generator seeded by the caller.
"""
import numpy as np

from ..core.schemas import MdpFamily
from .mdp_core import Policy, TabularMdp


def random_mdp(family: MdpFamily, seed: int, gamma: float | None = None) -> TabularMdp:
    rng = np.random.default_rng(seed)
    n_s, n_a = family.n_states, family.n_actions
    transition = rng.dirichlet(np.full(n_s, family.dirichlet_alpha), size=(n_s, n_a))
    reward = rng.uniform(-family.reward_scale, family.reward_scale, size=(n_s, n_a))
    init_dist = rng.dirichlet(np.ones(n_s))
    return TabularMdp(
        transition=transition,
        reward=reward,
        gamma=family.gammas[0] if gamma is None else gamma,
        init_dist=init_dist,
        r_max=family.reward_scale,
    )


def random_policy(n_states: int, n_actions: int, rng: np.random.Generator, alpha: float = 1.0) -> Policy:
    return Policy(rng.dirichlet(np.full(n_actions, alpha), size=n_states))


def random_deterministic_policy(n_states: int, n_actions: int, rng: np.random.Generator) -> Policy:
    return Policy.deterministic(rng.integers(0, n_actions, size=n_states), n_actions)


def child_seeds(*entropy: int, count: int) -> list[int]:
    """Counter-based split of (master, key, ...) into count independent seeds."""
    return [int(s) for s in np.random.SeedSequence(list(entropy)).generate_state(count)]


def trial_seed(master: int, trial: int) -> int:
    return child_seeds(master, trial, count=1)[0]
