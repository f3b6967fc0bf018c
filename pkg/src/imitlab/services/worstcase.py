"""
Hard three-state instance on which behavioral cloning's quadratic horizon
dependence is attained.

Layout: from s0, action a1 moves to s1 and a2 moves to s2; s1 and s2 are
absorbing. Reward 0 in s0, +1 in s1, -1 in s2. The expert takes a1 with
probability 0.9, the imitator with 0.85; both are uniform in the absorbing
states, where every action is equivalent.
"""
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..core.validation import validate_gamma
from .bounds import thm1_rhs
from .divergences import FDivKind, expected_policy_divergence
from .mdp_core import Policy, TabularMdp, policy_value

logger = logging.getLogger(__name__)

EXPERT_A1 = 0.9
IMITATOR_A1 = 0.85

# KL([0.9, 0.1], [0.85, 0.15]) in nats.
KAPPA = EXPERT_A1 * math.log(EXPERT_A1 / IMITATOR_A1) + (1 - EXPERT_A1) * math.log((1 - EXPERT_A1) / (1 - IMITATOR_A1))


@dataclass(frozen=True, eq=False)
class HardInstance:
    mdp: TabularMdp
    pi_e: Policy
    pi_i: Policy
    gamma: float


def _policy(p_a1: float) -> Policy:
    return Policy(np.array([[p_a1, 1.0 - p_a1], [0.5, 0.5], [0.5, 0.5]]))


def hard_instance(gamma: float) -> HardInstance:
    gamma = validate_gamma(gamma)
    transition = np.zeros((3, 2, 3))
    transition[0, 0, 1] = 1.0
    transition[0, 1, 2] = 1.0
    transition[1, :, 1] = 1.0
    transition[2, :, 2] = 1.0
    reward = np.array([[0.0, 0.0], [1.0, 1.0], [-1.0, -1.0]])
    mdp = TabularMdp(
        transition=transition,
        reward=reward,
        gamma=gamma,
        init_dist=np.array([1.0, 0.0, 0.0]),
        r_max=1.0,
    )
    return HardInstance(mdp=mdp, pi_e=_policy(EXPERT_A1), pi_i=_policy(IMITATOR_A1), gamma=gamma)


class ClosedForms(NamedTuple):
    v_e: float
    v_i: float
    gap: float
    epsilon: float


def closed_forms(gamma: float) -> ClosedForms:
    gamma = validate_gamma(gamma)
    horizon = gamma / (1.0 - gamma)
    return ClosedForms(
        v_e=0.8 * horizon,
        v_i=0.7 * horizon,
        gap=0.1 * horizon,
        epsilon=(1.0 - gamma) * KAPPA,
    )


def tightness_ratio(gamma: float) -> float:
    """gap * (1 - gamma)^2 / epsilon, equal to gamma / (10 kappa).

    Raises:
        ValueError: at gamma = 0, where the ratio is 0/0.
    """
    gamma = validate_gamma(gamma)
    if gamma == 0.0:
        raise ValueError("tightness ratio is undefined at gamma = 0")
    forms = closed_forms(gamma)
    return forms.gap * (1.0 - gamma) ** 2 / forms.epsilon


class SweepRow(NamedTuple):
    gamma: float
    v_e: float
    v_i: float
    gap: float
    epsilon: float
    thm1_rhs: float
    ratio: float


def sweep(gammas) -> list[SweepRow]:
    """Engine-computed values on the hard instance for every gamma."""
    rows = []
    for gamma in gammas:
        instance = hard_instance(gamma)
        v_e = policy_value(instance.mdp, instance.pi_e)
        v_i = policy_value(instance.mdp, instance.pi_i)
        epsilon = expected_policy_divergence(
            FDivKind.KL, instance.mdp, pi_ref=instance.pi_e, pi=instance.pi_i, weighting=instance.pi_e
        )
        gap = v_e - v_i
        ratio = math.nan if instance.gamma == 0.0 else gap * (1.0 - instance.gamma) ** 2 / epsilon
        rows.append(SweepRow(instance.gamma, v_e, v_i, gap, epsilon, thm1_rhs(epsilon, instance.gamma, 1.0), ratio))
        logger.debug("Hard instance gamma=%s: gap=%.6g ratio=%.6g", gamma, gap, ratio)
    return rows
