"""
Bound-verification trials that need no learner: random policy and model
pairs (bounds_all), the hard instance (worstcase), and the finite-class
PAC experiment (pac_cor1).
"""
import logging

import numpy as np

from ..core.schemas import Campaign, ExperimentConfig, ReportRow
from ..repositories.report_repository import to_report_rows
from ..services.bounds import check_cor1_trial, check_model_bounds, check_policy_bounds
from ..services.families import child_seeds, random_deterministic_policy, random_mdp, random_policy
from ..services.imitators import ArgmaxSmoothed, bc_fit
from ..services.mdp_core import sample_occupancy
from ..services.worstcase import hard_instance

logger = logging.getLogger(__name__)

# Weight of the expert when perturbing it into the imitator, and of the
# true dynamics when perturbing them into a model.
POLICY_MIX = 0.9
MODEL_MIX = 0.9


def bounds_all_trial(config: ExperimentConfig, trial: int, seed: int) -> list[ReportRow]:
    family = config.mdp_family
    n_s, n_a = family.n_states, family.n_actions
    rows: list[ReportRow] = []

    for g_index, gamma in enumerate(family.gammas):
        mdp_seed, expert_seed, noise_seed, other_seed, model_seed = child_seeds(seed, g_index, count=5)
        mdp = random_mdp(family, mdp_seed, gamma)
        pi_e = random_policy(n_s, n_a, np.random.default_rng(expert_seed))
        noise = random_policy(n_s, n_a, np.random.default_rng(noise_seed))
        context = dict(campaign=Campaign.BOUNDS_ALL.value, trial=trial, seed=seed, gamma=gamma)

        # near-expert and unrelated imitators
        for algorithm, pi_i in (
            ("perturbed", pi_e.mix(noise, POLICY_MIX)),
            ("random", random_policy(n_s, n_a, np.random.default_rng(other_seed))),
        ):
            rows += to_report_rows(check_policy_bounds(mdp, pi_e, pi_i), algorithm=algorithm, **context)

        other = random_mdp(family, model_seed, gamma).transition
        model = MODEL_MIX * mdp.transition + (1.0 - MODEL_MIX) * other
        rows += to_report_rows(
            check_model_bounds(mdp, model, pi_e, pi_e) + check_model_bounds(mdp, model, pi_e, noise),
            algorithm="perturbed_model",
            **context,
        )
    return rows


def worstcase_trial(config: ExperimentConfig, trial: int, seed: int) -> list[ReportRow]:
    rows: list[ReportRow] = []
    for gamma in config.mdp_family.gammas:
        instance = hard_instance(gamma)
        rows += to_report_rows(
            check_policy_bounds(instance.mdp, instance.pi_e, instance.pi_i),
            campaign=Campaign.WORSTCASE.value,
            trial=trial,
            seed=seed,
            gamma=gamma,
            algorithm="hard_instance",
        )
    return rows


def pac_cor1_trial(config: ExperimentConfig, trial: int, seed: int) -> list[ReportRow]:
    """Realizable deterministic expert, consistent deterministic learner from the full class."""
    family = config.mdp_family
    n_s, n_a = family.n_states, family.n_actions
    class_size = n_a**n_s
    rows: list[ReportRow] = []

    for g_index, gamma in enumerate(family.gammas):
        mdp_seed, expert_seed, *sample_seeds = child_seeds(seed, g_index, count=2 + len(config.sample_sizes))
        mdp = random_mdp(family, mdp_seed, gamma)
        pi_e = random_deterministic_policy(n_s, n_a, np.random.default_rng(expert_seed))
        for m, sample_seed in zip(config.sample_sizes, sample_seeds):
            demos = sample_occupancy(mdp, pi_e, m, seed=sample_seed)
            fit = bc_fit(demos, n_s, n_a, fallback=ArgmaxSmoothed(0.0))
            report = check_cor1_trial(mdp, pi_e, fit.policy, class_size, m, config.delta)
            rows += to_report_rows(
                [report],
                campaign=Campaign.PAC_COR1.value,
                trial=trial,
                seed=seed,
                gamma=gamma,
                m=m,
                delta=config.delta,
                algorithm="bc_consistent",
                train_metric=fit.train_metric,
            )
    return rows
