"""
Policy-imitation trials: behavioral cloning and GAIL on random MDPs.

One trial draws, for every gamma of the family, an MDP and a stochastic
expert, then for every sample size m fits the imitators on m occupancy
draws and checks every policy bound on the fitted policies. GAIL trials
also check the sample-based generalization bounds for the LP imitator.
"""
import logging

import numpy as np

from ..core.errors import InfeasibleError
from ..core.schemas import Campaign, ExperimentConfig, ReportRow
from ..repositories.report_repository import to_report_rows
from ..services.bounds import check_lemma2, check_policy_bounds, check_thm2, empirical_gap_inputs
from ..services.divergences import (
    EXACT_RADEMACHER_MAX_M,
    ExactMode,
    MonteCarloMode,
    RademacherMode,
    random_class,
)
from ..services.families import child_seeds, random_mdp, random_policy
from ..services.imitators import bc_fit, dagger_fit, gail_fit_js, gail_fit_lp
from ..services.mdp_core import sample_occupancy, state_action_occupancy

logger = logging.getLogger(__name__)

DAGGER_ROUNDS = 4


def rademacher_mode(m: int, draws: int, seed: int) -> RademacherMode:
    """Exact enumeration while 2^m stays small, Monte-Carlo beyond."""
    if m <= EXACT_RADEMACHER_MAX_M:
        return ExactMode()
    return MonteCarloMode(draws=draws, seed=seed)


def _instance(config: ExperimentConfig, seed: int, g_index: int, gamma: float, extra: int):
    family = config.mdp_family
    mdp_seed, policy_seed, *rest = child_seeds(seed, g_index, count=2 + extra)
    mdp = random_mdp(family, mdp_seed, gamma)
    pi_e = random_policy(family.n_states, family.n_actions, np.random.default_rng(policy_seed))
    return mdp, pi_e, rest


def bc_policy_trial(config: ExperimentConfig, trial: int, seed: int) -> list[ReportRow]:
    family = config.mdp_family
    n_s, n_a = family.n_states, family.n_actions
    rows: list[ReportRow] = []

    for g_index, gamma in enumerate(family.gammas):
        mdp, pi_e, seeds = _instance(config, seed, g_index, gamma, extra=2 * len(config.sample_sizes))
        for j, m in enumerate(config.sample_sizes):
            sample_seed, dagger_seed = seeds[2 * j], seeds[2 * j + 1]
            context = dict(campaign=Campaign.BC_POLICY.value, trial=trial, seed=seed, gamma=gamma, m=m)

            demos = sample_occupancy(mdp, pi_e, m, seed=sample_seed)
            bc = bc_fit(demos, n_s, n_a)
            rows += to_report_rows(
                check_policy_bounds(mdp, pi_e, bc.policy),
                algorithm=bc.algorithm,
                train_metric=bc.train_metric,
                **context,
            )

            dagger = dagger_fit(mdp, pi_e, DAGGER_ROUNDS, max(1, m // DAGGER_ROUNDS), seed=dagger_seed)
            rows += to_report_rows(
                check_policy_bounds(mdp, pi_e, dagger.policy),
                algorithm=dagger.algorithm,
                train_metric=dagger.train_metric,
                **context,
            )
    return rows


def gail_policy_trial(config: ExperimentConfig, trial: int, seed: int) -> list[ReportRow]:
    family = config.mdp_family
    learners = config.learners
    rows: list[ReportRow] = []

    for g_index, gamma in enumerate(family.gammas):
        mdp, pi_e, seeds = _instance(config, seed, g_index, gamma, extra=1 + 4 * len(config.sample_sizes))
        dclass = random_class(family.n_states * family.n_actions, learners.class_members, seed=seeds[0])
        rho_e = state_action_occupancy(mdp, pi_e).rho

        for j, m in enumerate(config.sample_sizes):
            sample_seed, js_seed, imitator_seed, mc_seed = seeds[1 + 4 * j: 5 + 4 * j]
            context = dict(campaign=Campaign.GAIL_POLICY.value, trial=trial, seed=seed, gamma=gamma, m=m)
            demos = sample_occupancy(mdp, pi_e, m, seed=sample_seed)
            target = demos.empirical_rho()

            lp = gail_fit_lp(mdp, dclass, target)
            rows += to_report_rows(
                check_policy_bounds(mdp, pi_e, lp.policy),
                algorithm=lp.algorithm,
                train_metric=lp.train_metric,
                **context,
            )

            js = gail_fit_js(mdp, target, steps=learners.js_steps, step_size=learners.js_step_size, seed=js_seed)
            rows += to_report_rows(
                check_policy_bounds(mdp, pi_e, js.policy),
                algorithm=js.algorithm,
                train_metric=js.train_metric,
                **context,
            )

            sample_i = sample_occupancy(mdp, lp.policy, m, seed=imitator_seed)
            gap_inputs = empirical_gap_inputs(mdp, dclass, demos, sample_i)
            mode = rademacher_mode(m, learners.rademacher_draws, mc_seed)
            rho_i = state_action_occupancy(mdp, lp.policy).rho
            generalization = [
                check_lemma2(
                    dclass, demos, sample_i, rho_e, rho_i,
                    gap_inputs.appr, gap_inputs.eps_hat, config.delta, mode,
                )
            ]
            try:
                generalization.append(
                    check_thm2(
                        mdp, dclass, pi_e, lp.policy, demos, sample_i,
                        gap_inputs.appr, gap_inputs.eps_hat, config.delta, mode,
                    )
                )
            except InfeasibleError:
                logger.warning(
                    "GAIL trial %d gamma=%s m=%d: reward outside the class span, THM2 skipped",
                    trial, gamma, m,
                )
            rows += to_report_rows(
                generalization,
                delta=config.delta,
                algorithm=lp.algorithm,
                train_metric=lp.train_metric,
                **context,
            )
    return rows
