"""
Environment-learning trials: transition models fitted from data collected
by a policy pi_D, checked against the model-bias value bounds both for pi_D
itself and for a perturbed evaluation policy.
"""
import logging

import numpy as np

from ..core.schemas import Campaign, ExperimentConfig, ReportRow
from ..repositories.report_repository import to_report_rows
from ..services.bounds import check_model_bounds
from ..services.divergences import random_class
from ..services.env_learning import Algorithm1Mode, DirectJsMode, LearnedModel, bc_env_fit, gail_env_fit
from ..services.families import child_seeds, random_mdp, random_policy
from ..services.mdp_core import Policy, TabularMdp, sample_occupancy

logger = logging.getLogger(__name__)

# Weight of pi_D in the perturbed evaluation policy.
EVALUATION_MIX = 0.8


def _instance(config: ExperimentConfig, seed: int, g_index: int, gamma: float, extra: int):
    family = config.mdp_family
    mdp_seed, collect_seed, other_seed, *rest = child_seeds(seed, g_index, count=3 + extra)
    mdp = random_mdp(family, mdp_seed, gamma)
    pi_d = random_policy(family.n_states, family.n_actions, np.random.default_rng(collect_seed))
    other = random_policy(family.n_states, family.n_actions, np.random.default_rng(other_seed))
    return mdp, pi_d, pi_d.mix(other, EVALUATION_MIX), rest


def _model_rows(
    mdp: TabularMdp,
    model: LearnedModel,
    pi_d: Policy,
    pi: Policy,
    train_metric: float | None,
    **context,
) -> list[ReportRow]:
    algorithm = model.diagnostics.get("algorithm", "")
    reports = check_model_bounds(mdp, model, pi_d, pi_d) + check_model_bounds(mdp, model, pi_d, pi)
    return to_report_rows(reports, algorithm=algorithm, train_metric=train_metric, **context)


def env_bc_trial(config: ExperimentConfig, trial: int, seed: int) -> list[ReportRow]:
    family = config.mdp_family
    rows: list[ReportRow] = []
    for g_index, gamma in enumerate(family.gammas):
        mdp, pi_d, pi, seeds = _instance(config, seed, g_index, gamma, extra=len(config.sample_sizes))
        for m, sample_seed in zip(config.sample_sizes, seeds):
            triples = sample_occupancy(mdp, pi_d, m, seed=sample_seed, with_next=True)
            model = bc_env_fit(triples, family.n_states, family.n_actions)
            rows += _model_rows(
                mdp, model, pi_d, pi,
                train_metric=model.diagnostics["train_metric"],
                campaign=Campaign.ENV_BC.value, trial=trial, seed=seed, gamma=gamma, m=m,
            )
    return rows


def env_gail_trial(config: ExperimentConfig, trial: int, seed: int) -> list[ReportRow]:
    """BC-initialized direct JS descent plus the alternating Algorithm 1 loop on sampled buffers."""
    family = config.mdp_family
    learners = config.learners
    n_s, n_a = family.n_states, family.n_actions
    rows: list[ReportRow] = []

    for g_index, gamma in enumerate(family.gammas):
        mdp, pi_d, pi, seeds = _instance(config, seed, g_index, gamma, extra=1 + 3 * len(config.sample_sizes))
        dclass = random_class(n_s * n_a * n_s, learners.class_members, seed=seeds[0], delta=3.0)
        for j, m in enumerate(config.sample_sizes):
            sample_seed, js_seed, loop_seed = seeds[1 + 3 * j: 4 + 3 * j]
            context = dict(campaign=Campaign.ENV_GAIL.value, trial=trial, seed=seed, gamma=gamma, m=m)
            triples = sample_occupancy(mdp, pi_d, m, seed=sample_seed, with_next=True)
            init = bc_env_fit(triples, n_s, n_a)

            direct = gail_env_fit(
                mdp, pi_d, None,
                DirectJsMode(steps=learners.env_steps, step_size=learners.env_step_size, seed=js_seed),
                init=init,
            )
            rows += _model_rows(mdp, direct, pi_d, pi, train_metric=direct.diagnostics["joint_js"], **context)

            alternating = gail_env_fit(
                mdp, pi_d, dclass,
                Algorithm1Mode(
                    outer=learners.env_outer,
                    model_iters=learners.env_model_iters,
                    disc_iters=1,
                    seed=loop_seed,
                    batch_size=m,
                ),
            )
            rows += _model_rows(
                mdp, alternating, pi_d, pi, train_metric=alternating.diagnostics["joint_js"], **context
            )
    return rows
