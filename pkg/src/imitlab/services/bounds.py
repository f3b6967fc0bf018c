"""
Value-gap and distribution bounds: left-hand sides from exact quantities,
right-hand sides from the closed-form constants, and a verdict per bound.

Rules:
  - holds <=> lhs <= rhs + verdict_tolerance, or rhs is +inf (vacuous)
  - slack = rhs - lhs (+inf when rhs is +inf)
  - probabilistic bounds (LEM2, THM2, COR1) are flagged; their verdicts are
    aggregated over trials by the campaign layer, never asserted one by one
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, NamedTuple

from ..core.config import settings
from ..core.validation import validate_count, validate_delta, validate_gamma
from .divergences import (
    DiscriminatorClass,
    ExactMode,
    FDivKind,
    RademacherMode,
    compatible_coefficient,
    estm_components,
    expected_policy_divergence,
    f_divergence,
    max_policy_divergence,
    nn_distance,
    total_variation,
)
from .env_learning import eval_in_model, joint_js, model_kl_error
from .imitators import gail_fit_lp
from .mdp_core import Demonstrations, Policy, TabularMdp, policy_value, state_action_occupancy

logger = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)


class BoundId(str, Enum):
    THM1 = "THM1"
    COR1 = "COR1"
    LEM_A_STATE = "LEM_A_STATE"
    LEM_A_SA = "LEM_A_SA"
    LEM_A_VALUE = "LEM_A_VALUE"
    LEM1_JS = "LEM1_JS"
    LEM1_KL = "LEM1_KL"
    LEM1_RKL = "LEM1_RKL"
    LEM1_CHI2 = "LEM1_CHI2"
    LEM1_HELLINGER = "LEM1_HELLINGER"
    LEM2 = "LEM2"
    THM2 = "THM2"
    LEM_C1 = "LEM_C1"
    LEM3 = "LEM3"
    THM3 = "THM3"
    PINSKER = "PINSKER"
    JS_TV = "JS_TV"


PROBABILISTIC = frozenset({BoundId.LEM2, BoundId.THM2, BoundId.COR1})

# Coefficient of R_max / (1 - gamma) * sqrt(D_f(rho_I, rho_E)) per divergence.
LEMMA1_CONSTANTS: dict[FDivKind, float] = {
    FDivKind.JS: 2.0 * SQRT2,
    FDivKind.KL: SQRT2,
    FDivKind.REVERSE_KL: SQRT2,
    FDivKind.CHI2: 1.0,
    FDivKind.HELLINGER: 2.0,
}

LEMMA1_IDS: dict[FDivKind, BoundId] = {
    FDivKind.JS: BoundId.LEM1_JS,
    FDivKind.KL: BoundId.LEM1_KL,
    FDivKind.REVERSE_KL: BoundId.LEM1_RKL,
    FDivKind.CHI2: BoundId.LEM1_CHI2,
    FDivKind.HELLINGER: BoundId.LEM1_HELLINGER,
}


@dataclass
class BoundReport:
    bound_id: BoundId
    lhs: float
    rhs: float
    slack: float
    holds: bool
    inputs: dict[str, Any] = field(default_factory=dict)

    @property
    def probabilistic(self) -> bool:
        return self.bound_id in PROBABILISTIC

    @property
    def vacuous(self) -> bool:
        return math.isinf(self.rhs)


def make_report(bound_id: BoundId, lhs: float, rhs: float, **inputs: Any) -> BoundReport:
    lhs, rhs = float(lhs), float(rhs)
    if math.isinf(rhs) and rhs > 0:
        holds, slack = True, math.inf
    else:
        slack = rhs - lhs
        holds = lhs <= rhs + settings.verdict_tolerance
    return BoundReport(bound_id=bound_id, lhs=lhs, rhs=rhs, slack=slack, holds=holds, inputs=inputs)


def _root_term(coefficient: float, value: float) -> float:
    """coefficient * sqrt(value), with sqrt(+inf) = +inf and a zero coefficient winning."""
    if coefficient == 0.0:
        return 0.0
    if math.isinf(value):
        return math.inf
    return coefficient * math.sqrt(max(value, 0.0))


# ── Right-hand sides ─────────────────────────────────────────

def thm1_rhs(epsilon: float, gamma: float, r_max: float) -> float:
    gamma = validate_gamma(gamma)
    return _root_term(2.0 * SQRT2 * r_max / (1.0 - gamma) ** 2, epsilon)


def lemma1_rhs(kind: FDivKind, divergence: float, gamma: float, r_max: float) -> float:
    gamma = validate_gamma(gamma)
    kind = FDivKind(kind)
    if kind not in LEMMA1_CONSTANTS:
        raise ValueError(f"no occupancy-divergence value bound for {kind.value}")
    return _root_term(LEMMA1_CONSTANTS[kind] * r_max / (1.0 - gamma), divergence)


def lemma2_rhs(appr: float, estm: float, eps_hat: float) -> float:
    return appr + estm + eps_hat


def thm2_rhs(coefficient: float, appr: float, estm: float, eps_hat: float, gamma: float) -> float:
    gamma = validate_gamma(gamma)
    return coefficient / (1.0 - gamma) * lemma2_rhs(appr, estm, eps_hat)


def lemma_c1_rhs(eps_m: float, gamma: float, r_max: float) -> float:
    gamma = validate_gamma(gamma)
    return _root_term(SQRT2 * r_max * gamma / (1.0 - gamma) ** 2, eps_m)


def _policy_shift_term(eps_pi: float, gamma: float, r_max: float) -> float:
    return _root_term(2.0 * SQRT2 * r_max / (1.0 - gamma) ** 2, eps_pi)


def lemma3_rhs(eps_m: float, eps_pi: float, gamma: float, r_max: float) -> float:
    return lemma_c1_rhs(eps_m, gamma, r_max) + _policy_shift_term(eps_pi, gamma, r_max)


def thm3_rhs(eps_m: float, eps_pi: float, gamma: float, r_max: float) -> float:
    gamma = validate_gamma(gamma)
    return _root_term(2.0 * SQRT2 * r_max / (1.0 - gamma), eps_m) + _policy_shift_term(eps_pi, gamma, r_max)


def check_cor1(pi_class_size: int, m: int, delta: float, r_max: float, gamma: float) -> float:
    """(2 R_max / (1 - gamma)^2) * (log|Pi| + log(1/delta)) / m."""
    pi_class_size = validate_count(pi_class_size, "pi_class_size")
    m = validate_count(m, "m")
    delta = validate_delta(delta)
    gamma = validate_gamma(gamma)
    return 2.0 * r_max / (1.0 - gamma) ** 2 * (math.log(pi_class_size) + math.log(1.0 / delta)) / m


def horizon_ratio(gamma: float) -> float:
    """THM1 RHS over LEM1_JS RHS at equal divergence values: 1 / (1 - gamma)."""
    return thm1_rhs(1.0, gamma, 1.0) / lemma1_rhs(FDivKind.JS, 1.0, gamma, 1.0)


def model_bias_coefficients(gamma: float, r_max: float) -> tuple[float, float]:
    """Coefficients of sqrt(eps_m) in the adversarial and the one-step-KL model bounds."""
    gamma = validate_gamma(gamma)
    return 2.0 * SQRT2 * r_max / (1.0 - gamma), SQRT2 * r_max * gamma / (1.0 - gamma) ** 2


# ── Policy imitation bounds ──────────────────────────────────

def _gap(mdp: TabularMdp, pi_e: Policy, pi_i: Policy) -> tuple[float, float, float]:
    v_e = policy_value(mdp, pi_e)
    v_i = policy_value(mdp, pi_i)
    return v_e, v_i, v_e - v_i


def check_thm1(mdp: TabularMdp, pi_e: Policy, pi_i: Policy) -> BoundReport:
    """V_E - V_I <= 2 sqrt2 R / (1-g)^2 sqrt(E_{d_E}[KL(pi_E, pi_I)])."""
    v_e, v_i, gap = _gap(mdp, pi_e, pi_i)
    epsilon = expected_policy_divergence(FDivKind.KL, mdp, pi_ref=pi_e, pi=pi_i, weighting=pi_e)
    return make_report(
        BoundId.THM1,
        gap,
        thm1_rhs(epsilon, mdp.gamma, mdp.r_max),
        epsilon=epsilon,
        gamma=mdp.gamma,
        r_max=mdp.r_max,
        v_e=v_e,
        v_i=v_i,
    )


def check_cor1_trial(
    mdp: TabularMdp,
    pi_e: Policy,
    pi_i: Policy,
    pi_class_size: int,
    m: int,
    delta: float,
) -> BoundReport:
    """One realizable finite-class trial: gap against the high-probability RHS."""
    v_e, v_i, gap = _gap(mdp, pi_e, pi_i)
    return make_report(
        BoundId.COR1,
        gap,
        check_cor1(pi_class_size, m, delta, mdp.r_max, mdp.gamma),
        pi_class_size=pi_class_size,
        m=m,
        delta=delta,
        gamma=mdp.gamma,
        r_max=mdp.r_max,
        v_e=v_e,
        v_i=v_i,
    )


def check_lemma_a_chain(mdp: TabularMdp, pi_e: Policy, pi: Policy) -> list[BoundReport]:
    """State, state-action and value steps of the error-propagation chain."""
    occ_e = state_action_occupancy(mdp, pi_e)
    occ = state_action_occupancy(mdp, pi)
    mean_tv = expected_policy_divergence(FDivKind.TV, mdp, pi_ref=pi_e, pi=pi, weighting=pi_e)
    g = mdp.gamma

    tv_d = total_variation(occ.d, occ_e.d)
    tv_rho = total_variation(occ.rho, occ_e.rho)
    v_e, v = policy_value(mdp, pi_e), policy_value(mdp, pi)
    common = {"mean_policy_tv": mean_tv, "gamma": g, "r_max": mdp.r_max}
    return [
        make_report(BoundId.LEM_A_STATE, tv_d, g / (1.0 - g) * mean_tv, **common),
        make_report(BoundId.LEM_A_SA, tv_rho, mean_tv / (1.0 - g), **common),
        make_report(BoundId.LEM_A_VALUE, abs(v - v_e), 2.0 * mdp.r_max / (1.0 - g) * tv_rho, tv_rho=tv_rho, **common),
    ]


def check_lemma1(mdp: TabularMdp, pi_e: Policy, pi_i: Policy, kind: FDivKind) -> BoundReport:
    """V_E - V_I <= C_f R / (1-g) sqrt(D_f(rho_I, rho_E))."""
    kind = FDivKind(kind)
    if kind not in LEMMA1_IDS:
        raise ValueError(f"no occupancy-divergence value bound for {kind.value}")
    v_e, v_i, gap = _gap(mdp, pi_e, pi_i)
    rho_e = state_action_occupancy(mdp, pi_e).rho
    rho_i = state_action_occupancy(mdp, pi_i).rho
    divergence = f_divergence(kind, rho_i, rho_e)
    return make_report(
        LEMMA1_IDS[kind],
        gap,
        lemma1_rhs(kind, divergence, mdp.gamma, mdp.r_max),
        divergence=divergence,
        kind=kind.value,
        gamma=mdp.gamma,
        r_max=mdp.r_max,
    )


def check_pinsker(mu, nu) -> BoundReport:
    """TV <= sqrt(2 KL)."""
    tv = total_variation(mu, nu)
    kl = f_divergence(FDivKind.KL, mu, nu)
    return make_report(BoundId.PINSKER, tv, _root_term(1.0, 2.0 * kl), kl=kl)


def check_js_tv(mu, nu) -> BoundReport:
    """TV^2 / 2 <= JS."""
    tv = total_variation(mu, nu)
    js = f_divergence(FDivKind.JS, mu, nu)
    return make_report(BoundId.JS_TV, 0.5 * tv**2, js, tv=tv)


def check_policy_bounds(mdp: TabularMdp, pi_e: Policy, pi_i: Policy) -> list[BoundReport]:
    """Every deterministic policy-imitation check for one (expert, imitator) pair."""
    rho_e = state_action_occupancy(mdp, pi_e).rho
    rho_i = state_action_occupancy(mdp, pi_i).rho
    reports = [check_thm1(mdp, pi_e, pi_i)]
    reports.extend(check_lemma_a_chain(mdp, pi_e, pi_i))
    reports.extend(check_lemma1(mdp, pi_e, pi_i, kind) for kind in LEMMA1_IDS)
    reports.append(check_pinsker(rho_i, rho_e))
    reports.append(check_js_tv(rho_i, rho_e))
    return reports


# ── Generalization bounds ────────────────────────────────────

class GapInputs(NamedTuple):
    appr: float
    eps_hat: float
    empirical_distance: float


def empirical_gap_inputs(
    mdp: TabularMdp,
    dclass: DiscriminatorClass,
    sample_e: Demonstrations,
    sample_i: Demonstrations,
) -> GapInputs:
    """Appr = min over occupancies of d_D(rho_hat_E, rho); eps_hat = max(0, d_D(rho_hat_E, rho_hat_I) - Appr)."""
    rho_hat_e = sample_e.empirical_rho()
    appr = gail_fit_lp(mdp, dclass, rho_hat_e).train_metric
    empirical = nn_distance(dclass, rho_hat_e, sample_i.empirical_rho()).value
    return GapInputs(appr=appr, eps_hat=max(0.0, empirical - appr), empirical_distance=empirical)


def _hypothesis_ok(dclass, sample_e, sample_i, appr: float, eps_hat: float) -> bool:
    empirical = nn_distance(dclass, sample_e.empirical_rho(), sample_i.empirical_rho()).value
    return empirical - appr <= eps_hat + settings.verdict_tolerance


def check_lemma2(
    dclass: DiscriminatorClass,
    sample_e: Demonstrations,
    sample_i: Demonstrations,
    rho_e,
    rho_i,
    appr: float,
    eps_hat: float,
    delta: float,
    mode: RademacherMode = ExactMode(),
) -> BoundReport:
    """d_D(rho_E, rho_I) <= Appr + Estm + eps_hat, with probability at least 1 - delta."""
    lhs = nn_distance(dclass, rho_e, rho_i).value
    estm = estm_components(dclass, sample_e, sample_i, delta, mode)
    hypothesis_ok = _hypothesis_ok(dclass, sample_e, sample_i, appr, eps_hat)
    if not hypothesis_ok:
        logger.warning("LEM2: empirical distance exceeds Appr + eps_hat; hypothesis not met")
    return make_report(
        BoundId.LEM2,
        lhs,
        lemma2_rhs(appr, estm.total, eps_hat),
        appr=appr,
        estm=estm.total,
        rademacher_expert=estm.rademacher_expert,
        rademacher_imitator=estm.rademacher_imitator,
        eps_hat=eps_hat,
        m=sample_e.m,
        delta=delta,
        delta_bound=dclass.delta,
        hypothesis_ok=hypothesis_ok,
    )


def check_thm2(
    mdp: TabularMdp,
    dclass: DiscriminatorClass,
    pi_e: Policy,
    pi_i: Policy,
    sample_e: Demonstrations,
    sample_i: Demonstrations,
    appr: float,
    eps_hat: float,
    delta: float,
    mode: RademacherMode = ExactMode(),
) -> BoundReport:
    """V_E - V_I <= ||r||_D / (1 - g) * (Appr + Estm + eps_hat).

    Raises:
        InfeasibleError: if the reward is outside the span of the class and constants.
    """
    v_e, v_i, gap = _gap(mdp, pi_e, pi_i)
    coefficient = compatible_coefficient(dclass, mdp.reward).value
    estm = estm_components(dclass, sample_e, sample_i, delta, mode)
    return make_report(
        BoundId.THM2,
        gap,
        thm2_rhs(coefficient, appr, estm.total, eps_hat, mdp.gamma),
        compatible_coefficient=coefficient,
        appr=appr,
        estm=estm.total,
        eps_hat=eps_hat,
        m=sample_e.m,
        delta=delta,
        delta_bound=dclass.delta,
        gamma=mdp.gamma,
        r_max=mdp.r_max,
        hypothesis_ok=_hypothesis_ok(dclass, sample_e, sample_i, appr, eps_hat),
    )


# ── Environment-model bounds ─────────────────────────────────

def check_lemma_c1(true_mdp: TabularMdp, model, pi_d: Policy) -> BoundReport:
    """|V^M_D - V^M*_D| <= sqrt2 R gamma / (1-g)^2 sqrt(eps_m), eps_m the one-step KL error."""
    v_model = eval_in_model(model, true_mdp, pi_d)
    v_true = policy_value(true_mdp, pi_d)
    eps_m = model_kl_error(true_mdp, model, pi_d)
    return make_report(
        BoundId.LEM_C1,
        abs(v_model - v_true),
        lemma_c1_rhs(eps_m, true_mdp.gamma, true_mdp.r_max),
        eps_m=eps_m,
        gamma=true_mdp.gamma,
        r_max=true_mdp.r_max,
    )


def _evaluation_gap(true_mdp: TabularMdp, model, pi: Policy) -> float:
    return abs(policy_value(true_mdp, pi) - eval_in_model(model, true_mdp, pi))


def check_lemma3(true_mdp: TabularMdp, model, pi_d: Policy, pi: Policy) -> BoundReport:
    eps_m = model_kl_error(true_mdp, model, pi_d)
    eps_pi = max_policy_divergence(FDivKind.KL, pi, pi_d)
    return make_report(
        BoundId.LEM3,
        _evaluation_gap(true_mdp, model, pi),
        lemma3_rhs(eps_m, eps_pi, true_mdp.gamma, true_mdp.r_max),
        eps_m=eps_m,
        eps_pi=eps_pi,
        gamma=true_mdp.gamma,
        r_max=true_mdp.r_max,
    )


def check_thm3(true_mdp: TabularMdp, model, pi_d: Policy, pi: Policy) -> BoundReport:
    """Same gap as the one-step-KL bound, with eps_m the JS of the joint distributions."""
    eps_m = joint_js(true_mdp, model, pi_d)
    eps_pi = max_policy_divergence(FDivKind.KL, pi, pi_d)
    return make_report(
        BoundId.THM3,
        _evaluation_gap(true_mdp, model, pi),
        thm3_rhs(eps_m, eps_pi, true_mdp.gamma, true_mdp.r_max),
        eps_m=eps_m,
        eps_pi=eps_pi,
        gamma=true_mdp.gamma,
        r_max=true_mdp.r_max,
    )


def check_model_bounds(true_mdp: TabularMdp, model, pi_d: Policy, pi: Policy) -> list[BoundReport]:
    return [
        check_lemma_c1(true_mdp, model, pi_d),
        check_lemma3(true_mdp, model, pi_d, pi),
        check_thm3(true_mdp, model, pi_d, pi),
    ]
