"""
Distribution discrepancies over finite sample spaces.

Covers:
  - the f-divergence family (KL, reverse KL, Pearson chi2, JS, squared
    Hellinger) plus total variation, all in natural log
  - policy-level expectations and maxima of those divergences
  - the neural-network distance (IPM) over explicit discriminator classes
  - Wasserstein-1 by the Kantorovich transport LP
  - empirical Rademacher complexity, the compatible coefficient and the
    estimation term that combines them

Conventions: 0 log 0 = 0, 0 log(0/0) = 0, and +inf is a returned value.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
from scipy.special import rel_entr

from ..core.errors import CapacityError, InfeasibleError, ShapeError, SolverError
from ..core.simplex import solve_lp
from ..core.validation import SOLVE_TOL, as_distribution, frozen, validate_count, validate_delta
from .mdp_core import Demonstrations, Policy, TabularMdp, state_occupancy

logger = logging.getLogger(__name__)

EXACT_RADEMACHER_MAX_M = 20
SIGN_CLASS_MAX_POINTS = 16
DUALITY_GAP_TOL = 1e-7
RECONSTRUCTION_TOL = 1e-7

_SIGN_CHUNK = 1 << 14


class FDivKind(str, Enum):
    KL = "kl"
    REVERSE_KL = "reverse_kl"
    CHI2 = "chi2"
    JS = "js"
    HELLINGER = "hellinger"
    TV = "tv"


# ── Sample-space types ────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class DiscriminatorClass:
    """Finite family of real tables over a flattened sample space."""

    members: np.ndarray
    delta: float | None = None
    includes_zero: bool = False

    def __post_init__(self) -> None:
        members = np.array(self.members, dtype=float)
        if members.ndim == 1:
            members = members[None, :]
        if members.ndim != 2 or members.shape[0] == 0 or members.shape[1] == 0:
            raise ShapeError("discriminator class needs at least one member over a non-empty space")
        if not np.all(np.isfinite(members)):
            raise ValueError("discriminator members must be finite")

        sup = float(np.abs(members).max())
        delta = sup if self.delta is None else float(self.delta)
        if delta < 0 or sup > delta + 1e-12:
            raise ValueError(f"member entries exceed delta={delta} (max |D| = {sup})")

        has_zero = bool(np.any(np.all(members == 0.0, axis=1)))
        if self.includes_zero and not has_zero:
            raise ValueError("includes_zero is set but no member is identically zero")

        object.__setattr__(self, "members", frozen(members))
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "includes_zero", has_zero)

    @property
    def size(self) -> int:
        """Number of points in the sample space."""
        return self.members.shape[1]

    def __len__(self) -> int:
        return self.members.shape[0]

    def scaled(self, factor: float) -> "DiscriminatorClass":
        return DiscriminatorClass(self.members * factor, delta=self.delta * abs(factor))


@dataclass(frozen=True, eq=False)
class MetricTable:
    """Pairwise distances over a finite sample space."""

    distances: np.ndarray

    def __post_init__(self) -> None:
        dist = np.array(self.distances, dtype=float)
        if dist.ndim != 2 or dist.shape[0] != dist.shape[1] or dist.shape[0] == 0:
            raise ShapeError("metric must be a non-empty square matrix")
        if not np.all(np.isfinite(dist)) or dist.min() < 0:
            raise ValueError("metric distances must be finite and nonnegative")
        if not np.allclose(dist, dist.T, atol=1e-12, rtol=0.0):
            raise ValueError("metric must be symmetric")
        if np.any(np.diag(dist) != 0.0):
            raise ValueError("metric diagonal must be zero")
        # d(i, k) <= d(i, j) + d(j, k) for all i, j, k
        through = dist[:, :, None] + dist[None, :, :]
        if np.any(dist[:, None, :] > through + 1e-9):
            raise ValueError("metric violates the triangle inequality")
        object.__setattr__(self, "distances", frozen(dist))

    @property
    def size(self) -> int:
        return self.distances.shape[0]

    @property
    def diameter(self) -> float:
        return float(self.distances.max())


# ── Class and metric builders ────────────────────────────────

def zero_class(size: int) -> DiscriminatorClass:
    return DiscriminatorClass(np.zeros((1, size)), delta=0.0, includes_zero=True)


def indicator_class(size: int, delta: float = 1.0) -> DiscriminatorClass:
    """The zero table and +/- delta on every single point."""
    eye = np.eye(size) * delta
    return DiscriminatorClass(np.vstack([np.zeros(size), eye, -eye]), delta=delta, includes_zero=True)


def sign_class(size: int, delta: float = 1.0, include_zero: bool = True) -> DiscriminatorClass:
    """Every table with entries in {-delta, +delta} (optionally plus zero).

    The IPM over this class is 2 * delta * TV.
    """
    if size > SIGN_CLASS_MAX_POINTS:
        raise CapacityError(f"sign class over {size} points exceeds cap {SIGN_CLASS_MAX_POINTS}")
    codes = np.arange(1 << size)[:, None]
    members = (((codes >> np.arange(size)) & 1) * 2.0 - 1.0) * delta
    if include_zero:
        members = np.vstack([np.zeros(size), members])
    return DiscriminatorClass(members, delta=delta, includes_zero=include_zero)


def random_class(
    size: int,
    n_members: int,
    seed: int,
    delta: float = 1.0,
    symmetric: bool = True,
    include_zero: bool = True,
) -> DiscriminatorClass:
    """Seeded uniform tables in [-delta, delta]; symmetric adds every negation."""
    n_members = validate_count(n_members, "n_members")
    rng = np.random.default_rng(seed)
    members = rng.uniform(-delta, delta, size=(n_members, size))
    if symmetric:
        members = np.vstack([members, -members])
    if include_zero:
        members = np.vstack([np.zeros(size), members])
    return DiscriminatorClass(members, delta=delta, includes_zero=include_zero)


def lipschitz_class(metric: MetricTable, delta: float | None = None) -> DiscriminatorClass:
    """Truncated distance-to-anchor potentials min(d(z, .), delta), their negations and zero.

    Every member is 1-Lipschitz under the metric and bounded by delta.
    """
    cap = metric.diameter if delta is None else float(delta)
    potentials = np.minimum(metric.distances, cap)
    members = np.vstack([np.zeros(metric.size), potentials, -potentials])
    return DiscriminatorClass(members, delta=cap, includes_zero=True)


def symmetrized(dclass: DiscriminatorClass) -> DiscriminatorClass:
    """dclass together with the negation of each member."""
    members = np.vstack([dclass.members, -dclass.members])
    return DiscriminatorClass(np.unique(members, axis=0), delta=dclass.delta)


def discrete_metric(size: int) -> MetricTable:
    return MetricTable(1.0 - np.eye(size))


def line_metric(points) -> MetricTable:
    """|x_i - x_j| for points on the real line (an int n means 0..n-1)."""
    x = np.arange(points, dtype=float) if np.isscalar(points) else np.asarray(points, dtype=float)
    return MetricTable(np.abs(x[:, None] - x[None, :]))


# ── f-divergences ─────────────────────────────────────────────

def rowwise_divergence(kind: FDivKind, mu: np.ndarray, nu: np.ndarray) -> np.ndarray:
    """Divergence along the last axis; broadcasting rows of mu against nu."""
    kind = FDivKind(kind)
    if kind is FDivKind.KL:
        out = rel_entr(mu, nu).sum(axis=-1)
    elif kind is FDivKind.REVERSE_KL:
        out = rel_entr(nu, mu).sum(axis=-1)
    elif kind is FDivKind.CHI2:
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(mu > 0, (mu - nu) ** 2 / np.where(mu > 0, mu, 1.0), np.where(nu > 0, np.inf, 0.0))
        out = terms.sum(axis=-1)
    elif kind is FDivKind.JS:
        mid = 0.5 * (mu + nu)
        out = 0.5 * (rel_entr(mu, mid) + rel_entr(nu, mid)).sum(axis=-1)
    elif kind is FDivKind.HELLINGER:
        out = ((np.sqrt(mu) - np.sqrt(nu)) ** 2).sum(axis=-1)
    else:
        out = 0.5 * np.abs(mu - nu).sum(axis=-1)
    return np.maximum(out, 0.0)


def _pair(mu, nu) -> tuple[np.ndarray, np.ndarray]:
    mu = as_distribution(np.ravel(mu), tol=SOLVE_TOL, name="mu")
    nu = as_distribution(np.ravel(nu), tol=SOLVE_TOL, name="nu")
    if mu.shape != nu.shape:
        raise ShapeError(f"distributions live on different spaces: {mu.size} vs {nu.size}")
    return mu, nu


def f_divergence(kind: FDivKind, mu, nu) -> float:
    """D_kind(mu, nu) for two distributions on the same finite space (flattened)."""
    mu, nu = _pair(mu, nu)
    return float(rowwise_divergence(kind, mu, nu))


def total_variation(mu, nu) -> float:
    return f_divergence(FDivKind.TV, mu, nu)


def js_gradient(target, rho) -> np.ndarray:
    """Gradient of JS(target, rho) with respect to rho: 1/2 log(2 rho / (target + rho)).

    Zero where rho vanishes.
    """
    target = np.asarray(target, dtype=float)
    rho = np.asarray(rho, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        grad = 0.5 * np.log(2.0 * rho / (target + rho))
    return np.where(rho > 0, grad, 0.0)


def expected_policy_divergence(
    kind: FDivKind,
    mdp: TabularMdp,
    pi_ref: Policy,
    pi: Policy,
    weighting: Policy,
) -> float:
    """E_{s ~ d_weighting}[D_kind(pi_ref(.|s), pi(.|s))] under the exact state occupancy."""
    if not pi_ref.table.shape == pi.table.shape == weighting.table.shape:
        raise ShapeError("policies must share a shape")
    d = state_occupancy(mdp, weighting)
    per_state = rowwise_divergence(kind, pi_ref.table, pi.table)
    with np.errstate(invalid="ignore"):
        weighted = np.where(d > 0, d * per_state, 0.0)
    return float(weighted.sum())


def max_policy_divergence(kind: FDivKind, pi: Policy, pi_ref: Policy) -> float:
    """max_s D_kind(pi(.|s), pi_ref(.|s))."""
    if pi.table.shape != pi_ref.table.shape:
        raise ShapeError("policies must share a shape")
    return float(rowwise_divergence(kind, pi.table, pi_ref.table).max())


# ── Integral probability metrics ─────────────────────────────

class NeuralDistance(NamedTuple):
    value: float
    argmax: int


def nn_distance(dclass: DiscriminatorClass, mu, nu) -> NeuralDistance:
    """max over members of <D, mu> - <D, nu>, with the maximizing member index."""
    mu = np.ravel(np.asarray(mu, dtype=float))
    nu = np.ravel(np.asarray(nu, dtype=float))
    if mu.size != dclass.size or nu.size != dclass.size:
        raise ShapeError(f"class covers {dclass.size} points, distributions have {mu.size}/{nu.size}")
    gaps = dclass.members @ (mu - nu)
    best = int(np.argmax(gaps))
    return NeuralDistance(float(gaps[best]), best)


@dataclass(frozen=True)
class TransportPlan:
    cost: float
    plan: np.ndarray
    potential: np.ndarray
    dual_value: float

    @property
    def duality_gap(self) -> float:
        return abs(self.cost - self.dual_value)


def kantorovich(metric: MetricTable, mu, nu) -> TransportPlan:
    """Solve the transport LP and its 1-Lipschitz potential dual."""
    mu, nu = _pair(mu, nu)
    n = metric.size
    if mu.size != n:
        raise ShapeError(f"metric covers {n} points, distributions have {mu.size}")

    # Primal: plan[i, j] >= 0 with row sums mu and column sums nu.
    a_eq = np.vstack([np.kron(np.eye(n), np.ones(n)), np.kron(np.ones(n), np.eye(n))])
    primal = solve_lp(metric.distances.ravel(), a_eq=a_eq, b_eq=np.concatenate([mu, nu]))

    # Dual: max <phi, mu - nu> with phi_i - phi_j <= d(i, j), phi = p - q, phi_0 = 0.
    rows = []
    for i in range(n):
        for j in range(n):
            if i != j:
                row = np.zeros(n)
                row[i] += 1.0
                row[j] -= 1.0
                rows.append(row)
    diff = np.array(rows).reshape(-1, n)
    a_ub = np.hstack([diff, -diff])
    b_ub = np.array([metric.distances[i, j] for i in range(n) for j in range(n) if i != j])
    anchor = np.zeros((1, 2 * n))
    anchor[0, 0], anchor[0, n] = 1.0, -1.0
    signed = mu - nu
    dual = solve_lp(
        -np.concatenate([signed, -signed]),
        a_ub=a_ub if a_ub.size else None,
        b_ub=b_ub if b_ub.size else None,
        a_eq=anchor,
        b_eq=np.zeros(1),
    )
    potential = dual.x[:n] - dual.x[n:]
    return TransportPlan(
        cost=primal.value,
        plan=primal.x.reshape(n, n),
        potential=potential,
        dual_value=float(potential @ signed),
    )


def wasserstein_1(metric: MetricTable, mu, nu) -> float:
    """Optimal transport cost, certified by the potential dual."""
    result = kantorovich(metric, mu, nu)
    if result.duality_gap > DUALITY_GAP_TOL:
        raise SolverError(
            "transport duality gap exceeds tolerance",
            certificate={"primal": result.cost, "dual": result.dual_value},
        )
    logger.debug("W1 = %.6g (duality gap %.2e)", result.cost, result.duality_gap)
    return max(result.cost, 0.0)


# ── Rademacher complexity and estimation term ────────────────

@dataclass(frozen=True)
class ExactMode:
    """Enumerate all 2^m sign patterns."""


@dataclass(frozen=True)
class MonteCarloMode:
    draws: int
    seed: int


RademacherMode = ExactMode | MonteCarloMode


class RademacherEstimate(NamedTuple):
    value: float
    stderr: float


def _sample_points(dclass: DiscriminatorClass, sample: Demonstrations) -> np.ndarray:
    """Flat sample-space index of each demonstration, matched to the class space."""
    pair_space = sample.n_states * sample.n_actions
    if dclass.size == pair_space:
        return sample.pair_indices()
    if dclass.size == pair_space * sample.n_states and sample.triples is not None:
        return sample.triple_indices()
    raise ShapeError(f"class over {dclass.size} points does not match the sample space")


def _sign_patterns(m: int, start: int, stop: int) -> np.ndarray:
    codes = np.arange(start, stop)[:, None]
    return ((codes >> np.arange(m)) & 1) * 2.0 - 1.0


def empirical_rademacher(
    dclass: DiscriminatorClass,
    sample: Demonstrations,
    mode: RademacherMode = ExactMode(),
) -> RademacherEstimate:
    """E_sigma[ sup_D (1/m) sum_i sigma_i D(z_i) ] over the sample points."""
    values = dclass.members[:, _sample_points(dclass, sample)]  # (members, m)
    m = sample.m

    if isinstance(mode, ExactMode):
        if m > EXACT_RADEMACHER_MAX_M:
            raise CapacityError(f"exact Rademacher enumeration needs m <= {EXACT_RADEMACHER_MAX_M}, got {m}")
        total = 0.0
        n_patterns = 1 << m
        for start in range(0, n_patterns, _SIGN_CHUNK):
            sigma = _sign_patterns(m, start, min(start + _SIGN_CHUNK, n_patterns))
            total += float((sigma @ values.T).max(axis=1).sum())
        return RademacherEstimate(total / n_patterns / m, 0.0)

    draws = validate_count(mode.draws, "draws")
    rng = np.random.default_rng(mode.seed)
    sups = np.empty(draws)
    for start in range(0, draws, _SIGN_CHUNK):
        stop = min(start + _SIGN_CHUNK, draws)
        sigma = rng.choice([-1.0, 1.0], size=(stop - start, m))
        sups[start:stop] = (sigma @ values.T).max(axis=1) / m
    stderr = float(sups.std(ddof=1) / math.sqrt(draws)) if draws > 1 else 0.0
    return RademacherEstimate(float(sups.mean()), stderr)


class EstmComponents(NamedTuple):
    rademacher_expert: float
    rademacher_imitator: float
    concentration: float

    @property
    def total(self) -> float:
        return 2.0 * self.rademacher_expert + 2.0 * self.rademacher_imitator + self.concentration


def concentration_term(delta_bound: float, m: int, confidence: float) -> float:
    """12 * Delta * sqrt(log(2 / delta) / m)."""
    confidence = validate_delta(confidence)
    m = validate_count(m, "m")
    return 12.0 * delta_bound * math.sqrt(math.log(2.0 / confidence) / m)


def estm_components(
    dclass: DiscriminatorClass,
    sample_e: Demonstrations,
    sample_i: Demonstrations,
    delta: float,
    mode: RademacherMode = ExactMode(),
) -> EstmComponents:
    validate_delta(delta)
    if sample_e.m != sample_i.m:
        raise ShapeError(f"samples must have equal size, got {sample_e.m} and {sample_i.m}")
    return EstmComponents(
        rademacher_expert=empirical_rademacher(dclass, sample_e, mode).value,
        rademacher_imitator=empirical_rademacher(dclass, sample_i, mode).value,
        concentration=concentration_term(dclass.delta, sample_e.m, delta),
    )


def estm_term(
    dclass: DiscriminatorClass,
    sample_e: Demonstrations,
    sample_i: Demonstrations,
    delta: float,
    mode: RademacherMode = ExactMode(),
) -> float:
    """2 R_E + 2 R_I + 12 Delta sqrt(log(2/delta)/m)."""
    return estm_components(dclass, sample_e, sample_i, delta, mode).total


# ── Compatible coefficient ───────────────────────────────────

@dataclass(frozen=True)
class CompatibleCoefficient:
    value: float
    coefficients: np.ndarray
    offset: float
    residual: float


def compatible_coefficient(dclass: DiscriminatorClass, reward) -> CompatibleCoefficient:
    """min sum |c_i| subject to sum_i c_i D_i + c_0 = r, with c_0 free.

    Raises:
        InfeasibleError: if r is outside the span of the class and constants.
    """
    r = np.ravel(np.asarray(reward, dtype=float))
    if r.size != dclass.size:
        raise ShapeError(f"reward has {r.size} entries, class covers {dclass.size} points")

    k = len(dclass)
    basis = dclass.members.T  # (points, members)
    ones = np.ones((r.size, 1))
    a_eq = np.hstack([basis, -basis, ones, -ones])
    cost = np.concatenate([np.ones(2 * k), np.zeros(2)])
    try:
        solution = solve_lp(cost, a_eq=a_eq, b_eq=r)
    except InfeasibleError as exc:
        raise InfeasibleError(
            "reward is not in the span of the discriminator class and constants",
            iterations=exc.iterations,
            certificate=exc.certificate,
        ) from exc

    coefficients = solution.x[:k] - solution.x[k:2 * k]
    offset = float(solution.x[2 * k] - solution.x[2 * k + 1])
    residual = float(np.abs(basis @ coefficients + offset - r).max())
    if residual > RECONSTRUCTION_TOL:
        raise SolverError(
            "compatible coefficient certificate does not reconstruct the reward",
            iterations=solution.iterations,
            certificate={"residual": residual},
        )
    return CompatibleCoefficient(
        value=float(np.abs(coefficients).sum()),
        coefficients=coefficients,
        offset=offset,
        residual=residual,
    )
