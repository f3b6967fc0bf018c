"""
MDP repository - JSON persistence for MDPs, policies, discriminator classes,
metrics, learned transition models and imitation results.

File layouts (nested lists, row-major):
  mdp:          {"n_states", "n_actions", "transition": [S][A][S], "reward": [S][A],
                 "gamma", "init_dist": [S], "r_max"?}
  policy:       {"table": [S][A]}
  discriminator:{"members": [K][Z], "delta"?, "includes_zero"}
  metric:       {"distances": [Z][Z]}
  model:        {"transition": [S][A][S], "diagnostics"?}
  imitation:    {"policy": [S][A], "train_metric", "iterations", "converged",
                 "algorithm", "seed", "diagnostics"?}
"""
import logging
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, Field, PositiveInt, field_serializer, field_validator

from ..core.errors import ShapeError
from ..core.schemas import ExtendedFloat, extended_tree, parse_extended
from ..services.divergences import DiscriminatorClass, MetricTable
from ..services.env_learning import LearnedModel
from ..services.imitators import ImitationResult
from ..services.mdp_core import Policy, TabularMdp

logger = logging.getLogger(__name__)


class MdpFile(BaseModel):
    n_states: PositiveInt
    n_actions: PositiveInt
    transition: list[list[list[float]]]
    reward: list[list[float]]
    gamma: float
    init_dist: list[float]
    r_max: float | None = None


class PolicyFile(BaseModel):
    table: list[list[float]]


class DiscriminatorFile(BaseModel):
    members: list[list[float]]
    delta: float | None = None
    includes_zero: bool = False


class MetricFile(BaseModel):
    distances: list[list[float]]


class ModelFile(BaseModel):
    transition: list[list[list[float]]]
    diagnostics: dict[str, Any] = Field(default_factory=dict)


class ImitationResultFile(BaseModel):
    policy: list[list[float]]
    train_metric: ExtendedFloat
    iterations: int = Field(ge=0)
    converged: bool
    algorithm: str
    seed: int | None = None
    diagnostics: dict[str, Any] = Field(default_factory=dict)

    @field_serializer("diagnostics", when_used="json")
    def _diagnostics_extended(self, value: dict[str, Any]) -> dict[str, Any]:
        return extended_tree(value)

    @field_validator("diagnostics", mode="before")
    @classmethod
    def _diagnostics_parsed(cls, value: Any) -> Any:
        if isinstance(value, dict):
            return {key: parse_extended(item) for key, item in value.items()}
        return value


def _read(path: Path, schema: type[BaseModel]) -> BaseModel:
    return schema.model_validate_json(Path(path).read_text(encoding="utf-8"))


def _write(path: Path, payload: BaseModel) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(payload.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.debug("Wrote %s", path)


def _json_safe(diagnostics: dict[str, Any]) -> dict[str, Any]:
    """Keep scalar diagnostics only; arrays are dropped."""
    safe: dict[str, Any] = {}
    for key, value in diagnostics.items():
        if isinstance(value, np.generic):
            value = value.item()
        if isinstance(value, (str, int, float, bool)) or value is None:
            safe[key] = value
    return safe


# ── Loaders ──────────────────────────────────────────────────

def load_mdp(path: Path) -> TabularMdp:
    """
    Load a TabularMdp from JSON.

    Raises:
        pydantic.ValidationError: malformed file
        ShapeError / DistributionError: tables violate the MDP invariants
    """
    data = _read(path, MdpFile)
    transition = np.array(data.transition, dtype=float)
    declared = (data.n_states, data.n_actions, data.n_states)
    if transition.shape != declared:
        raise ShapeError(f"transition has shape {transition.shape}, file declares {declared}")
    return TabularMdp(
        transition=transition,
        reward=np.array(data.reward, dtype=float),
        gamma=data.gamma,
        init_dist=np.array(data.init_dist, dtype=float),
        r_max=data.r_max,
    )


def load_policy(path: Path) -> Policy:
    return Policy(np.array(_read(path, PolicyFile).table, dtype=float))


def load_discriminator(path: Path) -> DiscriminatorClass:
    data = _read(path, DiscriminatorFile)
    members = np.array(data.members, dtype=float)
    dclass = DiscriminatorClass(members, delta=data.delta, includes_zero=data.includes_zero)
    if dclass.includes_zero != data.includes_zero:
        raise ValueError("includes_zero is false but a member is identically zero")
    return dclass


def load_metric(path: Path) -> MetricTable:
    return MetricTable(np.array(_read(path, MetricFile).distances, dtype=float))


def load_model(path: Path) -> LearnedModel:
    data = _read(path, ModelFile)
    return LearnedModel(np.array(data.transition, dtype=float), diagnostics=data.diagnostics)


def load_imitation_result(path: Path) -> ImitationResult:
    data = _read(path, ImitationResultFile)
    return ImitationResult(
        policy=Policy(np.array(data.policy, dtype=float)),
        train_metric=data.train_metric,
        iterations=data.iterations,
        converged=data.converged,
        algorithm=data.algorithm,
        seed=data.seed,
        diagnostics=data.diagnostics,
    )


# ── Writers ──────────────────────────────────────────────────

def save_mdp(path: Path, mdp: TabularMdp) -> None:
    _write(
        path,
        MdpFile(
            n_states=mdp.n_states,
            n_actions=mdp.n_actions,
            transition=mdp.transition.tolist(),
            reward=mdp.reward.tolist(),
            gamma=mdp.gamma,
            init_dist=mdp.init_dist.tolist(),
            r_max=mdp.r_max,
        ),
    )


def save_policy(path: Path, policy: Policy) -> None:
    _write(path, PolicyFile(table=policy.table.tolist()))


def save_discriminator(path: Path, dclass: DiscriminatorClass) -> None:
    _write(
        path,
        DiscriminatorFile(members=dclass.members.tolist(), delta=dclass.delta, includes_zero=dclass.includes_zero),
    )


def save_metric(path: Path, metric: MetricTable) -> None:
    _write(path, MetricFile(distances=metric.distances.tolist()))


def save_model(path: Path, model: LearnedModel) -> None:
    _write(path, ModelFile(transition=model.transition.tolist(), diagnostics=_json_safe(model.diagnostics)))


def save_imitation_result(path: Path, result: ImitationResult) -> None:
    _write(
        path,
        ImitationResultFile(
            policy=result.policy.table.tolist(),
            train_metric=float(result.train_metric),
            iterations=int(result.iterations),
            converged=bool(result.converged),
            algorithm=result.algorithm,
            seed=result.seed,
            diagnostics=_json_safe(result.diagnostics),
        ),
    )
