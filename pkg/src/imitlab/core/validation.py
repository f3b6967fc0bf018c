"""
Probability table validation utilities.

Shared rules for every probability-valued input:
  - entries must be >= -tol (tiny negatives are clipped to 0)
  - each distribution (the last axis) must sum to 1 within tol
  - inputs within tolerance are renormalized; anything else is rejected

These functions are pure (no side effects) to keep them easily testable.
"""
import numpy as np

from .errors import DistributionError, ShapeError

CONSTRUCTION_TOL = 1e-12
SOLVE_TOL = 1e-9


def as_distribution(values, tol: float = CONSTRUCTION_TOL, name: str = "distribution") -> np.ndarray:
    """Validate and renormalize an array whose last axis holds distributions.

    Raises:
        DistributionError: on negative entries or sums further than tol from 1.
    """
    arr = np.array(values, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] == 0:
        raise ShapeError(f"{name} must have a non-empty last axis")
    if not np.all(np.isfinite(arr)):
        raise DistributionError(f"{name} contains non-finite entries")

    if arr.min() < -tol:
        raise DistributionError(f"{name} has a negative entry {arr.min():.3e}")
    arr = np.clip(arr, 0.0, None)

    sums = arr.sum(axis=-1)
    worst = float(np.max(np.abs(sums - 1.0)))
    if worst > tol:
        raise DistributionError(
            f"{name} rows must sum to 1 within {tol:g}; worst deviation {worst:.3e}"
        )
    return arr / sums[..., None]


def check_shape(arr: np.ndarray, shape: tuple[int, ...], name: str) -> None:
    """Raise ShapeError unless arr has exactly the given shape."""
    if arr.shape != tuple(shape):
        raise ShapeError(f"{name} has shape {arr.shape}, expected {tuple(shape)}")


def validate_gamma(gamma: float) -> float:
    """Discount factors live in [0, 1)."""
    gamma = float(gamma)
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must satisfy 0 <= gamma < 1, got {gamma}")
    return gamma


def validate_delta(delta: float) -> float:
    """Confidence parameters live in (0, 1)."""
    delta = float(delta)
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must satisfy 0 < delta < 1, got {delta}")
    return delta


def validate_count(value: int, name: str, minimum: int = 1) -> int:
    if int(value) != value or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value}")
    return int(value)


def frozen(arr: np.ndarray) -> np.ndarray:
    """Return arr marked read-only so value objects stay immutable."""
    arr.setflags(write=False)
    return arr
