"""Chart points on the slashed tangent bundle and random samplers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    """A point lies outside the chart domain (y = 0, or a model restriction)."""


class RegularityError(ValueError):
    """The metric of a Finsler function is degenerate or not positive definite."""


class HomogeneityError(ValueError):
    """A spray or projective factor failed its homogeneity certificate."""


class PreconditionError(ValueError):
    """An operation was called on input that violates its stated precondition."""


@dataclass(frozen=True)
class ChartPoint:
    """A point (x, y) of the slashed tangent bundle, or a batch of them.

    ``x`` and ``y`` have shape ``(..., n)``; leading axes are batch axes.
    """

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.shape[-1:] != y.shape[-1:] or x.ndim == 0:
            raise DomainError(f"x and y must share the last axis, got {x.shape} and {y.shape}")
        if x.shape[-1] < 2:
            raise DomainError("chart dimension must be at least 2")
        if np.any(np.linalg.norm(y, axis=-1) == 0.0):
            raise DomainError("y = 0 is not a point of the slashed tangent bundle")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def dim(self) -> int:
        return self.x.shape[-1]

    @property
    def batch_shape(self) -> tuple:
        return np.broadcast_shapes(self.x.shape[:-1], self.y.shape[:-1])

    def __len__(self) -> int:
        bs = self.batch_shape
        return bs[0] if bs else 1

    def __getitem__(self, i) -> "ChartPoint":
        x = np.broadcast_to(self.x, self.batch_shape + (self.dim,))
        y = np.broadcast_to(self.y, self.batch_shape + (self.dim,))
        return ChartPoint(x[i], y[i])

    def scaled(self, lam: float) -> "ChartPoint":
        return ChartPoint(self.x, lam * self.y)


def sample_points(n: int, count: int, box, seed: int, r_min: float = 0.5, r_max: float = 2.0) -> ChartPoint:
    """Random batch: x uniform in ``box`` = (lo, hi), y in the annulus r_min ≤ |y| ≤ r_max."""
    rng = np.random.default_rng(seed)
    lo, hi = (np.broadcast_to(np.asarray(b, dtype=float), (n,)) for b in box)
    x = lo + (hi - lo) * rng.random((count, n))
    direction = rng.normal(size=(count, n))
    direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
    radius = r_min + (r_max - r_min) * rng.random((count, 1))
    return ChartPoint(x, radius * direction)
