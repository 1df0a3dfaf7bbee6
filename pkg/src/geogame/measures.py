"""Finitely supported probability measures on (0, inf)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import ParameterError

MASS_TOL = 1e-12


def _snap_to_unit_mass(w: np.ndarray) -> np.ndarray:
    """Rescale to sum one and push the rounding residue into the largest atom."""
    w = w / math.fsum(w)
    k = int(np.argmax(w))
    rest = math.fsum(np.delete(w, k))
    w[k] = 1.0 - rest
    return w


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Atoms ``points[k] > 0`` with weights ``weights[k] >= 0`` summing to one."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.points, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if p.size == 0:
            raise ParameterError("measure needs at least one atom")
        if p.shape != w.shape:
            raise ParameterError("points and weights must have the same length")
        if np.any(~(p > 0)) or not np.all(np.isfinite(p)):
            raise ParameterError("support points must be positive and finite")
        if np.any(~(w >= 0)):
            raise ParameterError("weights must be nonnegative")
        p.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_atoms(cls, points: Sequence[float], weights: Sequence[float] | None = None) -> "DiscreteMeasure":
        """Probability measure; weights default to uniform and are normalised."""
        p = np.asarray(points, dtype=float).ravel()
        if weights is None:
            w = np.full(p.size, 1.0)
        else:
            w = np.array(weights, dtype=float).ravel()
        if w.size and not np.all(w >= 0):
            raise ParameterError("weights must be nonnegative")
        if w.size == 0 or math.fsum(w) <= 0:
            raise ParameterError("weights must have positive total mass")
        m = cls(p, _snap_to_unit_mass(w))
        m._check_mass()
        return m

    @classmethod
    def dirac(cls, q: float) -> "DiscreteMeasure":
        return cls.from_atoms([q], [1.0])

    @classmethod
    def from_log_points(cls, log_points: Sequence[float]) -> "DiscreteMeasure":
        """Equal-weight atoms at ``exp(log_points)``."""
        return cls.from_atoms(np.exp(np.asarray(log_points, dtype=float)))

    @classmethod
    def unnormalized(cls, points: Sequence[float], weights: Sequence[float]) -> "DiscreteMeasure":
        """Positive measure with arbitrary mass; for testing mass-sensitive forms."""
        return cls(np.asarray(points, dtype=float), np.asarray(weights, dtype=float))

    def _check_mass(self) -> None:
        if abs(self.mass - 1.0) > MASS_TOL:
            raise ParameterError(f"weights must sum to 1, got {self.mass!r}")

    @property
    def mass(self) -> float:
        return math.fsum(self.weights)

    @property
    def is_probability(self) -> bool:
        return abs(self.mass - 1.0) <= MASS_TOL

    def __len__(self) -> int:
        return self.points.size

    def integrate(self, values: np.ndarray) -> float:
        """``sum_k weights[k] * values[k]``."""
        return math.fsum(self.weights * np.asarray(values, dtype=float))

    def mean_log(self) -> float:
        """``<ln q, m>``."""
        return self.integrate(np.log(self.points))
