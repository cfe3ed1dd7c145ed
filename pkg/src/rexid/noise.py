"""Sub-Gaussian noise models and the uniform-in-time magnitude bound.

Two zero-mean families are supported:

* ``GaussianIso(sigma)``  — isotropic normal, variance proxy ``sigma**2``;
* ``UniformBox(b)``       — per-coordinate Uniform[-b, b], variance proxy
  ``b**2`` (a bounded zero-mean variable on [-b, b] is b^2-sub-Gaussian).

Reproducibility contract: Monte Carlo code derives one child stream per
trajectory from ``(master seed, trajectory index)``, so results do not depend
on how trajectories are scheduled across workers.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import pi

import numpy as np

__all__ = ["NoiseModel", "substream", "noise_bound_wbar"]

GAUSSIAN = "gauss"
UNIFORM = "uniform"


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean i.i.d. noise source with a sub-Gaussian variance proxy."""

    kind: str
    scale: float  # sigma for "gauss", box half-width b for "uniform"
    dim: int

    def __post_init__(self):
        if self.kind not in (GAUSSIAN, UNIFORM):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not self.scale > 0:
            raise ValueError("noise scale must be positive")
        if self.dim < 1:
            raise ValueError("noise dim must be >= 1")

    @property
    def variance_proxy(self) -> float:
        """sigma_w^2 for Gaussian; b^2 for the bounded uniform."""
        return self.scale**2

    @property
    def per_coordinate_variance(self) -> float:
        if self.kind == GAUSSIAN:
            return self.scale**2
        return self.scale**2 / 3.0

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """Draw ``size`` i.i.d. vectors (``(size, dim)``; ``(dim,)`` if None)."""
        shape = (self.dim,) if size is None else (size, self.dim)
        if self.kind == GAUSSIAN:
            return rng.normal(0.0, self.scale, size=shape)
        return rng.uniform(-self.scale, self.scale, size=shape)


def sample(model: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    """One i.i.d. draw from ``model``; deterministic given the stream state."""
    return model.sample(rng)


def substream(master_seed: int, index: int) -> np.random.Generator:
    """Independent per-trajectory generator for ``(master_seed, index)``."""
    if master_seed < 0 or index < 0:
        raise ValueError("seed and index must be nonnegative")
    return np.random.default_rng(np.random.SeedSequence([master_seed, index]))


def _wbar_formula(t_arr: np.ndarray, delta: float, sigma_w: float, n: int) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        val = sigma_w * np.sqrt(2.0 * n * np.log(n * pi**2 * t_arr**2 / (3.0 * delta)))
    return np.where(t_arr == 0, 0.0, val)


def noise_bound_wbar(t, delta: float, sigma_w: float, n: int):
    """High-probability uniform-in-time bound on |W(t)|.

        wbar(t, delta) = sigma_w * sqrt(2 n ln(n pi^2 t^2 / (3 delta)))   t >= 1
        wbar(0, delta) = 0

    With probability at least 1 - delta the whole sequence satisfies
    |W(t)| <= wbar(t, delta) for all t >= 1 simultaneously.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must be in (0,1)")
    if not sigma_w > 0:
        raise ValueError("sigma_w must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("t must be >= 0")
    out = _wbar_formula(t_arr, delta, sigma_w, n)
    return out if out.ndim else float(out)
