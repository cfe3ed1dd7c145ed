"""Comparison-function algebra for trajectory growth certificates.

Growth certificates describe how hard a system can blow up: each bound is a
monotone function of time, initial condition, or accumulated input/noise
energy.  This module represents those functions as finite nonnegative power
sums

    g(r) = sum_i a_i * r**p_i + c,    a_i, p_i, c >= 0,

which is closed under addition and nonnegative scaling, covers every function
used by the built-in example systems (identities, scaled identities, scaled
squares, constants), and makes class membership decidable:

* class K:    c = 0 and some a_i > 0 with p_i > 0 (strictly increasing, 0 at 0)
* class Kinf: class K and unbounded (automatic for power sums in class K)
* n-SE:       ln g(r**n) = o(r); true for every finite power sum
* APB:        g(r) = O(r**k) for some integer k; true for every finite power sum

Arbitrary callables with self-declared class flags can be wrapped with
:class:`DeclaredGrowthFn` (flagged as unverified in reports).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "ClassFlags",
    "GrowthFn",
    "DeclaredGrowthFn",
    "identity",
    "constant",
    "monomial",
]


@dataclass(frozen=True)
class ClassFlags:
    """Membership flags for the standard comparison-function classes."""

    is_K: bool
    is_Kinf: bool
    is_1SE: bool
    is_2SE: bool
    is_APB: bool

    def __post_init__(self):
        if self.is_Kinf and not self.is_K:
            raise ValueError("is_Kinf requires is_K")


@dataclass(frozen=True)
class GrowthFn:
    """A finite nonnegative power sum ``r -> sum_i a_i r**p_i + offset``.

    ``terms`` is a tuple of ``(coefficient, exponent)`` pairs with like
    exponents merged and zero coefficients dropped; ``offset`` is the constant
    part.  Instances are immutable and safe to share across threads.
    """

    terms: tuple[tuple[float, float], ...]
    offset: float = 0.0

    def __post_init__(self):
        cleaned: dict[float, float] = {}
        for a, p in self.terms:
            a = float(a)
            p = float(p)
            if not (np.isfinite(a) and np.isfinite(p)):
                raise ValueError("coefficients and exponents must be finite")
            if a < 0 or p < 0:
                raise ValueError("coefficients and exponents must be >= 0")
            if a == 0.0:
                continue
            cleaned[p] = cleaned.get(p, 0.0) + a
        if not (np.isfinite(self.offset) and self.offset >= 0):
            raise ValueError("offset must be finite and >= 0")
        object.__setattr__(
            self, "terms", tuple(sorted((a, p) for p, a in cleaned.items()))
        )
        object.__setattr__(self, "offset", float(self.offset))

    def __call__(self, r):
        """Evaluate at ``r`` (scalar or array); ``r`` must be >= 0."""
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise ValueError("growth functions are defined on [0, inf) only")
        out = np.full(r.shape, self.offset, dtype=float)
        for a, p in self.terms:
            if p == 0.0:
                out += a
            elif p == 1.0:
                out += a * r
            else:
                out += a * r**p
        return out if out.ndim else float(out)

    def classify(self) -> ClassFlags:
        """Class flags, computed analytically from the term list."""
        increasing = any(a > 0 and p > 0 for a, p in self.terms)
        is_k = self.offset == 0.0 and not any(p == 0.0 for a, p in self.terms) and increasing
        # Power sums: ln g(r^n) = O(ln r) = o(r), and g(r) = O(r^ceil(max p)).
        return ClassFlags(
            is_K=is_k,
            is_Kinf=is_k,
            is_1SE=True,
            is_2SE=True,
            is_APB=True,
        )

    def __add__(self, other: "GrowthFn") -> "GrowthFn":
        if not isinstance(other, GrowthFn):
            return NotImplemented
        return GrowthFn(self.terms + other.terms, self.offset + other.offset)

    def scale(self, c: float) -> "GrowthFn":
        """Pointwise scaling by a nonnegative constant."""
        c = float(c)
        if c < 0:
            raise ValueError("scale factor must be >= 0")
        return GrowthFn(tuple((c * a, p) for a, p in self.terms), c * self.offset)

    def __rmul__(self, c: float) -> "GrowthFn":
        return self.scale(c)

    def to_dict(self) -> dict:
        return {"terms": [[a, p] for a, p in self.terms], "offset": self.offset}

    @classmethod
    def from_dict(cls, d: dict) -> "GrowthFn":
        return cls(tuple((float(a), float(p)) for a, p in d.get("terms", [])),
                   float(d.get("offset", 0.0)))

    def __repr__(self):
        parts = [f"{a:g}*r^{p:g}" for a, p in self.terms]
        if self.offset or not parts:
            parts.append(f"{self.offset:g}")
        return "GrowthFn(" + " + ".join(parts) + ")"


@dataclass(frozen=True)
class DeclaredGrowthFn:
    """User-supplied callable with self-declared class flags.

    Membership is *not* verified; anything built on top of one of these is
    reported as resting on unverified declarations.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    flags: ClassFlags
    label: str = "user"
    verified: bool = field(default=False, init=False)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise ValueError("growth functions are defined on [0, inf) only")
        out = np.asarray(self.fn(r), dtype=float)
        return out if out.ndim else float(out)

    def classify(self) -> ClassFlags:
        return self.flags


def identity() -> GrowthFn:
    return GrowthFn(((1.0, 1.0),))


def constant(c: float) -> GrowthFn:
    return GrowthFn((), c)


def monomial(coefficient: float, exponent: float) -> GrowthFn:
    return GrowthFn(((coefficient, exponent),))


def add(f: GrowthFn, g: GrowthFn) -> GrowthFn:
    """Pointwise-exact sum within the algebra."""
    return f + g


def scale(f: GrowthFn, c: float) -> GrowthFn:
    """Pointwise-exact nonnegative scaling within the algebra."""
    return f.scale(c)


def eval_fn(f: GrowthFn | DeclaredGrowthFn, r):
    """Functional form of evaluation (``f(r)``)."""
    return f(r)


def classify(f: GrowthFn | DeclaredGrowthFn) -> ClassFlags:
    """Functional form of classification."""
    return f.classify()
