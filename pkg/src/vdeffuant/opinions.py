"""Opinion profiles, model parameters, initial measures and initial pile laws.

A profile is an ``F``-bit integer: bit ``i`` holds the opinion on issue ``i``.
Profiles are stored as ``numpy.uint64`` so ``F`` is capped at 64.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import numpy as np

MAX_ISSUES = 64


class Dynamics(str, enum.Enum):
    DEFFUANT = "deffuant"
    AXELROD = "axelrod"


class InitKind(str, enum.Enum):
    UNIFORM = "uniform"
    BIASED = "biased"


class Boundary(str, enum.Enum):
    PERIODIC = "ring"
    FREE_INTERVAL = "interval"


@dataclass(frozen=True)
class ModelParams:
    """Number of issues ``F``, confidence threshold ``theta`` and rate family."""

    F: int
    theta: int
    dynamics: Dynamics = Dynamics.DEFFUANT

    def __post_init__(self):
        if not isinstance(self.F, (int, np.integer)) or not 1 <= self.F <= MAX_ISSUES:
            raise ValueError(f"F must be an integer in [1, {MAX_ISSUES}], got {self.F!r}")
        if not isinstance(self.theta, (int, np.integer)) or not 0 <= self.theta <= self.F:
            raise ValueError(f"theta must be an integer in [0, F={self.F}], got {self.theta!r}")
        object.__setattr__(self, "F", int(self.F))
        object.__setattr__(self, "theta", int(self.theta))
        object.__setattr__(self, "dynamics", Dynamics(self.dynamics))

    @property
    def mask(self) -> int:
        return (1 << self.F) - 1

    @property
    def frozen_above(self) -> int:
        """Largest pile size whose particles still move.

        Deffuant piles freeze above ``theta``; Axelrod piles freeze only at ``F``.
        """
        if self.dynamics is Dynamics.AXELROD:
            return self.F - 1
        return self.theta


@dataclass(frozen=True)
class InitSpec:
    kind: InitKind = InitKind.UNIFORM
    rho: Fraction = field(default=Fraction(0))

    def __post_init__(self):
        object.__setattr__(self, "kind", InitKind(self.kind))
        object.__setattr__(self, "rho", Fraction(self.rho))
        if self.rho < 0:
            raise ValueError(f"rho must be nonnegative, got {self.rho}")

    @classmethod
    def uniform(cls) -> "InitSpec":
        return cls(InitKind.UNIFORM)

    @classmethod
    def biased(cls, rho) -> "InitSpec":
        return cls(InitKind.BIASED, Fraction(rho))

    def validate(self, F: int) -> None:
        if self.kind is InitKind.BIASED and not self.rho < Fraction(1, 2**F):
            raise ValueError(f"biased measure needs 0 <= rho < 2^-F = 1/{2**F}, got rho = {self.rho}")

    def polar_mass(self, F: int) -> Fraction:
        """Probability of each of the two designated profiles (all zeros, all ones)."""
        self.validate(F)
        if self.kind is InitKind.UNIFORM:
            return Fraction(1, 2**F)
        return Fraction(1, 2) - (2 ** (F - 1) - 1) * self.rho

    def profile_probability(self, F: int, u: int) -> Fraction:
        if self.kind is InitKind.UNIFORM:
            return Fraction(1, 2**F)
        if u in (0, (1 << F) - 1):
            return self.polar_mass(F)
        return self.rho


@dataclass(frozen=True)
class LatticeSpec:
    sites: int
    boundary: Boundary = Boundary.PERIODIC

    def __post_init__(self):
        if int(self.sites) < 3:
            raise ValueError(f"need at least 3 sites, got {self.sites}")
        object.__setattr__(self, "sites", int(self.sites))
        object.__setattr__(self, "boundary", Boundary(self.boundary))

    @property
    def ring(self) -> bool:
        return self.boundary is Boundary.PERIODIC

    @property
    def edges(self) -> int:
        # edge e joins sites e and e + 1 (mod L on the ring)
        return self.sites if self.ring else self.sites - 1


def hamming(u: int, v: int) -> int:
    return (int(u) ^ int(v)).bit_count()


def popcount64(a: np.ndarray) -> np.ndarray:
    """Vectorized popcount for ``uint64`` arrays."""
    a = np.asarray(a, dtype=np.uint64)
    if hasattr(np, "bitwise_count"):
        return np.bitwise_count(a).astype(np.int64)
    bytes_ = a.view(np.uint8).reshape(a.shape + (8,))
    return np.unpackbits(bytes_, axis=-1).sum(axis=-1).astype(np.int64)


def _uniform_words(F: int, size, rng: np.random.Generator) -> np.ndarray:
    words = rng.integers(0, np.iinfo(np.uint64).max, size=size, dtype=np.uint64, endpoint=True)
    if F < 64:
        words &= np.uint64((1 << F) - 1)
    return words


def sample_configuration(init: InitSpec, F: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` i.i.d. profiles from the initial measure as a ``uint64`` array."""
    init.validate(F)
    if init.kind is InitKind.UNIFORM:
        return _uniform_words(F, n, rng)
    polar = float(init.polar_mass(F))
    full = np.uint64((1 << F) - 1)
    u = rng.random(n)
    out = np.empty(n, dtype=np.uint64)
    out[u < polar] = 0
    out[(u >= polar) & (u < 2 * polar)] = full
    rest = u >= 2 * polar
    k = int(rest.sum())
    if k:
        # uniform over the 2^F - 2 profiles other than all-zeros and all-ones
        out[rest] = rng.integers(1, full, size=k, dtype=np.uint64, endpoint=False)
    return out


def sample_site(init: InitSpec, F: int, rng: np.random.Generator) -> int:
    return int(sample_configuration(init, F, 1, rng)[0])


def pile_pmf_uniform(F: int, j: int) -> Fraction:
    """P(initial pile size = j) under the uniform product measure: Binomial(F, 1/2)."""
    if not 0 <= j <= F:
        raise ValueError(f"pile size j must lie in [0, {F}], got {j}")
    return Fraction(comb(F, j), 2**F)


def pile_pmf_biased(F: int, theta: int, rho, j: int) -> Fraction:
    """P(initial pile size = j) under the two-profile biased measure.

    ``theta`` does not enter the law; it is accepted so the signature matches the
    other per-parameter analytics. The ``j = 0`` mass is the complement of the rest.
    """
    if not 0 <= j <= F:
        raise ValueError(f"pile size j must lie in [0, {F}], got {j}")
    if not 0 <= theta <= F:
        raise ValueError(f"theta must lie in [0, {F}], got {theta}")
    rho = Fraction(rho)
    spec = InitSpec.biased(rho)
    polar = spec.polar_mass(F)
    if j == F:
        return 2 * polar**2 + (2**F - 2) * rho**2
    if j > 0:
        c = comb(F, j)
        return 4 * c * polar * rho + (2**F - 4) * c * rho**2
    return 1 - sum(pile_pmf_biased(F, theta, rho, k) for k in range(1, F + 1))
