"""Exact rational weight functions, expectations, folded bounds and phase regions.

Everything here returns :class:`fractions.Fraction` (or exact integer
coefficients) so that identities can be asserted with ``==``.
"""
from __future__ import annotations

import decimal
import enum
from dataclasses import dataclass
from fractions import Fraction
from math import comb

import mpmath

from .opinions import InitSpec, pile_pmf_uniform


class FoldVariant(str, enum.Enum):
    SHARP = "sharp"
    WEAK = "weak"


class PhaseRegion(str, enum.Enum):
    VOTER_REDUCTION = "VoterReduction"
    CLUSTERING_PROVED = "ClusteringProved"
    COEXISTENCE_PROVED_UNIFORM = "CoexistenceProvedUniform"
    COEXISTENCE_PROVED_BIASED_ONLY = "CoexistenceProvedBiasedOnly"
    OPEN = "Open"


def _check(F: int, theta: int) -> None:
    if not 1 <= F:
        raise ValueError(f"F must be >= 1, got {F}")
    if not 0 <= theta <= F:
        raise ValueError(f"theta must lie in [0, F], got theta={theta}, F={F}")


@dataclass(frozen=True)
class WeightLaw:
    """Law of the edge weight given the initial pile size.

    ``laws[j]`` is a tuple of ``(value, probability)`` pairs with positive
    probabilities summing to one.
    """

    F: int
    theta: int
    laws: dict

    def __getitem__(self, j: int):
        return self.laws[j]

    def mean(self, j: int) -> Fraction:
        return sum((v * p for v, p in self.laws[j]), Fraction(0))

    def cdf(self, j: int, x) -> Fraction:
        return sum((p for v, p in self.laws[j] if v <= x), Fraction(0))

    def support(self, j: int) -> list[int]:
        return [v for v, _ in self.laws[j]]


def weight_law(F: int, theta: int) -> WeightLaw:
    """Stochastic lower bound for an edge's contribution, per initial pile size.

    Live piles (``j <= theta``) weigh ``-j``. A blockade weighs ``j - 2 theta``
    when the first particle to reach it annihilates (probability ``j/F``) and
    ``j - 2 theta + 2`` when it freezes there instead.
    """
    _check(F, theta)
    laws = {}
    for j in range(F + 1):
        if j <= theta:
            laws[j] = ((-j, Fraction(1)),)
            continue
        annihilate = Fraction(j, F)
        entries = [(j - 2 * theta, annihilate), (j - 2 * theta + 2, 1 - annihilate)]
        laws[j] = tuple((v, p) for v, p in entries if p > 0)
    return WeightLaw(F, theta, laws)


def expected_weight_uniform(F: int, theta: int) -> Fraction:
    _check(F, theta)
    total = Fraction(0)
    for j in range(F + 1):
        p = pile_pmf_uniform(F, j)
        if j <= theta:
            total += -j * p
        else:
            total += (j + 2 * (1 - Fraction(j, F) - theta)) * p
    return total


def fold_limits(F: int) -> tuple[int, int]:
    """``(K_minus, K_plus)``: floor((F - 1)/2) and ceil((F + 1)/2)."""
    k_minus = (F - 1) // 2
    return k_minus, F - k_minus


def fold_is_valid(F: int, theta: int) -> bool:
    """Whether folding the binomial weights about F/2 yields a lower bound.

    The fold pairs ``j`` with ``F - j``, which needs ``F > 2 theta`` so the live
    range and its mirror do not overlap. For even ``F`` the unpaired middle
    term ``(F/2 - 2 theta + 1) p_{F/2}`` is dropped, which is only a lower bound
    when that coefficient is nonnegative, i.e. ``F >= 4 theta - 2``.
    """
    _check(F, theta)
    if F <= 2 * theta:
        return False
    return F % 2 == 1 or F >= 4 * theta - 2


def folded_bound(F: int, theta: int, variant: FoldVariant = FoldVariant.SHARP) -> Fraction:
    """Folded lower bound for :func:`expected_weight_uniform`.

    Evaluated for every ``(F, theta)``; it is only a bound where
    :func:`fold_is_valid` holds.
    """
    _check(F, theta)
    variant = FoldVariant(variant)
    k_minus, _ = fold_limits(F)
    total = Fraction(0)
    for j in range(0, min(theta, F) + 1):
        p = pile_pmf_uniform(F, j)
        if variant is FoldVariant.SHARP:
            total += (F - 2 * theta - 2 * (1 - Fraction(1, F)) * j) * p
        else:
            total += (F - 2 * (theta + j)) * p
    for j in range(theta + 1, k_minus + 1):
        total += (F - 4 * theta + 2) * pile_pmf_uniform(F, j)
    return total


@dataclass(frozen=True)
class ThresholdOneMargin:
    neighbour_probability: Fraction
    event_split: tuple
    blockade_formation: Fraction
    margin: Fraction


def threshold_one_breakdown() -> ThresholdOneMargin:
    """Improved weight for the three-issue, threshold-one system.

    A lone active particle can pair up with an active particle at a
    neighbouring edge (different level) and form a 2-blockade before moving.
    """
    F = 3
    p = [pile_pmf_uniform(F, j) for j in range(F + 1)]
    # neighbour edge holds exactly one particle, at one of the other F - 1 levels
    b = p[1] * Fraction(F - 1, F)
    only_left = b * (1 - b)
    only_right = (1 - b) * b
    both = b * b
    # pairing probabilities of the first relevant jump: 1/6 with one neighbour, 2/8 with both
    formation = Fraction(1, 6) * only_left + Fraction(1, 6) * only_right + Fraction(2, 8) * both

    # a lone particle weighs -1 on three edges out of four and 2 X - 1 on the fourth,
    # X ~ Bernoulli(formation); blockades keep X ~ Bernoulli(1 - j/F)
    single = Fraction(-3, 4) + Fraction(1, 4) * (2 * formation - 1)
    pair = 2 * (1 - Fraction(2, F))
    triple = 2 * (1 - Fraction(3, F)) + 1
    margin = single * p[1] + pair * p[2] + triple * p[3]
    return ThresholdOneMargin(b, (only_left, only_right, both), formation, margin)


def threshold_one_margin() -> Fraction:
    return threshold_one_breakdown().margin


def _biased_weight(j: int, theta: int) -> int:
    return -j if j <= theta else j - 2 * theta


def expected_weight_biased(F: int, theta: int, rho) -> Fraction:
    """Expected worst-case weight (no freezing credit) under the biased measure."""
    _check(F, theta)
    rho = Fraction(rho)
    polar = InitSpec.biased(rho).polar_mass(F)
    total = Fraction(0)
    for j in range(F):
        c = comb(F, j)
        total += _biased_weight(j, theta) * (4 * c * polar * rho + (2**F - 4) * c * rho**2)
    total += _biased_weight(F, theta) * (2 * polar**2 + (2**F - 2) * rho**2)
    return total


def _poly_mul(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for k, y in enumerate(b):
            out[i + k] += x * y
    return out


def _poly_add(a, b):
    n = max(len(a), len(b))
    a = list(a) + [Fraction(0)] * (n - len(a))
    b = list(b) + [Fraction(0)] * (n - len(b))
    return [x + y for x, y in zip(a, b)]


def biased_poly(F: int, theta: int) -> tuple[Fraction, Fraction, Fraction]:
    """Coefficients ``(c0, c1, c2)`` of the biased expected weight as a polynomial in rho."""
    _check(F, theta)
    polar = [Fraction(1, 2), Fraction(-(2 ** (F - 1) - 1))]
    rho = [Fraction(0), Fraction(1)]
    rho2 = _poly_mul(rho, rho)
    total = [Fraction(0)] * 3
    for j in range(1, F):
        c = comb(F, j)
        mass = _poly_add(_poly_mul([4 * c], _poly_mul(polar, rho)), _poly_mul([(2**F - 4) * c], rho2))
        total = _poly_add(total, _poly_mul([_biased_weight(j, theta)], mass))
    top = _poly_add(_poly_mul([2], _poly_mul(polar, polar)), _poly_mul([2**F - 2], rho2))
    total = _poly_add(total, _poly_mul([_biased_weight(F, theta)], top))
    total = total + [Fraction(0)] * (3 - len(total))
    return tuple(total[:3])


def biased_positive_threshold(F: int, theta: int):
    """Smallest positive root of :func:`biased_poly`, or ``mpmath.inf`` if none."""
    c0, c1, c2 = biased_poly(F, theta)
    with mpmath.workdps(50):
        if c2 == 0:
            if c1 == 0:
                return mpmath.inf
            root = mpmath.mpf(-c0.numerator * c1.denominator) / (c0.denominator * c1.numerator)
            return root if root > 0 else mpmath.inf
        roots = mpmath.polyroots([mpmath.mpf(c2.numerator) / c2.denominator,
                                  mpmath.mpf(c1.numerator) / c1.denominator,
                                  mpmath.mpf(c0.numerator) / c0.denominator])
        positive = [mpmath.re(r) for r in roots if abs(mpmath.im(r)) < mpmath.mpf(10) ** -40 and mpmath.re(r) > 0]
        return min(positive) if positive else mpmath.inf


def boundary_tail_margin(theta: int, eps=Fraction(13, 54)):
    """Large-deviation lower bound ``1/2 - 2 exp(-eps^2 (4 theta - 1))`` at 50 digits."""
    with mpmath.workdps(50):
        e = mpmath.mpf(eps.numerator) / eps.denominator
        return mpmath.mpf(1) / 2 - 2 * mpmath.exp(-(e**2) * (4 * theta - 1))


def binomial_cdf(F: int, k: int) -> Fraction:
    """Exact P(Binomial(F, 1/2) <= k)."""
    return sum((pile_pmf_uniform(F, j) for j in range(0, min(k, F) + 1)), Fraction(0))


def phase_region(F: int, theta: int) -> PhaseRegion:
    _check(F, theta)
    if F <= theta:
        return PhaseRegion.VOTER_REDUCTION
    if theta == 0:
        # nobody ever interacts: the initial configuration is already fixed
        return PhaseRegion.COEXISTENCE_PROVED_UNIFORM
    if F == theta + 1:
        return PhaseRegion.CLUSTERING_PROVED
    if F >= 4 * theta - 1:
        return PhaseRegion.COEXISTENCE_PROVED_UNIFORM
    if F > 2 * theta:
        return PhaseRegion.COEXISTENCE_PROVED_BIASED_ONLY
    return PhaseRegion.OPEN


def format_fraction(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def format_decimal(x: Fraction) -> str:
    """15 significant digits, locale independent."""
    x = Fraction(x)
    with decimal.localcontext() as ctx:
        ctx.prec = 40
        return format(decimal.Decimal(x.numerator) / decimal.Decimal(x.denominator), ".15g")
