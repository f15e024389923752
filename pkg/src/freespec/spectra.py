"""Compactly supported probability measures as immutable expression trees.

A measure is built from three parametric leaves (:class:`Semicircle`,
:class:`MarchenkoPastur`, :class:`Atomic`) and three combinators
(:class:`Dilate`, :class:`Shift`, :class:`FreeConv`).  Everything derived
from a tree (moments, free cumulants, supports, densities) is a pure
function of it.

Moments and free cumulants are linked by summation over non-crossing
partitions.  Enumerating NC(p) explicitly is only practical for small p, so
the production path groups the partitions by the block containing 1, which
gives the recursion

    m_p = sum_{s=1}^{p} kappa_s * [z^{p-s}] M(z)^s,    M(z) = sum_k m_k z^k.

:func:`noncrossing_partitions` keeps the explicit enumeration around as an
independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Optional, Sequence, Union

import numpy as np

MAX_ORDER = 24
WEIGHT_TOL = 1e-12


class OrderOverflowError(ValueError):
    """Requested moment order exceeds :data:`MAX_ORDER`."""


# ---------------------------------------------------------------------------
# Measure tree
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Semicircle:
    """Semicircle law with the given mean and standard deviation."""

    mean: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        object.__setattr__(self, "mean", float(self.mean))
        object.__setattr__(self, "sigma", float(self.sigma))


@dataclass(frozen=True)
class MarchenkoPastur:
    """Free Poisson law; every free cumulant equals ``c``."""

    c: float = 1.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"Marchenko-Pastur parameter must be positive, got {self.c}")
        object.__setattr__(self, "c", float(self.c))

    @property
    def edges(self) -> tuple[float, float]:
        r = math.sqrt(self.c)
        return (1 - r) ** 2, (1 + r) ** 2

    @property
    def zero_mass(self) -> float:
        return max(1.0 - self.c, 0.0)


@dataclass(frozen=True)
class Atomic:
    """Finite combination of point masses.

    ``atoms`` is a sequence of ``(location, weight)`` pairs.  Locations are
    sorted on construction; weights must be positive and sum to one within
    :data:`WEIGHT_TOL`.
    """

    atoms: tuple

    def __post_init__(self):
        pairs = sorted((float(x), float(w)) for x, w in self.atoms)
        if not pairs:
            raise ValueError("Atomic measure needs at least one atom")
        locs = [x for x, _ in pairs]
        if any(b <= a for a, b in zip(locs, locs[1:])):
            raise ValueError("atom locations must be distinct")
        if any(not w > 0 for _, w in pairs):
            raise ValueError("atom weights must be positive")
        total = math.fsum(w for _, w in pairs)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValueError(f"atom weights sum to {total!r}, not 1")
        object.__setattr__(self, "atoms", tuple(pairs))

    @property
    def locations(self) -> np.ndarray:
        return np.array([x for x, _ in self.atoms])

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.atoms])


@dataclass(frozen=True)
class Dilate:
    """Pushforward under ``x -> t*x``; negative ``t`` reflects the measure."""

    t: float
    child: "MeasureExpr"

    def __post_init__(self):
        if self.t == 0 or not math.isfinite(self.t):
            raise ValueError("dilation factor must be finite and nonzero")
        object.__setattr__(self, "t", float(self.t))


@dataclass(frozen=True)
class Shift:
    """Pushforward under ``x -> x + s``."""

    s: float
    child: "MeasureExpr"

    def __post_init__(self):
        object.__setattr__(self, "s", float(self.s))


@dataclass(frozen=True)
class FreeConv:
    """Free additive convolution of ``child ** power`` over ``terms``.

    Powers must be at least one: the free convolution semigroup is not
    defined below that.
    """

    terms: tuple

    def __post_init__(self):
        terms = tuple((child, float(power)) for child, power in self.terms)
        if not terms:
            raise ValueError("FreeConv needs at least one term")
        for _, power in terms:
            if not power >= 1:
                raise ValueError(f"free convolution power must be >= 1, got {power}")
        object.__setattr__(self, "terms", terms)


MeasureExpr = Union[Semicircle, MarchenkoPastur, Atomic, Dilate, Shift, FreeConv]
PARAMETRIC = (Semicircle, MarchenkoPastur, Atomic)


@dataclass(frozen=True)
class MomentSeries:
    values: tuple

    @property
    def order(self) -> int:
        return len(self.values)

    def __getitem__(self, p: int) -> float:
        """1-based access: ``series[p]`` is the order-p value."""
        return self.values[p - 1]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


class CumulantSeries(MomentSeries):
    pass


@dataclass(frozen=True)
class SupportInterval:
    lo: float
    hi: float
    kind: str = "exact"

    def __post_init__(self):
        if self.kind not in ("exact", "outer_bound", "monte_carlo"):
            raise ValueError(f"unknown support kind {self.kind!r}")
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, other: "SupportInterval", tol: float = 0.0) -> bool:
        return self.lo - tol <= other.lo and other.hi <= self.hi + tol


# ---------------------------------------------------------------------------
# Non-crossing partitions and the moment-cumulant formula
# ---------------------------------------------------------------------------


def _is_noncrossing(blocks) -> bool:
    for i, b1 in enumerate(blocks):
        for b2 in blocks[i + 1:]:
            for a, c in zip(b1, b1[1:]):
                inside = [x for x in b2 if a < x < c]
                if inside and len(inside) != len(b2):
                    return False
    return True


def _set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


@lru_cache(maxsize=None)
def noncrossing_partitions(p: int) -> tuple:
    """All non-crossing partitions of ``{1..p}``, as tuples of sorted blocks.

    Brute force over set partitions; intended for small ``p`` (tests and
    cross-checks), not for the moment engine.
    """
    if p > 10:
        raise OrderOverflowError("explicit NC enumeration is limited to p <= 10")
    out = []
    for part in _set_partitions(list(range(1, p + 1))):
        blocks = sorted(tuple(sorted(b)) for b in part)
        if _is_noncrossing(blocks):
            out.append(tuple(blocks))
    return tuple(sorted(out))


def _check_order(P: int) -> None:
    if P < 1:
        raise ValueError("order must be at least 1")
    if P > MAX_ORDER:
        raise OrderOverflowError(f"order {P} exceeds the NC enumeration cap {MAX_ORDER}")


def _block_sums(m: np.ndarray, P: int) -> np.ndarray:
    """``S[s, k] = [z^k] M(z)^s`` for the moment series ``m`` (with m_0 = 1)."""
    M = np.zeros(P + 1)
    M[0] = 1.0
    M[1:len(m) + 1] = m[:P]
    S = np.zeros((P + 1, P + 1))
    S[0, 0] = 1.0
    for s in range(1, P + 1):
        S[s] = np.convolve(S[s - 1], M)[:P + 1]
    return S


def moments_from_cumulants(kappa: Sequence[float]) -> np.ndarray:
    kappa = np.asarray(kappa, dtype=float)
    P = len(kappa)
    _check_order(P)
    m = np.zeros(P)
    for p in range(1, P + 1):
        S = _block_sums(m[:p - 1], p)
        m[p - 1] = sum(kappa[s - 1] * S[s, p - s] for s in range(1, p + 1))
    return m


def cumulants_from_moments(m: Sequence[float]) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    P = len(m)
    _check_order(P)
    kappa = np.zeros(P)
    for p in range(1, P + 1):
        S = _block_sums(m[:p - 1], p)
        lower = sum(kappa[s - 1] * S[s, p - s] for s in range(1, p))
        kappa[p - 1] = m[p - 1] - lower
    return kappa


def _cumulant_array(mu: MeasureExpr, P: int) -> np.ndarray:
    p = np.arange(1, P + 1)
    if isinstance(mu, Semicircle):
        k = np.zeros(P)
        k[0] = mu.mean
        if P > 1:
            k[1] = mu.sigma ** 2
        return k
    if isinstance(mu, MarchenkoPastur):
        return np.full(P, mu.c)
    if isinstance(mu, Atomic):
        x, w = mu.locations, mu.weights
        m = np.array([np.dot(w, x ** q) for q in p])
        return cumulants_from_moments(m)
    if isinstance(mu, Dilate):
        return mu.t ** p * _cumulant_array(mu.child, P)
    if isinstance(mu, Shift):
        k = _cumulant_array(mu.child, P).copy()
        k[0] += mu.s
        return k
    if isinstance(mu, FreeConv):
        return sum(power * _cumulant_array(child, P) for child, power in mu.terms)
    raise TypeError(f"not a measure expression: {mu!r}")


def cumulants(mu: MeasureExpr, P: int) -> CumulantSeries:
    """Free cumulants kappa_1..kappa_P."""
    _check_order(P)
    return CumulantSeries(tuple(float(v) for v in _cumulant_array(mu, P)))


def moments(mu: MeasureExpr, P: int) -> MomentSeries:
    """Moments m_1..m_P, summed from the free cumulants over NC(p)."""
    _check_order(P)
    m = moments_from_cumulants(_cumulant_array(mu, P))
    return MomentSeries(tuple(float(v) for v in m))


def mean_var(mu: MeasureExpr) -> tuple[float, float]:
    k = _cumulant_array(mu, 2)
    return float(k[0]), float(k[1])


# ---------------------------------------------------------------------------
# Supports, densities, atoms of the parametric families
# ---------------------------------------------------------------------------


def exact_support(mu: MeasureExpr) -> Optional[SupportInterval]:
    """Closed-form support hull, or ``None`` when ``mu`` involves a FreeConv."""
    if isinstance(mu, Semicircle):
        return SupportInterval(mu.mean - 2 * mu.sigma, mu.mean + 2 * mu.sigma)
    if isinstance(mu, MarchenkoPastur):
        a, b = mu.edges
        return SupportInterval(0.0 if mu.c < 1 else a, b)
    if isinstance(mu, Atomic):
        return SupportInterval(mu.atoms[0][0], mu.atoms[-1][0])
    if isinstance(mu, Dilate):
        inner = exact_support(mu.child)
        if inner is None:
            return None
        lo, hi = sorted((mu.t * inner.lo, mu.t * inner.hi))
        return SupportInterval(lo, hi)
    if isinstance(mu, Shift):
        inner = exact_support(mu.child)
        if inner is None:
            return None
        return SupportInterval(inner.lo + mu.s, inner.hi + mu.s)
    if isinstance(mu, FreeConv):
        if len(mu.terms) == 1 and mu.terms[0][1] == 1:
            return exact_support(mu.terms[0][0])
        return None
    raise TypeError(f"not a measure expression: {mu!r}")


def atoms(mu: MeasureExpr) -> list[tuple[float, float]]:
    """Point masses of ``mu`` as ``(location, mass)`` pairs.

    For free convolutions the atom at ``sum_i T_i a_i`` survives with mass
    ``sum_i T_i w_i - (sum_i T_i - 1)`` when that is positive.
    """
    if isinstance(mu, Semicircle):
        return [(mu.mean, 1.0)] if mu.sigma == 0 else []
    if isinstance(mu, MarchenkoPastur):
        return [(0.0, mu.zero_mass)] if mu.c < 1 else []
    if isinstance(mu, Atomic):
        return list(mu.atoms)
    if isinstance(mu, Dilate):
        return sorted((mu.t * x, w) for x, w in atoms(mu.child))
    if isinstance(mu, Shift):
        return [(x + mu.s, w) for x, w in atoms(mu.child)]
    if isinstance(mu, FreeConv):
        combos = [(0.0, 0.0)]
        for child, T in mu.terms:
            cands = [(T * x, T * w - (T - 1)) for x, w in atoms(child)]
            cands = [(x, w) for x, w in cands if w > 0]
            combos = [(x0 + x, w0 + w) for x0, w0 in combos for x, w in cands]
        k = len(mu.terms)
        merged: dict[float, float] = {}
        for x, w in combos:
            mass = w - (k - 1)
            if mass > 1e-14:
                merged[x] = merged.get(x, 0.0) + mass
        return sorted(merged.items())
    raise TypeError(f"not a measure expression: {mu!r}")


def _parametric_density(mu: MeasureExpr, x: np.ndarray) -> Optional[np.ndarray]:
    if isinstance(mu, Semicircle):
        if mu.sigma == 0:
            return np.zeros_like(x)
        s2 = mu.sigma ** 2
        return np.sqrt(np.clip(4 * s2 - (x - mu.mean) ** 2, 0, None)) / (2 * np.pi * s2)
    if isinstance(mu, MarchenkoPastur):
        a, b = mu.edges
        out = np.zeros_like(x)
        inside = (x > a) & (x < b)
        xi = x[inside]
        out[inside] = np.sqrt((b - xi) * (xi - a)) / (2 * np.pi * xi)
        return out
    if isinstance(mu, Atomic):
        return np.zeros_like(x)
    if isinstance(mu, Dilate):
        inner = _parametric_density(mu.child, x / mu.t)
        return None if inner is None else inner / abs(mu.t)
    if isinstance(mu, Shift):
        return _parametric_density(mu.child, x - mu.s)
    return None


@dataclass(frozen=True)
class Density:
    """Absolutely continuous part on a grid plus the atoms, kept apart."""

    x: np.ndarray
    pdf: np.ndarray
    atoms: tuple = ()
    flagged: tuple = ()

    def rows(self) -> list[tuple[float, float]]:
        return list(zip(self.x.tolist(), self.pdf.tolist()))


def density_grid(mu: MeasureExpr, grid) -> Density:
    """Density of the continuous part of ``mu`` on a sorted grid.

    Closed forms are used for the parametric families and their dilations
    and shifts; anything containing a free convolution goes through
    Stieltjes inversion in :func:`freespec.freeconv.density`.
    """
    x = np.asarray(grid, dtype=float)
    if np.any(np.diff(x) < 0):
        raise ValueError("grid must be sorted")
    pdf = _parametric_density(mu, x)
    if pdf is None:
        from .freeconv import density

        return density(mu, 1.0, x)
    return Density(x, pdf, tuple(atoms(mu)))


# ---------------------------------------------------------------------------
# Quantiles (used by the random matrix samplers)
# ---------------------------------------------------------------------------


def _continuous_quantile(pdf_on, a: float, b: float, u: np.ndarray, n: int = 1 << 14):
    """Invert the CDF of a density on [a, b] with square-root edges.

    Integrates in ``theta`` with ``x = (a+b)/2 - (b-a)/2 cos(theta)``, which
    turns the edge singularities into smooth integrands.
    """
    theta = np.linspace(0.0, np.pi, n + 1)
    xs = 0.5 * (a + b) - 0.5 * (b - a) * np.cos(theta)
    integrand = pdf_on(xs) * 0.5 * (b - a) * np.sin(theta)
    h = theta[1] - theta[0]
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * h * (integrand[1:] + integrand[:-1]))])
    cdf /= cdf[-1]
    return np.interp(u, cdf, xs)


def quantile(mu: MeasureExpr, u) -> np.ndarray:
    """Quantile function F^{-1}(u) for parametric measures and their pushforwards."""
    u = np.asarray(u, dtype=float)
    if isinstance(mu, Semicircle):
        if mu.sigma == 0:
            return np.full_like(u, mu.mean)
        # CDF of the standard law in the angle variable: (theta - sin cos)/pi
        from scipy.optimize import brentq

        def one(v):
            return brentq(lambda th: (th - np.sin(th) * np.cos(th)) / np.pi - v, 0.0, np.pi, xtol=1e-15)

        theta = np.array([one(v) for v in np.ravel(u)]).reshape(u.shape)
        return mu.mean - 2 * mu.sigma * np.cos(theta)
    if isinstance(mu, MarchenkoPastur):
        a, b = mu.edges
        p0 = mu.zero_mass
        out = np.zeros_like(u)
        cont = u > p0
        v = (u[cont] - p0) / (1 - p0)
        out[cont] = _continuous_quantile(lambda x: _parametric_density(mu, x), a, b, v)
        return out
    if isinstance(mu, Atomic):
        cdf = np.cumsum(mu.weights)
        idx = np.searchsorted(cdf, u - 1e-15, side="left")
        return mu.locations[np.clip(idx, 0, len(cdf) - 1)]
    if isinstance(mu, Dilate):
        if mu.t > 0:
            return mu.t * quantile(mu.child, u)
        return mu.t * quantile(mu.child, 1.0 - u)
    if isinstance(mu, Shift):
        return quantile(mu.child, u) + mu.s
    raise ValueError("quantile unavailable for free convolutions; realize them as sums of rotated samples")


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------


def from_json(obj: dict) -> MeasureExpr:
    kind = obj.get("type")
    if kind == "semicircle":
        return Semicircle(obj.get("mean", 0.0), obj.get("sigma", 1.0))
    if kind == "marchenko_pastur":
        return MarchenkoPastur(obj["c"])
    if kind == "atomic":
        return Atomic(tuple((x, w) for x, w in obj["atoms"]))
    if kind == "dilate":
        return Dilate(obj["t"], from_json(obj["of"]))
    if kind == "shift":
        return Shift(obj["s"], from_json(obj["of"]))
    if kind == "free_conv":
        return FreeConv(tuple((from_json(t["of"]), t.get("power", 1.0)) for t in obj["terms"]))
    raise ValueError(f"unknown measure type {kind!r}")


def to_json(mu: MeasureExpr) -> dict:
    if isinstance(mu, Semicircle):
        return {"type": "semicircle", "mean": mu.mean, "sigma": mu.sigma}
    if isinstance(mu, MarchenkoPastur):
        return {"type": "marchenko_pastur", "c": mu.c}
    if isinstance(mu, Atomic):
        return {"type": "atomic", "atoms": [[x, w] for x, w in mu.atoms]}
    if isinstance(mu, Dilate):
        return {"type": "dilate", "t": mu.t, "of": to_json(mu.child)}
    if isinstance(mu, Shift):
        return {"type": "shift", "s": mu.s, "of": to_json(mu.child)}
    if isinstance(mu, FreeConv):
        return {"type": "free_conv", "terms": [{"of": to_json(c), "power": p} for c, p in mu.terms]}
    raise TypeError(f"not a measure expression: {mu!r}")


def walk(mu: MeasureExpr) -> Iterator[MeasureExpr]:
    yield mu
    if isinstance(mu, (Dilate, Shift)):
        yield from walk(mu.child)
    elif isinstance(mu, FreeConv):
        for child, _ in mu.terms:
            yield from walk(child)
