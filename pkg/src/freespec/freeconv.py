"""Free additive convolution powers: closed forms, support edges, densities.

Any measure tree reduces to a sum of R-transforms of its parametric leaves,

    R_nu(w) = sum_j T_j s_j R_{b_j}(s_j w) + c0,

where leaf ``b_j`` was dilated by ``s_j`` and raised to the free power
``T_j``.  The support hull of ``nu`` is read off the functional inverse of
its Cauchy transform, ``K_nu(w) = R_nu(w) + 1/w``: on the positive real
branch ``K_nu`` decreases from ``+inf`` at ``w = 0+`` until the first
critical point (a soft edge) or the end of the branch (a hard edge), and
the value there is ``maxsupp nu``.  The negative branch gives ``minsupp``.

Densities come from the subordination fixed point: for each component a
point ``omega_j`` with ``F_j(omega_j) = F_nu(z)`` (``F = 1/G``), solved at
``z = x + i eps`` along a decreasing ``eps`` ladder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .spectra import (
    Atomic,
    Density,
    Dilate,
    FreeConv,
    MarchenkoPastur,
    MeasureExpr,
    Semicircle,
    Shift,
    SupportInterval,
    atoms,
    exact_support,
    mean_var,
)

SCAN_POINTS = 512


class NonInvertibleBranchError(RuntimeError):
    """Numerical inversion of a Cauchy transform failed to bracket a root."""


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------


def free_power(mu: MeasureExpr, T: float) -> MeasureExpr:
    """``mu`` raised to the free convolution power ``T >= 1``.

    Semicircle and Marchenko-Pastur laws stay in their family; dilations and
    shifts commute with the power.  Anything else becomes a FreeConv node.
    """
    T = float(T)
    if not T >= 1:
        raise ValueError(f"free convolution semigroup is undefined below 1 (T={T})")
    if T == 1:
        return mu
    if isinstance(mu, Semicircle):
        return Semicircle(mu.mean * T, mu.sigma * math.sqrt(T))
    if isinstance(mu, MarchenkoPastur):
        return MarchenkoPastur(mu.c * T)
    if isinstance(mu, Atomic) and len(mu.atoms) == 1:
        return Atomic(((mu.atoms[0][0] * T, 1.0),))
    if isinstance(mu, Dilate):
        return Dilate(mu.t, free_power(mu.child, T))
    if isinstance(mu, Shift):
        return Shift(mu.s * T, free_power(mu.child, T))
    if isinstance(mu, FreeConv):
        return FreeConv(tuple((c, p * T) for c, p in mu.terms))
    return FreeConv(((mu, T),))


def atom_persistence(mu: Atomic, T: float) -> list[tuple[float, float]]:
    """Atoms of ``mu ** T``: location ``T a`` keeps mass ``T w - (T - 1)`` if positive."""
    if not T >= 1:
        raise ValueError("T must be >= 1")
    out = []
    for x, w in mu.atoms:
        mass = T * w - (T - 1)
        if mass > 0:
            out.append((T * x, mass))
    return out


def support_bound(mu: MeasureExpr, T: float, base: SupportInterval | None = None) -> SupportInterval:
    """Outer bound on the support of ``mu ** T`` from the mean, variance and support of ``mu``.

    ``[A + m(T-1) - 2 s sqrt(T-1),  B + m(T-1) + 2 s sqrt(T-1)]``
    """
    if not T >= 1:
        raise ValueError("T must be >= 1")
    if base is None:
        base = support(mu)
    m, var = mean_var(mu)
    sig = math.sqrt(max(var, 0.0))
    spread = 2 * sig * math.sqrt(T - 1)
    return SupportInterval(base.lo + m * (T - 1) - spread, base.hi + m * (T - 1) + spread, "outer_bound")


# ---------------------------------------------------------------------------
# R-transform linearization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Component:
    base: MeasureExpr  # Semicircle, MarchenkoPastur or Atomic
    power: float
    scale: float


def _linearize(mu: MeasureExpr):
    # point masses only shift the sum
    if isinstance(mu, Atomic) and len(mu.atoms) == 1:
        return [], mu.atoms[0][0]
    if isinstance(mu, Semicircle) and mu.sigma == 0:
        return [], mu.mean
    if isinstance(mu, (Semicircle, MarchenkoPastur, Atomic)):
        return [_Component(mu, 1.0, 1.0)], 0.0
    if isinstance(mu, Dilate):
        comps, c0 = _linearize(mu.child)
        return [_Component(c.base, c.power, c.scale * mu.t) for c in comps], c0 * mu.t
    if isinstance(mu, Shift):
        comps, c0 = _linearize(mu.child)
        return comps, c0 + mu.s
    if isinstance(mu, FreeConv):
        comps, c0 = [], 0.0
        for child, power in mu.terms:
            sub, s0 = _linearize(child)
            comps += [_Component(c.base, c.power * power, c.scale) for c in sub]
            c0 += power * s0
        return comps, c0
    raise TypeError(f"not a measure expression: {mu!r}")


def _base_domain(b) -> tuple[float, float]:
    """Open interval of ``w`` on which ``R_b`` is the inverse-Cauchy branch."""
    if isinstance(b, Semicircle):
        if b.sigma == 0:
            return -math.inf, math.inf
        return -1.0 / b.sigma, 1.0 / b.sigma
    if isinstance(b, MarchenkoPastur):
        r = math.sqrt(b.c)
        lo = -1.0 / (r - 1) if r > 1 else -math.inf
        return lo, 1.0 / (1 + r)
    if isinstance(b, Atomic):
        return -math.inf, math.inf
    raise TypeError(b)


def _base_limit(b, sign: int) -> float:
    """``lim R_b(w)`` as ``w -> sign * inf`` (only on unbounded branches)."""
    if isinstance(b, Semicircle):
        return b.mean
    if isinstance(b, MarchenkoPastur):
        return 0.0
    if isinstance(b, Atomic):
        return b.atoms[-1][0] if sign > 0 else b.atoms[0][0]
    raise TypeError(b)


def _atomic_K_positive(x: np.ndarray, wt: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Solve ``sum wt / (K - x) = w`` for ``K > max x`` (``w > 0``).

    Written in ``delta = K - max x``; the map is convex and decreasing in
    ``delta`` so Newton from a lower bound increases monotonically.
    """
    B, A = x[-1], x[0]
    d = B - x
    w = np.asarray(w, dtype=float)
    delta = np.maximum(wt[-1] / w, 1.0 / w - (B - A))
    for _ in range(200):
        q = 1.0 / (delta[..., None] + d)
        f = q @ wt - w
        fp = -(q * q) @ wt
        step = f / fp
        delta = delta - step
        if np.all(np.abs(step) <= 4e-16 * np.abs(delta)):
            break
    else:
        if not np.all(np.abs(step) <= 1e-10 * np.abs(delta)):
            raise NonInvertibleBranchError("Cauchy transform inversion did not converge")
    return B + delta


def _base_R(b, w: np.ndarray) -> np.ndarray:
    if isinstance(b, Semicircle):
        return b.mean + b.sigma ** 2 * w
    if isinstance(b, MarchenkoPastur):
        return b.c / (1.0 - w)
    if isinstance(b, Atomic):
        x, wt = b.locations, b.weights
        out = np.empty_like(w)
        pos = w > 0
        if np.any(pos):
            out[pos] = _atomic_K_positive(x, wt, w[pos]) - 1.0 / w[pos]
        neg = ~pos
        if np.any(neg):
            k = _atomic_K_positive(-x[::-1], wt[::-1], -w[neg])
            out[neg] = -k - 1.0 / w[neg]
        return out
    raise TypeError(b)


class _RSum:
    """``K_nu`` assembled from linearized components."""

    def __init__(self, mu: MeasureExpr):
        self.comps, self.const = _linearize(mu)
        m, var = mean_var(mu)
        width = 0.0
        for c in self.comps:
            sup = exact_support(c.base)
            width += c.power * abs(c.scale) * sup.width
        self.scale = math.sqrt(max(var, 0.0)) + width + 1e-300
        self.mean = m

    def K(self, w) -> np.ndarray:
        w = np.atleast_1d(np.asarray(w, dtype=float))
        total = np.full_like(w, self.const) + 1.0 / w
        for c in self.comps:
            total += c.power * c.scale * _base_R(c.base, c.scale * w)
        return total

    def branch_end(self, sign: int) -> float:
        """Largest ``u > 0`` such that ``sign * u`` is inside every component branch."""
        end = math.inf
        for c in self.comps:
            lo, hi = _base_domain(c.base)
            bound = (hi if c.scale * sign > 0 else lo) / c.scale * sign
            end = min(end, bound)
        return end

    def limit(self, sign: int) -> float:
        total = self.const
        for c in self.comps:
            total += c.power * c.scale * _base_limit(c.base, 1 if c.scale * sign > 0 else -1)
        return total


def _first_minimum(f, u_end: float, limit: float, scale: float, points: int):
    """First local minimum of ``f`` on ``(0, u_end)`` scanning up from ``0+``.

    Returns ``(value, kind)`` with kind ``"critical"``, ``"branch_end"`` or
    ``"limit"``.
    """
    finite = math.isfinite(u_end)
    u_hi = u_end if finite else 1e10 / scale
    u_lo = min(1e-6 / scale, u_hi * 1e-9)
    for _ in range(20):
        u = np.geomspace(u_lo, u_hi, points)
        vals = f(u)
        if vals[1] < vals[0]:
            break
        u_lo *= 1e-3
    noise = 1e-13 * (np.abs(vals) + scale)
    rising = np.nonzero(vals[1:] > vals[:-1] + noise[:-1])[0]
    if rising.size:
        i = max(int(rising[0]), 1)
        res = minimize_scalar(
            lambda t: float(f(np.array([t]))[0]),
            bracket=(u[i - 1], u[i], u[i + 1]),
            method="golden",
            options={"xtol": 1e-11},
        )
        return min(float(res.fun), float(vals[i])), "critical"
    if finite:
        return float(vals[-1]), "branch_end"
    return min(float(vals[-1]), limit), "limit"


def support(mu: MeasureExpr, points: int = SCAN_POINTS) -> SupportInterval:
    """Support hull of any measure tree.

    Closed forms when available, otherwise the inverse-Cauchy edge search.
    """
    ex = exact_support(mu)
    if ex is not None:
        return ex
    rs = _RSum(mu)
    if not rs.comps:
        return SupportInterval(rs.const, rs.const, "exact")
    hi, _ = _first_minimum(rs.K, rs.branch_end(+1), rs.limit(+1), rs.scale, points)
    neg, _ = _first_minimum(lambda u: -rs.K(-u), rs.branch_end(-1), -rs.limit(-1), rs.scale, points)
    lo = -neg
    if lo > hi:
        # point mass reached through a branch limit on both sides
        lo = hi = 0.5 * (lo + hi)
    return SupportInterval(lo, hi, "exact")


def support_edges(mu: MeasureExpr, T: float, points: int = SCAN_POINTS) -> SupportInterval:
    """Support hull ``[minsupp, maxsupp]`` of ``mu ** T``."""
    return support(free_power(mu, T), points)


# ---------------------------------------------------------------------------
# Densities by subordination
# ---------------------------------------------------------------------------


def _cauchy(b, z):
    """Cauchy transform of a parametric leaf and its derivative."""
    if isinstance(b, Semicircle):
        if b.sigma == 0:
            G = 1.0 / (z - b.mean)
            return G, -G * G
        s2 = b.sigma ** 2
        u = z - b.mean
        root = np.sqrt(u - 2 * b.sigma) * np.sqrt(u + 2 * b.sigma)
        G = (u - root) / (2 * s2)
        return G, G / (2 * s2 * G - u)
    if isinstance(b, MarchenkoPastur):
        lo, hi = b.edges
        root = np.sqrt(z - lo) * np.sqrt(z - hi)
        G = (z + 1 - b.c - root) / (2 * z)
        return G, (G - G * G) / (2 * z * G - (z + 1 - b.c))
    if isinstance(b, Atomic):
        q = 1.0 / (z[..., None] - b.locations)
        return q @ b.weights, -(q * q) @ b.weights
    raise TypeError(b)


def _component_F(c: _Component, z):
    G, dG = _cauchy(c.base, z / c.scale)
    G = G / c.scale
    dG = dG / c.scale ** 2
    F = 1.0 / G
    return F, -dG * F * F


def _subordination(comps, z, omega, max_iter: int, tol: float = 1e-13):
    """Solve the subordination system at complex points ``z`` (1-d array).

    ``omega`` has shape ``(k, N)`` and is updated from a warm start.  Each
    sweep tries a Newton step per point and falls back to the fixed-point
    map where Newton leaves the upper half-plane or fails to improve.
    """
    k = len(comps)
    T = np.array([c.power for c in comps])[:, None]

    def residual(om):
        F = np.empty_like(om)
        dF = np.empty_like(om)
        for i, c in enumerate(comps):
            F[i], dF[i] = _component_F(c, om[i])
        h = F - om
        Th = (T * h).sum(axis=0)
        E = z + (T - 1) * F + (Th - T * h) - T * om
        return E, F, dF

    done = np.zeros(z.shape, dtype=bool)
    E, F, dF = residual(omega)
    for _ in range(max_iter):
        err = np.abs(E).max(axis=0) / (1 + np.abs(omega).max(axis=0))
        done = err < tol
        if done.all():
            break
        # fixed-point proposal
        h = F - omega
        Th = (T * h).sum(axis=0)
        fp = z / T + (1 - 1 / T) * F + (Th - T * h) / T
        # Newton proposal
        J = np.empty((z.size, k, k), dtype=complex)
        for j in range(k):
            J[:, :, j] = (T[j, 0] * (dF[j] - 1))[:, None]
        for i in range(k):
            J[:, i, i] = (T[i, 0] - 1) * dF[i] - T[i, 0]
        try:
            step = np.linalg.solve(J, -E.T[..., None])[..., 0].T
        except np.linalg.LinAlgError:
            step = np.full_like(omega, np.nan)
        newton = omega + step
        ok = np.isfinite(newton).all(axis=0) & (newton.imag > 0).all(axis=0)
        cand = np.where(ok, newton, fp)
        E2, F2, dF2 = residual(cand)
        worse = np.abs(E2).max(axis=0) > np.abs(E).max(axis=0)
        cand = np.where(worse & ok, fp, cand)
        if np.any(worse & ok):
            E2, F2, dF2 = residual(cand)
        omega = np.where(done, omega, cand)
        E = np.where(done, E, E2)
        F = np.where(done, F, F2)
        dF = np.where(done, dF, dF2)
    err = np.abs(E).max(axis=0) / (1 + np.abs(omega).max(axis=0))
    return omega, F, err < 1e-9


def cauchy_transform(mu: MeasureExpr, z, max_iter: int = 10_000):
    """``G_mu(z)`` for ``Im z > 0``, with a convergence mask."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    comps, c0 = _linearize(mu)
    zz = z - c0
    if not comps:
        return 1.0 / zz, np.ones(z.shape, dtype=bool)
    omega = np.tile(zz, (len(comps), 1))
    # continuation from far above the axis
    lift = np.linspace(1.0, 0.0, 6) ** 2
    rs = _RSum(mu)
    for frac in lift:
        target = zz + 1j * frac * 10 * rs.scale
        omega, F, ok = _subordination(comps, target, omega, max_iter)
    return 1.0 / F[0], ok


def density(mu: MeasureExpr, T: float, grid, eps_ladder=(1e-2, 1e-3, 1e-4), max_iter: int = 10_000) -> Density:
    """Density of the continuous part of ``mu ** T`` by Stieltjes inversion.

    ``-Im G(x + i eps) / pi`` is computed along ``eps_ladder`` (relative to
    the measure's scale) with warm starts, then extrapolated linearly to
    ``eps = 0`` from the last two rungs.  Atoms are removed from ``G``
    before inversion and reported separately.  Points whose fixed point did
    not converge are flagged and filled by interpolation from neighbours.
    """
    nu = free_power(mu, T)
    x = np.asarray(grid, dtype=float)
    at = tuple(atoms(nu))
    comps, c0 = _linearize(nu)
    if not comps:
        return Density(x, np.zeros_like(x), ((c0, 1.0),), ())
    rs = _RSum(nu)
    scale = rs.scale
    zx = x - c0

    omega = np.tile(zx + 10j * scale, (len(comps), 1))
    start = [10.0, 1.0, 0.3, 0.1, 0.03]
    rungs = [e for e in start if e > eps_ladder[0]] + list(eps_ladder)
    estimates = []
    ok = np.ones(x.shape, dtype=bool)
    for eps in rungs:
        z = zx + 1j * eps * scale
        omega, F, conv = _subordination(comps, z, omega, max_iter)
        if eps in eps_ladder:
            G = 1.0 / F[0]
            for a, m in at:
                G = G - m / (x + 1j * eps * scale - a)
            estimates.append((eps * scale, -G.imag / np.pi))
            ok &= conv
    (e1, r1), (e2, r2) = estimates[-2], estimates[-1]
    pdf = (e1 * r2 - e2 * r1) / (e1 - e2)
    pdf = np.clip(pdf, 0.0, None)
    flagged = tuple(np.nonzero(~ok)[0].tolist())
    if flagged and ok.any():
        pdf[~ok] = np.interp(x[~ok], x[ok], pdf[ok])
    return Density(x, pdf, at, flagged)
