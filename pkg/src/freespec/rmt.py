"""Finite-size random matrix laboratory.

Bipartite matrices live on C^n (x) C^d with the system index major:
row ``i*d + a`` for system index ``i`` and environment index ``a``.  Every
sampler takes a seed (anything :func:`numpy.random.default_rng` accepts)
so Monte Carlo runs are reproducible trial by trial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .freeconv import density, support
from .spectra import FreeConv, MeasureExpr, exact_support, quantile, walk


@dataclass(frozen=True)
class BipartiteMatrix:
    n: int
    d: int
    entries: np.ndarray

    def __post_init__(self):
        N = self.n * self.d
        if self.entries.shape != (N, N):
            raise ValueError(f"expected a {N}x{N} matrix, got {self.entries.shape}")

    @property
    def blocks(self) -> np.ndarray:
        """View with axes ``(i, a, j, b)``."""
        return self.entries.reshape(self.n, self.d, self.n, self.d)

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        X = self.entries
        return bool(np.abs(X - X.conj().T).max() <= tol * max(1.0, np.abs(X).max()))


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def sample_gue(dim: int, seed=None) -> np.ndarray:
    """GUE normalized so the spectrum tends to the standard semicircle."""
    rng = _rng(seed)
    # Z has iid entries with E|z|^2 = 2, so Z + Z* has entry variance 4
    Z = rng.standard_normal((dim, dim, 2)).view(np.complex128)[..., 0]
    G = Z + Z.conj().T
    G *= 0.5 / math.sqrt(dim)
    return G


def haar_unitary(dim: int, seed=None) -> np.ndarray:
    """Haar unitary from the QR decomposition of a complex Ginibre matrix."""
    rng = _rng(seed)
    Z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    Q, R = scipy.linalg.qr(Z, overwrite_a=True, check_finite=False)
    ph = np.diag(R) / np.abs(np.diag(R))
    return Q * ph


def quantile_spectrum(mu: MeasureExpr, dim: int) -> np.ndarray:
    """Deterministic spectrum ``F^{-1}((i - 1/2) / dim)``, ``i = 1..dim``."""
    u = (np.arange(1, dim + 1) - 0.5) / dim
    return quantile(mu, u)


def sample_invariant(mu: MeasureExpr, dim: int, seed=None) -> np.ndarray:
    """``U diag(q) U*`` with Haar ``U`` and the quantile spectrum ``q`` of ``mu``."""
    if any(isinstance(node, FreeConv) for node in walk(mu)):
        raise ValueError(
            "quantiles are unavailable for free convolutions; realize them as sums "
            "of independently rotated samples (see sample_free_sum)"
        )
    q = quantile_spectrum(mu, dim)
    U = haar_unitary(dim, seed)
    X = (U * q) @ U.conj().T
    return 0.5 * (X + X.conj().T)


def sample_free_sum(mu: MeasureExpr, copies: int, dim: int, seed=None) -> np.ndarray:
    """Sum of ``copies`` independently rotated samples; realizes ``mu ** copies``."""
    rng = _rng(seed)
    return sum(sample_invariant(mu, dim, rng) for _ in range(copies))


def sample_wishart(n: int, d: int, c: float, seed=None) -> BipartiteMatrix:
    """``G G* / (nd)`` with ``G`` complex Ginibre of shape ``nd x ceil(c nd)``."""
    if not c > 0:
        raise ValueError("c must be positive")
    rng = _rng(seed)
    N = n * d
    M = math.ceil(c * N)
    G = (rng.standard_normal((N, M)) + 1j * rng.standard_normal((N, M))) / math.sqrt(2)
    X = G @ G.conj().T / N
    return BipartiteMatrix(n, d, 0.5 * (X + X.conj().T))


def partial_transpose(X: BipartiteMatrix) -> BipartiteMatrix:
    """Transpose the ``n x n`` block structure: block ``(i, j)`` goes to ``(j, i)``."""
    Y = X.blocks.transpose(2, 1, 0, 3).reshape(X.entries.shape)
    return BipartiteMatrix(X.n, X.d, np.ascontiguousarray(Y))


def apply_block_map(X: BipartiteMatrix, choi: np.ndarray) -> BipartiteMatrix:
    """``(phi (x) id_d)(X)`` for the map with Choi matrix ``sum_ij phi(E_ij) (x) E_ij``."""
    n = X.n
    C = np.asarray(choi)
    if C.shape != (n * n, n * n):
        raise ValueError(f"Choi matrix must be {n * n}x{n * n} for n={n}")
    # C[(a, i), (b, j)] = phi(E_ij)[a, b]
    C4 = C.reshape(n, n, n, n)
    Y = np.einsum("aibj,ipjq->apbq", C4, X.blocks, optimize=True)
    return BipartiteMatrix(n, X.d, Y.reshape(X.entries.shape))


def eigvals(X) -> np.ndarray:
    M = X.entries if isinstance(X, BipartiteMatrix) else np.asarray(X)
    return scipy.linalg.eigvalsh(M, check_finite=False)


def extremes(X) -> tuple[float, float]:
    ev = eigvals(X)
    return float(ev[0]), float(ev[-1])


def _top_abs_eigvec(M: np.ndarray, v0=None):
    """Eigenpair with the eigenvalue largest in absolute value."""
    k = M.shape[0]
    if k <= 16:
        vals, vecs = np.linalg.eigh(M)
        i = int(np.argmax(np.abs(vals)))
        return vals[i], vecs[:, i]
    vals, vecs = scipy.sparse.linalg.eigsh(M, k=1, which="LM", v0=v0, tol=1e-9)
    return vals[0], vecs[:, 0]


def estimate_s1_norm(X: BipartiteMatrix, restarts: int = 16, iters: int = 100, seed=None, tol: float = 1e-8) -> float:
    """Lower bound on the S(1) norm by alternating maximization over product vectors.

    With ``y`` fixed the best ``x`` is the top-|eigenvalue| eigenvector of
    ``M(y)_ij = <e_i (x) y, X e_j (x) y>``; the ``y`` step is symmetric.
    Each half-step can only increase ``|<x (x) y, X x (x) y>|``.
    """
    if restarts < 8:
        raise ValueError("use at least 8 restarts")
    rng = _rng(seed)
    n, d = X.n, X.d
    # Bt[(i, j), p, q] = X[(i, p), (j, q)]
    Bt = np.ascontiguousarray(X.blocks.transpose(0, 2, 1, 3)).reshape(n * n, d, d)
    flat = Bt.reshape(n * n, d * d)
    best = 0.0
    for _ in range(restarts):
        y = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        y /= np.linalg.norm(y)
        value = 0.0
        for _ in range(iters):
            Mx = ((Bt @ y) @ y.conj()).reshape(n, n)
            _, x = _top_abs_eigvec(0.5 * (Mx + Mx.conj().T))
            My = (np.outer(x.conj(), x).ravel() @ flat).reshape(d, d)
            lam, y = _top_abs_eigvec(0.5 * (My + My.conj().T), v0=y)
            new = abs(lam)
            converged = new - value <= tol * max(1.0, new)
            value = max(value, new)
            if converged:
                break
        best = max(best, value)
    return best


def product_value(X: BipartiteMatrix, x: np.ndarray, y: np.ndarray) -> float:
    v = np.kron(x, y)
    v = v / np.linalg.norm(v)
    return float(np.real(v.conj() @ X.entries @ v))


def random_projection(n: int, d: int, rho: float, seed=None) -> BipartiteMatrix:
    """Haar random projection of rank ``round(rho n d)``."""
    N = n * d
    r = int(round(rho * N))
    U = haar_unitary(N, seed)[:, :r]
    P = U @ U.conj().T
    return BipartiteMatrix(n, d, 0.5 * (P + P.conj().T))


def schmidt_witness_overlap(n: int, d: int, a: float, b: float, seed=None) -> float:
    """``Tr[(b I + G)(a I - G)] / (n d)`` for one GUE sample ``G``; tends to ``ab - 1``."""
    G = sample_gue(n * d, seed)
    N = n * d
    tr = np.trace(G).real
    tr2 = np.vdot(G, G).real
    return float((a * b * N + (a - b) * tr - tr2) / N)


# ---------------------------------------------------------------------------
# Comparison with predictions
# ---------------------------------------------------------------------------


def predicted_quantiles(mu: MeasureExpr, dim: int, grid_points: int = 2001) -> np.ndarray:
    """Quantile spectrum of ``mu``; free convolutions go through their density."""
    if not any(isinstance(node, FreeConv) for node in walk(mu)):
        return quantile_spectrum(mu, dim)
    sup = support(mu)
    pad = 1e-9 * max(1.0, sup.width)
    x = np.linspace(sup.lo - pad, sup.hi + pad, grid_points)
    dens = density(mu, 1.0, x)
    cont = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(x) * (dens.pdf[1:] + dens.pdf[:-1]))])
    atom_mass = sum(m for _, m in dens.atoms)
    if cont[-1] > 0:
        cont *= (1 - atom_mass) / cont[-1]
    cdf = cont.copy()
    for a, m in dens.atoms:
        cdf[x >= a] += m
    # points on the same atom share the atom location
    u = (np.arange(1, dim + 1) - 0.5) / dim
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    return np.interp(u, cdf[keep], x[keep])


@dataclass(frozen=True)
class Comparison:
    w1: float
    min_gap: float
    max_gap: float


def compare(mu_predicted: MeasureExpr, X) -> Comparison:
    """Wasserstein-1 distance between the empirical spectrum and ``mu_predicted``, plus edge gaps.

    Gaps are signed so that positive means the extreme eigenvalue sits inside
    the predicted support.
    """
    ev = eigvals(X)
    q = predicted_quantiles(mu_predicted, ev.size)
    sup = exact_support(mu_predicted) or support(mu_predicted)
    return Comparison(
        w1=float(np.mean(np.abs(np.sort(ev) - np.sort(q)))),
        min_gap=float(ev[0] - sup.lo),
        max_gap=float(sup.hi - ev[-1]),
    )


def histogram(values: np.ndarray, bins: int, lo: float, hi: float):
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    return edges[:-1], edges[1:], counts

