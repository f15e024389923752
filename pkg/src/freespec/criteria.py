"""Block-modified limiting laws and the PPT / separability / entanglement tests.

A linear map ``phi`` on ``n x n`` matrices acting on the first factor of a
unitarily invariant bipartite matrix with limiting spectrum ``mu`` produces,
when its Choi matrix passes the unitarity condition, the limit law

    mu^phi = FreeConv over Choi eigenvalues lam_i (multiplicity r_i) of
             (Dilate(lam_i / n, mu)) ** r_i.

Verdict strings are ``"holds"``, ``"fails"`` and ``"inconclusive"``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .freeconv import free_power, support
from .spectra import (
    Dilate,
    FreeConv,
    MeasureExpr,
    SupportInterval,
    mean_var,
    moments,
    to_json,
)

HOLDS, FAILS, INCONCLUSIVE = "holds", "fails", "inconclusive"


class UnitarityViolation(ValueError):
    """A Choi eigenprojector whose partial trace is not proportional to the identity."""

    def __init__(self, eigenvalue: float, deviation: float):
        super().__init__(
            f"unitarity condition violated for eigenvalue {eigenvalue:.12g} "
            f"(off-identity norm {deviation:.3g})"
        )
        self.eigenvalue = eigenvalue
        self.deviation = deviation


@dataclass(frozen=True)
class ChoiSpec:
    """Spectrum of an ``n^2 x n^2`` Choi matrix as ``(eigenvalue, multiplicity)`` pairs."""

    n: int
    eig: tuple
    checked: bool = False

    def __post_init__(self):
        eig = tuple((float(lam), int(r)) for lam, r in self.eig)
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if any(r < 1 for _, r in eig):
            raise ValueError("multiplicities must be positive")
        if sum(r for _, r in eig) != self.n ** 2:
            raise ValueError(f"multiplicities must sum to n^2 = {self.n ** 2}")
        lams = [lam for lam, _ in eig]
        if len(set(lams)) != len(lams):
            raise ValueError("eigenvalues must be distinct")
        object.__setattr__(self, "eig", eig)


def transposition_spec(n: int) -> ChoiSpec:
    """Flip operator: +1 on the symmetric, -1 on the antisymmetric subspace."""
    return ChoiSpec(n, ((1.0, n * (n + 1) // 2), (-1.0, n * (n - 1) // 2)), checked=True)


def depolarizing_plus_spec(n: int) -> ChoiSpec:
    """``X -> (n+1) X - Tr(X) I``."""
    return ChoiSpec(n, ((n * (n + 1) - 1.0, 1), (-1.0, n * n - 1)), checked=True)


def depolarizing_minus_spec(n: int) -> ChoiSpec:
    """``X -> n Tr(X) I - (n^2-1) X``."""
    return ChoiSpec(n, ((n * (2.0 - n * n), 1), (float(n), n * n - 1)), checked=True)


# ---------------------------------------------------------------------------
# Choi matrices
# ---------------------------------------------------------------------------


def flip_operator(n: int) -> np.ndarray:
    F = np.zeros((n * n, n * n))
    for i in range(n):
        for j in range(n):
            F[i * n + j, j * n + i] = 1.0
    return F


def choi_matrix(phi, n: int) -> np.ndarray:
    """``sum_ij phi(E_ij) (x) E_ij`` for a callable ``phi`` on ``n x n`` arrays."""
    C = np.zeros((n * n, n * n), dtype=complex)
    for i in range(n):
        for j in range(n):
            E = np.zeros((n, n))
            E[i, j] = 1.0
            C += np.kron(phi(E), E)
    return C


def check_unitarity(choi: np.ndarray, group_tol: float = 1e-8, tol: float = 1e-8) -> ChoiSpec:
    """Eigendecompose a Hermitian Choi matrix and verify the unitarity condition.

    Eigenvalues closer than ``group_tol`` are merged.  Each eigenprojector
    ``P`` must satisfy ``(id (x) Tr)(P) = c I_n`` up to ``tol`` in the
    off-identity part; otherwise :class:`UnitarityViolation` is raised.
    """
    C = np.asarray(choi)
    N = C.shape[0]
    n = int(round(math.sqrt(N)))
    if n * n != N or C.shape != (N, N):
        raise ValueError("Choi matrix must be n^2 x n^2")
    if np.abs(C - C.conj().T).max() > 1e-10 * max(1.0, np.abs(C).max()):
        raise ValueError("Choi matrix is not Hermitian")
    vals, vecs = np.linalg.eigh(C)
    groups: list[list[int]] = []
    for i, v in enumerate(vals):
        if groups and abs(v - vals[groups[-1][0]]) <= group_tol * max(1.0, abs(v)):
            groups[-1].append(i)
        else:
            groups.append([i])
    eig = []
    for idx in groups:
        V = vecs[:, idx]
        P = V @ V.conj().T
        red = np.einsum("iaja->ij", P.reshape(n, n, n, n))
        c = np.trace(red).real / n
        dev = np.linalg.norm(red - c * np.eye(n))
        lam = float(vals[idx].mean())
        if dev > tol:
            raise UnitarityViolation(lam, dev)
        eig.append((lam, len(idx)))
    return ChoiSpec(n, tuple(eig), checked=True)


# ---------------------------------------------------------------------------
# Modified measures
# ---------------------------------------------------------------------------


def modified_measure(mu: MeasureExpr, spec: ChoiSpec) -> MeasureExpr:
    """Limit law of the block-modified matrix; zero Choi eigenvalues drop out."""
    n = spec.n
    tol = 1e-12 * max(abs(lam) for lam, _ in spec.eig)
    terms = tuple(
        (mu if abs(lam - n) <= tol else Dilate(lam / n, mu), r) for lam, r in spec.eig if abs(lam) > tol
    )
    if not terms:
        raise ValueError("Choi matrix is zero")
    if len(terms) == 1 and terms[0][1] == 1:
        return terms[0][0]
    return FreeConv(terms)


def gamma_measure(mu: MeasureExpr, n: int) -> MeasureExpr:
    return modified_measure(mu, transposition_spec(n))


def delta_plus_measure(mu: MeasureExpr, n: int) -> MeasureExpr:
    return modified_measure(mu, depolarizing_plus_spec(n))


def delta_minus_measure(mu: MeasureExpr, n: int) -> MeasureExpr:
    return modified_measure(mu, depolarizing_minus_spec(n))


# ---------------------------------------------------------------------------
# Verdicts
# ---------------------------------------------------------------------------


@dataclass
class Verdict:
    verdict: str
    margin: float
    detail: str = ""


def _edge_verdict(sup: SupportInterval) -> Verdict:
    tol = 1e-9 * (1 + abs(sup.hi))
    if sup.lo > tol:
        v = HOLDS
    elif sup.lo < -tol:
        v = FAILS
    else:
        v = INCONCLUSIVE
    return Verdict(v, sup.lo, f"minsupp={sup.lo:.12g}, maxsupp={sup.hi:.12g}")


def _strict(lhs: float, rhs: float, what: str) -> Verdict:
    return Verdict(HOLDS if lhs > rhs else FAILS, lhs - rhs, what)


def _require_state(mu: MeasureExpr) -> SupportInterval:
    sup = support(mu)
    if sup.lo < -1e-12 * (1 + abs(sup.hi)):
        raise ValueError("not a state profile: measure has negative support")
    return sup


def _stats(mu: MeasureExpr):
    sup = support(mu)
    m, var = mean_var(mu)
    return sup.lo, sup.hi, m, math.sqrt(max(var, 0.0))


def ppt_verdict(mu: MeasureExpr, n: int) -> Verdict:
    """Positive partial transpose: ``minsupp(mu^Gamma) > 0``."""
    _require_state(mu)
    return _edge_verdict(support(gamma_measure(mu, n)))


def ppt_bound(mu: MeasureExpr, n: int) -> Verdict:
    """Sufficient PPT condition ``n(m - 2 sigma) > B - A + 2 sigma``."""
    A, B, m, s = _stats(mu)
    return _strict(n * (m - 2 * s), B - A + 2 * s, "n(m-2s) vs B-A+2s")


def sep_verdict(mu: MeasureExpr, n: int) -> Verdict:
    """Separable if either depolarizing modification has positive support."""
    _require_state(mu)
    plus = _edge_verdict(support(delta_plus_measure(mu, n)))
    minus = _edge_verdict(support(delta_minus_measure(mu, n)))
    best = plus if plus.margin >= minus.margin else minus
    if HOLDS in (plus.verdict, minus.verdict):
        v = HOLDS
    elif INCONCLUSIVE in (plus.verdict, minus.verdict):
        v = INCONCLUSIVE
    else:
        v = FAILS
    return Verdict(v, best.margin, f"delta+: {plus.margin:.12g}; delta-: {minus.margin:.12g}")


def sep_verdicts(mu: MeasureExpr, n: int) -> tuple[Verdict, Verdict]:
    """The two depolarizing criteria separately (plus, minus)."""
    _require_state(mu)
    return (
        _edge_verdict(support(delta_plus_measure(mu, n))),
        _edge_verdict(support(delta_minus_measure(mu, n))),
    )


def sep_bounds(mu: MeasureExpr, n: int) -> tuple[Verdict, Verdict]:
    """Closed-form sufficient conditions for the two depolarizing criteria."""
    A, B, m, s = _stats(mu)
    r = math.sqrt(n * n - 2)
    plus = _strict((n * n + n - 1) * A, B + m * (n * n - 2) + 2 * s * r, "(n^2+n-1)A vs B+m(n^2-2)+2s sqrt(n^2-2)")
    minus = _strict(A, (n * n - 2) * (B - m) + 2 * s * r, "A vs (n^2-2)(B-m)+2s sqrt(n^2-2)")
    return plus, minus


def k_positive(mu: MeasureExpr, n: int, k: int) -> Verdict:
    """Asymptotic k-block-positivity: ``minsupp(mu ** (n/k)) > 0``."""
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    return _edge_verdict(support(free_power(mu, n / k)))


def sk_norm_limit(mu: MeasureExpr, n: int, k: int) -> float:
    """Limit of the S(k) norm: ``(k/n) * max(|minsupp|, |maxsupp|)`` of ``mu ** (n/k)``."""
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    sup = support(free_power(mu, n / k))
    return k / n * max(abs(sup.lo), abs(sup.hi))


def projection_sk(rho: float, n: int, k: int) -> float:
    """Limit of the S(k) norm of a Haar random projection of relative rank ``rho``."""
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    q = k / n
    if rho > 1 - q:
        return 1.0
    return rho + q - 2 * rho * q + 2 * math.sqrt(q * (1 - q) * rho * (1 - rho))


@dataclass
class WitnessVerdict(Verdict):
    beta: Optional[tuple] = None


def ent_witness(mu: MeasureExpr, n: int) -> WitnessVerdict:
    """Entangled if ``maxsupp(mu ** n) / n < m2 / m1``.

    The witness ``beta I - X`` works for every ``beta`` strictly between the
    two sides; that interval is returned in ``beta`` when nonempty.
    """
    _require_state(mu)
    m1, m2 = moments(mu, 2).values
    if not m1 > 0:
        raise ValueError("witness needs a positive first moment")
    lower = support(free_power(mu, n)).hi / n
    upper = m2 / m1
    tol = 1e-12 * (1 + abs(upper))
    holds = upper - lower > tol
    return WitnessVerdict(
        HOLDS if holds else FAILS,
        upper - lower,
        f"maxsupp(mu^n)/n={lower:.12g}, m2/m1={upper:.12g}",
        (lower, upper) if holds else None,
    )


def ent_bound(mu: MeasureExpr, n: int) -> Verdict:
    """Closed-form entanglement condition ``B/m < 1 + n s^2/m^2 - 2 (s/m) sqrt(n-1)``."""
    A, B, m, s = _stats(mu)
    if not m > 0:
        raise ValueError("bound needs a positive mean")
    rhs = 1 + n * s * s / (m * m) - 2 * (s / m) * math.sqrt(n - 1)
    return _strict(rhs, B / m, "1+n s^2/m^2-2(s/m)sqrt(n-1) vs B/m")


@dataclass(frozen=True)
class SchmidtCertificate:
    k_max: int
    a: Optional[float]
    b: Optional[float]


def schmidt_system_feasible(n: int, k: int) -> Optional[tuple[float, float]]:
    """Midpoint witness ``(a, b)`` for ``a > 2``, ``nb/k > 2 sqrt(n/k)``, ``ab < 1``.

    ``b`` must lie in ``(2 sqrt(k/n), 1/a)``, so ``a`` ranges over
    ``(2, sqrt(n/k)/2)``.  Returns ``None`` when that range is empty.
    """
    a_hi = 0.5 * math.sqrt(n / k)
    if not a_hi > 2:
        return None
    a = 0.5 * (2 + a_hi)
    b_lo = 2 * math.sqrt(k / n)
    b = 0.5 * (b_lo + 1 / a)
    if not (a > 2 and n * b / k - 2 * math.sqrt(n / k) > 0 and a * b - 1 < 0):
        return None
    return a, b


def schmidt_feasibility(n: int) -> SchmidtCertificate:
    """Largest ``k`` for which the shifted-GUE construction certifies ``SN > k``."""
    if n < 2:
        raise ValueError("n must be at least 2")
    best = SchmidtCertificate(0, None, None)
    for k in range(1, n + 1):
        ab = schmidt_system_feasible(n, k)
        if ab is None:
            break
        best = SchmidtCertificate(k, *ab)
    return best


# ---------------------------------------------------------------------------
# Aggregated report
# ---------------------------------------------------------------------------


@dataclass
class CriterionEntry:
    name: str
    verdict: str
    margin: float
    detail: str = ""


@dataclass
class CriterionReport:
    n: int
    measure: dict
    criteria: list = field(default_factory=list)
    sk_norms: list = field(default_factory=list)
    schmidt: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> CriterionEntry:
        for c in self.criteria:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return asdict(self)


def _run(name: str, fn) -> list:
    try:
        out = fn()
    except Exception as exc:  # recorded, never aborts the report
        return [CriterionEntry(name, INCONCLUSIVE, float("nan"), f"error: {exc}")]
    if isinstance(out, tuple):
        return [CriterionEntry(f"{name}_{tag}", v.verdict, v.margin, v.detail) for tag, v in zip(("plus", "minus"), out)]
    return [CriterionEntry(name, out.verdict, out.margin, out.detail)]


def evaluate_all(mu: MeasureExpr, n: int, k_list: Sequence[int] = (1,)) -> CriterionReport:
    """Run every criterion on ``(mu, n)`` and collect the results."""
    rep = CriterionReport(n=n, measure=to_json(mu))
    rep.criteria += _run("ppt_gamma", lambda: ppt_verdict(mu, n))
    rep.criteria += _run("ppt_bound_gamma", lambda: ppt_bound(mu, n))
    dp = _run("sep_delta", lambda: sep_verdicts(mu, n))
    if len(dp) == 2:
        rep.criteria += dp
    else:
        rep.criteria += [CriterionEntry(f"sep_delta_{t}", dp[0].verdict, dp[0].margin, dp[0].detail) for t in ("plus", "minus")]
    sb = _run("sep_bound", lambda: sep_bounds(mu, n))
    if len(sb) == 2:
        rep.criteria += sb
    else:
        rep.criteria += [CriterionEntry(f"sep_bound_{t}", sb[0].verdict, sb[0].margin, sb[0].detail) for t in ("plus", "minus")]
    rep.criteria += _run("ent_witness", lambda: ent_witness(mu, n))
    rep.criteria += _run("ent_bound", lambda: ent_bound(mu, n))

    m, var = mean_var(mu)
    gb = var <= 1e-14 * max(1.0, m * m)
    rep.criteria.append(
        CriterionEntry("gurvits_barnum", HOLDS if gb else FAILS, var, "GB applies" if gb else "GB needs zero variance")
    )
    for k in k_list:
        try:
            value = sk_norm_limit(mu, n, k)
            kp = k_positive(mu, n, k)
            rep.sk_norms.append({"k": k, "value": value, "k_positive": kp.verdict})
        except Exception as exc:
            rep.sk_norms.append({"k": k, "value": float("nan"), "k_positive": INCONCLUSIVE, "detail": str(exc)})
    cert = schmidt_feasibility(n)
    rep.schmidt = {"k_max": cert.k_max, "a": cert.a, "b": cert.b}
    return rep
