import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freespec.criteria import (
    FAILS,
    HOLDS,
    ChoiSpec,
    UnitarityViolation,
    check_unitarity,
    choi_matrix,
    delta_minus_measure,
    delta_plus_measure,
    depolarizing_minus_spec,
    depolarizing_plus_spec,
    ent_bound,
    ent_witness,
    evaluate_all,
    flip_operator,
    gamma_measure,
    k_positive,
    modified_measure,
    ppt_bound,
    ppt_verdict,
    projection_sk,
    schmidt_feasibility,
    sep_verdict,
    sk_norm_limit,
    transposition_spec,
)
from freespec.freeconv import support
from freespec.spectra import Atomic, MarchenkoPastur, Semicircle, cumulants, mean_var


def depol_plus(n):
    return lambda E: (n + 1) * E - np.trace(E) * np.eye(n)


def depol_minus(n):
    return lambda E: n * np.trace(E) * np.eye(n) - (n * n - 1) * E


def as_set(spec):
    return {(round(l, 9), r) for l, r in spec.eig}


# --- Choi matrices --------------------------------------------------------------


@pytest.mark.parametrize("n", [2, 3, 4])
def test_flip_is_choi_of_transpose(n):
    assert np.array_equal(choi_matrix(lambda E: E.T, n), flip_operator(n))


@pytest.mark.parametrize("n", [2, 3, 5])
def test_unitarity_spectra_of_named_maps(n):
    assert as_set(check_unitarity(flip_operator(n))) == as_set(transposition_spec(n))
    assert as_set(check_unitarity(choi_matrix(depol_plus(n), n))) == as_set(depolarizing_plus_spec(n))
    assert as_set(check_unitarity(choi_matrix(depol_minus(n), n))) == as_set(depolarizing_minus_spec(n))


def test_unitarity_violation():
    n = 3

    def corner(E):
        P = np.zeros((n, n))
        P[0, 0] = 1
        return P @ E @ P

    with pytest.raises(UnitarityViolation) as exc:
        check_unitarity(choi_matrix(corner, n))
    assert exc.value.deviation > 0.1


def test_choi_spec_validation():
    with pytest.raises(ValueError):
        ChoiSpec(2, ((1.0, 3),))
    with pytest.raises(ValueError):
        ChoiSpec(2, ((1.0, 2), (1.0, 2)))


def test_identity_map_leaves_measure_unchanged():
    mu = MarchenkoPastur(2.0)
    spec = check_unitarity(choi_matrix(lambda E: E, 3))
    assert modified_measure(mu, spec) == mu


# --- modified measures ----------------------------------------------------------------


@pytest.mark.parametrize("n", [2, 3, 7])
def test_gamma_cumulant_transfer(n):
    # [DERIVED] kappa_p(mu^Gamma) = [(n+1) + (-1)^p (n-1)] / (2 n^(p-1)) kappa_p(mu)
    mu = Atomic(((0.0, 0.3), (1.0, 0.5), (2.5, 0.2)))
    k = np.array(cumulants(mu, 10))
    kg = np.array(cumulants(gamma_measure(mu, n), 10))
    p = np.arange(1, 11)
    factor = ((n + 1) + (-1.0) ** p * (n - 1)) / (2 * n ** (p - 1.0))
    assert kg == pytest.approx(factor * k, rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("n", [2, 4])
def test_depolarizing_semicircle_variance(n):
    mu = Semicircle(1.0, 0.7)
    _, vp = mean_var(delta_plus_measure(mu, n))
    _, vm = mean_var(delta_minus_measure(mu, n))
    assert vp == pytest.approx(0.49 * (n ** 4 + 2 * n ** 3 - 2 * n) / n ** 2, rel=1e-12)
    # [DERIVED] (2 - n^2)^2 + (n^2 - 1) from the two dilations; see the ledger
    assert vm == pytest.approx(0.49 * (n ** 4 - 3 * n * n + 3), rel=1e-12)


# --- verdicts ------------------------------------------------------------------------------


@pytest.mark.parametrize("n", [2, 3, 10])
def test_ppt_threshold_mp(n):
    c_star = 2 + 2 * math.sqrt(1 - 1 / n ** 2)
    assert ppt_verdict(MarchenkoPastur(c_star + 1e-3), n).verdict == HOLDS
    assert ppt_verdict(MarchenkoPastur(c_star - 1e-3), n).verdict == FAILS


def test_ppt_requires_state():
    with pytest.raises(ValueError, match="not a state"):
        ppt_verdict(Semicircle(0, 1), 3)


def test_ppt_bound_closed_form():
    # [TRIVIAL] point mass: m = A = B, sigma = 0
    v = ppt_bound(Atomic(((2.0, 1.0),)), 3)
    assert v.verdict == HOLDS and v.margin == pytest.approx(6.0)


def test_point_mass_is_separable():
    assert sep_verdict(Atomic(((1.0, 1.0),)), 2).verdict == HOLDS


@pytest.mark.parametrize("n", [3, 8])
def test_witness_threshold_mp(n):
    c = (n - 1) ** 2 / (4 * n)
    below = ent_witness(MarchenkoPastur(c * (1 - 1e-4)), n)
    above = ent_witness(MarchenkoPastur(c * (1 + 1e-4)), n)
    assert below.verdict == HOLDS and above.verdict == FAILS
    lo, hi = below.beta
    assert lo < hi


def test_ent_bound_threshold_mp():
    # [DERIVED] with m = s^2 = c, B = (sqrt c + 1)^2 the bound reduces to
    # sqrt c < (n-1) / (2 (sqrt(n-1) + 1)), weaker than the witness threshold
    n = 20
    c = ((n - 1) / (2 * (math.sqrt(n - 1) + 1))) ** 2
    assert ent_bound(MarchenkoPastur(0.999 * c), n).verdict == HOLDS
    assert ent_bound(MarchenkoPastur(1.001 * c), n).verdict == FAILS
    assert c < (n - 1) ** 2 / (4 * n)


def test_k_positive_and_sk_norm():
    assert sk_norm_limit(Semicircle(0, 1), 4, 4) == pytest.approx(2.0)
    assert k_positive(MarchenkoPastur(1.0), 3, 1).verdict == HOLDS
    assert k_positive(Semicircle(0, 1), 3, 1).verdict == FAILS
    with pytest.raises(ValueError):
        sk_norm_limit(Semicircle(0, 1), 3, 4)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 0.95), st.sampled_from([(4, 1), (4, 2), (6, 1), (9, 3)]))
def test_projection_formula_matches_edge_search(rho, nk):
    # [DERIVED] a projection of rank rho is the two-point law {0: 1-rho, 1: rho}
    n, k = nk
    mu = Atomic(((0.0, 1 - rho), (1.0, rho)))
    assert sk_norm_limit(mu, n, k) == pytest.approx(projection_sk(rho, n, k), abs=1e-7)


def test_projection_value():
    assert projection_sk(0.5, 4, 1) == pytest.approx(0.5 + math.sqrt(3) / 4, abs=1e-15)


# --- Schmidt ------------------------------------------------------------------------------------


def test_schmidt_rule():
    for n in range(2, 65):
        cert = schmidt_feasibility(n)
        assert cert.k_max == math.ceil(n / 16) - 1
        if cert.k_max:
            k = cert.k_max
            assert cert.a > 2 and cert.a * cert.b < 1 and n * cert.b / k > 2 * math.sqrt(n / k)


# --- report ------------------------------------------------------------------------------------


def test_report_contents():
    rep = evaluate_all(MarchenkoPastur(5.0), 3, [1, 2])
    names = [c.name for c in rep.criteria]
    for key in ("ppt_gamma", "ppt_bound_gamma", "sep_delta_plus", "sep_delta_minus", "ent_witness", "ent_bound"):
        assert key in names
    assert rep["ppt_gamma"].verdict == HOLDS
    assert [s["k"] for s in rep.sk_norms] == [1, 2]
    d = rep.to_dict()
    assert d["measure"] == {"type": "marchenko_pastur", "c": 5.0}


def test_report_records_errors_as_inconclusive():
    rep = evaluate_all(Semicircle(0, 1), 2)
    assert rep["ppt_gamma"].verdict == "inconclusive"
    assert "not a state" in rep["ppt_gamma"].detail


def test_mp_c4_n20_ppt_entangled():
    # [PUBLISHED] PPT and entangled for n >= 18 at c = 4
    rep = evaluate_all(MarchenkoPastur(4.0), 20)
    assert rep["ppt_gamma"].verdict == HOLDS
    assert rep["ent_witness"].verdict == HOLDS
    assert support(gamma_measure(MarchenkoPastur(4.0), 20)).lo > 0
