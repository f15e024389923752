import csv
import json
import math

import numpy as np
import pytest

from freespec.cli import main
from freespec.criteria import flip_operator


@pytest.fixture
def measure(tmp_path):
    def write(obj, name="m.json"):
        p = tmp_path / name
        p.write_text(json.dumps(obj))
        return str(p)

    return write


def read_csv(path):
    rows = [line for line in open(path) if not line.startswith("#")]
    return list(csv.DictReader(rows))


def comments(path):
    return [line.strip()[2:].split(",") for line in open(path) if line.startswith("#")]


# --- analyze -------------------------------------------------------------------------


def test_analyze_mp_ppt(measure, tmp_path):
    out = tmp_path / "r.json"
    code = main(["analyze", "--measure", measure({"type": "marchenko_pastur", "c": 5}), "--n", "3", "--out", str(out)])
    rep = json.loads(out.read_text())
    assert code == 0
    crit = {c["name"]: c for c in rep["criteria"]}
    assert crit["ppt_gamma"]["verdict"] == "holds"
    assert 5 > 2 + 2 * math.sqrt(8 / 9)


def test_analyze_ppt_entangled(measure, capsys):
    # [PUBLISHED] MP_4 at n = 20 is PPT and entangled
    assert main(["analyze", "--measure", measure({"type": "marchenko_pastur", "c": 4}), "--n", "20", "--out", "-"]) == 0
    crit = {c["name"]: c["verdict"] for c in json.loads(capsys.readouterr().out)["criteria"]}
    assert crit["ppt_gamma"] == "holds" and crit["ent_witness"] == "holds"


def test_analyze_point_mass_separable(measure, capsys):
    assert main(["analyze", "--measure", measure({"type": "atomic", "atoms": [[1, 1]]}), "--n", "2"]) == 0
    crit = {c["name"]: c["verdict"] for c in json.loads(capsys.readouterr().out)["criteria"]}
    assert "holds" in (crit["sep_delta_plus"], crit["sep_delta_minus"])


def test_analyze_sk_list(measure, capsys):
    main(["analyze", "--measure", measure({"type": "marchenko_pastur", "c": 2}), "--n", "4", "--k", "1,2"])
    rep = json.loads(capsys.readouterr().out)
    assert [s["k"] for s in rep["sk_norms"]] == [1, 2]


@pytest.mark.parametrize(
    "args",
    [
        ["--n", "1"],
        ["--n", "3", "--k", "5"],
    ],
)
def test_analyze_usage_errors(measure, args):
    assert main(["analyze", "--measure", measure({"type": "marchenko_pastur", "c": 5}), *args]) == 1


def test_analyze_data_errors(measure, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["analyze", "--measure", str(bad), "--n", "3"]) == 1
    assert main(["analyze", "--measure", measure({"type": "nope"}), "--n", "3"]) == 1
    assert main(["analyze", "--measure", measure({"type": "semicircle", "mean": 0, "sigma": 1}), "--n", "3"]) == 1
    assert main(["analyze", "--measure", str(tmp_path / "missing.json"), "--n", "3"]) == 1
    assert main(["frobnicate"]) == 1


def test_analyze_out_file_equals_stdout(measure, tmp_path, capsys):
    m = measure({"type": "marchenko_pastur", "c": 3})
    out = tmp_path / "r.json"
    main(["analyze", "--measure", m, "--n", "3", "--out", str(out)])
    main(["analyze", "--measure", m, "--n", "3", "--out", "-"])
    assert capsys.readouterr().out == out.read_text()


# --- convolve ---------------------------------------------------------------------------


def test_convolve_semicircle_closed_form(measure, tmp_path):
    out = tmp_path / "d.csv"
    assert main(["convolve", "--measure", measure({"type": "semicircle", "mean": 0, "sigma": 1}),
                 "--power", "1", "--grid", "3", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert [float(r["x"]) for r in rows] == [-2, 0, 2]
    assert float(rows[1]["pdf"]) == pytest.approx(1 / np.pi)
    assert open(out).readline().strip() == "x,pdf"


def test_convolve_mp_edges(measure, tmp_path):
    out = tmp_path / "d.csv"
    main(["convolve", "--measure", measure({"type": "marchenko_pastur", "c": 1}), "--power", "4",
          "--grid", "9", "--out", str(out)])
    sup = [c for c in comments(out) if c[0] == "support"][0]
    assert (float(sup[1]), float(sup[2])) == pytest.approx((1.0, 9.0))


def test_convolve_bernoulli_edges_and_atoms(measure, tmp_path):
    m = measure({"type": "atomic", "atoms": [[-1, 0.5], [1, 0.5]]})
    out = tmp_path / "d.csv"
    main(["convolve", "--measure", m, "--power", "2", "--grid", "5", "--out", str(out)])
    sup = [c for c in comments(out) if c[0] == "support"][0]
    assert (float(sup[1]), float(sup[2])) == pytest.approx((-2.0, 2.0), abs=1e-7)
    out = tmp_path / "d15.csv"
    main(["convolve", "--measure", m, "--power", "1.5", "--grid", "5", "--out", str(out)])
    at = sorted((float(c[1]), float(c[2])) for c in comments(out) if c[0] == "atom")
    assert at == [(pytest.approx(-1.5), pytest.approx(0.25)), (pytest.approx(1.5), pytest.approx(0.25))]


def test_convolve_rejects_small_power(measure):
    assert main(["convolve", "--measure", measure({"type": "marchenko_pastur", "c": 1}), "--power", "0.5"]) == 1


# --- simulate -------------------------------------------------------------------------------


def run_sim(measure, tmp_path, prefix, *extra):
    m = measure({"type": "marchenko_pastur", "c": 5})
    return main(["simulate", "--measure", m, "--n", "3", "--d", "40", "--trials", "3", "--seed", "11",
                 "--out-prefix", str(tmp_path / prefix), *extra])


def test_simulate_outputs(measure, tmp_path):
    assert run_sim(measure, tmp_path, "a", "--map", "gamma", "--bins", "7") == 0
    hist = read_csv(tmp_path / "a_hist.csv")
    assert list(hist[0]) == ["bin_left", "bin_right", "count"]
    assert sum(int(r["count"]) for r in hist) == 3 * 120
    ext = read_csv(tmp_path / "a_extremes.csv")
    assert [int(r["seed"]) for r in ext] == [11, 12, 13]
    summary = json.loads((tmp_path / "a_summary.json").read_text())
    assert summary["predicted_support"][0] == pytest.approx(0.5914, abs=1e-4)


def test_simulate_is_byte_identical_across_jobs(measure, tmp_path, monkeypatch):
    run_sim(measure, tmp_path, "a", "--jobs", "3")
    monkeypatch.setenv("FREESPEC_JOBS", "1")
    run_sim(measure, tmp_path, "b", "--jobs", "3")
    for suffix in ("_hist.csv", "_extremes.csv", "_summary.json"):
        assert (tmp_path / f"a{suffix}").read_bytes() == (tmp_path / f"b{suffix}").read_bytes()


def test_simulate_choi_file_equals_gamma(measure, tmp_path):
    flip = tmp_path / "flip.json"
    flip.write_text(json.dumps(flip_operator(3).tolist()))
    run_sim(measure, tmp_path, "g", "--map", "gamma")
    run_sim(measure, tmp_path, "c", "--map", f"choi:{flip}")
    assert (tmp_path / "g_extremes.csv").read_bytes() == (tmp_path / "c_extremes.csv").read_bytes()
    assert (tmp_path / "g_hist.csv").read_bytes() == (tmp_path / "c_hist.csv").read_bytes()


def test_simulate_errors(measure, tmp_path):
    m = measure({"type": "marchenko_pastur", "c": 5})
    base = ["simulate", "--measure", m, "--n", "3", "--d", "10", "--out-prefix", str(tmp_path / "x")]
    assert main(base + ["--trials", "0"]) == 1
    assert main(base + ["--map", "bogus"]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(np.eye(4).tolist()))
    assert main(base + ["--map", f"choi:{bad}"]) == 1


def test_simulate_depolarizing_semicircle(measure, tmp_path):
    m = measure({"type": "semicircle", "mean": 0, "sigma": 1})
    assert main(["simulate", "--measure", m, "--n", "2", "--d", "100", "--trials", "1", "--map", "delta_minus",
                 "--out-prefix", str(tmp_path / "s")]) == 0
    summary = json.loads((tmp_path / "s_summary.json").read_text())
    # Delta- of SC_{0,1} at n = 2 is SC_{0, sqrt 7}
    assert summary["predicted_support"] == pytest.approx([-2 * math.sqrt(7), 2 * math.sqrt(7)], abs=1e-6)
    assert summary["max_min_gap"] < 0.6


# --- schmidt / sknorm -------------------------------------------------------------------------


@pytest.mark.parametrize("n, k", [(33, 2), (16, 0), (17, 1)])
def test_schmidt(capsys, n, k):
    assert main(["schmidt", "--n", str(n)]) == 0
    assert json.loads(capsys.readouterr().out)["k_max"] == k


def test_schmidt_verify(capsys):
    assert main(["schmidt", "--n", "33", "--verify", "--d", "20", "--seeds", "3"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert len(out["verify"]["overlaps"]) == 3


def test_sknorm_full_rank_is_operator_norm(measure, capsys):
    m = measure({"type": "semicircle", "mean": 0, "sigma": 1})
    assert main(["sknorm", "--measure", m, "--n", "4", "--k", "4"]) == 0
    assert json.loads(capsys.readouterr().out)["value"] == pytest.approx(2.0)


def test_sknorm_verify(measure, capsys):
    m = measure({"type": "atomic", "atoms": [[0, 0.5], [1, 0.5]]})
    assert main(["sknorm", "--measure", m, "--n", "2", "--k", "1", "--verify", "--d", "30", "--restarts", "8"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["estimate"] == pytest.approx(out["value"], abs=0.15)
    assert main(["sknorm", "--measure", m, "--n", "2", "--k", "2", "--verify"]) == 1
