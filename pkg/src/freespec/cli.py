"""Command-line front end.

    freespec analyze  --measure m.json --n 3 [--k 1,2] [--out report.json]
    freespec convolve --measure m.json --power 4 [--grid 201] [--out density.csv]
    freespec simulate --measure m.json --n 3 --d 800 --trials 10 --seed 0 \\
                      --map gamma --out-prefix run/wishart
    freespec schmidt  --n 33 [--verify --d 200 --seeds 50]
    freespec sknorm   --measure m.json --n 4 --k 1 [--verify --d 400]

Exit codes: 0 success, 1 usage or data error, 2 when every criterion of an
``analyze`` run is inconclusive.  ``--out -`` writes to standard output.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

import numpy as np

from . import criteria, freeconv, rmt, spectra

EXIT_OK, EXIT_ERROR, EXIT_INCONCLUSIVE = 0, 1, 2


class UsageError(Exception):
    pass


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@contextmanager
def _open_out(path: str):
    if path == "-":
        yield sys.stdout
    else:
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(path, "w", newline="") as fh:
            yield fh


def _load_measure(path: str) -> spectra.MeasureExpr:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read measure {path}: {exc}") from exc
    try:
        return spectra.from_json(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"malformed measure in {path}: {exc}") from exc


def _load_choi(path: str) -> np.ndarray:
    with open(path) as fh:
        obj = json.load(fh)
    if isinstance(obj, dict):
        C = np.asarray(obj["real"], dtype=complex)
        if "imag" in obj:
            C = C + 1j * np.asarray(obj["imag"], dtype=float)
    else:
        C = np.asarray(obj, dtype=complex)
    return C


def _positive_int(name: str, value: int, minimum: int = 1) -> int:
    if value < minimum:
        raise UsageError(f"--{name} must be >= {minimum}, got {value}")
    return value


def _jobs(requested) -> int:
    env = os.environ.get("FREESPEC_JOBS")
    if env:
        return max(1, int(env))
    return requested or os.cpu_count() or 1


def _dump_json(obj, path: str) -> None:
    with _open_out(path) as fh:
        json.dump(obj, fh, indent=2, sort_keys=False, allow_nan=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------


def cmd_analyze(args) -> int:
    mu = _load_measure(args.measure)
    n = _positive_int("n", args.n, 2)
    ks = [int(k) for k in args.k.split(",")] if args.k else [1]
    for k in ks:
        if not 1 <= k <= n:
            raise UsageError(f"--k values must lie in [1, n], got {k}")
    sup = freeconv.support(mu)
    if sup.lo < 0:
        raise UsageError(f"measure has negative support (minsupp={sup.lo:.6g}); not a state profile")
    report = criteria.evaluate_all(mu, n, ks)
    _dump_json(report.to_dict(), args.out)
    # the zero-variance check is always decisive, so it does not count here
    verdicts = [c.verdict for c in report.criteria if c.name != "gurvits_barnum"]
    if all(v == criteria.INCONCLUSIVE for v in verdicts):
        return EXIT_INCONCLUSIVE
    return EXIT_OK


# ---------------------------------------------------------------------------
# convolve
# ---------------------------------------------------------------------------


def cmd_convolve(args) -> int:
    mu = _load_measure(args.measure)
    if not args.power >= 1:
        raise UsageError("--power must be >= 1")
    points = _positive_int("grid", args.grid, 2)
    nu = freeconv.free_power(mu, args.power)
    sup = freeconv.support(nu)
    x = np.linspace(sup.lo, sup.hi, points)
    dens = spectra.density_grid(nu, x)
    buf = io.StringIO()
    buf.write("x,pdf\n")
    for xi, pi in zip(dens.x, dens.pdf):
        buf.write(f"{_fmt(xi)},{_fmt(pi)}\n")
    for a, m in dens.atoms:
        buf.write(f"# atom,{_fmt(a)},{_fmt(m)}\n")
    buf.write(f"# support,{_fmt(sup.lo)},{_fmt(sup.hi)}\n")
    for i in dens.flagged:
        buf.write(f"# flagged,{_fmt(dens.x[i])}\n")
    with _open_out(args.out) as fh:
        fh.write(buf.getvalue())
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _resolve_map(choice: str, n: int, mu):
    """Return ``(transform, predicted_measure)`` for a ``--map`` value."""
    if choice == "none":
        return (lambda X: X), mu
    if choice == "gamma":
        return rmt.partial_transpose, criteria.gamma_measure(mu, n)
    if choice in ("delta_plus", "delta_minus"):
        phi = {
            "delta_plus": lambda E: (n + 1) * E - np.trace(E) * np.eye(n),
            "delta_minus": lambda E: n * np.trace(E) * np.eye(n) - (n * n - 1) * E,
        }[choice]
        C = criteria.choi_matrix(phi, n)
        pred = criteria.delta_plus_measure(mu, n) if choice == "delta_plus" else criteria.delta_minus_measure(mu, n)
        return (lambda X: rmt.apply_block_map(X, C)), pred
    if choice.startswith("choi:"):
        C = _load_choi(choice[5:])
        if C.shape != (n * n, n * n):
            raise UsageError(f"Choi matrix in {choice[5:]} is {C.shape}, expected {(n * n, n * n)}")
        try:
            cs = criteria.check_unitarity(C)
        except criteria.UnitarityViolation as exc:
            raise UsageError(str(exc)) from exc
        return (lambda X: rmt.apply_block_map(X, C)), criteria.modified_measure(mu, cs)
    raise UsageError(f"unknown --map {choice!r}")


def _sample(mu, n: int, d: int, seed: int) -> rmt.BipartiteMatrix:
    if isinstance(mu, spectra.MarchenkoPastur):
        return rmt.sample_wishart(n, d, mu.c, seed)
    return rmt.BipartiteMatrix(n, d, rmt.sample_invariant(mu, n * d, seed))


def cmd_simulate(args) -> int:
    mu = _load_measure(args.measure)
    n = _positive_int("n", args.n, 1)
    d = _positive_int("d", args.d, 1)
    trials = _positive_int("trials", args.trials, 1)
    bins = _positive_int("bins", args.bins, 1)
    if any(isinstance(node, spectra.FreeConv) for node in spectra.walk(mu)):
        raise UsageError("simulate needs a parametric or atomic measure")
    transform, predicted = _resolve_map(args.map, n, mu)

    def trial(i: int):
        seed = args.seed + i
        ev = rmt.eigvals(transform(_sample(mu, n, d, seed)))
        return seed, ev

    jobs = min(_jobs(args.jobs), trials)
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(trial, range(trials)))

    all_ev = np.concatenate([ev for _, ev in results])
    lo, hi = float(all_ev.min()), float(all_ev.max())
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    left, right, counts = rmt.histogram(all_ev, bins, lo, hi)

    prefix = args.out_prefix
    with _open_out(prefix + "_hist.csv") as fh:
        fh.write("bin_left,bin_right,count\n")
        for a, b, c in zip(left, right, counts):
            fh.write(f"{_fmt(a)},{_fmt(b)},{int(c)}\n")
    with _open_out(prefix + "_extremes.csv") as fh:
        fh.write("seed,lambda_min,lambda_max\n")
        for seed, ev in results:
            fh.write(f"{seed},{_fmt(ev[0])},{_fmt(ev[-1])}\n")
    sup = freeconv.support(predicted)
    summary = {
        "measure": spectra.to_json(mu),
        "n": n,
        "d": d,
        "map": args.map,
        "trials": [{"seed": s, "index": i, "lambda_min": float(ev[0]), "lambda_max": float(ev[-1])}
                   for i, (s, ev) in enumerate(results)],
        "predicted_support": [sup.lo, sup.hi],
        "max_min_gap": max(abs(float(ev[0]) - sup.lo) for _, ev in results),
        "max_max_gap": max(abs(float(ev[-1]) - sup.hi) for _, ev in results),
    }
    _dump_json(summary, prefix + "_summary.json")
    return EXIT_OK


# ---------------------------------------------------------------------------
# schmidt / sknorm
# ---------------------------------------------------------------------------


def cmd_schmidt(args) -> int:
    n = _positive_int("n", args.n, 2)
    cert = criteria.schmidt_feasibility(n)
    out = {"n": n, "k_max": cert.k_max, "a": cert.a, "b": cert.b}
    if cert.k_max == 0:
        out["detail"] = "no nontrivial certificate"
    if args.verify and cert.k_max > 0:
        d = _positive_int("d", args.d, 1)
        seeds = _positive_int("seeds", args.seeds, 1)
        values = [rmt.schmidt_witness_overlap(n, d, cert.a, cert.b, args.seed + i) for i in range(seeds)]
        out["verify"] = {
            "d": d,
            "seeds": [args.seed + i for i in range(seeds)],
            "overlaps": values,
            "negative": int(sum(v < 0 for v in values)),
            "limit": cert.a * cert.b - 1,
        }
    _dump_json(out, args.out)
    return EXIT_OK


def cmd_sknorm(args) -> int:
    mu = _load_measure(args.measure)
    n = _positive_int("n", args.n, 1)
    if not 1 <= args.k <= n:
        raise UsageError("--k must lie in [1, n]")
    out = {"n": n, "k": args.k, "value": criteria.sk_norm_limit(mu, n, args.k)}
    if args.verify:
        if args.k != 1:
            raise UsageError("--verify only estimates the S(1) norm")
        X = rmt.BipartiteMatrix(n, args.d, rmt.sample_invariant(mu, n * args.d, args.seed))
        out["estimate"] = rmt.estimate_s1_norm(X, args.restarts, seed=args.seed)
        out["d"] = args.d
        out["seed"] = args.seed
    _dump_json(out, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="freespec", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="evaluate every criterion for a measure")
    a.add_argument("--measure", required=True)
    a.add_argument("--n", type=int, required=True)
    a.add_argument("--k", default="1", help="comma-separated S(k) orders")
    a.add_argument("--out", default="-")
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("convolve", help="density and support of a free convolution power")
    c.add_argument("--measure", required=True)
    c.add_argument("--power", type=float, default=1.0)
    c.add_argument("--grid", type=int, default=201)
    c.add_argument("--out", default="-")
    c.set_defaults(func=cmd_convolve)

    s = sub.add_parser("simulate", help="Monte Carlo spectra of block-modified matrices")
    s.add_argument("--measure", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--trials", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--map", default="gamma", help="gamma | delta_plus | delta_minus | none | choi:<file>")
    s.add_argument("--bins", type=int, default=100)
    s.add_argument("--jobs", type=int, default=None)
    s.add_argument("--out-prefix", required=True)
    s.set_defaults(func=cmd_simulate)

    h = sub.add_parser("schmidt", help="Schmidt number certificate for shifted GUE")
    h.add_argument("--n", type=int, required=True)
    h.add_argument("--verify", action="store_true")
    h.add_argument("--d", type=int, default=200)
    h.add_argument("--seeds", type=int, default=50)
    h.add_argument("--seed", type=int, default=0)
    h.add_argument("--out", default="-")
    h.set_defaults(func=cmd_schmidt)

    k = sub.add_parser("sknorm", help="limiting S(k) norm")
    k.add_argument("--measure", required=True)
    k.add_argument("--n", type=int, required=True)
    k.add_argument("--k", type=int, default=1)
    k.add_argument("--verify", action="store_true")
    k.add_argument("--d", type=int, default=400)
    k.add_argument("--restarts", type=int, default=16)
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--out", default="-")
    k.set_defaults(func=cmd_sknorm)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"freespec {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, OSError, KeyError) as exc:
        print(f"freespec {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
