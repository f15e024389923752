"""S(k) norms of random projections and a Schmidt-number certificate.

The S(1) norm (largest overlap with a product vector) of a Haar projection
of relative rank rho on C^4 (x) C^d converges to a closed-form value.  An
alternating maximization over product vectors gets close at d = 200.
"""

from freespec.criteria import projection_sk, schmidt_feasibility, sk_norm_limit
from freespec.rmt import estimate_s1_norm, random_projection, schmidt_witness_overlap
from freespec.spectra import Atomic

n, rho = 4, 0.5
proj = Atomic(((0.0, 1 - rho), (1.0, rho)))

# %% Closed form vs edge search.
for k in range(1, n + 1):
    print(f"k={k}: closed form {projection_sk(rho, n, k):.6f}, from support edges {sk_norm_limit(proj, n, k):.6f}")

# %% Monte Carlo lower bound (a few seconds).
P = random_projection(n, 200, rho, seed=0)
print(f"\nd=200 alternating maximization: {estimate_s1_norm(P, restarts=8, seed=0):.4f}")

# %% Shifted GUE certifies Schmidt number > k while k < n/16.
for dim in (16, 17, 33, 64):
    cert = schmidt_feasibility(dim)
    print(f"n={dim}: k_max = {cert.k_max}", "" if cert.a is None else f"(a={cert.a:.4f}, b={cert.b:.4f})")

cert = schmidt_feasibility(33)
vals = [schmidt_witness_overlap(33, 60, cert.a, cert.b, seed=s) for s in range(5)]
print("overlaps at d=60:", ", ".join(f"{v:+.5f}" for v in vals), f"(limit {cert.a * cert.b - 1:+.5f})")
