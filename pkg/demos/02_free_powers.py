"""Free convolution powers of a discrete law.

For a finitely supported mu the power mu^T (T >= 1) has no closed form, but
its support edges come from the critical points of the inverse Cauchy
transform and its density from subordination.  Atoms survive while
T w - (T - 1) > 0.
"""

import numpy as np

from freespec.freeconv import density, support_bound, support_edges
from freespec.rmt import extremes, sample_free_sum
from freespec.spectra import Atomic

mu = Atomic(((-1.0, 0.2), (0.5, 0.6), (2.0, 0.2)))

# %% Edges against the mean/variance sandwich.
for T in (1.25, 1.5, 2.0, 4.0, 8.0):
    e, b = support_edges(mu, T), support_bound(mu, T)
    print(f"T={T:5.2f}  edges [{e.lo:+.4f}, {e.hi:+.4f}]   bound [{b.lo:+.4f}, {b.hi:+.4f}]")

# %% The heavy middle atom (w = 0.6) persists up to T = 2.5.
for T in (1.5, 2.0, 3.0):
    s = support_edges(mu, T)
    d = density(mu, T, np.linspace(s.lo, s.hi, 401))
    mass = np.trapezoid(d.pdf, d.x)
    print(f"T={T}: atoms {[(round(a, 4), round(m, 4)) for a, m in d.atoms]}, continuous mass {mass:.4f}")

# %% Integer powers are sums of freely rotated copies.
for T in (2, 4):
    lo, hi = extremes(sample_free_sum(mu, T, 600, seed=T))
    s = support_edges(mu, T)
    print(f"T={T}: sample extremes [{lo:+.4f}, {hi:+.4f}] vs edges [{s.lo:+.4f}, {s.hi:+.4f}]")
