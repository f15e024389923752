"""PPT but entangled.

For Wishart matrices the PPT threshold c*(n) = 2 + 2 sqrt(1 - 1/n^2) and the
witness threshold (n-1)^2/(4n) cross between n = 17 and n = 18.  For c in
between, the limit is PPT yet detected as entangled.  The depolarizing
criteria show that MP_c is far from the separable region there.
"""

from scipy.optimize import brentq

from freespec.criteria import ent_witness, evaluate_all, ppt_verdict
from freespec.spectra import MarchenkoPastur


def thresholds(n):
    ppt = brentq(lambda c: ppt_verdict(MarchenkoPastur(c), n).margin, 2.5, 6.0, xtol=1e-12)
    wit = brentq(lambda c: ent_witness(MarchenkoPastur(c), n).margin, 1e-3, 50.0, xtol=1e-12)
    return ppt, wit


# %%
for n in (10, 16, 17, 18, 20, 30):
    ppt, wit = thresholds(n)
    window = f"({ppt:.6f}, {wit:.6f})" if ppt < wit else "empty"
    print(f"n={n:2d}  PPT for c > {ppt:.6f}, entangled for c < {wit:.6f}   window {window}")

# %% The full report at c = 4, n = 20.
rep = evaluate_all(MarchenkoPastur(4.0), 20)
for entry in rep.criteria:
    print(f"{entry.name:18s} {entry.verdict:12s} margin {entry.margin:+.5f}")
