"""Sample every matrix ensemble and look at basic spectral statistics.

Run:  python demos/01_ensembles_and_spectra.py
"""

import numpy as np

from momentflow import EnsembleSpec, eig_sym, sample_ensemble, stieltjes

N = 400

print("=== ensembles at N =", N, "===")
for spec in [
    EnsembleSpec(kind="goe", N=N, seed=1),
    EnsembleSpec(kind="generalized-wigner", N=N, seed=2),
    EnsembleSpec(kind="erdos-renyi", N=N, p=20, seed=3),
    EnsembleSpec(kind="p-regular", N=N, p=6, seed=4),
    EnsembleSpec(kind="levy", N=N, alpha=1.5, seed=5),
]:
    H = sample_ensemble(spec)
    dec = eig_sym(H)
    lam = dec.eigenvalues
    print(f"{spec.kind:20s} spectrum [{lam[0]:+8.3f}, {lam[-1]:+8.3f}]   "
          f"median gap {np.median(np.diff(lam)):.5f}")

# The empirical Stieltjes transform of a GOE matrix approaches the
# semicircle value m(i) = (-i + i sqrt(5))/2 ~ 0.618i.
dec = eig_sym(sample_ensemble(EnsembleSpec(kind="goe", N=2000, seed=7)))
m = stieltjes(dec, 1j)
print(f"\nGOE(2000): m_N(i) = {m:.4f}   semicircle value = {0.6180j:.4f}")
