"""Integrate the coupled eigenvalue/eigenvector stochastic dynamics.

The eigenvalues repel like Coulomb particles while the frame rotates with
noise inversely proportional to the gaps.  The endpoint law coincides with a
one-shot Gaussian perturbation, which is what the moment estimator exploits.

Run:  python demos/06_see_paths.py
"""

import numpy as np

from momentflow import EnsembleSpec, eig_sym, integrate_see, sample_ensemble
from momentflow.ensembles import perturb_gaussian
from momentflow.flow import see_endpoint_ensemble

dec = eig_sym(sample_ensemble(EnsembleSpec(kind="goe", N=12, seed=3)))
path = integrate_see(dec, t=0.05, dt=2e-4, seed=1)
path.validate()
print(f"path of {len(path.times) - 1} steps")
print("initial spectrum:", np.round(path.eigenvalues[0], 3))
print("final spectrum:  ", np.round(path.eigenvalues[-1], 3))
drift = np.linalg.norm(path.frames[-1] - path.frames[0])
print(f"frame rotation magnitude ||U(t) - U(0)|| = {drift:.4f}")

# Endpoint distribution check: SDE vs direct perturbation, middle eigenvalue.
N, t = 8, 0.02
lam0 = np.linspace(-1, 1, N)
lamT, _ = see_endpoint_ensemble(lam0, np.eye(N), t, 5e-4, 1500, seed=5)
direct = np.array([
    np.linalg.eigvalsh(perturb_gaussian(np.diag(lam0), t, (9, k)))
    for k in range(1500)
])
print("\nmiddle-eigenvalue quantiles (SDE vs direct):")
for q in (0.1, 0.5, 0.9):
    a = np.quantile(lamT[:, N // 2], q)
    b = np.quantile(direct[:, N // 2], q)
    print(f"  q={q:.1f}: {a:+.4f} vs {b:+.4f}")
