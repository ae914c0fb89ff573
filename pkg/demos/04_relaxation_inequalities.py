"""Measure the relaxation inequalities: L1 growth, Poincare, Nash,
ultracontractivity, finite speed of propagation.

Run:  python demos/04_relaxation_inequalities.py
"""

import numpy as np

from momentflow import (
    CoefficientSchedule,
    enumerate_space,
    fsp_profile,
    kernel_projection,
    l1_growth,
    nash_ratio,
    poincare_constant,
    ultracontractivity_curve,
)
from momentflow.spectral import FreeConvolutionProfile, classical_locations
from momentflow.harness import zero_reference

# --- L1 boundedness: the propagator never exceeds the matching count 3 (n=4)
space = enumerate_space(6, 4)
sched = CoefficientSchedule.inverse_square(6, upsilon=1.0)
print("||U(0,s)||_{1,1} along s:", [(s, round(v, 4)) for s, v in
                                    l1_growth(space, sched, [0.0, 0.25, 1.0])])

# --- Poincare: local equilibration time grows linearly in the window size
N = 2 * 32 + 17
space2 = enumerate_space(N, 2)
sched2 = CoefficientSchedule.inverse_square(N, upsilon=1.0)
y = (N // 2, N // 2)
print("\nPoincare constant / ell:")
for ell in (8, 16, 32):
    c = poincare_constant(space2, y, ell, sched2)
    print(f"  ell={ell:3d}: {c / ell:.4f}")

# --- Nash: L2 deviation from the kernel controlled by energy and L1 mass
space4 = enumerate_space(10, 4)
sched4 = CoefficientSchedule.inverse_square(10, upsilon=1.0)
K = kernel_projection(space4)
rng = np.random.default_rng(0)
vals = [nash_ratio(space4, sched4, rng.standard_normal(space4.size), kernel_op=K)
        for _ in range(200)]
print(f"\nNash ratio over 200 random functions: max = {max(vals):.3f}")

# --- Ultracontractivity: the 2->inf norm decays like s^{-n/4}
curve = ultracontractivity_curve(space4, sched4, np.geomspace(0.2, 0.5, 8),
                                 kernel_op=K)
print(f"ultracontractive log-log slope: {curve.slope(0.2, 0.5):.3f} "
      "(theory -n/4 = -1)")

# --- Finite speed: short-range propagator entries die superexponentially
Nf, ell = 40, 4
gamma = classical_locations(FreeConvolutionProfile(zero_reference(Nf), 1.0))
window = np.flatnonzero(np.abs(gamma) <= 1.8)
fsched = CoefficientSchedule.from_eigenvalues(gamma)
spacef = enumerate_space(Nf, 2)
prof = fsp_profile(spacef, fsched, (Nf // 2, Nf // 2), ell, window, 0.0, ell / Nf)
print("\nfinite speed envelope (distance: max entry):")
for d, v in prof.binned_envelope()[::4]:
    print(f"  {d:3d}: {v:.3e}")
