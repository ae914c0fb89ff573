"""The free-convolution fixed point, classical locations, covariance forms.

The spectral law of H + sqrt(t) GOE is encoded by the implicit equation
m(z) = m_N(z + t m(z)); its quantiles gamma_i(t) are the classical eigenvalue
locations, and the ratio Im G(gamma + t m) / Im m gives the limiting
eigenvector covariance in any pair of directions.

Run:  python demos/02_free_convolution.py
"""

import numpy as np

from momentflow import (
    EnsembleSpec,
    FreeConvolutionProfile,
    classical_locations,
    covariance_form,
    eig_sym,
    free_convolution_m,
    sample_ensemble,
)
from momentflow.spectral import fixed_point_residual

# Zero reference: the free convolution is the semicircle of variance t.
from momentflow.harness import zero_reference

prof = FreeConvolutionProfile(zero_reference(200), t=1.0)
print("m_fc,1(0) =", free_convolution_m(prof, 0.0), " (exactly i for the semicircle)")
print("fixed-point residual:", fixed_point_residual(prof, 0.0))

gamma = classical_locations(prof)
print("first/last classical locations:", gamma[0], gamma[-1], " (support is [-2, 2])")

# Identity covariance at a zero reference: <v, Lambda_i w> = <v, w>.
rng = np.random.default_rng(0)
v = rng.standard_normal(200)
v /= np.linalg.norm(v)
w = rng.standard_normal(200)
w /= np.linalg.norm(w)
print("zero reference covariance vs <v,w>:",
      covariance_form(prof, 100, v, w), v @ w)

# A GOE reference at t = 0.5: the covariance is close to, but not exactly,
# the identity; the profile caches everything it solves.
dec = eig_sym(sample_ensemble(EnsembleSpec(kind="goe", N=200, seed=1)))
prof2 = FreeConvolutionProfile(dec, t=0.5)
print("GOE reference, bulk diagonal form:", covariance_form(prof2, 100, v, v))
