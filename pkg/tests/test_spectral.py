"""Spectral module: eigensolve conventions, resolvent forms, free convolution."""

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import brentq

from momentflow import ensembles as ens
from momentflow import spectral as spx
from momentflow._rng import stream


def zero_dec(N):
    return spx.SpectralDecomposition(np.zeros(N), np.eye(N))


def unit(rng, N):
    v = rng.standard_normal(N)
    return v / np.linalg.norm(v)


def test_eig_sym_diagonal():
    dec = spx.eig_sym(np.diag([3.0, 1.0, 2.0]))
    assert np.allclose(dec.eigenvalues, [1.0, 2.0, 3.0])
    # frame is a signed permutation, and the sign convention makes it exact
    assert np.allclose(np.abs(dec.frame), np.eye(3)[:, [1, 2, 0]])
    assert np.all(dec.frame.max(axis=0) == 1.0)


def test_eig_sym_two_by_two():
    dec = spx.eig_sym(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.allclose(dec.eigenvalues, [-1.0, 1.0])
    s = 1.0 / math.sqrt(2.0)
    assert np.allclose(np.abs(dec.frame), s)
    # largest-magnitude coordinate positive in each column
    assert np.all(dec.frame[np.argmax(np.abs(dec.frame), axis=0), [0, 1]] > 0)


def test_eig_sym_reconstruction():
    H = ens.sample_goe(50, 5)
    dec = spx.eig_sym(H)
    recon = (dec.frame * dec.eigenvalues) @ dec.frame.T
    assert np.max(np.abs(recon - H)) <= 1e-8 * (1 + np.max(np.abs(H)))


def test_stieltjes_values():
    assert spx.stieltjes(zero_dec(4), 1j) == pytest.approx(1j)
    dec1 = spx.SpectralDecomposition(np.array([2.0]), np.eye(1))
    assert spx.stieltjes(dec1, 2 + 1j) == pytest.approx(1j)
    with pytest.raises(ValueError, match="free convolution"):
        spx.stieltjes(zero_dec(4), 1.0 + 0.0j)


def test_stieltjes_semicircle():
    dec = spx.eig_sym(ens.sample_goe(2000, 11))
    m_sc = (-1j + 1j * math.sqrt(5.0)) / 2.0
    assert abs(spx.stieltjes(dec, 1j) - m_sc) < 0.01


def test_green_form_scalar_and_orthogonal():
    dec = zero_dec(5)
    v = unit(stream(1), 5)
    assert spx.green_form(dec, 1j, v, v) == pytest.approx(-1.0 / 1j)
    # orthogonal overlaps give zero
    dec2 = spx.eig_sym(np.diag([1.0, 2.0, 3.0]))
    assert spx.green_form(dec2, 1j, np.eye(3)[0], np.eye(3)[1]) == pytest.approx(0.0)
    with pytest.raises(ValueError, match="unit"):
        spx.green_form(dec, 1j, 2 * v, v)


def test_green_form_psd_imaginary_part():
    rng = stream(2)
    for k in range(100):
        N = 8
        dec = spx.eig_sym(ens.sample_goe(N, (2, k)))
        z = complex(rng.uniform(-2, 2), rng.uniform(0.05, 1.0))
        v = unit(rng, N)
        assert spx.green_form(dec, z, v, v).imag >= 0


def test_green_form_averages_to_stieltjes():
    N = 12
    dec = spx.eig_sym(ens.sample_goe(N, 3))
    z = 0.3 + 0.7j
    avg = sum(spx.green_form(dec, z, np.eye(N)[i], np.eye(N)[i]) for i in range(N)) / N
    assert abs(avg - spx.stieltjes(dec, z)) < 1e-12


def test_free_convolution_center_value():
    prof = spx.FreeConvolutionProfile(zero_dec(100), 1.0)
    m = spx.free_convolution_m(prof, 0.0)
    assert abs(m - 1j) <= 1e-8
    assert spx.fixed_point_residual(prof, 0.0) <= prof.tolerance


def test_free_convolution_small_t_degenerate():
    dec = spx.eig_sym(ens.sample_goe(20, 4))
    prof = spx.FreeConvolutionProfile(dec, 1e-8)
    assert abs(spx.free_convolution_m(prof, 1j) - spx.stieltjes(dec, 1j)) <= 1e-6


def test_free_convolution_residual_grid():
    dec = spx.eig_sym(ens.sample_goe(60, 8))
    prof = spx.FreeConvolutionProfile(dec, 0.5)
    pts = [complex(E, eta) for E in np.linspace(-2, 2, 10)
           for eta in (0.0, 0.01, 0.1, 0.5, 1.0)]
    worst = max(spx.fixed_point_residual(prof, z) for z in pts)
    assert worst <= prof.tolerance
    for z in pts:
        assert spx.free_convolution_m(prof, z).imag >= 0


def semicircle_quantile(level, t=1.0):
    half = 2.0 * math.sqrt(t)

    def cdf(x):
        return quad(lambda e: math.sqrt(max(4 * t - e * e, 0.0)) / (2 * math.pi * t),
                    -half, x)[0]

    return brentq(lambda x: cdf(x) - level, -half, half, xtol=1e-12)


def test_classical_locations_small_N_against_quadrature():
    N = 10
    prof = spx.FreeConvolutionProfile(zero_dec(N), 1.0)
    gamma = spx.classical_locations(prof)
    assert np.all(np.diff(gamma) >= 0)
    assert spx.quantile_defect(prof) <= 1e-6
    for i in range(N):
        oracle = semicircle_quantile((i + 0.5) / N)
        assert abs(gamma[i] - oracle) <= 1e-4


def test_classical_locations_straddle_and_support():
    prof = spx.FreeConvolutionProfile(zero_dec(100), 1.0)
    g = spx.classical_locations(prof)
    assert g[49] < 0 < g[50]
    assert abs(g[49]) <= 2.0 / 100
    assert g[0] >= -2.1 and g[-1] <= 2.1


def test_covariance_form_identity_reference():
    N = 24
    prof = spx.FreeConvolutionProfile(zero_dec(N), 1.0)
    rng = stream(5)
    for _ in range(10):
        v, w = unit(rng, N), unit(rng, N)
        val = spx.covariance_form(prof, N // 2, v, w)
        assert abs(val - v @ w) <= 1e-8


def test_covariance_form_symmetry_and_psd():
    dec = spx.eig_sym(ens.sample_goe(40, 6))
    prof = spx.FreeConvolutionProfile(dec, 0.5)
    rng = stream(6)
    for _ in range(20):
        v, w = unit(rng, 40), unit(rng, 40)
        a = spx.covariance_form(prof, 20, v, w)
        b = spx.covariance_form(prof, 20, w, v)
        assert abs(a - b) <= 1e-12
        assert spx.covariance_form(prof, 20, v, v) >= 0


def test_covariance_form_outside_regular_spectrum():
    dec = spx.eig_sym(ens.sample_goe(40, 6))
    prof = spx.FreeConvolutionProfile(dec, 1e-4)
    # far outside the spectrum the density vanishes
    prof2 = spx.FreeConvolutionProfile(zero_dec(8), 0.01)
    v = np.eye(8)[0]
    with pytest.raises(ValueError, match="outside regular spectrum"):
        # edge index of a tiny-t profile has essentially no density at gamma
        spx.covariance_form(prof2, 0, v, v, threshold=10.0)


def test_verify_assumptions_goe():
    dec = spx.eig_sym(ens.sample_goe(500, 7))
    window = spx.RegularityWindow(E0=0.0, r=1.0, eta_star=500**-0.9, kappa=0.1, C=4.0)
    rep = spx.verify_assumptions(dec, window, [np.eye(500)[0]])
    assert rep.inf_im_m >= 0.25 and rep.sup_im_m <= 4.0
    assert rep.eigenvalue_pass
    assert rep.sup_green <= 10.0


def test_verify_assumptions_atomic_fails():
    dec = zero_dec(100)
    window = spx.RegularityWindow(E0=0.5, r=0.4, eta_star=1e-2, kappa=0.1, C=4.0)
    rep = spx.verify_assumptions(dec, window, [])
    assert not rep.eigenvalue_pass
    assert rep.inf_im_m < 0.25
