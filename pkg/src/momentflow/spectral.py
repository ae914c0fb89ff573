"""Spectral decompositions, Green's-function forms, Stieltjes transforms, the
free-convolution fixed point, classical locations, and covariance forms.

Spectral parameters are plain complex numbers z = E + i*eta with eta >= 0;
eta = 0 is legal only through the free-convolution fixed point at t > 0,
which extends continuously to the real axis.
"""

import math
from dataclasses import dataclass, field

import numpy as np

ORTHO_TOL = 1e-10
RECON_TOL = 1e-8
FIXED_POINT_TOL = 1e-12
FIXED_POINT_DAMPING = 0.5
FIXED_POINT_CAP = 10_000
QUANTILE_BISECTIONS = 64
REGULAR_IM_THRESHOLD = 1e-6


@dataclass
class SpectralDecomposition:
    """Ascending eigenvalues plus an orthonormal eigenvector frame.

    Column signs follow a deterministic convention: the largest-magnitude
    coordinate of each eigenvector is positive.  Even moments are unaffected,
    and estimators that need the symmetrized law flip signs explicitly.
    """

    eigenvalues: np.ndarray
    frame: np.ndarray

    @property
    def N(self):
        return self.eigenvalues.shape[0]

    def validate(self, source=None):
        lam, U = self.eigenvalues, self.frame
        if np.any(np.diff(lam) < 0):
            raise ValueError("eigenvalues must be nondecreasing")
        gram_defect = np.max(np.abs(U.T @ U - np.eye(self.N)))
        if gram_defect > ORTHO_TOL:
            raise ValueError(f"frame not orthonormal: defect {gram_defect:.3g}")
        if source is not None:
            recon = (U * lam) @ U.T
            scale = 1.0 + np.max(np.abs(source))
            resid = np.max(np.abs(recon - source))
            if resid > RECON_TOL * scale:
                raise ValueError(f"reconstruction residual {resid:.3g} exceeds tolerance")
        return self


def _fix_signs(U):
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def eig_sym(H):
    """Ordered spectral decomposition of a symmetric matrix."""
    if not np.all(np.isfinite(H)):
        raise ValueError("matrix has non-finite entries")
    try:
        lam, U = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        resid = float(np.max(np.abs(H - H.T)))
        raise RuntimeError(f"eigensolver failed (symmetry defect {resid:.3g})") from exc
    dec = SpectralDecomposition(lam, _fix_signs(U))
    return dec.validate(source=H)


def stieltjes(dec, z):
    """Empirical Stieltjes transform (1/N) sum_k 1/(lambda_k - z) for Im z > 0."""
    z = complex(z)
    if z.imag <= 0:
        raise ValueError("boundary evaluation requires free convolution")
    return complex(np.mean(1.0 / (dec.eigenvalues - z)))


def _check_unit(v, name):
    nrm = np.linalg.norm(v)
    if abs(nrm - 1.0) > ORTHO_TOL:
        raise ValueError(f"{name} must be a unit vector (norm {nrm:.12g})")


def green_form(dec, z, v, w):
    """Resolvent quadratic form <v, (H - z)^{-1} w> for Im z > 0."""
    z = complex(z)
    if z.imag <= 0:
        raise ValueError("resolvent form requires Im z > 0")
    _check_unit(v, "v")
    _check_unit(w, "w")
    a = dec.frame.T @ v
    b = dec.frame.T @ w
    return complex(np.sum(a * b / (dec.eigenvalues - z)))


@dataclass
class RegularityWindow:
    """Spectral window [E0 - r, E0 + r] with smallest scale eta_star, truncation
    kappa, and regularity budget C."""

    E0: float
    r: float
    eta_star: float
    kappa: float
    C: float

    def validate(self, N):
        if not (0.0 < self.kappa < 1.0):
            raise ValueError("kappa must lie in (0, 1)")
        if not (1.0 / N <= self.eta_star <= self.r):
            raise ValueError("scales must satisfy 1/N <= eta_star <= r")
        if self.C <= 0:
            raise ValueError("regularity budget C must be positive")
        return self

    def energy_interval(self, kappa=None):
        """kappa-truncated energy interval."""
        k = self.kappa if kappa is None else kappa
        half = (1.0 - k) * self.r
        return self.E0 - half, self.E0 + half

    def index_window(self, gammas, kappa=None):
        """Indices whose classical locations fall inside the truncated interval."""
        lo, hi = self.energy_interval(kappa)
        return np.flatnonzero((gammas >= lo) & (gammas <= hi))


@dataclass
class FreeConvolutionProfile:
    """Cached free-convolution data for a reference decomposition at time t > 0.

    Holds the fixed-point Stieltjes values, classical locations, and the
    covariance quadratic forms derived from the reference frame.  The cache is
    not thread safe; confine a profile to one thread or guard it.
    """

    reference: SpectralDecomposition
    t: float
    tolerance: float = FIXED_POINT_TOL
    damping: float = FIXED_POINT_DAMPING
    max_iterations: int = FIXED_POINT_CAP
    _cache: dict = field(default_factory=dict, repr=False)
    _gamma: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.t <= 0:
            raise ValueError("free convolution requires t > 0")

    def empirical_stieltjes(self, w):
        """m_N evaluated at an array of points with positive imaginary part."""
        lam = self.reference.eigenvalues
        return np.mean(1.0 / (lam[:, None] - np.atleast_1d(w)[None, :]), axis=0)


def _solve_fixed_point(profile, zs):
    """Vectorized solve of m = m_N(z + t m) on the upper-half-plane branch.

    Damped iteration (factor profile.damping) provides a globally stable
    warmup, but its convergence rate degenerates to 1 at spectral edges, so a
    Newton stage polishes the residual down to the tolerance; at a branch
    point the root is double and Newton still gains two residual digits per
    few steps.
    """
    t, omega = profile.t, profile.damping
    lam = profile.reference.eigenvalues
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    if zs.size > 1024:
        return np.concatenate(
            [_solve_fixed_point(profile, zs[k:k + 1024]) for k in range(0, zs.size, 1024)]
        )
    m = profile.empirical_stieltjes(zs + 1j * t)
    tol = profile.tolerance
    active = np.arange(zs.size)
    warmup = min(profile.max_iterations, 12)
    for _ in range(warmup):
        target = profile.empirical_stieltjes(zs[active] + t * m[active])
        resid = np.abs(m[active] - target)
        m[active] = (1.0 - omega) * m[active] + omega * target
        active = active[resid > tol]
        if active.size == 0:
            return m
    converged = False
    for _ in range(profile.max_iterations):
        w = zs[active] + t * m[active]
        diffs = lam[:, None] - w[None, :]
        target = np.mean(1.0 / diffs, axis=0)
        resid = np.abs(m[active] - target)
        done = resid <= tol
        if np.all(done):
            converged = True
            break
        deriv = 1.0 - t * np.mean(1.0 / diffs**2, axis=0)
        deriv = np.where(np.abs(deriv) < 1e-14, 1.0, deriv)
        step = (m[active] - target) / deriv
        # Trust cap: fall back toward the damped update on wild steps.
        cap = 0.5 * (1.0 + np.abs(m[active]))
        wild = np.abs(step) > cap
        step = np.where(wild, omega * (m[active] - target), step)
        m[active] = np.where(done, m[active], m[active] - step)
        active = active[~done]
    if not converged:
        raise RuntimeError(
            "free-convolution fixed point did not converge: "
            f"worst residual {resid.max():.3g}"
        )
    # The branch has Im m >= 0; clip roundoff-level negatives when harmless.
    dirty = m.imag < 0
    if np.any(dirty):
        cleaned = np.where(dirty, m.real + 0.0j, m)
        target = profile.empirical_stieltjes(zs + t * cleaned)
        ok = np.abs(cleaned - target) <= profile.tolerance
        m = np.where(dirty & ok, cleaned, m)
        if np.any(m.imag < -profile.tolerance):
            raise RuntimeError("fixed point left the upper half plane")
        m = np.where(m.imag < 0, m.real + 0.0j, m)
    return m


def free_convolution_m(profile, z):
    """Fixed point m = m_N(z + t m) with Im m >= 0, valid down to the real axis."""
    z = complex(z)
    if z.imag < 0:
        raise ValueError("spectral parameter must have eta >= 0")
    if z in profile._cache:
        return profile._cache[z]
    try:
        m = complex(_solve_fixed_point(profile, z)[0])
    except RuntimeError:
        if z.imag == 0.0:
            # Real-axis evaluation stalled; restart a hair above the axis.
            m = complex(_solve_fixed_point(profile, z + 1e-8j)[0])
        else:
            raise
    profile._cache[z] = m
    return m


def fixed_point_residual(profile, z, m=None):
    """|m - m_N(z + t m)| at the cached (or supplied) fixed point."""
    if m is None:
        m = free_convolution_m(profile, z)
    target = complex(profile.empirical_stieltjes(complex(z) + profile.t * m)[0])
    return abs(m - target)


def _density_grid(profile):
    # Spacing min(t,1)/2048: edge quantiles are ill conditioned (slope of the
    # distribution vanishes like a square root), and coarser trapezoid grids
    # cannot certify them to 1e-4.
    lam = profile.reference.eigenvalues
    t = profile.t
    lo = lam.min() - 2.0 * math.sqrt(t) - 1.0
    hi = lam.max() + 2.0 * math.sqrt(t) + 1.0
    h = min(t, 1.0) / 2048.0
    count = int(math.ceil((hi - lo) / h)) + 1
    grid = np.linspace(lo, hi, count)
    m = _solve_fixed_point(profile, grid.astype(complex))
    density = np.maximum(m.imag, 0.0) / math.pi
    return grid, density


def classical_locations(profile):
    """Quantiles gamma_i(t) of the free-convolution density at levels (i - 1/2)/N.

    Trapezoid integration of Im m on a fixed grid followed by bisection of the
    interpolated distribution function.
    """
    if profile._gamma is not None:
        return profile._gamma
    N = profile.reference.N
    grid, density = _density_grid(profile)
    seg = 0.5 * (density[1:] + density[:-1]) * np.diff(grid)
    cdf = np.concatenate([[0.0], np.cumsum(seg)])
    levels = (np.arange(1, N + 1) - 0.5) / N
    if cdf[-1] < levels[-1]:
        raise RuntimeError(
            f"density integration failure: total mass {cdf[-1]:.6f} below top level"
        )
    lo = np.full(N, grid[0])
    hi = np.full(N, grid[-1])
    for _ in range(QUANTILE_BISECTIONS):
        mid = 0.5 * (lo + hi)
        below = np.interp(mid, grid, cdf) < levels
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    gamma = 0.5 * (lo + hi)
    profile._gamma = gamma
    return gamma


def quantile_defect(profile, gamma=None):
    """Max |(1/pi) int Im m - (i - 1/2)/N| at the computed locations."""
    if gamma is None:
        gamma = classical_locations(profile)
    N = profile.reference.N
    grid, density = _density_grid(profile)
    seg = 0.5 * (density[1:] + density[:-1]) * np.diff(grid)
    cdf = np.concatenate([[0.0], np.cumsum(seg)])
    levels = (np.arange(1, N + 1) - 0.5) / N
    return float(np.max(np.abs(np.interp(gamma, grid, cdf) - levels)))


def covariance_form(profile, i, v, w, threshold=REGULAR_IM_THRESHOLD):
    """Quadratic form <v, Im G(gamma_i + t m) w> / Im m of the limiting covariance.

    The form is symmetric and positive semidefinite; it collapses to <v, w>
    when the reference matrix is zero.
    """
    _check_unit(v, "v")
    _check_unit(w, "w")
    gamma = classical_locations(profile)
    if not (0 <= i < profile.reference.N):
        raise ValueError(f"index {i} outside [0, {profile.reference.N})")
    m = free_convolution_m(profile, complex(gamma[i]))
    if m.imag <= threshold:
        raise ValueError(
            f"outside regular spectrum: Im m = {m.imag:.3g} at index {i}"
        )
    warg = gamma[i] + profile.t * m
    lam = profile.reference.eigenvalues
    U = profile.reference.frame
    a = U.T @ v
    b = U.T @ w
    im_resolvent = warg.imag / np.abs(lam - warg) ** 2
    return float(np.sum(a * b * im_resolvent) / m.imag)


@dataclass
class AssumptionReport:
    """Grid suprema for the spectral regularity checks, with pass flags."""

    N: int
    grid_energies: int
    grid_etas: int
    inf_im_m: float
    sup_im_m: float
    eigenvalue_pass: bool
    sup_green: float
    green_budget: float
    green_pass: bool

    def to_dict(self):
        return {
            "N": self.N,
            "grid-energies": self.grid_energies,
            "grid-etas": self.grid_etas,
            "inf-im-m": self.inf_im_m,
            "sup-im-m": self.sup_im_m,
            "eigenvalue-pass": self.eigenvalue_pass,
            "sup-green": self.sup_green,
            "green-budget": self.green_budget,
            "green-pass": self.green_pass,
        }


def verify_assumptions(dec, window, S, exponent_budget=0.5, n_energy=25, n_eta=15):
    """Scan |Im m_N| and |<v, Im G w>| over the window grid against the budgets.

    Always produces a report; pass/fail is recorded, never raised.
    """
    window.validate(dec.N)
    lo, hi = window.energy_interval()
    energies = np.linspace(lo, hi, n_energy)
    etas = np.geomspace(window.eta_star, 1.0, n_eta)
    lam = dec.eigenvalues
    zs = (energies[:, None] + 1j * etas[None, :]).ravel()
    m_vals = np.mean(1.0 / (lam[:, None] - zs[None, :]), axis=0)
    im_abs = np.abs(m_vals.imag)

    S = [np.asarray(v, dtype=float) for v in S]
    for v in S:
        _check_unit(v, "direction")
    sup_green = 0.0
    if S:
        A = dec.frame.T @ np.stack(S, axis=1)
        for z in zs:
            weights = z.imag / np.abs(lam - z) ** 2
            forms = A.T @ (weights[:, None] * A)
            sup_green = max(sup_green, float(np.max(np.abs(forms))))

    budget = dec.N ** exponent_budget
    return AssumptionReport(
        N=dec.N,
        grid_energies=n_energy,
        grid_etas=n_eta,
        inf_im_m=float(im_abs.min()),
        sup_im_m=float(im_abs.max()),
        eigenvalue_pass=bool(im_abs.min() >= 1.0 / window.C and im_abs.max() <= window.C),
        sup_green=sup_green,
        green_budget=float(budget),
        green_pass=bool(sup_green <= budget),
    )
