"""Time propagation of configuration-space flows and the relaxation
inequalities: Dirichlet forms, L1 growth, Poincare, Nash, ultracontractivity,
and finite speed of propagation.

Operator norms are computed exactly by row/column scans in the appropriate
representation, so every reported bound is a certificate rather than an
estimate from power iteration.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .configspace import (
    assemble_generator,
    kernel_projection,
    local_neighborhood,
    local_projection,
)

DENSE_SOLVE_GUARD = 3000
KERNEL_REL_TOL = 1e-10


@dataclass
class CoefficientSchedule:
    """Symmetric nonnegative jump coefficients c_ij(s), possibly time varying.

    upsilon declares the subquadratic decay rate c_ij >= upsilon / |i-j|^2;
    inequalities that need it refuse to run when it is absent, and
    heavytail_margin() lets callers check the declaration against the data.
    """

    fn: object
    N: int
    upsilon: float | None = None
    tag: str = "full"
    time_dependent: bool = False

    @classmethod
    def constant(cls, C, upsilon=None, tag="full"):
        C = np.asarray(C, dtype=float)
        return cls(fn=lambda s: C, N=C.shape[0], upsilon=upsilon, tag=tag,
                   time_dependent=False)

    @classmethod
    def from_function(cls, fn, N, upsilon=None, tag="full"):
        return cls(fn=fn, N=N, upsilon=upsilon, tag=tag, time_dependent=True)

    @classmethod
    def inverse_square(cls, N, upsilon=1.0):
        """c_ij = upsilon / |i-j|^2, the canonical heavy-tailed reference."""
        idx = np.arange(N)
        gaps = idx[:, None] - idx[None, :]
        with np.errstate(divide="ignore"):
            C = upsilon / np.where(gaps == 0, np.inf, gaps.astype(float) ** 2)
        return cls.constant(C, upsilon=upsilon, tag="inverse-square")

    @classmethod
    def from_eigenvalues(cls, lams, upsilon=None, tag="dbm"):
        """Spectral-flow coefficients c_ij = 1 / (2 N (lambda_i - lambda_j)^2).

        This is the weight that pairs the ordered-pair move/exchange operators
        with the matrix flow H + sqrt(s) GOE: the operators count each label
        pair twice (once per ordering), so the coefficient carries the
        compensating 1/2.  Verified against direct-perturbation finite
        differences of the moment observable.
        """
        lams = np.asarray(lams, dtype=float)
        N = lams.shape[0]
        gaps = lams[:, None] - lams[None, :]
        with np.errstate(divide="ignore"):
            C = 1.0 / np.where(gaps == 0, np.inf, 2.0 * N * gaps**2)
        return cls.constant(C, upsilon=upsilon, tag=tag)

    def coefficients(self, s=0.0):
        return np.asarray(self.fn(s), dtype=float)

    def short_range(self, ell, window):
        """Zero out pairs outside the window or farther than ell apart."""
        mask = _range_mask(self.N, ell, window)
        base = self.fn
        fn = (lambda s: base(s) * mask)
        return CoefficientSchedule(fn=fn, N=self.N, upsilon=None,
                                   tag=f"short-range(ell={ell})",
                                   time_dependent=self.time_dependent)

    def lattice(self, ell, window, upsilon=None):
        """Keep the schedule on the window up to range ell, N/|i-j|^2 elsewhere."""
        N = self.N
        mask = _range_mask(N, ell, window)
        idx = np.arange(N)
        gaps = idx[:, None] - idx[None, :]
        with np.errstate(divide="ignore"):
            off = N / np.where(gaps == 0, np.inf, gaps.astype(float) ** 2)
        base = self.fn
        fn = (lambda s: np.where(mask, base(s), off))
        return CoefficientSchedule(fn=fn, N=N, upsilon=upsilon,
                                   tag=f"lattice(ell={ell})",
                                   time_dependent=self.time_dependent)

    def heavytail_margin(self, times=(0.0,)):
        """min over sampled times and pairs of c_ij - upsilon/|i-j|^2 (>= 0 is good)."""
        if self.upsilon is None:
            raise ValueError("schedule does not declare a heavy-tail rate")
        N = self.N
        idx = np.arange(N)
        gaps = idx[:, None] - idx[None, :]
        offdiag = gaps != 0
        floor = np.zeros((N, N))
        floor[offdiag] = self.upsilon / gaps[offdiag].astype(float) ** 2
        worst = math.inf
        for s in times:
            C = self.coefficients(s)
            worst = min(worst, float(np.min((C - floor)[offdiag])))
        return worst


def _range_mask(N, ell, window):
    inside = np.zeros(N, dtype=bool)
    inside[np.asarray(window, dtype=np.intp)] = True
    idx = np.arange(N)
    near = np.abs(idx[:, None] - idx[None, :]) <= ell
    return near & inside[:, None] & inside[None, :]


def _symmetrized_eig(space, op):
    """Eigendecomposition of Pi^{1/2} A Pi^{-1/2}; valid for pi-self-adjoint A."""
    half = np.sqrt(space.pi)
    S = (half[:, None] * op.dense()) / half[None, :]
    S = 0.5 * (S + S.T)
    w, Q = np.linalg.eigh(S)
    return w, Q, half


def _propagator_factory(space, op):
    w, Q, half = _symmetrized_eig(space, op)

    def U(s):
        return (Q * np.exp(s * w)) @ Q.T * (half[None, :] / half[:, None])

    return U


def operator_norm_11(space, mat):
    """Exact L1 -> L1 norm: max pi-weighted column sum (measure representation)."""
    A = np.asarray(mat)
    meas = np.abs((space.pi[:, None] * A) / space.pi[None, :])
    return float(np.max(meas.sum(axis=0)))


def operator_norm_2inf(space, mat):
    """Exact L2 -> Linf norm: max over rows of the pi-weighted row norm."""
    A = np.asarray(mat)
    return float(np.sqrt(np.max(np.sum(A**2 / space.pi[None, :], axis=1))))


def operator_norm_22(space, mat):
    """Exact L2 -> L2 norm (largest singular value in the pi geometry)."""
    half = np.sqrt(space.pi)
    S = (half[:, None] * np.asarray(mat)) / half[None, :]
    return float(np.linalg.norm(S, 2))


@dataclass
class PropagationResult:
    """Snapshots of a propagated function with their pi-norms."""

    space: object
    times: np.ndarray
    snapshots: np.ndarray

    def norms(self):
        """Rows of (s, l1, l2, linf)."""
        rows = []
        for s, f in zip(self.times, self.snapshots):
            rows.append((float(s), self.space.norm_l1(f), self.space.norm_l2(f),
                         self.space.norm_linf(f)))
        return rows

    @property
    def final(self):
        return self.snapshots[-1]


def propagate(space, schedule, f0, s1, s2, steps=64):
    """Solve d/ds f = B(s) f from s1 to s2 with `steps` snapshots.

    Time-constant schedules use the exact matrix-exponential path.  Time
    varying ones integrate with classical fourth-order stages, reassembling
    the generator per stage; the step count must satisfy the stability bound
    steps >= (s2 - s1) * ||B||_inf * 4.
    """
    f0 = np.asarray(f0, dtype=float)
    if s2 < s1:
        raise ValueError("s2 must be >= s1")
    if s2 == s1:
        return PropagationResult(space, np.array([s1]), f0[None, :].copy())
    times = np.linspace(s1, s2, steps + 1)
    if not schedule.time_dependent:
        op = assemble_generator(space, schedule.coefficients(s1))
        U = _propagator_factory(space, op)
        snaps = np.empty((steps + 1, space.size))
        snaps[0] = f0
        for k in range(1, steps + 1):
            snaps[k] = U(times[k] - s1) @ f0
        return PropagationResult(space, times, snaps)

    norm_inf = max(
        float(np.max(np.sum(np.abs(assemble_generator(space, schedule.coefficients(s)).dense()), axis=1)))
        for s in (s1, s2)
    )
    required = (s2 - s1) * norm_inf * 4.0
    if steps < required:
        raise ValueError(
            f"stability bound violated: need steps >= {math.ceil(required)}, got {steps}"
        )
    h = (s2 - s1) / steps
    snaps = np.empty((steps + 1, space.size))
    snaps[0] = f0
    f = f0.copy()
    for k in range(steps):
        s = times[k]
        A1 = assemble_generator(space, schedule.coefficients(s)).mat
        A2 = assemble_generator(space, schedule.coefficients(s + 0.5 * h)).mat
        A4 = assemble_generator(space, schedule.coefficients(s + h)).mat
        k1 = A1 @ f
        k2 = A2 @ (f + 0.5 * h * k1)
        k3 = A2 @ (f + 0.5 * h * k2)
        k4 = A4 @ (f + h * k3)
        f = f + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        snaps[k + 1] = f
    return PropagationResult(space, times, snaps)


def dirichlet_form(space, generator, f):
    """Energy <f, (-B) f>_pi of a pi-self-adjoint generator."""
    if not generator.is_pi_self_adjoint:
        raise ValueError("Dirichlet form requires a pi-self-adjoint generator")
    f = np.asarray(f, dtype=float)
    return -float(np.sum(space.pi * f * (generator.mat @ f)))


def dirichlet_form_pairs(space, generator, f):
    """Same energy through the difference representation
    (1/2) sum_{x != y} pi(x) pi(y) B_xy (f(x) - f(y))^2."""
    A = generator.dense()
    f = np.asarray(f, dtype=float)
    diff = f[:, None] - f[None, :]
    off = A - np.diag(np.diag(A))
    return 0.5 * float(np.sum(space.pi[:, None] * off * diff**2))


def _local_dirichlet_matrix(space, schedule, y, ell, s):
    classes = _site_class_vector(space, y, ell)
    C = schedule.coefficients(s).copy()
    same = classes[:, None] == classes[None, :]
    C[~same] = 0.0
    np.fill_diagonal(C, 0.0)
    op = assemble_generator(space, C)
    loc = local_neighborhood(space, y, ell)
    A = op.dense()[np.ix_(loc, loc)]
    pi_loc = space.pi[loc]
    D = -(pi_loc[:, None] * A)
    return loc, pi_loc, 0.5 * (D + D.T)


def _site_class_vector(space, y, ell):
    from .configspace import site_classes

    return site_classes(space.N, tuple(y), ell)


def poincare_constant(space, y, ell, schedule, s=0.0):
    """Sharp constant sup_f sum pi |f - Pf|^2 / D_loc(f) on the neighborhood of y.

    Computed by a dense symmetric eigensolve of the two quadratic forms
    restricted to the orthogonal complement of the local kernel.  Singleton
    neighborhoods give 0.
    """
    if schedule.upsilon is None:
        raise ValueError("Poincare constant requires a declared heavy-tail rate")
    loc, pi_loc, D = _local_dirichlet_matrix(space, schedule, y, ell, s)
    m = loc.size
    if m > DENSE_SOLVE_GUARD:
        raise ValueError(f"neighborhood too large for dense solve ({m} configurations)")
    if m <= 1:
        return 0.0
    P = local_projection(space, y, ell).dense()[np.ix_(loc, loc)]
    R = np.eye(m) - P
    A_quad = R.T @ (pi_loc[:, None] * R)
    A_quad = 0.5 * (A_quad + A_quad.T)

    w, Q = np.linalg.eigh(D)
    scale = max(float(w[-1]), 0.0)
    if scale == 0.0:
        return 0.0
    keep = w > KERNEL_REL_TOL * scale
    kernel_vecs = Q[:, ~keep]
    kernel_leak = float(np.max(np.abs(kernel_vecs.T @ A_quad @ kernel_vecs))) if kernel_vecs.size else 0.0
    if kernel_leak > 1e-8 * max(1.0, float(np.max(np.abs(A_quad)))):
        raise RuntimeError(
            f"local kernel escapes the projection (leak {kernel_leak:.3g}); "
            "the sharp constant is unbounded"
        )
    V = Q[:, keep]
    inv_half = 1.0 / np.sqrt(w[keep])
    reduced = (inv_half[:, None] * (V.T @ A_quad @ V)) * inv_half[None, :]
    return float(np.linalg.eigvalsh(0.5 * (reduced + reduced.T))[-1])


def nash_ratio(space, schedule, f, s=0.0, kernel_op=None):
    """upsilon ||f - Kf||_2^{2+4/n} / (D_s(f) ||f||_1^{4/n}); 0 on the kernel."""
    if schedule.upsilon is None:
        raise ValueError("Nash ratio requires a declared heavy-tail rate")
    f = np.asarray(f, dtype=float)
    K = kernel_op if kernel_op is not None else kernel_projection(space)
    g = f - K.mat @ f
    g_norm = space.norm_l2(g)
    if g_norm <= 1e-12 * max(space.norm_l2(f), 1.0):
        return 0.0
    op = assemble_generator(space, schedule.coefficients(s))
    D = dirichlet_form(space, op, f)
    n = space.n
    return schedule.upsilon * g_norm ** (2.0 + 4.0 / n) / (D * space.norm_l1(f) ** (4.0 / n))


@dataclass
class UCCurve:
    """Ultracontractive decay ||(1-K) U(0,s)||_{2,inf} along a grid of times."""

    s: np.ndarray
    norms: np.ndarray

    def rows(self):
        return list(zip(self.s.tolist(), self.norms.tolist()))

    def slope(self, smin, smax):
        """Least-squares slope of log norm against log s on [smin, smax]."""
        mask = (self.s >= smin) & (self.s <= smax) & (self.norms > 0) & (self.s > 0)
        if mask.sum() < 2:
            raise ValueError("not enough points in the slope window")
        return float(np.polyfit(np.log(self.s[mask]), np.log(self.norms[mask]), 1)[0])

    def envelope_defect(self):
        """Largest increase along the grid; 0 when the curve is nonincreasing."""
        return float(max(0.0, np.max(np.diff(self.norms))))


def ultracontractivity_curve(space, schedule, s_grid, kernel_op=None):
    """Exact ||(1-K) e^{s B}||_{2,inf} for a time-constant schedule."""
    if schedule.time_dependent:
        raise ValueError("ultracontractivity curve expects a time-constant schedule")
    if schedule.upsilon is None:
        raise ValueError("ultracontractivity requires a declared heavy-tail rate")
    op = assemble_generator(space, schedule.coefficients(0.0))
    K = (kernel_op if kernel_op is not None else kernel_projection(space)).dense()
    U = _propagator_factory(space, op)
    s_grid = np.asarray(s_grid, dtype=float)
    norms = np.empty_like(s_grid)
    eye = np.eye(space.size)
    for k, s in enumerate(s_grid):
        norms[k] = operator_norm_2inf(space, (eye - K) @ U(s))
    return UCCurve(s=s_grid, norms=norms)


@dataclass
class FSPProfile:
    """Short-range propagator entries against regular configuration distance."""

    dist: np.ndarray
    values: np.ndarray

    def rows(self):
        return sorted(zip(self.dist.tolist(), self.values.tolist()))

    def max_at_or_beyond(self, d0):
        mask = self.dist >= d0
        return float(np.max(self.values[mask])) if mask.any() else 0.0

    def binned_envelope(self):
        """(distance, max entry at that distance) sorted by distance."""
        out = {}
        for d, v in zip(self.dist.tolist(), self.values.tolist()):
            out[d] = max(out.get(d, 0.0), v)
        return sorted(out.items())


def fsp_profile(space, schedule, y, ell, window, s1, s2):
    """Propagator column |U_S(s1,s2) delta_y| against distance, short-range schedule.

    Requires the proposition's time window s2 - s1 <= ell / N.
    """
    from .configspace import config_distance

    if s2 - s1 > ell / space.N + 1e-12:
        raise ValueError("finite-speed window requires s2 - s1 <= ell / N")
    short = schedule.short_range(ell, window)
    if short.time_dependent:
        result = propagate(space, short, space.delta(y), s1, s2,
                           steps=_suggest_steps(space, short, s1, s2))
        f = result.final
    else:
        op = assemble_generator(space, short.coefficients(s1))
        U = _propagator_factory(space, op)
        f = U(s2 - s1) @ space.delta(y)
    dist = np.array([config_distance(x, tuple(y), window) for x in space.configs])
    return FSPProfile(dist=dist, values=np.abs(f))


def _suggest_steps(space, schedule, s1, s2):
    norm_inf = float(np.max(np.sum(np.abs(assemble_generator(space, schedule.coefficients(s1)).dense()), axis=1)))
    return max(64, math.ceil((s2 - s1) * norm_inf * 4.0) + 1)


def l1_growth(space, schedule, s_grid):
    """Exact ||U(0,s)||_{1,1} along the grid (max measure-representation column sum)."""
    s_grid = np.asarray(s_grid, dtype=float)
    out = np.empty_like(s_grid)
    if not schedule.time_dependent:
        op = assemble_generator(space, schedule.coefficients(0.0))
        U = _propagator_factory(space, op)
        for k, s in enumerate(s_grid):
            out[k] = operator_norm_11(space, U(s))
        return list(zip(s_grid.tolist(), out.tolist()))
    # Time-varying: march the full matrix between grid points.
    mat = np.eye(space.size)
    prev = 0.0
    for k, s in enumerate(s_grid):
        if s > prev:
            steps = _suggest_steps(space, schedule, prev, s)
            h = (s - prev) / steps
            for j in range(steps):
                t0 = prev + j * h
                A1 = assemble_generator(space, schedule.coefficients(t0)).mat
                A2 = assemble_generator(space, schedule.coefficients(t0 + 0.5 * h)).mat
                A4 = assemble_generator(space, schedule.coefficients(t0 + h)).mat
                k1 = A1 @ mat
                k2 = A2 @ (mat + 0.5 * h * k1)
                k3 = A2 @ (mat + 0.5 * h * k2)
                k4 = A4 @ (mat + h * k3)
                mat = mat + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            prev = s
        out[k] = operator_norm_11(space, mat)
    return list(zip(s_grid.tolist(), out.tolist()))


def write_table(path, headers, rows):
    """CSV emission shared by the relaxation tables."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(headers)
        writer.writerows(rows)
