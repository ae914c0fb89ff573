"""Even particle configurations, the reversible measure, move/exchange
operators, kernel projections, conditional expectations, local projections,
averaging coefficients, configuration distance, and the colorblind map.

Sites are 0-based: a configuration is a tuple x in {0..N-1}^n, and membership
in the even space requires every site occupancy to be even.  Functions over a
space are numpy arrays indexed by the space's enumeration order, which is
lexicographic and therefore reproducible.
"""

import csv
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ._rng import stream

DENSE_CUTOFF = 2000
SIZE_GUARD = 10**6
FLAG_TOL = 1e-12


def double_factorial(k):
    """Number of perfect matchings of k labels: 1*3*5*...*(k-1) for even k >= 0."""
    if k % 2 != 0 or k < 0:
        raise ValueError("even nonnegative occupancy expected")
    out = 1
    for m in range(k - 1, 0, -2):
        out *= m
    return out


def occupancies(x, N):
    """Particle numbers n_i(x) for each site."""
    return np.bincount(np.asarray(x, dtype=np.intp), minlength=N)


def is_even_configuration(x, N):
    return bool(np.all(occupancies(x, N) % 2 == 0))


def pi_weight(x, N):
    """Reversible weight prod_i (n_i(x)!!)^2."""
    w = 1
    for k in occupancies(x, N):
        w *= double_factorial(int(k)) ** 2
    return w


def count_even_configurations(N, n):
    """|Lambda^n| without enumeration (site-by-site convolution)."""
    table = {0: 1}
    for _ in range(N):
        nxt = {}
        for filled, ways in table.items():
            for k in range(0, n - filled + 1, 2):
                nxt[filled + k] = nxt.get(filled + k, 0) + ways * math.comb(n - filled, k)
        table = nxt
    return table.get(n, 0)


@dataclass
class ConfigurationSpace:
    """Enumerated even configuration space with measure pi and index maps."""

    N: int
    n: int
    configs: list
    pi: np.ndarray
    index: dict = field(repr=False)
    occ: np.ndarray = field(repr=False)

    @property
    def size(self):
        return len(self.configs)

    def idx(self, x):
        return self.index[tuple(x)]

    def function(self, values_by_config):
        """Array over the enumeration from a {config: value} mapping (others zero)."""
        f = np.zeros(self.size)
        for x, v in values_by_config.items():
            f[self.idx(x)] = v
        return f

    def delta(self, x):
        """delta_x with the <delta_x, f> = f(x) normalization."""
        f = np.zeros(self.size)
        ix = self.idx(x)
        f[ix] = 1.0 / self.pi[ix]
        return f

    def norm_l1(self, f):
        return float(np.sum(self.pi * np.abs(f)))

    def norm_l2(self, f):
        return float(math.sqrt(np.sum(self.pi * np.asarray(f) ** 2)))

    def norm_linf(self, f):
        return float(np.max(np.abs(f)))

    def inner(self, f, g):
        return float(np.sum(self.pi * np.asarray(f) * np.asarray(g)))

    def to_csv(self, path):
        """Write the enumeration: index, x_1..x_n, pi."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index"] + [f"x{a+1}" for a in range(self.n)] + ["pi"])
            for ix, x in enumerate(self.configs):
                writer.writerow([ix] + list(x) + [int(self.pi[ix])])


def _even_part_multisets(n):
    """Unordered lists of even parts >= 2 summing to n."""
    out = []

    def rec(remaining, largest, acc):
        if remaining == 0:
            out.append(list(acc))
            return
        for part in range(min(largest, remaining), 1, -2):
            rec(remaining - part, part, acc + [part])

    rec(n, n, [])
    return out


def _label_assignments(labels, parts):
    """All ways to split `labels` into ordered groups of the given sizes.

    Groups are attached to distinct sites by the caller, so every ordered
    assignment is a distinct configuration.
    """
    if not parts:
        yield []
        return
    first, rest = parts[0], parts[1:]
    for group in itertools.combinations(labels, first):
        remaining = tuple(l for l in labels if l not in group)
        for tail in _label_assignments(remaining, rest):
            yield [group] + tail


def enumerate_space(N, n, size_guard=SIZE_GUARD):
    """Complete duplicate-free enumeration of the even configuration space.

    Configurations are generated occupancy pattern by occupancy pattern and
    sorted lexicographically.  The count is computed up front and refused when
    above the size guard.
    """
    if n % 2 != 0 or n < 2:
        raise ValueError("particle number must be even and >= 2")
    total = count_even_configurations(N, n)
    if total > size_guard:
        raise ValueError(f"space too large: |Lambda^{n}_{N}| = {total} > {size_guard}")
    configs = []
    labels = tuple(range(n))
    for parts in _even_part_multisets(n):
        k = len(parts)
        if k > N:
            continue
        for sites in itertools.permutations(range(N), k):
            # Equal parts on an unordered site set would repeat; keep the
            # canonical representative where equal-size runs have ascending sites.
            ok = True
            for a in range(k - 1):
                if parts[a] == parts[a + 1] and sites[a] > sites[a + 1]:
                    ok = False
                    break
            if not ok:
                continue
            for groups in _label_assignments(labels, parts):
                x = [0] * n
                for site, group in zip(sites, groups):
                    for lbl in group:
                        x[lbl] = site
                configs.append(tuple(x))
    configs.sort()
    if len(configs) != total:
        raise AssertionError(f"enumeration produced {len(configs)} of {total} configurations")
    pi = np.array([pi_weight(x, N) for x in configs], dtype=float)
    index = {x: i for i, x in enumerate(configs)}
    occ = np.zeros((len(configs), N), dtype=np.int64)
    for i, x in enumerate(configs):
        occ[i] = occupancies(x, N)
    return ConfigurationSpace(N=N, n=n, configs=configs, pi=pi, index=index, occ=occ)


def jump(x, kind, a, b, i, j):
    """Two-particle jump (move) or swap, a no-op when the indicator is off.

    move:  both particles a, b relocate from site i to site j when x_a = x_b = i.
    swap:  particles a at site i and b at site j exchange sites.
    """
    if a == b:
        raise ValueError("labels a and b must differ")
    x = tuple(x)
    if kind == "move":
        if x[a] == i and x[b] == i:
            y = list(x)
            y[a] = j
            y[b] = j
            return tuple(y)
        return x
    if kind == "swap":
        if x[a] == i and x[b] == j:
            y = list(x)
            y[a] = j
            y[b] = i
            return tuple(y)
        return x
    raise ValueError(f"unknown jump kind {kind!r}")


@dataclass
class WeightedOperator:
    """Linear operator on functions over a configuration space.

    The stored matrix acts in the function representation f -> mat @ f.  Flags
    record structure the constructor guarantees; check_flags re-verifies them.
    """

    space: ConfigurationSpace
    mat: object
    is_generator: bool = False
    is_pi_self_adjoint: bool = False

    def dense(self):
        return self.mat.toarray() if sp.issparse(self.mat) else np.asarray(self.mat)

    def apply(self, f):
        return self.mat @ f

    def measure_rep(self):
        """Pi-conjugated matrix acting on measures: Pi mat Pi^{-1}."""
        A = self.dense()
        pi = self.space.pi
        return (pi[:, None] * A) / pi[None, :]

    def reversibility_defect(self):
        """max |Pi mat - mat^T Pi|; zero for pi-self-adjoint operators."""
        A = self.dense()
        pi = self.space.pi
        S = pi[:, None] * A
        return float(np.max(np.abs(S - S.T)))

    def row_sum_defect(self):
        """max |mat @ 1|; zero for generators."""
        ones = np.ones(self.space.size)
        return float(np.max(np.abs(self.mat @ ones)))

    def check_flags(self, tol=FLAG_TOL):
        scale = max(1.0, float(np.max(np.abs(self.dense()))))
        if self.is_generator and self.row_sum_defect() > tol * scale:
            raise AssertionError("generator flag violated: nonzero row sums")
        if self.is_pi_self_adjoint and self.reversibility_defect() > tol * scale:
            raise AssertionError("pi-self-adjointness flag violated")
        return self

    def to_triplets(self, path):
        """Write 'row col value' lines for external inspection."""
        A = self.mat.tocoo() if sp.issparse(self.mat) else sp.coo_matrix(self.mat)
        with open(path, "w") as fh:
            for r, c, v in zip(A.row, A.col, A.data):
                fh.write(f"{int(r)} {int(c)} {float(v)!r}\n")


def _validate_coeffs(space, coeffs):
    C = np.asarray(coeffs, dtype=float)
    if C.shape != (space.N, space.N):
        raise ValueError(f"coefficient map must be {space.N}x{space.N}")
    if not np.allclose(C, C.T, atol=0, rtol=0):
        raise ValueError("coefficient map must be symmetric")
    if np.any(C < 0):
        raise ValueError("coefficients must be nonnegative")
    if np.any(np.diag(C) != 0):
        raise ValueError("coefficient diagonal must be zero")
    return C


def assemble_generator(space, coeffs, part="full"):
    """Sum over site pairs of c_ij times the requested generator part.

    full:           move minus exchange
    move-only:      pair relocation with occupancy weights (n_j+1)/(n_i-1)
    exchange-only:  partner swap with weight 2
    All three have zero row sums and are self-adjoint for the measure pi.
    """
    if part not in ("full", "move-only", "exchange-only"):
        raise ValueError(f"unknown part {part!r}")
    C = _validate_coeffs(space, coeffs)
    n, N = space.n, space.N
    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    active_cols = {i: np.flatnonzero(C[i]) for i in range(N) if C[i].any()}
    for ix, x in enumerate(space.configs):
        occ = space.occ[ix]
        if part in ("full", "move-only"):
            site_labels = {}
            for a, site in enumerate(x):
                site_labels.setdefault(site, []).append(a)
            for i, labs in site_labels.items():
                if len(labs) < 2 or i not in active_cols:
                    continue
                for j in active_cols[i]:
                    w = C[i, j] * (occ[j] + 1.0) / (occ[i] - 1.0)
                    for a, b in itertools.permutations(labs, 2):
                        y = list(x)
                        y[a] = j
                        y[b] = j
                        iy = space.index[tuple(y)]
                        add(ix, iy, w)
                        add(ix, ix, -w)
        if part in ("full", "exchange-only"):
            sign = -1.0 if part == "full" else 1.0
            for a in range(n):
                for b in range(n):
                    if a == b or not x[a] < x[b]:
                        continue
                    c = C[x[a], x[b]]
                    if c == 0.0:
                        continue
                    y = list(x)
                    y[a], y[b] = x[b], x[a]
                    iy = space.index[tuple(y)]
                    add(ix, iy, sign * 2.0 * c)
                    add(ix, ix, -sign * 2.0 * c)

    mat = sp.coo_matrix((vals, (rows, cols)), shape=(space.size, space.size)).tocsr()
    if space.size <= DENSE_CUTOFF:
        mat = mat.toarray()
    return WeightedOperator(space, mat, is_generator=True, is_pi_self_adjoint=True)


def pair_generator(space, i, j, part="full", c=1.0):
    """Single-pair operator B_ij (or its move/exchange part) with coefficient c."""
    C = np.zeros((space.N, space.N))
    C[i, j] = C[j, i] = c
    return assemble_generator(space, C, part=part)


def matchings(n, stabilizing=None):
    """All perfect matchings of [n] as involution tuples, optionally filtered
    to those stabilizing a configuration."""
    if n % 2 != 0 or n < 2:
        raise ValueError("perfect matchings need even n >= 2")
    out = []

    def rec(free, sigma):
        if not free:
            out.append(tuple(sigma))
            return
        a = free[0]
        for b in free[1:]:
            sigma[a], sigma[b] = b, a
            rec([c for c in free[1:] if c != b], sigma)
        sigma[a] = -1

    rec(list(range(n)), [-1] * n)
    if stabilizing is not None:
        x = tuple(stabilizing)
        out = [s for s in out if all(x[s[a]] == x[a] for a in range(n))]
    return out


def apply_label_permutation(sigma, x):
    """(sigma . x)_a = x_{sigma(a)}."""
    return tuple(x[sigma[a]] for a in range(len(x)))


def stabilizer_matching_count(x):
    """|M_n ∩ Stab(x)|, which equals sqrt(pi(x))."""
    return len(matchings(len(x), stabilizing=x))


def chi_indicator(space, sigma):
    """Stratum indicator chi_sigma(x) = 1{sigma . x = x} / sqrt(pi(x))."""
    f = np.zeros(space.size)
    for ix, x in enumerate(space.configs):
        if all(x[sigma[a]] == x[a] for a in range(space.n)):
            f[ix] = 1.0 / math.sqrt(space.pi[ix])
    return f


def chi_matrix(space):
    """Columns chi_sigma for sigma in M_n, in matchings() order."""
    sigmas = matchings(space.n)
    X = np.empty((space.size, len(sigmas)))
    for k, sigma in enumerate(sigmas):
        X[:, k] = chi_indicator(space, sigma)
    return X


def kernel_projection(space):
    """Pi-orthogonal projection onto span{chi_sigma}: idempotent, pi-self-adjoint."""
    X = chi_matrix(space)
    half = np.sqrt(space.pi)
    Q, s, _ = np.linalg.svd(half[:, None] * X, full_matrices=False)
    rank = int(np.sum(s > s[0] * 1e-12)) if s.size else 0
    Q = Q[:, :rank]
    K = (Q @ Q.T) * (half[None, :] / half[:, None])
    return WeightedOperator(space, K, is_generator=False, is_pi_self_adjoint=True)


def delta_pairing(space, op, x, y):
    """<delta_x, A delta_y> for a WeightedOperator A."""
    A = op.dense()
    return A[space.idx(x), space.idx(y)] / space.pi[space.idx(y)]


def haar_kernel_entries(N, pairs, samples, seed, chunk=200_000):
    """Monte Carlo estimates of E[prod_a O_{x_a y_a}] for Haar orthogonal O.

    One stream of samples serves every requested (x, y) pair.  Sampling is QR
    of a Gaussian matrix with the triangular factor's diagonal signs folded
    into Q.  Returns parallel lists (estimates, stderrs).
    """
    idx = [(np.asarray(x, dtype=np.intp), np.asarray(y, dtype=np.intp))
           for x, y in pairs]
    rng = stream(seed)
    total = np.zeros(len(idx))
    total_sq = np.zeros(len(idx))
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        G = rng.standard_normal((m, N, N))
        Q, R = np.linalg.qr(G)
        signs = np.sign(np.einsum("kii->ki", R))
        signs[signs == 0] = 1.0
        Q = Q * signs[:, None, :]
        for k, (x, y) in enumerate(idx):
            prod = np.prod(Q[:, x, y], axis=1)
            total[k] += float(prod.sum())
            total_sq[k] += float((prod**2).sum())
        done += m
    means = total / samples
    variances = np.maximum(total_sq / samples - means**2, 0.0)
    return means.tolist(), np.sqrt(variances / samples).tolist()


def haar_kernel_entry(N, x, y, samples, seed, chunk=200_000):
    """Single-pair version of haar_kernel_entries; returns (estimate, stderr)."""
    means, errs = haar_kernel_entries(N, [(x, y)], samples, seed, chunk=chunk)
    return means[0], errs[0]


def all_partitions(n):
    """Every partition of [n] as a list of sorted blocks (restricted growth order)."""
    out = []

    def rec(a, blocks):
        if a == n:
            out.append([sorted(b) for b in blocks])
            return
        for b in blocks:
            b.append(a)
            rec(a + 1, blocks)
            b.pop()
        blocks.append([a])
        rec(a + 1, blocks)
        blocks.pop()

    rec(0, [])
    return out


def _validate_partition(partition, n):
    seen = set()
    for block in partition:
        if not block:
            raise ValueError("partition blocks must be nonempty")
        for a in block:
            if a in seen or not (0 <= a < n):
                raise ValueError("partition blocks must disjointly cover the labels")
            seen.add(a)
    if len(seen) != n:
        raise ValueError("partition blocks must cover all labels")


def compatible_permutations(partition, n):
    """Permutations moving every label within its own block."""
    _validate_partition(partition, n)
    blocks = [list(b) for b in partition]
    perms = []
    for images in itertools.product(*(itertools.permutations(b) for b in blocks)):
        sigma = [0] * n
        for block, image in zip(blocks, images):
            for a, target in zip(block, image):
                sigma[a] = target
        perms.append(tuple(sigma))
    return perms


def conditional_expectation(space, partition):
    """Averaging operator over the block-compatible label action: an orthogonal
    projection for the measure pi."""
    perms = compatible_permutations(partition, space.n)
    weight = 1.0 / len(perms)
    M = np.zeros((space.size, space.size))
    for ix, x in enumerate(space.configs):
        for sigma in perms:
            M[ix, space.index[apply_label_permutation(sigma, x)]] += weight
    return WeightedOperator(space, M, is_generator=False, is_pi_self_adjoint=True)


def position_partition_signature(x):
    """Canonical signature of the position partition: labels sharing a site
    share a symbol."""
    first = {}
    sig = []
    for site in x:
        if site not in first:
            first[site] = len(first)
        sig.append(first[site])
    return tuple(sig)


def signature_refines(sig_z, sig_x):
    """True when the position partition of z refines that of x."""
    image = {}
    for a, s in enumerate(sig_z):
        if s in image:
            if sig_x[a] != image[s]:
                return False
        else:
            image[s] = sig_x[a]
    return True


def site_classes(N, y, ell):
    """Site equivalence generated by the open radius-ell balls at the particle
    positions of y; sites outside every ball are singletons.

    Returns class_id[site]; two sites are related exactly when ids match.
    """
    if ell < 1:
        raise ValueError("length scale ell must be >= 1")
    parent = list(range(N))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for site in set(y):
        lo = max(0, site - (ell - 1))
        hi = min(N - 1, site + (ell - 1))
        for i in range(lo, hi):
            ri, rj = find(i), find(i + 1)
            if ri != rj:
                parent[rj] = ri
    return np.array([find(i) for i in range(N)])


def local_neighborhood(space, y, ell):
    """Indices of configurations x with x_a ~ y_a for every label a."""
    classes = site_classes(space.N, tuple(y), ell)
    y = tuple(y)
    out = []
    for ix, x in enumerate(space.configs):
        if all(classes[x[a]] == classes[y[a]] for a in range(space.n)):
            out.append(ix)
    return np.array(out, dtype=np.intp)


def local_projection(space, y, ell):
    """Local averaging over configurations with refining position partitions.

    On the neighborhood, (P f)(x) is the pi-weighted mean of f over local z
    whose position partition refines that of x; rows and columns outside the
    neighborhood are zero.  P fixes the restricted stratum indicators but is
    not self-adjoint.
    """
    loc = local_neighborhood(space, y, ell)
    sigs = [position_partition_signature(space.configs[ix]) for ix in loc]
    M = np.zeros((space.size, space.size))
    for r, ix in enumerate(loc):
        mask = np.array([signature_refines(sigs[c], sigs[r]) for c in range(len(loc))])
        cols = loc[mask]
        weights = space.pi[cols]
        M[ix, cols] = weights / weights.sum()
    return WeightedOperator(space, M, is_generator=False, is_pi_self_adjoint=False)


def averaging_indicator(x, y, K):
    """Mollified indicator (1/K) sum_{alpha=K}^{2K-1} 1{|x-y|_1 < alpha} for one pair."""
    if K < 1:
        raise ValueError("averaging scale K must be >= 1")
    d = sum(abs(int(a) - int(b)) for a, b in zip(x, y))
    return float(np.clip((2 * K - 1 - d) / K, 0.0, 1.0))


def averaging_values(space, K, y):
    """Av(x; K, y) over the whole space."""
    if K < 1:
        raise ValueError("averaging scale K must be >= 1")
    y = np.asarray(y)
    configs = np.asarray(space.configs)
    d = np.abs(configs - y[None, :]).sum(axis=1)
    return np.clip((2 * K - 1 - d) / K, 0.0, 1.0)


def averaging_coefficients(space, K, y):
    """Diagonal operator with the averaging values on the diagonal."""
    vals = averaging_values(space, K, y)
    return WeightedOperator(space, np.diag(vals), is_generator=False,
                            is_pi_self_adjoint=True)


def config_distance(x, y, window):
    """Regular configuration distance sup_a |window ∩ [min(x_a,y_a), max(x_a,y_a))|.

    Symmetric and triangle-inequality compliant, but degenerate when the
    window misses the sweep intervals.
    """
    w = np.sort(np.asarray(window, dtype=np.intp))
    best = 0
    for xa, ya in zip(x, y):
        lo, hi = (xa, ya) if xa <= ya else (ya, xa)
        count = int(np.searchsorted(w, hi, side="left") - np.searchsorted(w, lo, side="left"))
        best = max(best, count)
    return best


def occupancy_fibers(space):
    """Group configuration indices by their colorblind image (occupancy pattern)."""
    fibers = {}
    for ix in range(space.size):
        key = tuple(int(k) // 2 for k in space.occ[ix])
        fibers.setdefault(key, []).append(ix)
    return {k: np.array(v, dtype=np.intp) for k, v in fibers.items()}


def colorblind_image(x, N):
    """eta with eta_i = n_i(x)/2."""
    return tuple(int(k) // 2 for k in occupancies(x, N))


def colorblind_transport(space, direction, f):
    """Pushforward (pi-weighted fiber average) or pullback along the colorblind map.

    pushforward: f is an array over the space; returns {eta: value}.
    pullback:    f is a mapping {eta: value}; returns an array over the space.
    """
    fibers = occupancy_fibers(space)
    if direction == "pushforward":
        f = np.asarray(f)
        out = {}
        for key, idxs in fibers.items():
            w = space.pi[idxs]
            out[key] = float(np.sum(w * f[idxs]) / np.sum(w))
        return out
    if direction == "pullback":
        g = np.zeros(space.size)
        for key, idxs in fibers.items():
            g[idxs] = f[key]
        return g
    raise ValueError(f"unknown direction {direction!r}")


def colorblind_projector(space):
    """phi^* phi_*: pi-orthogonal projection onto label-symmetric functions."""
    M = np.zeros((space.size, space.size))
    for idxs in occupancy_fibers(space).values():
        w = space.pi[idxs]
        M[np.ix_(idxs, idxs)] = w[None, :] / w.sum()
    return WeightedOperator(space, M, is_generator=False, is_pi_self_adjoint=True)
