"""First-return (Young) tower over [x0, 1] and its hole-truncated version.

The base [x0, 1] is cut into return-time cells D_i = [gamma_i, gamma_{i-1})
(gamma_0 = 1).  A point of D_i climbs i - 1 levels by pure translation and
then returns to the base through T^i, a full branch onto [x0, 1].  The hole
H_n removes everything above the cells with i > n, so its preimage in the
base is H_n^1 = [x0, gamma_n).

Because climbing has Jacobian 1, the open tower is simulated with a queue
of base vectors: level l holds the base vector from l steps ago, restricted
to the columns taller than l.  One step pushes the top of every column
back to the base through its return matrix B_i.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import maps
from .ulam import overlap_lengths


@dataclass(frozen=True)
class ReturnPartition:
    x0: float
    gammas: np.ndarray  # gamma_0 = 1, gamma_1, ..., gamma_{n_max}

    @property
    def n_max(self):
        return len(self.gammas) - 1

    def column(self, i):
        """Endpoints (gamma_i, gamma_{i-1}) of the return-time-i cell."""
        if not 1 <= i <= self.n_max:
            raise IndexError(i)
        return self.gammas[i], self.gammas[i - 1]

    @property
    def masses(self):
        return -np.diff(self.gammas)

    @property
    def tail(self):
        """Length of [x0, gamma_{n_max}), the union of all deeper cells."""
        return self.gammas[-1] - self.x0


def build_return_partition(m, n_max):
    n_max = int(n_max)
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    g = maps.gamma_sequence(m, n_max)
    return ReturnPartition(m.breakpoint, np.r_[1.0, g])


@dataclass
class TruncatedTower:
    m: maps.PMMap
    n: int
    M: int
    gammas: np.ndarray
    return_matrices: list
    col_weights: np.ndarray  # (n, M): share of each base bin lying in D_i

    @property
    def x0(self):
        return self.m.breakpoint

    @property
    def hole_boundary(self):
        return self.gammas[self.n]

    @property
    def bin_width(self):
        return (1.0 - self.x0) / self.M

    @property
    def edges(self):
        return self.x0 + np.arange(self.M + 1) * self.bin_width

    @property
    def escape_weights(self):
        """Share of each base bin lying in H_n^1 = [x0, gamma_n)."""
        return np.clip(1.0 - self.col_weights.sum(axis=0), 0.0, 1.0)

    def restrict(self, n):
        """The same tower with the shallower hole H_n (reuses B_1..B_n)."""
        if not 2 <= n <= self.n:
            raise ValueError(f"hole depth must lie in [2, {self.n}]")
        return TruncatedTower(self.m, n, self.M, self.gammas[: n + 1],
                              self.return_matrices[:n], self.col_weights[:n])

    def level_weights(self):
        """(n, M) array; row l is the share of each bin in columns i > l.

        Row 0 is identically 1 (the whole base, hole preimage included).
        """
        W = np.empty((self.n, self.M))
        W[0] = 1.0
        # suffix sums over columns l+1..n
        suffix = np.cumsum(self.col_weights[::-1], axis=0)[::-1]
        W[1:] = suffix[1:]
        return W


def _return_matrix(m, i, edges, gammas, chains):
    """Ulam matrix (rows: base bins, cols: base bins) of T^i restricted to D_i."""
    M = len(edges) - 1
    # preimage under T^i|D_i of the base edges: right branch of L^{i-1}
    pre = maps.right_inverse(m, chains[i - 1])
    pre[0], pre[-1] = gammas[i], gammas[i - 1]
    src = np.unique(np.r_[gammas[i], edges[(edges > gammas[i]) & (edges < gammas[i - 1])], gammas[i - 1]])
    a, b, seg = overlap_lengths(src, pre)
    rows = np.searchsorted(edges, src[a], side="right") - 1
    rows = np.clip(rows, 0, M - 1)
    width = edges[rows + 1] - edges[rows]
    B = sp.coo_matrix((seg / width, (rows, b)), shape=(M, M)).tocsr()
    B.sum_duplicates()
    return B


def build_truncated_tower(m, n, M=4096):
    """Return matrices B_1..B_n on an M-bin partition of the base [x0, 1]."""
    n, M = int(n), int(M)
    if n < 2:
        raise ValueError("hole depth n must be >= 2")
    if M < 16:
        raise ValueError("base resolution M must be >= 16")
    x0 = m.breakpoint
    edges = x0 + np.arange(M + 1) * ((1.0 - x0) / M)
    edges[-1] = 1.0
    xs = maps.preimage_sequence(m, n).values
    gammas = np.r_[1.0, maps.right_inverse(m, xs[:n + 1])]
    # chains[k] = L^k(edges), the left-branch ladder from the base to level k
    chains = [edges.copy()]
    for k in range(1, n):
        prev = chains[-1]
        nxt = maps.left_inverse(m, prev)
        nxt[0], nxt[-1] = xs[k], xs[k - 1]
        chains.append(nxt)
    chains[0] = edges.copy()
    chains[0][-1] = 1.0
    Bs = [_return_matrix(m, i, edges, gammas, chains) for i in range(1, n + 1)]
    colw = np.vstack([np.asarray(B.sum(axis=1)).ravel() for B in Bs])
    return TruncatedTower(m, n, M, gammas, Bs, colw)


@dataclass
class AccimResult:
    lambda_n: float
    base_density: np.ndarray  # density of the tower eigenfunction on the base bins
    hole_mass: float  # mu_n(H_n^1)
    iterations: int
    converged: bool
    tower: TruncatedTower
    queue: np.ndarray  # (n, M) bin masses per level, total tower mass 1
    diagnostics: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.tower.n

    def level_density(self, level):
        """Density values on the given level, NaN on bins outside its support."""
        t = self.tower
        W = t.level_weights()[level]
        dens = self.queue[level] / t.bin_width
        return np.where(W > 0, dens, np.nan)


def accim_fixed_point(
    m,
    n,
    M=4096,
    tol=1e-12,
    max_iter=200000,
    tower=None,
    seed=None,
    check_accounting=True,
):
    """Conditionally invariant density of the open tower with hole H_n.

    Iterates the normalised conditional transfer operator on the truncated
    tower.  ``seed`` is an optional (n, M) array of initial bin masses per
    level (default: Lebesgue lifted to the tower).  Returns the eigenvalue
    lambda_n (surviving mass fraction per step) and the base density.
    """
    t = tower if tower is not None else build_truncated_tower(m, n, M)
    n, M = t.n, t.M
    W = t.level_weights()
    esc = t.escape_weights
    Bcat = sp.vstack(t.return_matrices).T.tocsr()  # (M, n*M)

    if seed is None:
        Q = np.full((n, M), t.bin_width)
    else:
        Q = np.array(seed, dtype=float)
        if Q.shape != (n, M):
            raise ValueError("seed must have shape (n, M)")
    Q /= np.sum(Q * W)

    lam_old = np.nan
    lam = np.nan
    worst = 0.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        before = np.sum(Q * W)
        escaped = float(Q[0] @ esc)
        new_base = Bcat @ Q.ravel()
        Qn = np.empty_like(Q)
        Qn[0] = new_base
        Qn[1:] = Q[:-1]
        after = np.sum(Qn * W)
        if not after > 1e-300:
            raise FloatingPointError("tower mass underflow: hole too large for this resolution")
        if check_accounting:
            worst = max(worst, abs(before - after - escaped))
        lam = after / before
        Qn /= after
        diff = np.abs(Qn[0] - Q[0]).sum()
        Q = Qn
        if diff < tol and abs(lam - lam_old) < tol:
            converged = True
            break
        lam_old = lam

    hole_mass = float(Q[0] @ esc)
    return AccimResult(
        lambda_n=float(lam),
        base_density=Q[0] / t.bin_width,
        hole_mass=hole_mass,
        iterations=it,
        converged=converged,
        tower=t,
        queue=Q,
        diagnostics={
            "max_accounting_error": worst,
            "hole_measure": t.hole_boundary - t.x0,
        },
    )


def closed_base_density(m, M=4096, n_max=2000):
    """Invariant density of the first-return map on [x0, 1], M bins.

    Columns deeper than ``n_max`` are lumped into a uniform return; their
    total measure is reported so callers can judge the truncation.
    """
    t = build_truncated_tower(m, n_max, M)
    S = sum(t.return_matrices).tocsr()
    tail = 1.0 - np.asarray(S.sum(axis=1)).ravel()
    S = S + sp.csr_matrix(np.outer(tail, np.full(M, 1.0 / M)))
    from .spectral import leading

    res = leading(S, tol=1e-13)
    return res.eigenvector / t.bin_width, t.hole_boundary - t.x0


def accim_bounds_check(results):
    """Uniform-bound diagnostics for a family of converged tower ACCIMs.

    For each result: min and max of the tower eigenfunction over the whole
    truncated tower, the base max/min ratio, and the escape ratio
    -log(lambda_n) / nu(H_n^1).
    """
    rows = []
    for r in results:
        if r.n < 2:
            raise ValueError("hole depth must be >= 2")
        lows, highs = [], []
        for level in range(r.n):
            d = r.level_density(level)
            d = d[np.isfinite(d)]
            if d.size:
                lows.append(d.min())
                highs.append(d.max())
        base = r.base_density
        nu_h = r.tower.hole_boundary - r.tower.x0
        rows.append({
            "n": r.n,
            "lambda_n": r.lambda_n,
            "min": float(min(lows)),
            "max": float(max(highs)),
            "base_ratio": float(base.max() / base.min()),
            "escape_ratio": float(-np.log(r.lambda_n) / nu_h),
        })
    ratios = [row["base_ratio"] for row in rows]
    esc = [row["escape_ratio"] for row in rows]
    return {
        "rows": rows,
        "global_min": min(row["min"] for row in rows),
        "global_max": max(row["max"] for row in rows),
        "base_ratio_spread": max(ratios) / min(ratios),
        "escape_ratio_range": (min(esc), max(esc)),
    }


@dataclass(frozen=True)
class TowerEpsilons:
    eps: float
    n: int
    eps1: float
    eps2: float
    eps0: float  # x_{n-1} = T(gamma_n), the matching interval scale

    @property
    def ratio(self):
        return self.eps2 / self.eps1

    @property
    def bound_lo(self):
        return self.eps2 / self.eps1

    @property
    def bound_hi(self):
        return 2.0 * self.eps2 / self.eps1


def epsilons(m, eps):
    """Minimal hole depth n with nu(H_n^1) <= eps, and eps1, eps2 for it."""
    eps = float(eps)
    x0 = m.breakpoint
    if not 0.0 < eps < 1.0 - x0:
        raise ValueError(f"eps must lie in (0, {1 - x0})")
    xs = [x0]
    # nu(H_n^1) = gamma_n - x0 = (1 - x0) x_{n-1}
    while (1.0 - x0) * xs[-1] > eps:
        xs.append(maps._left_inverse_scalar(m, xs[-1]))
    n = len(xs)  # xs[-1] = x_{n-1}
    if n < 2:
        raise ValueError("eps too large: hole depth would be < 2")
    xs.append(maps._left_inverse_scalar(m, xs[-1]))
    g_n = maps.right_inverse(m, xs[n - 1])
    g_n1 = maps.right_inverse(m, xs[n])
    return TowerEpsilons(eps=eps, n=n, eps1=g_n - x0, eps2=g_n - g_n1, eps0=xs[n - 1])


def fit_constants(m, eps_values):
    """Observed d1 (n <= d1 eps^-alpha) and d2, d3 (d2 eps1/n <= eps2 <= d3 eps1/n)."""
    es = [epsilons(m, e) for e in eps_values]
    d1 = max(e.n * e.eps**m.alpha for e in es)
    k = [e.eps2 * e.n / e.eps1 for e in es]
    return {"d1": d1, "d2": min(k), "d3": max(k)}
