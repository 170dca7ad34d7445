"""Quantitative summaries: two-state model, log-log fits, TV distances,
polynomial escape from a neighbourhood of 0, and the gap/epsilon table."""
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import maps, spectral, tower, ulam

# Reference (1 - lambda_2, eps2/eps1) for alpha = 0.5 from an earlier computation
# with a map of the same family whose exact coefficients are not known.
# Comparison only.
REFERENCE_TABLE = {
    100: (0.069494728128226, 0.060750416292176),
    200: (0.047118990434159, 0.042626262679704),
    500: (0.028582682402957, 0.026696029895732),
    1000: (0.019751285772241, 0.018706181316717),
    2000: (0.013727390048589, 0.013165183357731),
    5000: (0.008542396305559, 0.008301674655368),
    10000: (0.005988977377968, 0.005866565930472),
    20000: (0.004208535921532, 0.004150111773511),
    50000: (0.002646628586393, 0.002621525600809),
}


@dataclass(frozen=True)
class TwoStateModel:
    eps0: float
    a: float
    b: float

    @property
    def matrix(self):
        return np.array([[1.0 - self.a, self.a], [self.b, 1.0 - self.b]])

    @property
    def eigenvalues(self):
        return np.array([1.0, 1.0 - self.a - self.b])

    @property
    def invariant(self):
        s = self.a + self.b
        return np.array([self.b / s, self.a / s])


def _cell_measure(density, lo, hi):
    """Integral over [lo, hi) of a piecewise-constant density on a uniform grid."""
    d = np.asarray(density, dtype=float)
    N = len(d)
    cum = np.r_[0.0, np.cumsum(d) / N]

    def F(x):
        k = min(int(x * N), N - 1)
        return cum[k] + d[k] * (x - k / N)

    return F(hi) - F(lo)


def two_state(m, eps0, density=None):
    """Two-state chain on I1 = [0, eps0], I2 = (eps0, 1].

    Transition probabilities are measured with Lebesgue by default, or with
    the piecewise-constant ``density`` (on a uniform grid) when given.
    """
    eps0 = float(eps0)
    x0 = m.breakpoint
    if not 0.0 < eps0 < x0:
        raise ValueError(f"eps0 must lie in (0, {x0})")
    pre_left = maps.left_inverse(m, eps0)  # I1 points leaving I1 lie in (pre_left, eps0]
    pre_right = maps.right_inverse(m, eps0)  # I2 points entering I1 lie in [x0, pre_right]
    if density is None:
        a = (eps0 - pre_left) / eps0
        b = (pre_right - x0) / (1.0 - eps0)
    else:
        mu1 = _cell_measure(density, 0.0, eps0)
        mu2 = _cell_measure(density, eps0, 1.0)
        a = _cell_measure(density, pre_left, eps0) / mu1
        b = _cell_measure(density, x0, pre_right) / mu2
    return TwoStateModel(eps0=eps0, a=float(a), b=float(b))


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    r_squared: float
    log_x: np.ndarray = field(repr=False)
    log_y: np.ndarray = field(repr=False)

    def predict(self, x):
        return np.exp(self.intercept) * np.asarray(x, dtype=float) ** self.slope


def scaling_fit(points):
    """Least-squares line through (log x, log y)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise ValueError("need at least 3 (x, y) points")
    if np.any(pts <= 0) or not np.all(np.isfinite(pts)):
        raise ValueError("all coordinates must be positive and finite")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    if np.ptp(lx) == 0:
        raise ValueError("x values must not all coincide")
    if np.ptp(ly) == 0:
        # linregress reports r = 0 with a warning for flat data
        return ScalingFit(0.0, float(ly[0]), 1.0, lx, ly)
    res = stats.linregress(lx, ly)
    return ScalingFit(float(res.slope), float(res.intercept), float(res.rvalue**2), lx, ly)


def refine(p, n_fine):
    """Split each coarse bin mass uniformly over n_fine / len(p) fine bins."""
    p = np.asarray(p, dtype=float)
    n = len(p)
    if n_fine % n:
        raise ValueError(f"partition of {n} bins does not divide {n_fine} bins")
    k = n_fine // n
    return np.repeat(p / k, k)


def tv_distance(p, q):
    """Total variation (half L1) between bin-mass vectors on nested uniform grids."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    for v in (p, q):
        if np.any(v < -1e-15) or abs(v.sum() - 1.0) > 1e-9:
            raise ValueError("arguments must be probability vectors")
    n = max(len(p), len(q))
    if n % len(p) or n % len(q):
        raise ValueError(f"incompatible partitions: {len(p)} and {len(q)} bins")
    return 0.5 * float(np.abs(refine(p, n) - refine(q, n)).sum())


def escape_profile(m, eps0, K, rtol=1e-13):
    """Lebesgue measure of the k-step survivors in [0, eps0], k = 0..K.

    Survivors of k steps in I1 = [0, x_j] form [0, x_{j+k}], so the profile
    is the tail of the preimage sequence.
    """
    K = int(K)
    if K < 1:
        raise ValueError("K must be >= 1")
    eps0 = float(eps0)
    x0 = m.breakpoint
    if not 0.0 < eps0 <= x0:
        raise ValueError(f"eps0 must lie in (0, {x0}]")
    x = x0
    j = 0
    while x > eps0 * (1.0 + rtol):
        x = maps._left_inverse_scalar(m, x)
        j += 1
        if j > 10**7:
            break
    if abs(x - eps0) > rtol * eps0:
        raise ValueError("eps0 is not a preimage x_j of the breakpoint (non-Markov)")
    out = np.empty(K + 1)
    out[0] = eps0
    for k in range(1, K + 1):
        out[k] = maps._left_inverse_scalar(m, out[k - 1])
    return out


def density_tail_slope(density, window):
    """Log-log slope of a bin density against bin midpoints over a window.

    ``density`` is a bin-mass vector on a uniform grid of [0, 1];
    ``window = (i0, i1)`` selects bins i0..i1-1.
    """
    d = np.asarray(density, dtype=float)
    N = len(d)
    i0, i1 = int(window[0]), int(window[1])
    if i0 < 1:
        raise ValueError("window must exclude the first (singular) bin")
    if i1 > N or (i1 - 0.5) / (i0 + 0.5) < 10.0:
        raise ValueError("window must span at least one decade inside the grid")
    idx = np.arange(i0, i1)
    mid = (idx + 0.5) / N
    return scaling_fit(np.column_stack([mid, d[idx] * N])).slope


def bound_table(m, Ns, tol=1e-12, max_iter=spectral.DEFAULT_MAX_ITER):
    """Rows of (N, 1 - lambda_2, eps2/eps1) with eps = 1/(N T'(x0+)).

    1 - lambda_2 is computed both for the plain Ulam matrix and for the
    operator averaged over [0, eps0] rounded up to bins.  A failing row
    records its error and the remaining rows still run.
    """
    Ns = list(Ns)
    if not Ns:
        raise ValueError("Ns must be nonempty")
    slope = maps.derivative(m, m.breakpoint, side="right")
    rows = []
    for N in Ns:
        row = {"N": int(N)}
        try:
            P = ulam.assemble(m, N)
            eps = tower.epsilons(m, 1.0 / (N * slope))
            pi = spectral.leading(P, tol=tol, max_iter=max_iter)
            s2 = spectral.second(P, pi, tol=tol, max_iter=max_iter)
            eps0 = np.ceil(eps.eps0 * N - 1e-9) / N
            A = ulam.averaged_operator(P, m, eps0)
            pa = spectral.leading(A, tol=tol, max_iter=max_iter)
            sa = spectral.second(A, pa, tol=tol, max_iter=max_iter)
            row.update(
                n=eps.n,
                one_minus_lambda2=1.0 - s2.eigenvalue,
                one_minus_lambda2_averaged=1.0 - sa.eigenvalue,
                eps2_over_eps1=eps.ratio,
                bound_hi=eps.bound_hi,
                converged=bool(s2.converged and sa.converged),
                error="",
            )
        except Exception as exc:  # keep going, report per row
            row.update(error=f"{type(exc).__name__}: {exc}")
        if m.name == "lsv" and m.alpha == 0.5 and N in REFERENCE_TABLE:
            row["reference_one_minus_lambda2"], row["reference_eps2_over_eps1"] = REFERENCE_TABLE[N]
        rows.append(row)
    return rows


table1 = bound_table


def accim_convergence(m, Ns, N_ref=20000, tol=1e-12):
    """TV distance between the hole-[0, 1/N) conditionally invariant mass
    vector and the invariant mass vector at resolution N_ref."""
    ref = spectral.leading(ulam.assemble(m, N_ref), tol=tol).eigenvector
    rows = []
    for N in Ns:
        P = ulam.open_submatrix(ulam.assemble(m, N), [0])
        r = spectral.substochastic_leading(P, tol=tol)
        full = np.zeros(N)
        full[P.survivors] = r.eigenvector
        rows.append({"N": int(N), "tv": tv_distance(full, ref), "lambda_open": r.eigenvalue})
    return rows
