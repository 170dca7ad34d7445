"""Pomeau-Manneville interval maps with an indifferent fixed point at 0.

The map has two full branches,

    T(x) = x (1 + c x^alpha)             on [0, x0)
    T(x) = (x - x0) / (1 - x0)           on [x0, 1]

so the left branch maps [0, x0) onto [0, 1) and the right branch is affine
onto [0, 1].  ``c`` is tied to ``x0`` by ``x0 (1 + c x0^alpha) = 1``.  The
Liverani-Saussol-Vaienti choice ``x0 = 1/2, c = 2^alpha`` is returned by
:func:`lsv`.

Everything here accepts scalars or numpy arrays.
"""
import math
from dataclasses import dataclass

import numpy as np

# Newton on the left branch converges from above; this is far more than needed.
_MAX_NEWTON = 200


@dataclass(frozen=True)
class PMMap:
    alpha: float
    c_alpha: float
    breakpoint: float
    name: str = "pm"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 < self.breakpoint < 1.0:
            raise ValueError(f"breakpoint must lie in (0, 1), got {self.breakpoint}")
        if self.c_alpha <= 0:
            raise ValueError(f"c_alpha must be positive, got {self.c_alpha}")
        x0 = self.breakpoint
        top = x0 * (1.0 + self.c_alpha * x0**self.alpha)
        if abs(top - 1.0) > 1e-12:
            raise ValueError(
                f"left branch must map onto [0, 1): x0(1 + c x0^alpha) = {top!r} != 1"
            )

    @property
    def right_slope(self):
        return 1.0 / (1.0 - self.breakpoint)

    def __call__(self, x):
        return evaluate(self, x)


def lsv(alpha):
    """The Liverani-Saussol-Vaienti map x(1 + (2x)^alpha), 2x - 1."""
    return PMMap(alpha=float(alpha), c_alpha=2.0 ** float(alpha), breakpoint=0.5, name="lsv")


def pm_map(alpha, breakpoint=0.5):
    """A map of the family with arbitrary breakpoint; c is solved for."""
    alpha = float(alpha)
    x0 = float(breakpoint)
    c = (1.0 / x0 - 1.0) / x0**alpha
    return PMMap(alpha=alpha, c_alpha=c, breakpoint=x0, name="pm")


def _check_domain(x):
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("argument outside [0, 1]")
    return arr


def _out(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def evaluate(m, x):
    """T(x)."""
    xa = _check_domain(x)
    x0 = m.breakpoint
    left = xa < x0
    xl = np.where(left, xa, 0.0)
    y = np.where(
        left,
        xl * (1.0 + m.c_alpha * xl**m.alpha),
        (xa - x0) * m.right_slope,
    )
    # keep the right branch exactly inside [0, 1]
    y = np.clip(y, 0.0, 1.0)
    return _out(y, x)


def derivative(m, x, side=None):
    """T'(x).

    At the breakpoint the derivative is one-sided and ``side`` must be
    ``"left"`` or ``"right"``; elsewhere ``side`` is ignored.
    """
    xa = _check_domain(x)
    x0 = m.breakpoint
    at_bp = xa == x0
    if np.any(at_bp) and side not in ("left", "right"):
        raise ValueError("derivative at the breakpoint needs side='left' or side='right'")
    left = (xa < x0) | (at_bp & (side == "left"))
    xl = np.where(left, xa, 0.0)
    d = np.where(left, 1.0 + m.c_alpha * (1.0 + m.alpha) * xl**m.alpha, m.right_slope)
    return _out(d, x)


def left_inverse(m, y):
    """Left-branch inverse on [0, 1], vectorised.

    Safeguarded Newton on f(x) = x + c x^(1+alpha) - y inside the bracket
    [0, min(y, x0)].  f is increasing and convex, so Newton started at the
    upper end decreases monotonically onto the root; the bracket only
    guards against rounding.
    """
    ya = _check_domain(y)
    a, c, x0 = m.alpha, m.c_alpha, m.breakpoint
    yv = np.atleast_1d(ya).astype(float)
    lo = np.zeros_like(yv)
    hi = np.minimum(yv, x0)
    x = hi.copy()
    active = yv > 0.0
    x[~active] = 0.0
    for _ in range(_MAX_NEWTON):
        if not active.any():
            break
        xa_ = x[active]
        ya_ = yv[active]
        xp = xa_**a
        f = xa_ + c * xa_ * xp - ya_
        fp = 1.0 + c * (1.0 + a) * xp
        lo_a, hi_a = lo[active], hi[active]
        # shrink the bracket with the sign of f
        pos = f > 0
        hi_a = np.where(pos, np.minimum(hi_a, xa_), hi_a)
        lo_a = np.where(pos, lo_a, np.maximum(lo_a, xa_))
        step = f / fp
        xn = xa_ - step
        bad = (xn <= lo_a) | (xn >= hi_a)
        xn = np.where(bad, 0.5 * (lo_a + hi_a), xn)
        done = (np.abs(step) <= 4e-16 * xa_) | (f == 0.0) | (hi_a - lo_a <= 4e-16 * hi_a)
        x[active] = np.where(done & bad, xa_, xn)
        lo[active], hi[active] = lo_a, hi_a
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    else:
        raise RuntimeError("left-branch inverse failed to converge (bracketed Newton)")
    x = np.where(yv >= 1.0, x0, x)
    return _out(x.reshape(np.shape(ya)), y)


def _left_inverse_scalar(m, y):
    # same iteration as left_inverse, without array overhead
    a, c = m.alpha, m.c_alpha
    if y <= 0.0:
        return 0.0
    if y >= 1.0:
        return m.breakpoint
    lo, hi = 0.0, min(y, m.breakpoint)
    x = hi
    for _ in range(_MAX_NEWTON):
        xp = math.pow(x, a)
        f = x + c * x * xp - y
        if f == 0.0:
            return x
        if f > 0:
            hi = min(hi, x)
        else:
            lo = max(lo, x)
        step = f / (1.0 + c * (1.0 + a) * xp)
        xn = x - step
        bad = xn <= lo or xn >= hi
        if bad:
            xn = 0.5 * (lo + hi)
        if abs(step) <= 4e-16 * x or hi - lo <= 4e-16 * hi:
            return x if bad else xn
        x = xn
    raise RuntimeError("left-branch inverse failed to converge (bracketed Newton)")


def right_inverse(m, y):
    ya = _check_domain(y)
    x0 = m.breakpoint
    x = x0 + ya * (1.0 - x0)
    return _out(np.minimum(x, 1.0), y)


def branch_inverse(m, y, branch):
    """The unique x on the given branch with T(x) = y."""
    if branch == "left":
        if np.any(np.asarray(y) >= 1.0):
            raise ValueError("left branch maps onto [0, 1); y = 1 has no left preimage")
        return left_inverse(m, y)
    if branch == "right":
        return right_inverse(m, y)
    raise ValueError(f"branch must be 'left' or 'right', got {branch!r}")


@dataclass(frozen=True)
class PreimageSequence:
    """x0 > x1 > ... > xn with T(x_k) = x_{k-1} on the left branch."""

    values: np.ndarray

    @property
    def length(self):
        return len(self.values)

    def __getitem__(self, k):
        return self.values[k]


def preimage_sequence(m, n):
    """Breakpoint followed by its first ``n`` left-branch preimages."""
    n = int(n)
    if n < 0:
        raise ValueError("n must be non-negative")
    xs = np.empty(n + 1)
    xs[0] = m.breakpoint
    for k in range(1, n + 1):
        xs[k] = _left_inverse_scalar(m, xs[k - 1])
    return PreimageSequence(xs)


def gamma_sequence(m, n, xs=None):
    """gamma_1 .. gamma_n, the right-branch preimages of x_0 .. x_{n-1}.

    gamma_k is the left end of the return-time-k cell of [x0, 1].
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    if xs is None:
        xs = preimage_sequence(m, n - 1).values
    return right_inverse(m, np.asarray(xs[:n]))
