"""Deterministic power iterations for Ulam-type matrices.

All iterations act on row vectors, v -> v P, which is how bin masses are
pushed forward.  Matrix-vector products use a CSR copy of P^T; scipy's CSR
kernel accumulates each row in a fixed order, so repeated runs are bitwise
identical.

Cost model: each iteration is one sparse product, O(nnz).  ``leading``
needs roughly log(1/tol) / (1 - |lambda_2|) iterations, ``second`` roughly
log(1/tol) / (1 - |lambda_3 / lambda_2|).  For Ulam matrices of intermittent
maps 1 - lambda_2 ~ N^-alpha, so iteration counts grow like N^alpha.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10**6


@dataclass
class SpectralResult:
    eigenvalue: float
    eigenvector: np.ndarray
    residual: float
    iterations: int
    converged: bool
    status: str = "converged"
    history: dict = field(default_factory=dict)


def _as_matrix(P):
    M = getattr(P, "matrix", P)
    if sp.issparse(M):
        return sp.csr_matrix(M)
    return sp.csr_matrix(np.asarray(M, dtype=float))


def _transpose(P):
    return _as_matrix(P).T.tocsr()


def leading(P, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, v0=None, callback=None):
    """Stationary vector of a row-stochastic matrix by power iteration.

    Starts from the uniform vector; stops when successive iterates differ by
    less than ``tol`` in L1.  The eigenvalue is the L1 norm of v P for the
    final normalised v.
    """
    PT = _transpose(P)
    n = PT.shape[0]
    v = np.full(n, 1.0 / n) if v0 is None else np.asarray(v0, dtype=float) / np.sum(v0)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        w = PT @ v
        w /= w.sum()
        if callback is not None:
            callback(it, w)
        diff = np.abs(w - v).sum()
        v = w
        if diff < tol:
            converged = True
            break
    vp = PT @ v
    lam = vp.sum()
    res = np.abs(vp - lam * v).sum()
    return SpectralResult(
        eigenvalue=float(lam),
        eigenvector=v,
        residual=float(res),
        iterations=it,
        converged=converged,
        status="converged" if converged else "max_iter",
    )


def substochastic_leading(P, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, v0=None, callback=None):
    """Leading eigenpair of a substochastic matrix (open system).

    Iterates the normalised map v -> vP / |vP|_1.  The eigenvalue is the
    surviving fraction |vP|_1 at the fixed point, i.e. the geometric escape
    factor; the eigenvector is the conditionally invariant bin-mass vector.
    """
    PT = _transpose(P)
    n = PT.shape[0]
    v = np.full(n, 1.0 / n) if v0 is None else np.asarray(v0, dtype=float) / np.sum(v0)
    lam_old = np.nan
    lam = np.nan
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        w = PT @ v
        lam = w.sum()
        if not lam > np.finfo(float).tiny:
            raise FloatingPointError("all mass escaped: degenerate hole")
        w /= lam
        if callback is not None:
            callback(it, w)
        diff = np.abs(w - v).sum()
        v = w
        if diff < tol and abs(lam - lam_old) < tol:
            converged = True
            break
        lam_old = lam
    vp = PT @ v
    lam = vp.sum()
    res = np.abs(vp - lam * v).sum()
    return SpectralResult(
        eigenvalue=float(lam),
        eigenvector=v,
        residual=float(res),
        iterations=it,
        converged=converged,
        status="converged" if converged else "max_iter",
    )


def default_seed(n):
    """+1 on the left half of the bins, -1 on the right half."""
    mid = (np.arange(n) + 0.5) / n
    return np.where(mid < 0.5, 1.0, -1.0)


def second(P, stationary, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, seed=None, callback=None):
    """Second eigenpair by power iteration on the zero-mass subspace.

    v -> vP preserves total mass, so the zero-sum subspace is invariant and
    contains every left eigenvector except the stationary one.  After each
    product the (rounding-level) mass is removed along the stationary
    vector and the iterate is renormalised in L1.  The eigenvalue is the
    Rayleigh-type ratio <wP, w>/<w, w>.

    ``status`` is ``"degenerate"`` when the estimate reaches 1 (reducible
    matrix) and ``"non_real_dominant"`` when the iteration does not settle
    because the iterates rotate in a plane carrying a complex pair; the
    pair is then in ``history["complex_pair"]``.
    """
    PT = _transpose(P)
    n = PT.shape[0]
    pi = np.asarray(getattr(stationary, "eigenvector", stationary), dtype=float)
    if pi.shape != (n,):
        raise ValueError("stationary vector does not match the matrix")
    pi = pi / pi.sum()
    w = default_seed(n) if seed is None else np.array(seed, dtype=float)
    w -= w.sum() * pi
    nrm = np.abs(w).sum()
    if nrm == 0:
        raise ValueError("seed has no component off the stationary vector")
    w /= nrm
    lam = np.nan
    lam_old = np.nan
    sign_flips = 0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        u = PT @ w
        u -= u.sum() * pi
        lam = float(np.dot(u, w) / np.dot(w, w))
        if callback is not None:
            callback(it, u)
        nrm = np.abs(u).sum()
        if nrm == 0:
            break
        u /= nrm
        sgn = -1.0 if lam < 0 else 1.0
        diff = np.abs(u - sgn * w).sum()
        if np.isfinite(lam_old) and lam * lam_old < 0 and abs(lam - lam_old) > tol:
            sign_flips += 1
        w = u
        if diff < tol and abs(lam - lam_old) < tol:
            converged = True
            break
        lam_old = lam
    u = PT @ w
    res = float(np.abs(u - lam * w).sum())
    status = "converged" if converged else "max_iter"
    history = {"sign_flips": sign_flips}
    if abs(lam) >= 1.0 - max(tol, 1e-12):
        status = "degenerate"
        converged = False
    elif not converged:
        pair = _complex_pair(PT, pi, w)
        if pair is not None:
            status = "non_real_dominant"
            history["complex_pair"] = pair
    return SpectralResult(
        eigenvalue=lam,
        eigenvector=w,
        residual=res,
        iterations=it,
        converged=converged,
        status=status,
        history=history,
    )


def _complex_pair(PT, pi, w):
    """Complex eigenvalue if w lies (numerically) in a 2-d invariant subspace
    carrying a complex-conjugate pair, else None.

    Fits w P^2 = c0 w + c1 w P by least squares; the pair is the roots of
    z^2 - c1 z - c0.
    """
    u = PT @ w
    u -= u.sum() * pi
    u2 = PT @ u
    u2 -= u2.sum() * pi
    B = np.column_stack([w, u])
    coef, *_ = np.linalg.lstsq(B, u2, rcond=None)
    fit = np.linalg.norm(B @ coef - u2) / max(np.linalg.norm(u2), np.finfo(float).tiny)
    c0, c1 = coef
    disc = c1 * c1 + 4.0 * c0
    if fit > 1e-6 or disc >= 0:
        return None
    return complex(0.5 * c1, 0.5 * np.sqrt(-disc))


def dense_spectrum(P):
    """All eigenvalues of a small matrix, sorted by decreasing real part."""
    A = _as_matrix(P).toarray()
    ev = np.linalg.eigvals(A)
    return ev[np.argsort(-ev.real)]
