"""Ulam matrices for two-branch interval maps on uniform partitions.

Entries are computed exactly from branch preimages of bin edges: on each
branch, the preimage of a bin is an interval, so (P_N)_ij is the length of
J_i intersected with that interval, times N.  No quadrature or sampling.

Bins are 0-based here: bin k is [k/N, (k+1)/N), the last one closed.
"""
import hashlib
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import maps


@dataclass(frozen=True)
class UniformPartition:
    n_bins: int

    def __post_init__(self):
        if self.n_bins < 1:
            raise ValueError("n_bins must be positive")

    @property
    def edges(self):
        return np.arange(self.n_bins + 1) / self.n_bins

    @property
    def width(self):
        return 1.0 / self.n_bins

    @property
    def midpoints(self):
        return (np.arange(self.n_bins) + 0.5) / self.n_bins

    def bin(self, i):
        if not 0 <= i < self.n_bins:
            raise IndexError(i)
        return (i / self.n_bins, (i + 1) / self.n_bins)

    def locate(self, x):
        """Index of the bin containing x (the last bin is closed)."""
        k = np.floor(np.asarray(x, dtype=float) * self.n_bins).astype(int)
        return np.clip(k, 0, self.n_bins - 1)


@dataclass
class UlamMatrix:
    """Row-stochastic (closed) or substochastic (open) transition matrix.

    ``matrix`` acts on row vectors of bin masses: v -> v @ matrix.  For open
    matrices ``survivors`` lists the original bin of each row/column.
    """

    matrix: sp.csr_matrix
    partition: UniformPartition
    kind: str = "closed"
    survivors: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("closed", "open", "averaged"):
            raise ValueError(f"unknown kind {self.kind!r}")
        self.matrix = sp.csr_matrix(self.matrix)
        if self.survivors is None:
            self.survivors = np.arange(self.partition.n_bins)
        self.survivors = np.asarray(self.survivors, dtype=np.int64)
        if self.matrix.shape != (len(self.survivors),) * 2:
            raise ValueError("matrix shape does not match the surviving bins")

    @property
    def N(self):
        return self.partition.n_bins

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def nnz(self):
        return self.matrix.nnz

    def row_sums(self):
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def toarray(self):
        return self.matrix.toarray()


def overlap_lengths(src_edges, pre_edges, return_start=False):
    """Lengths of all nonempty intersections between two interval partitions.

    ``src_edges`` and ``pre_edges`` are increasing breakpoints.  Returns
    ``(i, j, length)`` where cell i of the first partition meets cell j of
    the second in a segment of the given length (plus the segment's left
    end when ``return_start``).  Only the common span is considered.
    """
    src_edges = np.asarray(src_edges, dtype=float)
    pre_edges = np.asarray(pre_edges, dtype=float)
    lo = max(src_edges[0], pre_edges[0])
    hi = min(src_edges[-1], pre_edges[-1])
    pts = np.concatenate([
        src_edges[(src_edges > lo) & (src_edges < hi)],
        pre_edges[(pre_edges > lo) & (pre_edges < hi)],
        [lo, hi],
    ])
    pts = np.unique(pts)
    seg = np.diff(pts)
    keep = seg > 0
    left = pts[:-1][keep]
    seg = seg[keep]
    # segments contain no breakpoint in their interior, so the left end
    # identifies the cells exactly (a midpoint can round onto a breakpoint)
    i = np.searchsorted(src_edges, left, side="right") - 1
    j = np.searchsorted(pre_edges, left, side="right") - 1
    ok = (i >= 0) & (i < len(src_edges) - 1) & (j >= 0) & (j < len(pre_edges) - 1)
    if return_start:
        return i[ok], j[ok], seg[ok], left[ok]
    return i[ok], j[ok], seg[ok]


def _branch_segments(m, N, hole=0.0):
    """(row, col, length) triples over both branches.

    With ``hole > 0`` only points x >= hole with T(x) >= hole contribute.
    """
    edges = np.arange(N + 1) / N
    x0 = m.breakpoint
    rows, cols, vals = [], [], []
    for branch in ("left", "right"):
        if branch == "left":
            pre = maps.left_inverse(m, edges)
            pre[-1] = x0
            lo, hi = 0.0, x0
        else:
            pre = maps.right_inverse(m, edges)
            pre[0], pre[-1] = x0, 1.0
            lo, hi = x0, 1.0
        src = np.concatenate([[lo], edges[(edges > lo) & (edges < hi)], [hi]])
        cut = 0.0
        if hole > 0.0:
            cut = maps.branch_inverse(m, hole, branch)
            src = np.unique(np.concatenate([src, [p for p in (hole, cut) if lo < p < hi]]))
        i, j, seg, start = overlap_lengths(src, pre, return_start=True)
        if hole > 0.0:
            mid = start + 0.5 * seg
            ok = (mid >= hole) & (mid >= cut)
            i, j, seg = i[ok], j[ok], seg[ok]
        row = np.searchsorted(edges, src[i], side="right") - 1
        rows.append(row)
        cols.append(j)
        # divide by the float width of the bin so rows telescope to 1
        vals.append(seg / (edges[row + 1] - edges[row]))
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def _meta(m, N, kind, **extra):
    d = {"map": m.name, "alpha": m.alpha, "N": N, "kind": kind, "breakpoint": m.breakpoint}
    d.update(extra)
    return d


def assemble(m, N):
    """Closed Ulam matrix P_N of the map on N uniform bins."""
    N = int(N)
    if N < 2:
        raise ValueError("N must be >= 2")
    r, c, v = _branch_segments(m, N)
    P = sp.coo_matrix((v, (r, c)), shape=(N, N)).tocsr()
    P.sum_duplicates()
    P.eliminate_zeros()
    return UlamMatrix(P, UniformPartition(N), "closed", meta=_meta(m, N, "closed"))


def open_submatrix(P, hole_bins):
    """Restriction of a closed Ulam matrix to the bins outside ``hole_bins``."""
    if P.kind != "closed":
        raise ValueError("open_submatrix expects a closed matrix")
    hole = np.unique(np.asarray(sorted(hole_bins), dtype=np.int64))
    if hole.size and (hole.min() < 0 or hole.max() >= P.N):
        raise ValueError("hole bin index out of range")
    if hole.size == 0:
        return P
    keep = np.setdiff1d(np.arange(P.N), hole)
    if keep.size == 0:
        raise ValueError("hole covers every bin")
    sub = P.matrix[keep][:, keep]
    meta = dict(P.meta, kind="open")
    return UlamMatrix(sub, P.partition, "open", survivors=keep, meta=meta)


def open_exact(m, N, hole):
    """Ulam matrix of the conditional operator with the exact hole [0, hole).

    The hole need not be bin-aligned: the bin straddling ``hole`` keeps only
    its surviving part, and rows are still normalised by the full bin width
    (Ulam projection of chi_A P(chi_A f), A = [hole, 1]).
    """
    N = int(N)
    hole = float(hole)
    if not 0.0 < hole < 1.0:
        raise ValueError("hole boundary must lie in (0, 1)")
    r, c, v = _branch_segments(m, N, hole=hole)
    first = min(int(np.floor(hole * N)), N - 1)
    keep = np.arange(first, N)
    P = sp.coo_matrix((v, (r - first, c - first)), shape=(keep.size, keep.size)).tocsr()
    P.sum_duplicates()
    P.eliminate_zeros()
    meta = _meta(m, N, "open", hole=hole)
    return UlamMatrix(P, UniformPartition(N), "open", survivors=keep, meta=meta)


def rho_bin_masses(m, N, k):
    """Bin masses over the first k bins of the push-forward density rho.

    rho is the image under the right branch of the uniform density on the
    right-branch preimage of [0, k/N).
    """
    edges = np.arange(k + 1) / N
    pre = maps.right_inverse(m, edges)
    eps1 = pre[-1] - pre[0]
    return np.diff(pre) / eps1


def averaged_operator(P, m, eps0):
    """P followed by pooling of all mass in [0, eps0) redistributed by rho.

    ``eps0`` must be a multiple of the bin width; eps0 = 0 returns P.
    """
    if P.kind != "closed":
        raise ValueError("averaged_operator expects a closed matrix")
    N = P.N
    k = int(round(eps0 * N))
    if abs(k - eps0 * N) > 1e-9 * max(1.0, eps0 * N) or k < 0 or k >= N:
        raise ValueError(f"eps0={eps0} is not aligned to the N={N} partition")
    if k == 0:
        return P
    w = rho_bin_masses(m, N, k)
    A = sp.lil_matrix((N, N))
    for j in range(k):
        A[j, :k] = w
    A = A.tocsr() + sp.diags(np.r_[np.zeros(k), np.ones(N - k)]).tocsr()
    M = (P.matrix @ A).tocsr()
    M.eliminate_zeros()
    meta = dict(P.meta, kind="averaged", eps0=k / N)
    return UlamMatrix(M, P.partition, "averaged", meta=meta)


# --------------------------------------------------------------------------
# Matrix Market persistence


class MatrixFileError(ValueError):
    """Malformed or inconsistent matrix file; ``line`` is 1-based or None."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = f"{path}:{line}: " if line is not None else (f"{path}: " if path else "")
        super().__init__(where + message)


def _fmt(x):
    return format(float(x), ".17g")


def _compress_ranges(idx):
    idx = np.asarray(idx)
    if idx.size == 0:
        return ""
    breaks = np.flatnonzero(np.diff(idx) != 1)
    starts = np.r_[idx[0], idx[breaks + 1]]
    stops = np.r_[idx[breaks], idx[-1]]
    return ",".join(f"{a}-{b}" if a != b else f"{a}" for a, b in zip(starts, stops))


def _expand_ranges(text):
    out = []
    for part in text.split(","):
        if not part:
            continue
        if "-" in part:
            a, b = part.split("-")
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return np.asarray(out, dtype=np.int64)


def _data_lines(M):
    coo = M.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    return [
        f"{r + 1} {c + 1} {_fmt(v)}"
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order])
    ]


def save(M, path):
    """Write M as Matrix Market coordinate text with a metadata header."""
    lines = _data_lines(M)
    digest = hashlib.sha256("\n".join(lines).encode()).hexdigest()
    meta = dict(M.meta)
    meta.setdefault("map", "pm")
    meta.setdefault("alpha", float("nan"))
    meta["N"] = M.N
    meta["kind"] = M.kind
    head = [
        "%%MatrixMarket matrix coordinate real general",
        "% map={} alpha={} N={} kind={}".format(
            meta["map"], _fmt(meta["alpha"]), meta["N"], meta["kind"]
        ),
    ]
    extra = {k: v for k, v in meta.items() if k not in ("map", "alpha", "N", "kind")}
    for k in sorted(extra):
        v = extra[k]
        head.append(f"% {k}={_fmt(v) if isinstance(v, float) else v}")
    if M.kind == "open":
        head.append(f"% survivors={_compress_ranges(M.survivors)}")
    head.append(f"% sha256={digest}")
    rows, cols = M.shape
    head.append(f"{rows} {cols} {len(lines)}")
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write("\n".join(head + lines) + "\n")
    os.replace(tmp, path)


def _parse_value(v):
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v


def load(path):
    """Read a file written by :func:`save`; raises MatrixFileError."""
    path = str(path)
    with open(path) as fh:
        text = fh.read().splitlines()
    if not text or not text[0].startswith("%%MatrixMarket matrix coordinate real general"):
        raise MatrixFileError("missing or unsupported MatrixMarket banner", path, 1)
    meta = {}
    ln = 1
    while ln < len(text) and text[ln].startswith("%"):
        for tok in text[ln][1:].split():
            if "=" not in tok:
                raise MatrixFileError(f"bad metadata token {tok!r}", path, ln + 1)
            k, v = tok.split("=", 1)
            meta[k] = v
        ln += 1
    for key in ("N", "kind", "sha256"):
        if key not in meta:
            raise MatrixFileError(f"metadata lacks {key!r}", path, ln)
    if ln >= len(text):
        raise MatrixFileError("missing size line", path, ln + 1)
    try:
        rows, cols, nnz = (int(t) for t in text[ln].split())
    except ValueError:
        raise MatrixFileError(f"bad size line {text[ln]!r}", path, ln + 1) from None
    size_line = ln + 1
    data = text[ln + 1:]
    if len(data) != nnz:
        raise MatrixFileError(
            f"expected {nnz} entries, found {len(data)} (truncated file?)",
            path,
            size_line + len(data) + (0 if len(data) > nnz else 1),
        )
    r = np.empty(nnz, dtype=np.int64)
    c = np.empty(nnz, dtype=np.int64)
    v = np.empty(nnz)
    for k, line in enumerate(data):
        parts = line.split()
        try:
            if len(parts) != 3:
                raise ValueError
            r[k], c[k], v[k] = int(parts[0]) - 1, int(parts[1]) - 1, float(parts[2])
        except ValueError:
            raise MatrixFileError(f"malformed entry {line!r}", path, size_line + k + 1) from None
        if not (0 <= r[k] < rows and 0 <= c[k] < cols):
            raise MatrixFileError(f"index out of range in {line!r}", path, size_line + k + 1)
    digest = hashlib.sha256("\n".join(data).encode()).hexdigest()
    if digest != meta["sha256"]:
        raise MatrixFileError("checksum mismatch", path)
    N = int(meta["N"])
    kind = meta["kind"]
    survivors = None
    if kind == "open":
        survivors = _expand_ranges(meta.get("survivors", ""))
    elif rows != N or cols != N:
        raise MatrixFileError(f"dimension mismatch: {rows}x{cols} for N={N}", path, size_line)
    if survivors is not None and len(survivors) != rows:
        raise MatrixFileError("dimension mismatch with survivor list", path, size_line)
    out_meta = {k: _parse_value(val) for k, val in meta.items() if k not in ("sha256", "survivors")}
    mat = sp.coo_matrix((v, (r, c)), shape=(rows, cols)).tocsr()
    try:
        return UlamMatrix(mat, UniformPartition(N), kind, survivors=survivors, meta=out_meta)
    except ValueError as exc:
        raise MatrixFileError(str(exc), path) from None


def cache_path(cache_dir, m, N, kind="closed"):
    return os.path.join(str(cache_dir), f"{m.name}_a{_fmt(m.alpha)}_x{_fmt(m.breakpoint)}_N{int(N)}_{kind}.mtx")


def cached_assemble(m, N, cache_dir=None):
    """assemble() backed by an on-disk cache; returns (matrix, hit)."""
    if cache_dir is None:
        return assemble(m, N), False
    os.makedirs(cache_dir, exist_ok=True)
    path = cache_path(cache_dir, m, N)
    if os.path.exists(path):
        try:
            M = load(path)
            md = M.meta
            if (
                md.get("map") == m.name
                and float(md.get("alpha")) == m.alpha
                and float(md.get("breakpoint", "nan")) == m.breakpoint
                and int(md.get("N")) == int(N)
                and M.kind == "closed"
            ):
                return M, True
        except (MatrixFileError, OSError, ValueError):
            pass
    M = assemble(m, N)
    save(M, path)
    return M, False
