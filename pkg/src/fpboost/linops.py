"""Matrix storage, matrix-vector products and exponential-series actions.

Matrices are square and real. Small ones are held densely, large ones as
CSR; both expose the same ``matvec``. Nothing here ever forms a matrix
power: the truncated exponential is applied term by term.
"""

from __future__ import annotations

import os
from typing import Iterable, Sequence

import numpy as np
import scipy.io
import scipy.sparse as sp

from .errors import NumericalRangeError

DENSE_MAX_N = 512


class Matrix:
    """A square real matrix, dense (``ndarray``) or CSR (``scipy.sparse``).

    Instances are treated as immutable; the underlying arrays are marked
    read-only on construction.
    """

    __slots__ = ("_data",)

    def __init__(self, data):
        if sp.issparse(data):
            data = sp.csr_matrix(data, dtype=np.float64)
            data.sort_indices()
            _check_csr(data.indptr, data.indices, data.data, data.shape)
            for arr in (data.data, data.indices, data.indptr):
                arr.flags.writeable = False
        else:
            data = np.array(data, dtype=np.float64)
            if data.ndim != 2 or data.shape[0] != data.shape[1]:
                raise ValueError(f"matrix must be square, got shape {data.shape}")
            if not np.all(np.isfinite(data)):
                raise ValueError("matrix has NaN or Inf entries")
            data.flags.writeable = False
        self._data = data

    @classmethod
    def from_dense(cls, array, storage: str = "auto") -> "Matrix":
        """Build from a 2-D array; ``storage`` is ``"auto"``, ``"dense"`` or ``"csr"``."""
        array = np.asarray(array, dtype=np.float64)
        if storage == "auto":
            storage = "dense" if array.shape[0] <= DENSE_MAX_N else "csr"
        if storage == "csr":
            return cls(sp.csr_matrix(array))
        if storage == "dense":
            return cls(array)
        raise ValueError(f"unknown storage {storage!r}")

    @classmethod
    def from_csr(cls, indptr, indices, values, n: int) -> "Matrix":
        indptr = np.asarray(indptr, dtype=np.int64)
        indices = np.asarray(indices, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        _check_csr(indptr, indices, values, (n, n))
        return cls(sp.csr_matrix((values, indices, indptr), shape=(n, n)))

    @property
    def n(self) -> int:
        return self._data.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self._data)

    def toarray(self) -> np.ndarray:
        if self.is_sparse:
            return self._data.toarray()
        return np.array(self._data)

    def matvec(self, x) -> np.ndarray:
        return matvec(self, x)

    def norm_inf(self) -> float:
        """Max absolute row sum."""
        if self.is_sparse:
            return float(abs(self._data).sum(axis=1).max()) if self._data.nnz else 0.0
        return float(np.abs(self._data).sum(axis=1).max())

    def __matmul__(self, x):
        return matvec(self, x)

    def __repr__(self):
        kind = "csr" if self.is_sparse else "dense"
        return f"Matrix(n={self.n}, storage={kind})"


def _check_csr(indptr, indices, values, shape):
    n_rows, n_cols = shape
    if n_rows != n_cols:
        raise ValueError(f"matrix must be square, got shape {shape}")
    if len(indptr) != n_rows + 1 or indptr[0] != 0:
        raise ValueError("CSR row offsets must have length n+1 and start at 0")
    if np.any(np.diff(indptr) < 0):
        raise ValueError("CSR row offsets must be nondecreasing")
    if indptr[-1] != len(values) or len(indices) != len(values):
        raise ValueError("CSR final offset must equal nnz")
    if len(indices) and (indices.min() < 0 or indices.max() >= n_cols):
        raise ValueError("CSR column index out of range")
    if not np.all(np.isfinite(values)):
        raise ValueError("matrix has NaN or Inf entries")


def as_matrix(obj) -> Matrix:
    if isinstance(obj, Matrix):
        return obj
    if sp.issparse(obj):
        return Matrix(obj)
    return Matrix.from_dense(obj)


def as_dense(obj) -> np.ndarray:
    """Dense float array view of a Matrix, sparse matrix or array-like."""
    if isinstance(obj, Matrix):
        return obj.toarray()
    if sp.issparse(obj):
        return obj.toarray()
    arr = np.asarray(obj, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"matrix must be square, got shape {arr.shape}")
    return arr


def matvec(A, x) -> np.ndarray:
    """Return ``A @ x`` with a dimension check."""
    A = as_matrix(A)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (A.n,):
        raise ValueError(f"dimension mismatch: matrix is {A.n}x{A.n}, vector has shape {x.shape}")
    return np.asarray(A._data @ x, dtype=np.float64)


def truncated_exp_apply(A, alpha: float, m: int, x) -> np.ndarray:
    """Apply ``sum_{k=0}^{m} (alpha A)^k / k!`` to ``x``.

    Uses the recurrence ``t_0 = x``, ``t_k = (alpha / k) A t_{k-1}`` so the
    cost is ``m`` matrix-vector products.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if m < 0 or int(m) != m:
        raise ValueError("truncation order m must be a nonnegative integer")
    A = as_matrix(A)
    term = np.array(x, dtype=np.float64)
    if term.shape != (A.n,):
        raise ValueError(f"dimension mismatch: matrix is {A.n}x{A.n}, vector has shape {term.shape}")
    total = term.copy()
    for k in range(1, int(m) + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            term = (alpha / k) * matvec(A, term)
            total += term
        if not (np.all(np.isfinite(term)) and np.all(np.isfinite(total))):
            raise NumericalRangeError(f"exponential series overflowed at term {k}")
    return total


def exp_apply(A, alpha: float, x, rtol: float = 1e-14, max_terms: int = 10_000):
    """Apply ``exp(alpha A)`` to ``x`` by summing the series until it settles.

    Terms are added until the next term's norm falls below ``rtol`` times
    the accumulated norm, and never before ``k`` exceeds ``alpha * ||A||_inf``
    (before that point term norms may still grow). Returns ``(y, m)`` with
    ``m`` the number of terms used beyond the zeroth.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    A = as_matrix(A)
    term = np.array(x, dtype=np.float64)
    if term.shape != (A.n,):
        raise ValueError(f"dimension mismatch: matrix is {A.n}x{A.n}, vector has shape {term.shape}")
    total = term.copy()
    k_min = alpha * A.norm_inf()
    for k in range(1, max_terms + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            term = (alpha / k) * matvec(A, term)
            total += term
        if not (np.all(np.isfinite(term)) and np.all(np.isfinite(total))):
            raise NumericalRangeError(f"exponential series overflowed at term {k}")
        if k >= k_min and np.linalg.norm(term) <= rtol * np.linalg.norm(total):
            return total, k
    raise NumericalRangeError(f"exponential series did not settle within {max_terms} terms")


def pade33_exp(x: float) -> float:
    """[3/3] Pade approximant of ``exp(x)``.

    The denominator vanishes near ``x = 4.644``; values within 1e-12 of a
    pole raise ``NumericalRangeError``.
    """
    x = float(x)
    x2 = x * x
    x3 = x2 * x
    num = 120.0 + 60.0 * x + 12.0 * x2 + x3
    den = 120.0 - 60.0 * x + 12.0 * x2 - x3
    if abs(den) <= 1e-12:
        raise NumericalRangeError(f"pade33_exp: x={x} is at a pole of the approximant")
    return num / den


def google_matrix(edges: Iterable[tuple[int, int]], n: int, d: float = 0.85) -> Matrix:
    """Damped PageRank operator ``d S + (1 - d)/n * ones``.

    ``S`` is column-stochastic: column ``j`` spreads node ``j``'s weight over
    its out-links. Nodes without out-links get a uniform column. Every
    column of the result sums to one.
    """
    if n <= 0:
        raise ValueError("google_matrix needs at least one node")
    if not 0.0 < d < 1.0:
        raise ValueError("damping must lie in (0, 1)")
    S = np.zeros((n, n))
    for src, dst in edges:
        if not (0 <= src < n and 0 <= dst < n):
            raise ValueError(f"edge ({src}, {dst}) has a node id outside [0, {n})")
        S[dst, src] += 1.0
    out_degree = S.sum(axis=0)
    dangling = out_degree == 0
    S[:, ~dangling] /= out_degree[~dangling]
    S[:, dangling] = 1.0 / n
    G = d * S + (1.0 - d) / n
    return Matrix.from_dense(G)


# -- readers -----------------------------------------------------------------


def read_dense_csv(path) -> Matrix:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                rows.append([float(tok) for tok in line.split(",")])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise ValueError(f"{path}: empty matrix file")
    if any(len(r) != len(rows) for r in rows):
        raise ValueError(f"{path}: expected a square matrix with {len(rows)} columns per row")
    return Matrix.from_dense(np.array(rows))


def read_matrix_market(path) -> Matrix:
    with open(path) as fh:
        header = fh.readline()
    if not header.startswith("%%MatrixMarket"):
        raise ValueError(f"{path}: missing %%MatrixMarket header")
    mat = scipy.io.mmread(path)
    if sp.issparse(mat):
        mat = sp.csr_matrix(mat)
        if mat.shape[0] <= DENSE_MAX_N:
            return Matrix.from_dense(mat.toarray())
        return Matrix(mat)
    return Matrix.from_dense(mat)


def read_edge_list(path) -> tuple[list[tuple[int, int]], int]:
    """Read ``src dst`` pairs; ids are 1-based when the smallest id is 1."""
    pairs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith(("#", "%")):
                continue
            parts = line.split()
            if len(parts) < 2:
                raise ValueError(f"{path}:{lineno}: expected 'src dst'")
            try:
                pairs.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: node ids must be integers") from None
    if not pairs:
        raise ValueError(f"{path}: no edges")
    lo = min(min(p) for p in pairs)
    if lo < 0:
        raise ValueError(f"{path}: negative node id")
    shift = 1 if lo >= 1 else 0
    edges = [(s - shift, t - shift) for s, t in pairs]
    n = max(max(e) for e in edges) + 1
    return edges, n


def edges_to_adjacency(edges: Sequence[tuple[int, int]], n: int) -> Matrix:
    """Link matrix with ``A[dst, src] = 1`` (column ``j`` lists out-links of ``j``)."""
    A = np.zeros((n, n))
    for src, dst in edges:
        A[dst, src] += 1.0
    return Matrix.from_dense(A)


def sniff_format(path) -> str:
    """Guess ``"mtx"``, ``"csv"`` or ``"edges"`` from the file contents."""
    with open(path) as fh:
        first = ""
        for line in fh:
            if line.strip():
                first = line
                break
    if first.startswith("%%MatrixMarket"):
        return "mtx"
    if "," in first:
        return "csv"
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".csv":
        return "csv"
    tokens = first.split()
    if len(tokens) == 2 and all(t.lstrip("-").isdigit() for t in tokens):
        return "edges"
    return "csv"


def read_matrix(path) -> Matrix:
    fmt = sniff_format(path)
    if fmt == "mtx":
        return read_matrix_market(path)
    if fmt == "edges":
        edges, n = read_edge_list(path)
        return edges_to_adjacency(edges, n)
    return read_dense_csv(path)


def partial_exp_sum(x: float, m: int) -> float:
    """``sum_{k=0}^{m} x^k / k!`` for a scalar."""
    term = 1.0
    total = 1.0
    for k in range(1, m + 1):
        term *= x / k
        total += term
    return total
