"""Dense matrices with block-partitioned columns, plus the numerical kernels
used by the pursuit and certification code: block column extraction,
minimum-norm least squares, orthogonal residual projection and symmetric
eigendecomposition.

The least-squares and eigenvalue routines delegate to numpy's LAPACK
bindings (SVD-based ``lstsq`` and ``eigh``), which satisfy the accuracy
contracts here; the surrounding code adds the rank handling, validation and
empty-support edge cases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blockmodel import BlockPattern, SupportSet

# Singular values below rank_tol times the largest are treated as zero.
DEFAULT_RANK_TOL = 1e-10
_SYMMETRY_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class DenseMatrix:
    """Real m-by-n matrix whose columns are partitioned into blocks.

    ``pattern`` partitions the n columns; A[i] denotes the m-by-d_i column
    block.  Entries must all be finite.
    """

    values: np.ndarray
    pattern: BlockPattern

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        if arr.ndim != 2:
            raise ValueError(f"matrix must be 2-dimensional, got shape {arr.shape}")
        if arr.shape[1] != self.pattern.n:
            raise ValueError(
                f"matrix has {arr.shape[1]} columns but pattern covers {self.pattern.n}")
        if not np.isfinite(arr).all():
            raise ValueError("matrix entries must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def identity(cls, pattern: BlockPattern) -> "DenseMatrix":
        return cls(np.eye(pattern.n), pattern)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True, eq=False)
class EigenResult:
    """Eigenvalues in ascending order; eigenvectors (as columns) optional."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None


def column_block(A: DenseMatrix, i: int) -> np.ndarray:
    """The m-by-d_i submatrix formed by the columns of block i."""
    return A.values[:, A.pattern.slice_of(i)]


def submatrix(A: DenseMatrix, support: SupportSet) -> DenseMatrix:
    """Columns of the supported blocks, in ascending block order.

    The empty support yields an m-by-0 matrix, which downstream least
    squares treats as "no unknowns".
    """
    if support.pattern != A.pattern:
        raise ValueError("support refers to a different block pattern")
    cols = A.values[:, support.coords()]
    return DenseMatrix(cols, A.pattern.subpattern(support.indices))


def _as_array(B) -> np.ndarray:
    if isinstance(B, DenseMatrix):
        return B.values
    arr = np.asarray(B, dtype=float)
    if arr.ndim != 2:
        raise ValueError("expected a 2-dimensional matrix")
    return arr


def least_squares_min_norm(B, y, rank_tol: float = DEFAULT_RANK_TOL):
    """Minimum-norm solution of min_u ||y - B u||_2.

    Returns ``(u, residual, rank)`` where ``residual = y - B @ u`` and
    ``rank`` is the effective numerical rank at the given relative singular
    value cutoff.  Among all minimizers, u has the smallest Euclidean norm
    (SVD pseudoinverse solution).  A matrix with zero columns gives the
    empty solution and residual y.
    """
    arr = _as_array(B)
    y = np.asarray(y, dtype=float).ravel()
    if y.size != arr.shape[0]:
        raise ValueError(f"vector length {y.size} does not match row count {arr.shape[0]}")
    if arr.shape[1] == 0:
        return np.zeros(0), y.copy(), 0
    u, _, rank, _ = np.linalg.lstsq(arr, y, rcond=rank_tol)
    return u, y - arr @ u, int(rank)


def residual_projection(B, y) -> np.ndarray:
    """Projection of y onto the orthogonal complement of the range of B."""
    _, residual, _ = least_squares_min_norm(B, y)
    return residual


def sym_eig(G, tol: float = 1e-12, vectors: bool = False) -> EigenResult:
    """Eigendecomposition of a symmetric matrix, eigenvalues ascending.

    G must be symmetric to within a small relative tolerance; it is
    symmetrized before factorization so roundoff in forming Gram matrices
    cannot produce complex output.  ``tol`` documents the accuracy demanded
    of the eigenvalues relative to the matrix norm; the LAPACK backend
    delivers machine precision, well inside any reasonable value.
    """
    arr = np.asarray(G, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {arr.shape}")
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    scale = np.linalg.norm(arr)
    if np.linalg.norm(arr - arr.T) > _SYMMETRY_RTOL * max(scale, 1e-300):
        raise ValueError("matrix is not symmetric")
    sym = (arr + arr.T) / 2.0
    if vectors:
        w, v = np.linalg.eigh(sym)
        return EigenResult(w, v)
    return EigenResult(np.linalg.eigvalsh(sym))


# --- plain-text serialization -------------------------------------------------
#
# Format:
#   line 1: "bsm 1"
#   line 2: "m n"
#   line 3: column block lengths
#   lines 4..3+m: one matrix row per line, full round-trip precision
_BSM_MAGIC = "bsm"
_BSM_VERSION = 1


def format_bsm(A: DenseMatrix) -> str:
    lines = [
        f"{_BSM_MAGIC} {_BSM_VERSION}",
        f"{A.m} {A.n}",
        " ".join(str(d) for d in A.pattern.lengths),
    ]
    for row in A.values:
        lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def parse_bsm(text: str) -> DenseMatrix:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 3:
        raise ValueError("malformed matrix text: expected header, sizes and lengths")
    head = lines[0].split()
    if head != [_BSM_MAGIC, str(_BSM_VERSION)]:
        raise ValueError(f"unrecognized header {lines[0]!r}")
    try:
        m, n = (int(tok) for tok in lines[1].split())
    except Exception as exc:
        raise ValueError(f"malformed size line {lines[1]!r}") from exc
    lengths = tuple(int(tok) for tok in lines[2].split())
    if len(lines) != 3 + m:
        raise ValueError(f"expected {m} data rows, found {len(lines) - 3}")
    rows = [[float(tok) for tok in ln.split()] for ln in lines[3:]]
    if any(len(r) != n for r in rows):
        raise ValueError("row length does not match declared column count")
    arr = np.array(rows, dtype=float) if m else np.zeros((0, n))
    return DenseMatrix(arr, BlockPattern(lengths))


def write_bsm(A: DenseMatrix, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(format_bsm(A))


def read_bsm(path) -> DenseMatrix:
    with open(path, "r", encoding="ascii") as fh:
        return parse_bsm(fh.read())
