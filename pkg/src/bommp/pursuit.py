"""Block orthogonal multi-matching pursuit.

Given measurements y = A x + e of a block K-sparse signal, each iteration
scores every column block by the Euclidean norm of its correlation with the
current residual, adopts the N highest-scoring blocks, and re-fits y on the
union of everything adopted so far by minimum-norm least squares, so the
residual stays orthogonal to the selected columns.  N = 1 recovers the
classical one-block-per-iteration pursuit; larger N adopts several blocks
per iteration and needs at most K iterations to cover a block K-sparse
support.

Iteration stops as soon as the residual norm drops to the noise level
epsilon, after min(max_iterations, K) iterations, or when the residual
stalls; the stop reason is reported on the result.
"""

from __future__ import annotations

import csv
import dataclasses
import io
from dataclasses import dataclass, field

import numpy as np

from .blockmodel import BlockVector, SupportSet, embed
from .linalg import DEFAULT_RANK_TOL, DenseMatrix, least_squares_min_norm, submatrix

TIE_LOWEST = "lowest_index"
TIE_HIGHEST = "highest_index"

STOP_RESIDUAL = "residual_below_epsilon"
STOP_ITERATIONS = "iteration_cap"
STOP_STALL = "numerical_stall"

# Floor on the stopping threshold, relative to ||y||: with epsilon = 0 the
# residual of an exact fit is rounding noise, not an exact zero.
_STOP_RTOL = 1e-12
# A repeated support whose residual shrinks less than this (relative to
# ||y||) makes no progress.
_STALL_RTOL = 1e-14


@dataclass(frozen=True)
class PursuitConfig:
    """Run parameters.

    K is the sparsity budget (maximum number of support blocks assumed),
    N how many blocks are adopted per iteration, epsilon the residual norm
    at which to stop (0 for noiseless data).  max_iterations defaults to K;
    the effective cap is min(max_iterations, K).  Ties in the block scores
    are broken toward the lowest or highest block index.  support_tol is
    the relative tolerance used when reporting the detected support of an
    estimate.
    """

    K: int
    N: int = 1
    epsilon: float = 0.0
    max_iterations: int | None = None
    tie_break: str = TIE_LOWEST
    support_tol: float = 1e-9

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("sparsity budget K must be at least 1")
        if not 1 <= self.N <= self.K:
            raise ValueError(f"blocks per iteration N must satisfy 1 <= N <= K, got N={self.N}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.tie_break not in (TIE_LOWEST, TIE_HIGHEST):
            raise ValueError(f"unknown tie_break policy {self.tie_break!r}")
        if self.support_tol < 0:
            raise ValueError("support_tol must be nonnegative")

    @property
    def iteration_cap(self) -> int:
        cap = self.K if self.max_iterations is None else self.max_iterations
        return min(cap, self.K)


@dataclass(frozen=True)
class IterationRecord:
    """State after one iteration: what was selected and where that left us."""

    k: int
    selected: SupportSet
    cumulative: SupportSet
    residual_norm: float
    score_per_block: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class RecoveryResult:
    estimate: BlockVector
    support: SupportSet
    trace: tuple[IterationRecord, ...] = field(default_factory=tuple)
    stop_reason: str = STOP_RESIDUAL

    @property
    def iterations(self) -> int:
        return len(self.trace)


def block_scores(A: DenseMatrix, r) -> np.ndarray:
    """Identification scores: per-block Euclidean norms of A^T r."""
    r = np.asarray(r, dtype=float).ravel()
    if r.size != A.m:
        raise ValueError(f"residual length {r.size} does not match row count {A.m}")
    if A.pattern.l == 0:
        return np.zeros(0)
    c = A.values.T @ r
    return np.sqrt(np.add.reduceat(c * c, np.asarray(A.pattern.offsets, dtype=int)))


def _ranked(scores: np.ndarray, tie_break: str) -> np.ndarray:
    """Block indices by descending score; ties go to the policy's end."""
    idx = np.arange(scores.size)
    if tie_break == TIE_LOWEST:
        return np.lexsort((idx, -scores))
    if tie_break == TIE_HIGHEST:
        return np.lexsort((-idx, -scores))
    raise ValueError(f"unknown tie_break policy {tie_break!r}")


def identify(A: DenseMatrix, r, N: int, tie_break: str = TIE_LOWEST) -> SupportSet:
    """The N blocks most correlated with r, deterministic under ties."""
    if not 1 <= N <= A.pattern.l:
        raise ValueError(f"N must satisfy 1 <= N <= {A.pattern.l}, got {N}")
    scores = block_scores(A, r)
    order = _ranked(scores, tie_break)
    return SupportSet(tuple(int(i) for i in order[:N]), A.pattern)


def bommp(A: DenseMatrix, y, config: PursuitConfig) -> RecoveryResult:
    """Recover a block-sparse estimate of x from y = A x + e.

    Requires N K <= m so that the selected columns can stay independent in
    the regime the guarantees address.  The estimate is supported on the
    cumulative selection; its coefficients are the final least-squares fit.
    """
    y = np.asarray(y, dtype=float).ravel()
    if y.size != A.m:
        raise ValueError(f"measurement length {y.size} does not match row count {A.m}")
    if config.N > A.pattern.l:
        raise ValueError(f"cannot adopt {config.N} blocks out of {A.pattern.l}")
    if config.N * config.K > A.m:
        raise ValueError(
            f"N*K = {config.N * config.K} exceeds the measurement dimension {A.m}")

    y_norm = float(np.linalg.norm(y))
    stop_at = max(config.epsilon, _STOP_RTOL * y_norm)
    cumulative = SupportSet.empty(A.pattern)
    coeff = np.zeros(0)
    r = y.copy()
    r_norm = y_norm
    trace: list[IterationRecord] = []
    stop = None
    k = 0

    while True:
        if r_norm <= stop_at:
            stop = STOP_RESIDUAL
            break
        if k >= config.iteration_cap:
            stop = STOP_ITERATIONS
            break
        k += 1
        scores = block_scores(A, r)
        top = _ranked(scores, config.tie_break)[:config.N]
        selected = SupportSet(tuple(int(i) for i in top), A.pattern)
        new_cumulative = cumulative.union(selected)
        grew = new_cumulative.indices != cumulative.indices
        if new_cumulative.total_length > A.m:
            # more unknowns than equations: the fit would go underdetermined
            stop = STOP_STALL
            break
        u, resid, _ = least_squares_min_norm(submatrix(A, new_cumulative), y, DEFAULT_RANK_TOL)
        new_norm = float(np.linalg.norm(resid))
        trace.append(IterationRecord(k, selected, new_cumulative, new_norm,
                                     tuple(float(s) for s in scores)))
        stalled = (not grew) and (r_norm - new_norm < _STALL_RTOL * y_norm)
        cumulative, coeff, r, r_norm = new_cumulative, u, resid, new_norm
        if stalled:
            stop = STOP_STALL
            break

    return RecoveryResult(embed(coeff, cumulative), cumulative, tuple(trace), stop)


def bomp(A: DenseMatrix, y, config: PursuitConfig) -> RecoveryResult:
    """Single-block-per-iteration pursuit: the N = 1 special case."""
    return bommp(A, y, dataclasses.replace(config, N=1))


def alpha_beta(A: DenseMatrix, r, cumulative: SupportSet, true_support: SupportSet,
               N: int) -> tuple[float, float]:
    """Identification margins of the next iteration.

    alpha is the N-th largest score over blocks outside both the true
    support and the current selection; beta is the largest score over true
    blocks not yet selected.  beta > alpha forces at least one correct
    adoption.  Raises ValueError when the margin is undefined: no true
    block is missing, or fewer than N blocks remain outside.
    """
    scores = block_scores(A, r)
    missing = true_support.difference(cumulative)
    if len(missing) == 0:
        raise ValueError("beta undefined: the true support is already covered")
    outside = true_support.union(cumulative).complement()
    if len(outside) < N:
        raise ValueError(f"alpha undefined: only {len(outside)} blocks outside, need {N}")
    alpha = float(np.sort(scores[list(outside.indices)])[-N])
    beta = float(np.max(scores[list(missing.indices)]))
    return alpha, beta


def trace_to_csv(result: RecoveryResult, path_or_file,
                 true_support: SupportSet | None = None) -> None:
    """Write the per-iteration trace as CSV.

    Columns: k, selected_blocks (semicolon-joined, 1-based as in all text
    output), cumulative_size, residual_norm.  When the true support is
    known, alpha_N and beta_1 columns are added; entries are left blank for
    iterations where the margin is undefined.
    """
    rows = []
    prev = None
    for rec in result.trace:
        row = {
            "k": rec.k,
            "selected_blocks": ";".join(str(i + 1) for i in rec.selected.indices),
            "cumulative_size": rec.cumulative.size,
            "residual_norm": repr(rec.residual_norm),
        }
        if true_support is not None:
            row["alpha_N"] = row["beta_1"] = ""
            before = prev.cumulative if prev is not None else SupportSet.empty(
                result.support.pattern)
            scores = np.asarray(rec.score_per_block)
            missing = true_support.difference(before)
            outside = true_support.union(before).complement()
            n_sel = len(rec.selected)
            if len(missing) > 0 and len(outside) >= n_sel:
                row["alpha_N"] = repr(float(np.sort(scores[list(outside.indices)])[-n_sel]))
                row["beta_1"] = repr(float(np.max(scores[list(missing.indices)])))
        rows.append(row)
        prev = rec

    names = ["k", "selected_blocks", "cumulative_size", "residual_norm"]
    if true_support is not None:
        names += ["alpha_N", "beta_1"]

    def _write(fh):
        writer = csv.DictWriter(fh, fieldnames=names, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)

    if isinstance(path_or_file, io.TextIOBase) or hasattr(path_or_file, "write"):
        _write(path_or_file)
    else:
        with open(path_or_file, "w", encoding="ascii", newline="") as fh:
            _write(fh)
