"""Adversarial matrices showing the recovery threshold cannot be improved.

For each (K, N, d) the construction produces a square matrix acting on
NK + 1 blocks of length d whose block isometry constant at order NK + 1
equals the sharp threshold 1/sqrt(K/N + 1) exactly, together with a block
K-sparse signal on the first K blocks whose first-iteration identification
scores tie between the true blocks and the N trailing decoy blocks.  With
ties broken toward higher indices the pursuit adopts only decoys in its
first iteration, so the guarantee genuinely fails at the threshold; with
ties broken toward lower indices it starts on the true support.

Layout of the matrix by column blocks (all scalars multiply the d-by-d
identity): the first K blocks carry sqrt(K/(K+N)) on their own diagonal
block; the NK - K middle blocks carry 1 on theirs; each of the last N
blocks carries 1/sqrt(K(K+N)) in every one of the first K row blocks plus
1 on its own diagonal block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .blockmodel import BlockPattern, BlockVector, SupportSet
from .linalg import DenseMatrix, sym_eig
from .pursuit import TIE_HIGHEST, PursuitConfig, alpha_beta, bommp
from .ric import block_ric_exact

# Eigenvalues closer than this are treated as one cluster when matching
# the observed spectrum against the expected one.
_CLUSTER_RADIUS = 1e-7


@dataclass(frozen=True)
class CounterexampleSpec:
    """Parameters of the construction: sparsity K, blocks per iteration N
    (1 <= N <= K), block length d >= 1."""

    K: int
    N: int
    d: int = 1

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if not 1 <= self.N <= self.K:
            raise ValueError(f"need 1 <= N <= K, got N={self.N}, K={self.K}")
        if self.d < 1:
            raise ValueError("block length d must be at least 1")

    @property
    def block_count(self) -> int:
        return self.N * self.K + 1

    @property
    def dimension(self) -> int:
        return self.block_count * self.d

    @property
    def pattern(self) -> BlockPattern:
        return BlockPattern.uniform(self.block_count, self.d)


@dataclass(frozen=True, eq=False)
class CounterexampleReport:
    """Everything verify() measured on one instance.

    Spectra are (value, multiplicity) pairs sorted by value; alpha_1 and
    beta_1 are the first-iteration identification margins, which tie by
    construction.  failure_demonstrated records whether the first iteration
    under the requested tie policy avoided the true support entirely.
    """

    spec: CounterexampleSpec
    spectrum_expected: tuple[tuple[float, int], ...]
    spectrum_observed: tuple[tuple[float, int], ...]
    spectrum_matches: bool
    delta_observed: float
    alpha_1: float
    beta_1: float
    tie_break: str
    failure_demonstrated: bool


def build(spec: CounterexampleSpec) -> DenseMatrix:
    """Assemble the adversarial matrix for the given parameters.

    The coupling entry 1/sqrt(K(K+N)) is computed as sqrt(K/(K+N))/K, equal
    in exact arithmetic; this form makes the first-iteration score tie land
    bit-exact in floating point for the even K used in the demonstrations.
    """
    K, N, d = spec.K, spec.N, spec.d
    l = spec.block_count
    a = math.sqrt(K / (K + N))
    c = a / K
    eye = np.eye(d)
    A = np.zeros((spec.dimension, spec.dimension))
    for i in range(K):
        A[i * d:(i + 1) * d, i * d:(i + 1) * d] = a * eye
    for i in range(K, l - N):
        A[i * d:(i + 1) * d, i * d:(i + 1) * d] = eye
    for j in range(l - N, l):
        for i in range(K):
            A[i * d:(i + 1) * d, j * d:(j + 1) * d] = c * eye
        A[j * d:(j + 1) * d, j * d:(j + 1) * d] = eye
    return DenseMatrix(A, spec.pattern)


def expected_spectrum(spec: CounterexampleSpec) -> tuple[tuple[float, int], ...]:
    """Gram spectrum in closed form, as (value, multiplicity) sorted by value.

    The Gram matrix decouples into d copies of an (NK+1)-dimensional core
    whose eigenvalues are K/(K+N) with multiplicity K - 1, the value 1 with
    multiplicity NK - K, and the conjugate pair 1 -/+ 1/sqrt(K/N + 1).
    Zero-multiplicity entries are dropped.
    """
    K, N, d = spec.K, spec.N, spec.d
    gap = 1.0 / math.sqrt(K / N + 1.0)
    entries = [
        (1.0 - gap, d),
        (K / (K + N), d * (K - 1)),
        (1.0, d * (N * K - K)),
        (1.0 + gap, d),
    ]
    return tuple((v, m) for v, m in entries if m > 0)


def worst_case_signal(spec: CounterexampleSpec) -> BlockVector:
    """Block K-sparse signal defeating the pursuit at the threshold:
    the first coordinate of each of the first K blocks is 1."""
    x = np.zeros(spec.dimension)
    for i in range(spec.K):
        x[i * spec.d] = 1.0
    return BlockVector(x, spec.pattern)


def _cluster(sorted_values: np.ndarray, radius: float) -> list[tuple[float, int, float]]:
    """Group ascending values into runs separated by more than radius.

    Returns (mean, count, spread) per cluster where spread is the largest
    deviation of a member from the cluster mean.
    """
    clusters = []
    start = 0
    for i in range(1, len(sorted_values) + 1):
        if i == len(sorted_values) or sorted_values[i] - sorted_values[i - 1] > radius:
            chunk = sorted_values[start:i]
            mean = float(np.mean(chunk))
            clusters.append((mean, len(chunk), float(np.max(np.abs(chunk - mean)))))
            start = i
    return clusters


def verify(spec: CounterexampleSpec, eig_tol: float = 1e-9,
           tie_break: str = TIE_HIGHEST) -> CounterexampleReport:
    """Measure an instance against its closed-form predictions.

    Checks the Gram spectrum (exact multiplicities, values within eig_tol),
    computes the order-(NK+1) block isometry constant from the single full
    support, evaluates the first-iteration identification margins for the
    worst-case signal, and runs the pursuit under the given tie policy to
    see whether the first selection misses the true support entirely.
    """
    A = build(spec)
    expected = expected_spectrum(spec)
    eigs = sym_eig(A.values.T @ A.values).eigenvalues
    clusters = _cluster(np.sort(eigs), _CLUSTER_RADIUS)
    matches = (
        [count for _, count in expected] == [c for _, c, _ in clusters]
        and all(abs(mean - value) + spread <= eig_tol
                for (value, _), (mean, _, spread) in zip(expected, clusters))
    )

    ric = block_ric_exact(A, spec.block_count)

    x = worst_case_signal(spec)
    y = A.values @ x.values
    true_support = SupportSet(tuple(range(spec.K)), spec.pattern)
    alpha, beta = alpha_beta(A, y, SupportSet.empty(spec.pattern), true_support, spec.N)

    config = PursuitConfig(K=spec.K, N=spec.N, tie_break=tie_break)
    result = bommp(A, y, config)
    first = result.trace[0].selected if result.trace else SupportSet.empty(spec.pattern)
    missed = not set(first.indices) & set(true_support.indices)

    return CounterexampleReport(
        spec=spec,
        spectrum_expected=expected,
        spectrum_observed=tuple((mean, count) for mean, count, _ in clusters),
        spectrum_matches=bool(matches),
        delta_observed=ric.delta,
        alpha_1=alpha,
        beta_1=beta,
        tie_break=tie_break,
        failure_demonstrated=bool(missed),
    )
