"""Block-structured signals: partitions, block vectors, supports, mixed norms.

A length-n signal is interpreted through a partition of its coordinates into
contiguous blocks.  Sparsity is counted in whole blocks: a vector is block
K-sparse when at most K blocks have nonzero Euclidean norm.  Block indices
are 0-based everywhere in the library; the command line converts to 1-based
for display.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

# Relative tolerance for deciding that a block is "numerically nonzero"
# when the caller does not supply one.
DEFAULT_SUPPORT_RTOL = 1e-9
_SUPPORT_TOL_FLOOR = 1e-300


@dataclass(frozen=True)
class BlockPattern:
    """Partition of ``n`` coordinates into contiguous blocks of given lengths.

    ``lengths[i]`` is the length of block i.  Derived quantities: ``offsets``
    (starting coordinate of each block), ``n`` (total dimension) and ``l``
    (block count).  Patterns are immutable and hashable.
    """

    lengths: tuple[int, ...]

    def __post_init__(self):
        lengths = tuple(int(d) for d in self.lengths)
        if any(d < 1 for d in lengths):
            raise ValueError("block lengths must be positive integers")
        offs = []
        acc = 0
        for d in lengths:
            offs.append(acc)
            acc += d
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "_offsets", tuple(offs))
        object.__setattr__(self, "_n", acc)

    @classmethod
    def uniform(cls, count: int, length: int) -> "BlockPattern":
        """``count`` blocks, all of the same ``length``."""
        if count < 0:
            raise ValueError("block count must be nonnegative")
        return cls((length,) * count)

    @classmethod
    def single(cls, n: int) -> "BlockPattern":
        """One block covering all n coordinates (plain vectors)."""
        return cls((n,))

    @property
    def offsets(self) -> tuple[int, ...]:
        return self._offsets

    @property
    def n(self) -> int:
        return self._n

    @property
    def l(self) -> int:
        return len(self.lengths)

    def slice_of(self, i: int) -> slice:
        """Coordinate slice of block i."""
        if not 0 <= i < self.l:
            raise IndexError(f"block index {i} out of range [0, {self.l})")
        return slice(self._offsets[i], self._offsets[i] + self.lengths[i])

    def coords(self, blocks: Iterable[int]) -> np.ndarray:
        """Sorted coordinate indices covered by the given block indices."""
        parts = [np.arange(self._offsets[i], self._offsets[i] + self.lengths[i])
                 for i in sorted(set(int(b) for b in blocks))]
        if not parts:
            return np.zeros(0, dtype=int)
        return np.concatenate(parts)

    def subpattern(self, blocks: Iterable[int]) -> "BlockPattern":
        """Pattern formed by the selected blocks, kept in ascending order."""
        sel = sorted(set(int(b) for b in blocks))
        for i in sel:
            if not 0 <= i < self.l:
                raise IndexError(f"block index {i} out of range [0, {self.l})")
        return BlockPattern(tuple(self.lengths[i] for i in sel))


@dataclass(frozen=True, eq=False)
class BlockVector:
    """Immutable float vector together with its block pattern."""

    values: np.ndarray
    pattern: BlockPattern

    def __post_init__(self):
        arr = np.array(self.values, dtype=float).ravel()
        if arr.size != self.pattern.n:
            raise ValueError(
                f"vector length {arr.size} does not match pattern dimension {self.pattern.n}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def zeros(cls, pattern: BlockPattern) -> "BlockVector":
        return cls(np.zeros(pattern.n), pattern)

    @property
    def n(self) -> int:
        return self.pattern.n

    def block(self, i: int) -> np.ndarray:
        return self.values[self.pattern.slice_of(i)]

    def allclose(self, other: "BlockVector", rtol: float = 1e-12, atol: float = 0.0) -> bool:
        return (self.pattern == other.pattern
                and np.allclose(self.values, other.values, rtol=rtol, atol=atol))


@dataclass(frozen=True)
class SupportSet:
    """Set of block indices, stored sorted and deduplicated."""

    indices: tuple[int, ...]
    pattern: BlockPattern

    def __post_init__(self):
        idx = tuple(sorted(set(int(i) for i in self.indices)))
        for i in idx:
            if not 0 <= i < self.pattern.l:
                raise IndexError(f"block index {i} out of range [0, {self.pattern.l})")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def empty(cls, pattern: BlockPattern) -> "SupportSet":
        return cls((), pattern)

    @classmethod
    def full(cls, pattern: BlockPattern) -> "SupportSet":
        return cls(tuple(range(pattern.l)), pattern)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, i) -> bool:
        return int(i) in set(self.indices)

    @property
    def size(self) -> int:
        return len(self.indices)

    @property
    def total_length(self) -> int:
        """Number of coordinates covered by the supported blocks."""
        return sum(self.pattern.lengths[i] for i in self.indices)

    def _check_same_pattern(self, other: "SupportSet"):
        if self.pattern != other.pattern:
            raise ValueError("support sets refer to different block patterns")

    def union(self, other: "SupportSet") -> "SupportSet":
        self._check_same_pattern(other)
        return SupportSet(self.indices + other.indices, self.pattern)

    def difference(self, other: "SupportSet") -> "SupportSet":
        self._check_same_pattern(other)
        keep = set(self.indices) - set(other.indices)
        return SupportSet(tuple(keep), self.pattern)

    def complement(self) -> "SupportSet":
        keep = set(range(self.pattern.l)) - set(self.indices)
        return SupportSet(tuple(keep), self.pattern)

    def coords(self) -> np.ndarray:
        return self.pattern.coords(self.indices)


def block_norms(x: BlockVector) -> np.ndarray:
    """Euclidean norm of every block, as a length-l array."""
    pat = x.pattern
    if pat.l == 0:
        return np.zeros(0)
    sq = x.values * x.values
    return np.sqrt(np.add.reduceat(sq, np.asarray(pat.offsets, dtype=int)))


def mixed_norm(x: BlockVector, p) -> float:
    """l2/lp mixed norm: the lp norm of the vector of block l2 norms.

    p must be 1, 2 or infinity.  For p=2 this coincides with the plain
    Euclidean norm of x.
    """
    norms = block_norms(x)
    if p == 1:
        return float(np.sum(norms))
    if p == 2:
        return float(np.linalg.norm(x.values))
    if p == math.inf:
        return float(np.max(norms)) if norms.size else 0.0
    raise ValueError(f"unsupported mixed norm order: {p!r}")


def block_support(x: BlockVector, tol: float | None = None) -> SupportSet:
    """Indices of blocks whose Euclidean norm exceeds tol.

    With tol=None the threshold is DEFAULT_SUPPORT_RTOL times the largest
    block norm (with a tiny absolute floor so the zero vector has empty
    support).  Pass tol=0.0 to pick up every block that is not exactly zero.
    """
    norms = block_norms(x)
    if tol is None:
        top = float(np.max(norms)) if norms.size else 0.0
        tol = max(DEFAULT_SUPPORT_RTOL * top, _SUPPORT_TOL_FLOOR)
    elif tol < 0:
        raise ValueError("support tolerance must be nonnegative")
    idx = np.nonzero(norms > tol)[0]
    return SupportSet(tuple(int(i) for i in idx), x.pattern)


def embed(coefficients: Sequence[float] | np.ndarray, support: SupportSet) -> BlockVector:
    """Scatter stacked per-block coefficients into a full-length vector.

    ``coefficients`` holds the entries of the supported blocks, concatenated
    in ascending block order; everything off the support is zero.
    """
    coeff = np.asarray(coefficients, dtype=float).ravel()
    if coeff.size != support.total_length:
        raise ValueError(
            f"expected {support.total_length} coefficients for the support, got {coeff.size}")
    out = np.zeros(support.pattern.n)
    out[support.coords()] = coeff
    return BlockVector(out, support.pattern)


def restrict(x: BlockVector, support: SupportSet) -> np.ndarray:
    """Stacked entries of x on the supported blocks (inverse of embed)."""
    if x.pattern != support.pattern:
        raise ValueError("vector and support refer to different block patterns")
    return x.values[support.coords()].copy()


# --- plain-text serialization -------------------------------------------------
#
# Format (one token per whitespace-separated field):
#   line 1: "bsv 1"
#   line 2: block lengths
#   line 3: coordinate values, full round-trip precision
_BSV_MAGIC = "bsv"
_BSV_VERSION = 1


def format_bsv(x: BlockVector) -> str:
    lines = [
        f"{_BSV_MAGIC} {_BSV_VERSION}",
        " ".join(str(d) for d in x.pattern.lengths),
        " ".join(repr(float(v)) for v in x.values),
    ]
    return "\n".join(lines) + "\n"


def parse_bsv(text: str) -> BlockVector:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) != 3:
        raise ValueError("malformed block vector text: expected 3 nonempty lines")
    head = lines[0].split()
    if head != [_BSV_MAGIC, str(_BSV_VERSION)]:
        raise ValueError(f"unrecognized header {lines[0]!r}")
    lengths = tuple(int(tok) for tok in lines[1].split())
    values = np.array([float(tok) for tok in lines[2].split()])
    return BlockVector(values, BlockPattern(lengths))


def write_bsv(x: BlockVector, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(format_bsv(x))


def read_bsv(path) -> BlockVector:
    with open(path, "r", encoding="ascii") as fh:
        return parse_bsv(fh.read())
