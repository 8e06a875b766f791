"""Monte Carlo harness: seeded problem generation, a brute-force oracle and
phase-transition sweeps over the (K, N) grid.

Determinism policy: every random object is drawn from its own substream of
a counter-based generator (numpy's Philox), keyed by the master seed plus a
structural path such as (K, N, trial, role).  Substreams never interact, so
any trial can be regenerated in isolation and sweeps parallelize across
cells without changing a single draw.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .blockmodel import (BlockPattern, BlockVector, SupportSet, block_support,
                         embed)
from .linalg import DenseMatrix, least_squares_min_norm, submatrix
from .pursuit import PursuitConfig, bommp
from .ric import EnumerationBudgetError

ENSEMBLE_GAUSSIAN = "gaussian"
SIGNAL_UNIT_GAUSSIAN = "unit_gaussian"
SIGNAL_CONSTANT_MAGNITUDE = "constant_magnitude"

ORACLE_BUDGET = 1_000_000

# Substream roles, the last component of every spawn path.
_ROLE_MATRIX = 0
_ROLE_SIGNAL = 1
_ROLE_NOISE = 2

PHASE_CSV_COLUMNS = ("K", "N", "trials", "successes", "success_rate",
                     "mean_iterations", "mean_rel_error")


def substream(master_seed: int, *path: int) -> np.random.Generator:
    """Independent generator for one structural path under a master seed.

    Built on numpy's counter-based Philox bit generator with the path as
    the spawn key, so (master_seed, path) fully determines every draw and
    distinct paths give statistically independent streams.
    """
    ss = np.random.SeedSequence(entropy=int(master_seed),
                                spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def _generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


@dataclass(frozen=True)
class ExperimentConfig:
    """Sweep description: problem sizes, the (K, N) grid, trial counts and
    noise level.  ``lengths`` is the column block partition.  Success in a
    noiseless sweep means support match plus relative error at most
    success_rel_tol; with noise it means support match.
    """

    m: int
    lengths: tuple[int, ...]
    K_values: tuple[int, ...]
    N_values: tuple[int, ...]
    trials: int
    noise_epsilon: float = 0.0
    master_seed: int = 0
    success_rel_tol: float = 1e-6
    matrix_ensemble: str = ENSEMBLE_GAUSSIAN
    signal_distribution: str = SIGNAL_UNIT_GAUSSIAN

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(int(d) for d in self.lengths))
        object.__setattr__(self, "K_values", tuple(int(k) for k in self.K_values))
        object.__setattr__(self, "N_values", tuple(int(n) for n in self.N_values))
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if not self.lengths or any(d < 1 for d in self.lengths):
            raise ValueError("lengths must be a nonempty list of positive integers")
        if not self.K_values or any(k < 0 for k in self.K_values):
            raise ValueError("K_values must be nonempty and nonnegative")
        if not self.N_values or any(n < 1 for n in self.N_values):
            raise ValueError("N_values must be nonempty and positive")
        if any(k > len(self.lengths) for k in self.K_values):
            raise ValueError("K cannot exceed the block count")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.noise_epsilon < 0:
            raise ValueError("noise_epsilon must be nonnegative")
        if self.master_seed < 0:
            raise ValueError("master_seed must be nonnegative")
        if self.success_rel_tol <= 0:
            raise ValueError("success_rel_tol must be positive")
        if self.matrix_ensemble != ENSEMBLE_GAUSSIAN:
            raise ValueError(f"unknown matrix ensemble {self.matrix_ensemble!r}")
        if self.signal_distribution not in (SIGNAL_UNIT_GAUSSIAN, SIGNAL_CONSTANT_MAGNITUDE):
            raise ValueError(f"unknown signal distribution {self.signal_distribution!r}")

    @property
    def pattern(self) -> BlockPattern:
        return BlockPattern(self.lengths)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        if "lengths" in data:
            lengths = tuple(data.pop("lengths"))
        else:
            lengths = (int(data.pop("block_length")),) * int(data.pop("blocks"))
        known = {f for f in cls.__dataclass_fields__ if f != "lengths"}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(lengths=lengths, **data)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "lengths": list(self.lengths),
            "K_values": list(self.K_values),
            "N_values": list(self.N_values),
            "trials": self.trials,
            "noise_epsilon": self.noise_epsilon,
            "master_seed": self.master_seed,
            "success_rel_tol": self.success_rel_tol,
            "matrix_ensemble": self.matrix_ensemble,
            "signal_distribution": self.signal_distribution,
        }


@dataclass(frozen=True)
class TrialOutcome:
    """One trial: the reproduction key, the cell, and what happened."""

    seed: tuple[int, ...]
    K: int
    N: int
    exact_recovery: bool
    iterations: int
    relative_error: float


def gen_gaussian_matrix(m: int, pattern: BlockPattern, seed) -> DenseMatrix:
    """m-by-n matrix with independent N(0, 1/m) entries, drawn row-major in
    one call so the result is reproducible from the seed alone."""
    rng = _generator(seed)
    values = rng.normal(0.0, 1.0, size=(m, pattern.n)) / math.sqrt(m)
    return DenseMatrix(values, pattern)


def gen_signal(pattern: BlockPattern, K: int, seed,
               distribution: str = SIGNAL_UNIT_GAUSSIAN) -> BlockVector:
    """Block K-sparse signal on a uniformly random size-K support.

    The support is drawn first, then block contents in ascending block
    order: standard normal entries, or (constant-magnitude mode) a normal
    draw normalized to a unit-norm block.
    """
    if not 0 <= K <= pattern.l:
        raise ValueError(f"K must satisfy 0 <= K <= {pattern.l}, got {K}")
    rng = _generator(seed)
    values = np.zeros(pattern.n)
    support = np.sort(rng.choice(pattern.l, size=K, replace=False))
    for i in support:
        block = rng.normal(size=pattern.lengths[i])
        if distribution == SIGNAL_CONSTANT_MAGNITUDE:
            while np.linalg.norm(block) == 0.0:
                block = rng.normal(size=pattern.lengths[i])
            block = block / np.linalg.norm(block)
        elif distribution != SIGNAL_UNIT_GAUSSIAN:
            raise ValueError(f"unknown signal distribution {distribution!r}")
        values[pattern.slice_of(int(i))] = block
    return BlockVector(values, pattern)


def gen_noise(m: int, epsilon: float, seed) -> np.ndarray:
    """Noise of Euclidean norm exactly epsilon in a random direction
    (zeros when epsilon is 0, so noiseless runs burn no randomness)."""
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    if epsilon == 0.0:
        return np.zeros(m)
    rng = _generator(seed)
    v = rng.normal(size=m)
    while np.linalg.norm(v) == 0.0:
        v = rng.normal(size=m)
    return epsilon * v / np.linalg.norm(v)


def oracle_l20(A: DenseMatrix, y, epsilon: float, K_max: int,
               budget: int = ORACLE_BUDGET):
    """Brute-force sparsest feasible fit, for cross-checking the pursuit.

    Scans supports in order of size 0, 1, ..., K_max (lexicographic within
    a size) and returns ``(estimate, support)`` for the smallest size
    admitting a residual norm at most epsilon (plus a tiny relative slack);
    among feasible supports of that size the smallest residual wins, with
    lexicographic order deciding exact ties.  Returns None when nothing of
    size at most K_max is feasible.  Raises EnumerationBudgetError if the
    total number of supports exceeds the budget.
    """
    y = np.asarray(y, dtype=float).ravel()
    l = A.pattern.l
    if not 0 <= K_max <= l:
        raise ValueError(f"K_max must satisfy 0 <= K_max <= {l}, got {K_max}")
    total = sum(math.comb(l, k) for k in range(K_max + 1))
    if total > budget:
        raise EnumerationBudgetError(
            f"scanning {total} supports up to size {K_max} exceeds the budget {budget}")
    feasible = epsilon + 1e-12 * float(np.linalg.norm(y))
    for k in range(K_max + 1):
        best = None
        for S in itertools.combinations(range(l), k):
            support = SupportSet(S, A.pattern)
            u, resid, _ = least_squares_min_norm(submatrix(A, support), y)
            r_norm = float(np.linalg.norm(resid))
            if r_norm <= feasible and (best is None or r_norm < best[0]):
                best = (r_norm, support, u)
        if best is not None:
            _, support, u = best
            return embed(u, support), support
    return None


def run_trial(A: DenseMatrix, x_true: BlockVector, config: ExperimentConfig,
              K: int, N: int, trial: int = 0) -> TrialOutcome:
    """Measure x_true through A with fresh noise, recover, and score.

    The noise comes from the substream (master_seed, K, N, trial, noise
    role), so the outcome is a pure function of the config and the cell.
    N is clamped to min(N, K) and the degenerate K = 0 cell runs with a
    budget of one block, which the stopping rule immediately retires.
    """
    e = gen_noise(A.m, config.noise_epsilon,
                  substream(config.master_seed, K, N, trial, _ROLE_NOISE))
    y = A.values @ x_true.values + e
    K_eff = max(K, 1)
    N_eff = min(max(N, 1), K_eff)
    pursuit = PursuitConfig(K=K_eff, N=N_eff, epsilon=config.noise_epsilon)
    result = bommp(A, y, pursuit)

    x_norm = float(np.linalg.norm(x_true.values))
    err = float(np.linalg.norm(result.estimate.values - x_true.values))
    rel_err = err / x_norm if x_norm > 0 else float(np.linalg.norm(result.estimate.values))
    support_match = (block_support(result.estimate).indices
                     == block_support(x_true).indices)
    if config.noise_epsilon == 0.0:
        success = support_match and rel_err <= config.success_rel_tol
    else:
        success = support_match
    return TrialOutcome(
        seed=(config.master_seed, K, N, trial),
        K=K, N=N,
        exact_recovery=bool(success),
        iterations=result.iterations,
        relative_error=rel_err,
    )


def _phase_trial(config: ExperimentConfig, K: int, N: int, trial: int) -> TrialOutcome:
    pattern = config.pattern
    A = gen_gaussian_matrix(config.m, pattern,
                            substream(config.master_seed, K, N, trial, _ROLE_MATRIX))
    x = gen_signal(pattern, K,
                   substream(config.master_seed, K, N, trial, _ROLE_SIGNAL),
                   config.signal_distribution)
    return run_trial(A, x, config, K, N, trial)


def _run_cell(args) -> dict:
    config, K, N = args
    successes = 0
    iteration_sum = 0
    error_sum = 0.0
    for trial in range(config.trials):
        outcome = _phase_trial(config, K, N, trial)
        successes += outcome.exact_recovery
        iteration_sum += outcome.iterations
        error_sum += outcome.relative_error
    return {
        "K": K,
        "N": N,
        "trials": config.trials,
        "successes": successes,
        "success_rate": successes / config.trials,
        "mean_iterations": iteration_sum / config.trials,
        "mean_rel_error": error_sum / config.trials,
    }


def run_phase(config: ExperimentConfig, workers: int = 1,
              csv_path=None, svg_path=None) -> list[dict]:
    """Run every (K, N) cell of the sweep and aggregate per-cell rows.

    Cells may be distributed over worker processes; results are identical
    to the sequential run because every trial owns its substream, and rows
    always come back in grid order (K outer, N inner).
    """
    if workers < 1:
        raise ValueError("workers must be at least 1")
    cells = [(config, K, N) for K in config.K_values for N in config.N_values]
    if workers == 1 or len(cells) <= 1:
        rows = [_run_cell(cell) for cell in cells]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_cell, cells))
    if csv_path is not None:
        write_phase_csv(rows, csv_path)
    if svg_path is not None:
        write_phase_svg(rows, svg_path)
    return rows


def phase_csv(rows: Sequence[dict]) -> str:
    """Render sweep rows as CSV text with full-precision numbers."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PHASE_CSV_COLUMNS)
    for row in rows:
        writer.writerow([row["K"], row["N"], row["trials"], row["successes"],
                         repr(row["success_rate"]), repr(row["mean_iterations"]),
                         repr(row["mean_rel_error"])])
    return buf.getvalue()


def write_phase_csv(rows: Sequence[dict], path) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(phase_csv(rows))


def write_phase_svg(rows: Sequence[dict], path) -> None:
    """Success rate against K, one line per N, as a byte-reproducible SVG.

    Matplotlib embeds run-dependent ids and timestamps by default; pinning
    the hash salt and blanking the date metadata makes repeated renders of
    the same rows byte-identical.
    """
    import matplotlib
    from matplotlib.backends.backend_agg import FigureCanvasAgg
    from matplotlib.figure import Figure

    fig = Figure(figsize=(6.0, 4.0))
    FigureCanvasAgg(fig)
    ax = fig.subplots()
    by_n: dict[int, list[dict]] = {}
    for row in rows:
        by_n.setdefault(row["N"], []).append(row)
    for n_value in sorted(by_n):
        cells = by_n[n_value]
        ax.plot([c["K"] for c in cells], [c["success_rate"] for c in cells],
                marker="o", label=f"N={n_value}")
    ax.set_xlabel("block sparsity K")
    ax.set_ylabel("success rate")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower left")
    with matplotlib.rc_context({"svg.hashsalt": "bommp"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
