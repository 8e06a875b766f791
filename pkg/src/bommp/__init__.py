"""Block-sparse signal recovery by orthogonal multi-matching pursuit, with
exact block restricted-isometry certificates, the sharp recovery threshold,
the adversarial construction attaining it, and a seeded experiment harness.
"""

__version__ = "0.1.0"

from .blockmodel import (BlockPattern, BlockVector, SupportSet, block_norms,
                         block_support, embed, mixed_norm, read_bsv, restrict,
                         write_bsv)
from .counterexample import (CounterexampleReport, CounterexampleSpec, build,
                             expected_spectrum, verify, worst_case_signal)
from .harness import (ExperimentConfig, TrialOutcome, gen_gaussian_matrix,
                      gen_noise, gen_signal, oracle_l20, phase_csv, run_phase,
                      run_trial, substream, write_phase_csv, write_phase_svg)
from .linalg import (DenseMatrix, EigenResult, column_block,
                     least_squares_min_norm, read_bsm, residual_projection,
                     submatrix, sym_eig, write_bsm)
from .pursuit import (IterationRecord, PursuitConfig, RecoveryResult,
                      alpha_beta, block_scores, bomp, bommp, identify,
                      trace_to_csv)
from .ric import (EnumerationBudgetError, GuaranteeReport,
                  GuaranteeUncheckableError, RicReport, block_ric_exact,
                  block_ric_sampled, bound_prior, bound_sharp,
                  certify_noiseless, certify_noisy, contraction_squared,
                  min_norm_threshold, polarization_gap)

__all__ = [
    "__version__",
    "BlockPattern", "BlockVector", "SupportSet",
    "block_norms", "block_support", "embed", "mixed_norm", "restrict",
    "read_bsv", "write_bsv", "read_bsm", "write_bsm",
    "DenseMatrix", "EigenResult", "column_block", "submatrix",
    "least_squares_min_norm", "residual_projection", "sym_eig",
    "PursuitConfig", "IterationRecord", "RecoveryResult",
    "block_scores", "identify", "bommp", "bomp", "alpha_beta", "trace_to_csv",
    "RicReport", "GuaranteeReport",
    "EnumerationBudgetError", "GuaranteeUncheckableError",
    "block_ric_exact", "block_ric_sampled", "bound_sharp", "bound_prior",
    "certify_noiseless", "certify_noisy", "min_norm_threshold",
    "contraction_squared", "polarization_gap",
    "CounterexampleSpec", "CounterexampleReport",
    "build", "expected_spectrum", "worst_case_signal", "verify",
    "ExperimentConfig", "TrialOutcome",
    "substream", "gen_gaussian_matrix", "gen_signal", "gen_noise",
    "oracle_l20", "run_trial", "run_phase",
    "phase_csv", "write_phase_csv", "write_phase_svg",
]
