"""Command line front end.

Subcommands: recover, ric, bound, certify, counterexample, lemma-check,
phase.  Exit codes: 0 success, 1 usage or parse error, 2 numerical stall,
3 recovery guarantee uncheckable at the requested order.  Human-readable
numbers are printed with 9 significant digits; JSON and CSV output keeps
full precision.  Block indices are 1-based in all output.

Every run writes one reproducibility line to stderr carrying the package
version, the seed in play (``-`` for deterministic commands) and a digest
of the resolved options.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys

import numpy as np

from . import __version__
from .blockmodel import (BlockVector, block_support, mixed_norm,
                         read_bsv, write_bsv)
from .counterexample import CounterexampleSpec, build, verify, worst_case_signal
from .harness import ExperimentConfig, phase_csv, run_phase, substream, write_phase_svg
from .linalg import read_bsm, write_bsm
from .pursuit import (STOP_STALL, TIE_HIGHEST, TIE_LOWEST, PursuitConfig,
                      bommp, trace_to_csv)
from .ric import (GuaranteeUncheckableError, block_ric_exact, block_ric_sampled,
                  bound_prior, bound_sharp, certify_noiseless, certify_noisy,
                  polarization_gap)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_STALL = 2
EXIT_UNCHECKABLE = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # raise instead of exiting so main() can map to the documented codes
    def error(self, message):
        raise UsageError(message)


def _fmt(value: float) -> str:
    return f"{value:.9g}"


def _one_based(indices) -> str:
    items = [str(i + 1) for i in indices]
    return " ".join(items) if items else "(none)"


def _repro_line(args: argparse.Namespace, seed="-") -> None:
    payload = {k: v for k, v in vars(args).items() if k != "func"}
    blob = json.dumps(payload, sort_keys=True, default=str).encode("ascii")
    digest = hashlib.sha256(blob).hexdigest()[:12]
    print(f"bommp {__version__} seed={seed} config=sha256:{digest}", file=sys.stderr)


def _detected_support(x: BlockVector, rtol: float):
    top = mixed_norm(x, float("inf"))
    return block_support(x, max(rtol * top, 1e-300))


def cmd_recover(args) -> int:
    A = read_bsm(args.matrix)
    v = read_bsv(args.vector)

    looks_like_signal = v.pattern == A.pattern
    looks_like_measurement = v.n == A.m
    mode = args.interpret
    if mode == "auto":
        if looks_like_signal:
            mode = "signal"
        elif looks_like_measurement:
            mode = "measurement"
        else:
            raise UsageError(
                f"vector (length {v.n}) matches neither the column pattern nor "
                f"the row count {A.m}; pass --as")
    if mode == "signal":
        if not looks_like_signal:
            raise UsageError("vector does not match the matrix column pattern")
        y = A.values @ v.values
        true_support = block_support(v)
    else:
        if not looks_like_measurement:
            raise UsageError(f"vector length {v.n} does not match the row count {A.m}")
        y = v.values
        true_support = None

    config = PursuitConfig(K=args.K, N=args.N, epsilon=args.epsilon,
                           max_iterations=args.max_iterations,
                           tie_break=args.tie_break, support_tol=args.support_tol)
    result = bommp(A, y, config)
    _repro_line(args)

    residual = float(np.linalg.norm(y - A.values @ result.estimate.values))
    y_norm = float(np.linalg.norm(y))
    rel = residual / y_norm if y_norm > 0 else 0.0
    print(f"selected blocks: {_one_based(result.support.indices)}")
    print(f"detected support: "
          f"{_one_based(_detected_support(result.estimate, config.support_tol).indices)}")
    print(f"residual norm: {_fmt(residual)} (relative {_fmt(rel)})")
    print(f"iterations: {result.iterations}")
    print(f"stop reason: {result.stop_reason}")
    if mode == "signal":
        err = float(np.linalg.norm(result.estimate.values - v.values))
        scale = float(np.linalg.norm(v.values))
        print(f"relative error vs signal: {_fmt(err / scale if scale > 0 else err)}")
    if args.estimate_out:
        write_bsv(result.estimate, args.estimate_out)
    if args.trace_out:
        trace_to_csv(result, args.trace_out, true_support=true_support)
    return EXIT_STALL if result.stop_reason == STOP_STALL else EXIT_OK


def cmd_ric(args) -> int:
    A = read_bsm(args.matrix)
    if args.samples is None:
        report = block_ric_exact(A, args.order, budget=args.budget)
        seed = "-"
    else:
        report = block_ric_sampled(A, args.order, args.samples, seed=args.seed,
                                   budget=args.budget)
        seed = args.seed
    _repro_line(args, seed=seed)
    print(json.dumps({
        "order": report.order,
        "delta": report.delta,
        "lambda_min": report.lambda_min,
        "lambda_max": report.lambda_max,
        "witness_blocks": [i + 1 for i in report.witness_support.indices],
        "exact": report.exact,
    }))
    return EXIT_OK


def cmd_bound(args) -> int:
    _repro_line(args)
    print(f"sharp: {_fmt(bound_sharp(args.K, args.N))}")
    if args.iteration is not None:
        print(f"prior (k={args.iteration}): "
              f"{_fmt(bound_prior(args.K, args.N, args.iteration))}")
    return EXIT_OK


def cmd_certify(args) -> int:
    A = read_bsm(args.matrix)
    if args.signal is None:
        if args.epsilon is not None:
            raise UsageError("noisy certification needs --signal along with --epsilon")
        report = certify_noiseless(A, args.K, args.N, budget=args.budget)
    else:
        x = read_bsv(args.signal)
        epsilon = 0.0 if args.epsilon is None else args.epsilon
        report = certify_noisy(A, x, args.K, args.N, epsilon, budget=args.budget)
    _repro_line(args)
    print(json.dumps({
        "mode": report.mode,
        "condition_holds": report.condition_holds,
        "delta": report.delta_used,
        "bound": report.bound,
        "margin": report.margin,
        "min_norm_threshold": report.min_norm_threshold,
    }))
    return EXIT_OK


def cmd_counterexample(args) -> int:
    spec = CounterexampleSpec(K=args.K, N=args.N, d=args.d)
    report = verify(spec, tie_break=args.tie_break)
    _repro_line(args)
    if args.matrix_out:
        write_bsm(build(spec), args.matrix_out)
    if args.signal_out:
        write_bsv(worst_case_signal(spec), args.signal_out)
    print(json.dumps({
        "K": spec.K,
        "N": spec.N,
        "d": spec.d,
        "block_count": spec.block_count,
        "delta_observed": report.delta_observed,
        "bound": bound_sharp(spec.K, spec.N),
        "spectrum_expected": [[v, m] for v, m in report.spectrum_expected],
        "spectrum_observed": [[v, m] for v, m in report.spectrum_observed],
        "spectrum_matches": report.spectrum_matches,
        "alpha_1": report.alpha_1,
        "beta_1": report.beta_1,
        "tie_break": report.tie_break,
        "failure_demonstrated": report.failure_demonstrated,
    }))
    return EXIT_OK


def cmd_lemma_check(args) -> int:
    _repro_line(args, seed=args.seed)
    worst = 0.0
    for draw in range(args.draws):
        rng = substream(args.seed, draw)
        m = int(rng.integers(1, args.max_dim + 1))
        n = int(rng.integers(1, args.max_dim + 1))
        A = rng.normal(size=(m, n))
        x = rng.normal(size=n)
        count = int(rng.integers(1, 5))
        h = [rng.normal(size=n) for _ in range(count)]
        subset = list(rng.choice(count, size=int(rng.integers(1, count + 1)),
                                 replace=False))
        scale = float(rng.uniform(0.1, 10.0))
        coupling = float(rng.uniform(0.1, 10.0))
        gap = polarization_gap(A, x, h, subset, scale, coupling)
        magnitude = max(1.0, float(np.linalg.norm(A @ x)) ** 2)
        worst = max(worst, abs(gap) / magnitude)
    print(f"draws: {args.draws}")
    print(f"max relative defect: {_fmt(worst)}")
    if worst <= args.tol:
        print(f"PASS (tolerance {_fmt(args.tol)})")
        return EXIT_OK
    print(f"FAIL (tolerance {_fmt(args.tol)})")
    return EXIT_STALL


def cmd_phase(args) -> int:
    with open(args.config, "r", encoding="ascii") as fh:
        config = ExperimentConfig.from_json(fh.read())
    if args.trials is not None:
        config = dataclasses.replace(config, trials=args.trials)
    if args.seed is not None:
        config = dataclasses.replace(config, master_seed=args.seed)
    _repro_line(args, seed=config.master_seed)
    rows = run_phase(config, workers=args.workers)
    text = phase_csv(rows)
    if args.out_csv:
        with open(args.out_csv, "w", encoding="ascii", newline="") as fh:
            fh.write(text)
        print(f"wrote {args.out_csv}")
    else:
        print(text, end="")
    if args.out_svg:
        write_phase_svg(rows, args.out_svg)
        print(f"wrote {args.out_svg}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bommp",
                     description="Block-sparse recovery by orthogonal multi-matching "
                                 "pursuit, with exact isometry certificates.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("recover", help="run the pursuit on a matrix and a vector")
    p.add_argument("matrix", help="measurement matrix (.bsm)")
    p.add_argument("vector", help="signal or measurement vector (.bsv)")
    p.add_argument("--K", type=int, required=True, help="sparsity budget")
    p.add_argument("--N", type=int, default=1, help="blocks adopted per iteration")
    p.add_argument("--epsilon", type=float, default=0.0, help="residual stopping level")
    p.add_argument("--max-iterations", type=int, default=None)
    p.add_argument("--tie-break", choices=[TIE_LOWEST, TIE_HIGHEST], default=TIE_LOWEST)
    p.add_argument("--support-tol", type=float, default=1e-9,
                   help="relative tolerance for the detected support")
    p.add_argument("--as", dest="interpret", choices=["auto", "signal", "measurement"],
                   default="auto",
                   help="how to read the vector: a signal to be measured first, or "
                        "a measurement (default: infer from its shape)")
    p.add_argument("--estimate-out", default=None, help="write the estimate (.bsv)")
    p.add_argument("--trace-out", default=None, help="write the iteration trace (CSV)")
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("ric", help="block isometry constant of a matrix")
    p.add_argument("matrix", help="matrix file (.bsm)")
    p.add_argument("--order", type=int, required=True, help="block sparsity order")
    p.add_argument("--samples", type=int, default=None,
                   help="sample this many supports instead of full enumeration")
    p.add_argument("--seed", type=int, default=0, help="seed for sampling")
    p.add_argument("--budget", type=int, default=2_000_000,
                   help="largest support count allowed for enumeration")
    p.set_defaults(func=cmd_ric)

    p = sub.add_parser("bound", help="recovery thresholds for (K, N)")
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--iteration", type=int, default=None,
                   help="also print the per-iteration threshold for this k")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("certify", help="check the recovery guarantee for a matrix")
    p.add_argument("matrix", help="matrix file (.bsm)")
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--N", type=int, default=1)
    p.add_argument("--epsilon", type=float, default=None, help="noise norm bound")
    p.add_argument("--signal", default=None,
                   help="signal (.bsv) whose block norms the noisy condition tests")
    p.add_argument("--budget", type=int, default=2_000_000)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("counterexample",
                       help="audit the construction attaining the sharp threshold")
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--N", type=int, default=1)
    p.add_argument("--d", type=int, default=1, help="block length")
    p.add_argument("--tie-break", choices=[TIE_LOWEST, TIE_HIGHEST], default=TIE_HIGHEST)
    p.add_argument("--matrix-out", default=None, help="write the matrix (.bsm)")
    p.add_argument("--signal-out", default=None, help="write the defeating signal (.bsv)")
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("lemma-check",
                       help="stress the polarization identity on random draws")
    p.add_argument("--draws", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-dim", type=int, default=40)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_lemma_check)

    p = sub.add_parser("phase", help="Monte Carlo sweep over the (K, N) grid")
    p.add_argument("config", help="sweep description (JSON)")
    p.add_argument("--out-csv", default=None)
    p.add_argument("--out-svg", default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--trials", type=int, default=None, help="override the trial count")
    p.add_argument("--seed", type=int, default=None, help="override the master seed")
    p.set_defaults(func=cmd_phase)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GuaranteeUncheckableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNCHECKABLE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
