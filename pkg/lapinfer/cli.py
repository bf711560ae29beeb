# lapinfer/cli.py
"""
Command Line Interface for lapinfer

This module provides a CLI for the Laplacian analysis framework, allowing users to:
1. Check and summarise a manifest of subject matrices
2. Compute group mean Laplacians and percentile-binarized masks
3. Run the one-, two- and k-sample network tests and the edgewise baseline
4. Drive the simulation studies

Exit codes: 0 success, 2 usage, 3 invalid input, 4 numerical failure.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from lapinfer import __version__
from lapinfer.errors import LaplacianError, ensure
from lapinfer.framework import IngestOptions, LaplacianAnalysisFramework
from lapinfer.graph_core import TOL_REL, LaplacianMatrix
from lapinfer.inference import EstimatorOptions
from lapinfer.parser import MatrixParser
from lapinfer.report import RunRecord, digest_header, write_json_report, write_run_record
from lapinfer.simulate.clt import clt_diagnostic, default_clt_law
from lapinfer.simulate.rng import Stage, stream
from lapinfer.simulate.study import (
    PowerStudyConfig,
    apply_overrides,
    config_from_dict,
    load_config,
    run_power_study,
    write_power_curve,
    write_synthetic_cohort,
)

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def _add_ingest_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("manifest", type=str, help="Manifest CSV with subject_id, group, path")
    parser.add_argument("--dim", type=int, default=None, help="Declared matrix dimension d")
    parser.add_argument("--header", action="store_true", help="Matrix files start with one header line to skip")
    parser.add_argument(
        "--laplacian", action="store_true", help="Matrix files hold Laplacians, not association matrices"
    )
    parser.add_argument("--tol", type=float, default=TOL_REL, help="Relative symmetry tolerance")


def _add_estimator_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--alpha", type=float, default=0.05, help="Test level")
    parser.add_argument("--delta", type=float, default=2.0, help="Threshold scale of the covariance estimate")
    parser.add_argument("--no-threshold", action="store_true", help="Skip adaptive thresholding")
    parser.add_argument("--no-pd", action="store_true", help="Skip the nearest positive-definite projection")
    parser.add_argument("--seed", type=int, default=0, help="Seed recorded in the run record")


def create_argparser() -> argparse.ArgumentParser:
    """Create argument parser for the CLI."""
    parser = argparse.ArgumentParser(
        prog="lapinfer",
        description="lapinfer: hypothesis tests on samples of networks through their graph Laplacians",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    subparsers = parser.add_subparsers(dest="command", help="Command to execute")

    # Ingest check
    check_parser = subparsers.add_parser("ingest-check", help="Validate a manifest and summarise its groups")
    _add_ingest_arguments(check_parser)

    # Mean command
    mean_parser = subparsers.add_parser("mean", help="Write the mean Laplacian of every group")
    _add_ingest_arguments(mean_parser)
    mean_parser.add_argument("--out", type=str, required=True, help="Output directory")

    # Binarize command
    binarize_parser = subparsers.add_parser("binarize", help="Threshold subjects at a pooled percentile")
    _add_ingest_arguments(binarize_parser)
    binarize_parser.add_argument("--q", type=float, default=75.0, help="Percentile in [0, 100]")
    binarize_parser.add_argument("--out", type=str, required=True, help="Output directory")

    # Test command
    test_parser = subparsers.add_parser("test", help="Run a network test")
    test_subparsers = test_parser.add_subparsers(dest="test_kind", help="Test to run")
    test_subparsers.required = True

    one_parser = test_subparsers.add_parser("one", help="One-sample test against a reference Laplacian")
    _add_ingest_arguments(one_parser)
    _add_estimator_arguments(one_parser)
    one_parser.add_argument("--group", type=str, default=None, help="Group to test (default: the only group)")
    one_parser.add_argument("--lambda0", type=str, required=True, help="Reference Laplacian file")
    one_parser.add_argument("--out", type=str, required=True, help="Report file (JSON)")

    two_parser = test_subparsers.add_parser("two", help="Two-sample test")
    _add_ingest_arguments(two_parser)
    _add_estimator_arguments(two_parser)
    two_parser.add_argument("--groups", nargs=2, default=None, metavar="LABEL", help="The two groups")
    two_parser.add_argument("--out", type=str, required=True, help="Report file (JSON)")

    k_parser = test_subparsers.add_parser("k", help="k-sample test")
    _add_ingest_arguments(k_parser)
    _add_estimator_arguments(k_parser)
    k_parser.add_argument("--groups", nargs="+", default=None, metavar="LABEL", help="Groups (default: all)")
    k_parser.add_argument(
        "--k-pooling", choices=["within", "literal"], default="within", help="Pooling of group covariances"
    )
    k_parser.add_argument("--out", type=str, required=True, help="Report file (JSON)")

    # Mass-univariate command
    massuni_parser = subparsers.add_parser("massuni", help="Edgewise Welch tests between two groups")
    _add_ingest_arguments(massuni_parser)
    massuni_parser.add_argument("--alpha", type=float, default=0.05, help="Family-wise level")
    massuni_parser.add_argument("--seed", type=int, default=0, help="Seed recorded in the run record")
    massuni_parser.add_argument("--groups", nargs=2, default=None, metavar="LABEL", help="The two groups")
    massuni_parser.add_argument(
        "--correction", choices=["none", "bonferroni"], default="bonferroni", help="Multiple-comparison correction"
    )
    massuni_parser.add_argument("--out", type=str, required=True, help="Output directory")

    # Simulate command
    simulate_parser = subparsers.add_parser("simulate", help="Run a simulation study")
    simulate_subparsers = simulate_parser.add_subparsers(dest="study", help="Study to run")
    simulate_subparsers.required = True

    power_parser = simulate_subparsers.add_parser("power", help="Power curve of the two-sample test")
    power_parser.add_argument("--config", type=str, default=None, help="YAML study config")
    power_parser.add_argument("--topology", choices=["block_diagonal", "small_world"], default=None)
    power_parser.add_argument("--d", type=int, default=None, help="Number of vertices")
    power_parser.add_argument("--n", type=int, default=None, help="Subjects per group")
    power_parser.add_argument("--T", type=int, default=None, help="Time points per subject")
    power_parser.add_argument("--noise", choices=["gaussian_iid", "ar1"], default=None)
    power_parser.add_argument("--phi", type=float, default=None, help="AR(1) coefficient")
    power_parser.add_argument("--association", choices=["covariance", "mutual_information"], default=None)
    power_parser.add_argument("--bins", type=int, default=None, help="Bins per coordinate for mutual information")
    power_parser.add_argument("--ladder", type=int, nargs="+", default=None, help="Rewire counts, starting at 0")
    power_parser.add_argument("--reps", type=int, default=None, help="Replicates per ladder entry")
    power_parser.add_argument("--alpha", type=float, default=None, help="Test level")
    power_parser.add_argument("--delta", type=float, default=None, help="Threshold scale")
    power_parser.add_argument("--seed", type=int, default=None, help="Master seed")
    power_parser.add_argument("--workers", type=int, default=1, help="Worker processes")
    power_parser.add_argument("--out", type=str, required=True, help="Power curve CSV")

    clt_parser = simulate_subparsers.add_parser("clt", help="Central limit diagnostic for Laplacian means")
    clt_parser.add_argument("--population", choices=["block_diagonal", "small_world"], default="block_diagonal")
    clt_parser.add_argument("--d", type=int, default=5, help="Number of vertices")
    clt_parser.add_argument("--n", type=int, default=500, help="Laplacians per mean")
    clt_parser.add_argument("--reps", type=int, default=300, help="Number of simulated means")
    clt_parser.add_argument("--T", type=int, default=50, help="Time points behind each association matrix")
    clt_parser.add_argument("--seed", type=int, default=0, help="Master seed")
    clt_parser.add_argument("--out", type=str, required=True, help="Diagnostic report (JSON)")

    cohort_parser = simulate_subparsers.add_parser("cohort", help="Write a synthetic cohort and its manifest")
    cohort_parser.add_argument("--sizes", nargs="+", required=True, metavar="LABEL=N", help="Group sizes")
    cohort_parser.add_argument("--d", type=int, default=10, help="Number of vertices")
    cohort_parser.add_argument("--T", type=int, default=50, help="Time points per subject")
    cohort_parser.add_argument("--topology", choices=["block_diagonal", "small_world"], default="block_diagonal")
    cohort_parser.add_argument("--seed", type=int, default=0, help="Master seed")
    cohort_parser.add_argument("--out", type=str, required=True, help="Output directory")

    return parser


def _ingest_options(args: argparse.Namespace) -> IngestOptions:
    return IngestOptions(dim=args.dim, header=int(args.header), laplacian=args.laplacian, tol=args.tol)


def _estimator_options(args: argparse.Namespace) -> EstimatorOptions:
    return EstimatorOptions(
        threshold=not args.no_threshold,
        delta=args.delta,
        project_pd=not args.no_pd,
        k_pooling=getattr(args, "k_pooling", "within"),
    )


def _framework(args: argparse.Namespace, options: EstimatorOptions = EstimatorOptions()) -> LaplacianAnalysisFramework:
    return LaplacianAnalysisFramework.from_manifest(args.manifest, _ingest_options(args), options)


def _analysis_config(command: str, args: argparse.Namespace, framework: LaplacianAnalysisFramework,
                     **extra: Any) -> Dict[str, Any]:
    config = {
        "command": command,
        "ingest": _ingest_options(args).to_dict(),
        "input_digest": framework.input_digest(),
    }
    config.update(extra)
    return config


def ingest_check(args: argparse.Namespace) -> None:
    """
    Ingest a manifest and print its summary.

    Args:
        args: Parsed arguments with the ingest flags.
    """
    framework = _framework(args)
    summary = framework.summary()
    print(f"d = {summary['dim']}")
    for label, info in summary["groups"].items():
        print(
            f"  {label}: n = {info['n']}, in L_d: {info['in_L_d']}, in L'_d: {info['in_L_d_prime']}, "
            f"components {info['min_components']}..{info['max_components']}"
        )
    print(f"input digest: {framework.input_digest()}")


def write_means(args: argparse.Namespace) -> None:
    """
    Write every group's mean Laplacian as ``<out>/<group>_mean.csv``.

    Args:
        args: Parsed arguments with the ingest flags and --out.
    """
    framework = _framework(args)
    record = RunRecord.from_argv(_analysis_config("mean", args, framework))
    out = Path(args.out)
    writer = MatrixParser()
    written = []
    for label, mean in framework.means().items():
        written.append(writer.write(out / f"{label}_mean.csv", mean.entries, digest_header(record.run_digest)))
    record.finish(*written)
    summary = {"groups": {label: g.n for label, g in framework.groups.items()}, "dim": framework.dim}
    write_json_report(out / "summary.json", summary, record)
    print(f"Mean Laplacians for {len(written)} groups written to {out}")


def write_binarized(args: argparse.Namespace) -> None:
    """
    Threshold every subject at the q-th pooled percentile and write 0/1 masks.

    Args:
        args: Parsed arguments with the ingest flags, --q and --out.
    """
    framework = _framework(args)
    record = RunRecord.from_argv(_analysis_config("binarize", args, framework, q=args.q))
    out = Path(args.out)
    writer = MatrixParser()
    written = []
    edges: Dict[str, List[int]] = {}
    for label, masks in framework.binarize(args.q).items():
        edges[label] = []
        for index, mask in enumerate(masks, start=1):
            path = out / label / f"{index:04d}.csv"
            written.append(writer.write(path, mask.astype(int), digest_header(record.run_digest)))
            edges[label].append(int(np.sum(np.tril(mask, k=-1))))
    record.finish(*written)
    write_json_report(out / "summary.json", {"q": args.q, "edges_above": edges}, record)
    print(f"{len(written)} masks at q={args.q} written to {out}")


def _read_lambda0(path: str, args: argparse.Namespace, dim: int) -> LaplacianMatrix:
    matrix = MatrixParser(header=int(args.header)).read(path, dim=dim)
    return LaplacianMatrix((matrix + matrix.T) / 2.0)


def run_test(args: argparse.Namespace) -> None:
    """
    Run a one-, two- or k-sample test and write its report.

    Args:
        args: Parsed arguments of the ``test`` subcommand.
    """
    options = _estimator_options(args)
    framework = _framework(args, options)
    if args.test_kind == "one":
        label = args.group
        if label is None:
            ensure(
                f"--group is required when the manifest has several groups ({', '.join(framework.groups)})",
                len(framework.groups) == 1,
            )
            label = next(iter(framework.groups))
        report = framework.test_one(label, _read_lambda0(args.lambda0, args, framework.dim))
        groups: Optional[Sequence[str]] = [label]
    elif args.test_kind == "two":
        report = framework.test_two(args.groups)
        groups = args.groups
    else:
        report = framework.test_k(args.groups)
        groups = args.groups
    record = RunRecord.from_argv(
        _analysis_config(f"test {args.test_kind}", args, framework, groups=groups,
                         estimator=options.to_dict(), alpha=args.alpha),
        seed=args.seed,
    )
    payload = report.to_dict()
    payload.update({"alpha": args.alpha, "reject": report.reject(args.alpha),
                    "input_digest": framework.input_digest()})
    write_json_report(args.out, payload, record)
    print(f"{report.test_kind}: statistic = {report.statistic:.6g}, dof = {report.dof}, p = {report.p_value:.6g}")
    print(f"{'reject' if report.reject(args.alpha) else 'do not reject'} H0 at alpha = {args.alpha}")


def run_massuni(args: argparse.Namespace) -> None:
    """
    Run the edgewise tests and write p-values, masks and a summary.

    Args:
        args: Parsed arguments of the ``massuni`` subcommand.
    """
    framework = _framework(args)
    result = framework.mass_univariate(args.groups, alpha=args.alpha, correction=args.correction)
    record = RunRecord.from_argv(
        _analysis_config("massuni", args, framework, groups=args.groups, alpha=args.alpha,
                         correction=args.correction),
        seed=args.seed,
    )
    out = Path(args.out)
    writer = MatrixParser()
    header = digest_header(record.run_digest)
    written = [
        writer.write(out / "pvalues.csv", result.p_matrix, header),
        writer.write(out / "mask.csv", result.mask.astype(int), header),
        writer.write(out / "mask_uncorrected.csv", result.uncorrected_mask.astype(int), header),
    ]
    record.finish(*written)
    write_json_report(out / "summary.json", result.to_dict(), record)
    summary = result.to_dict()
    print(
        f"{summary['n_flagged']} of {summary['n_tests']} edges significant "
        f"({args.correction}, level {summary['level']:.3g}); {summary['n_flagged_uncorrected']} uncorrected"
    )


def _power_config(args: argparse.Namespace) -> PowerStudyConfig:
    overrides = {
        "topology.kind": args.topology,
        "topology.d": args.d,
        "n": args.n,
        "T": args.T,
        "noise.kind": args.noise,
        "noise.phi": args.phi,
        "association": args.association,
        "bins": args.bins,
        "effect_ladder": args.ladder,
        "reps": args.reps,
        "alpha": args.alpha,
        "delta": args.delta,
        "seed": args.seed,
    }
    if args.config:
        return load_config(args.config, overrides)
    return config_from_dict(apply_overrides({}, overrides))


def simulate_power(args: argparse.Namespace) -> None:
    """
    Run a power study and write its curve as CSV.

    Args:
        args: Parsed arguments of ``simulate power``; flags override the YAML config.
    """
    config = _power_config(args)
    record = RunRecord.from_argv({"command": "simulate power", "study": config.to_dict()}, seed=config.seed)
    curve = run_power_study(config, workers=args.workers)
    out = write_power_curve(curve, args.out, record.run_digest)
    write_run_record(out, record)
    print(curve.to_frame().to_string(index=False))


def simulate_clt(args: argparse.Namespace) -> None:
    """
    Compare the sample covariance of simulated Laplacians with the CLT limit.

    Args:
        args: Parsed arguments of ``simulate clt``.
    """
    law = default_clt_law(args.population, d=args.d, T=args.T, seed=args.seed)
    diagnostic = clt_diagnostic(law, args.n, args.reps, stream(args.seed, stage=Stage.CLT))
    config = {"command": "simulate clt", "population": args.population, "d": args.d, "n": args.n,
              "reps": args.reps, "T": args.T}
    record = RunRecord.from_argv(config, seed=args.seed)
    write_json_report(args.out, diagnostic.to_dict(), record)
    print(f"relative Frobenius error {diagnostic.rel_frobenius_error:.4f}, "
          f"max |skewness| {diagnostic.max_abs_skewness:.3f} (band {diagnostic.skewness_band:.3f})")


def _parse_sizes(items: Sequence[str]) -> Dict[str, int]:
    """Parse LABEL=N items into group sizes, keeping their order."""
    sizes: Dict[str, int] = {}
    for item in items:
        label, sep, count = item.partition("=")
        ensure(f"group size must look like LABEL=N, got {item!r}", bool(sep) and bool(label) and count.isdigit())
        ensure(f"group '{label}' given twice", label not in sizes)
        sizes[label] = int(count)
    return sizes


def simulate_cohort(args: argparse.Namespace) -> None:
    """
    Write a synthetic cohort of association matrices and its manifest.

    Args:
        args: Parsed arguments of ``simulate cohort``.
    """
    sizes = _parse_sizes(args.sizes)
    manifest = write_synthetic_cohort(sizes, args.d, args.out, seed=args.seed, T=args.T, topology=args.topology)
    config = {"command": "simulate cohort", "sizes": sizes, "d": args.d, "T": args.T, "topology": args.topology}
    write_run_record(manifest, RunRecord.from_argv(config, seed=args.seed))
    print(f"Synthetic cohort of {sum(sizes.values())} subjects written; manifest at {manifest}")


def configure_logging(verbosity: int) -> None:
    """Log to stderr at WARNING, INFO (-v) or DEBUG (-vv)."""
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format=LOG_FORMAT)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for the CLI."""
    parser = create_argparser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)

    try:
        if args.command == "ingest-check":
            ingest_check(args)
        elif args.command == "mean":
            write_means(args)
        elif args.command == "binarize":
            write_binarized(args)
        elif args.command == "test":
            run_test(args)
        elif args.command == "massuni":
            run_massuni(args)
        elif args.command == "simulate":
            if args.study == "power":
                simulate_power(args)
            elif args.study == "clt":
                simulate_clt(args)
            else:
                simulate_cohort(args)
        else:
            parser.print_help()
            return 2
    except LaplacianError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
