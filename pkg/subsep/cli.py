"""
Command-line front end.

    subsep synth    --length N --n-max K --seed S [--noise-amp A --wavelets W] --out DIR
    subsep filter   --input F.csv --q Q [--lambda L --knots T --order M --n-max K] --out DIR
    subsep sweep    --input F.csv --truth T.csv --step DQ [solver flags] --out DIR
    subsep baseline --input F.csv --n-max K --out DIR
    subsep compare  --input F.csv --truth T.csv --q Q --out DIR
    subsep basis    --input F.csv [--knots T --order M --n-max K] --out DIR

Exit status: 0 success, 1 runtime error, 2 usage error (help is printed).
"""

import argparse
import json
import logging
import os
import platform
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np
import scipy
from pydantic import ValidationError

from . import __version__
from .errors import ParameterError, SubsepError
from .focuss import FocussResult
from .pipeline import (
    SeparationConfig,
    basis_partitions,
    compare,
    default_knot_target,
    fft_baseline,
    separate,
    sweep_q,
    sweep_summary,
    write_sweep_csv,
)
from .plotting import write_line_svg
from .signal import Signal, SynthSpec, read_signal_csv, synth_scenario, write_signal_csv
from .spline import BSplineBasis, read_partition_json, write_basis_csv, write_partition_json

logger = logging.getLogger(__name__)

THREADS_ENV = "SUBSEP_THREADS"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
Q_HELP = "Exponent of the q-norm-like penalty, 0 < q <= 1"


@dataclass(frozen=True)
class RunManifest:
    command: str
    config_path: Optional[Path]
    seed: int
    output_dir: Path

    def write(self, config: SeparationConfig, parameters: dict) -> Path:
        document = {
            "command": self.command,
            "seed": self.seed,
            "config_path": str(self.config_path) if self.config_path else None,
            "output_dir": str(self.output_dir),
            "config": config.model_dump(mode="json", by_alias=True),
            "parameters": {"seed": self.seed, **parameters},
            "versions": {
                "subsep": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
        }
        path = self.output_dir / "manifest.json"
        _write_json(path, document)
        return path


def _write_json(path: Path, document: dict) -> None:
    with open(path, "w") as f:
        json.dump(document, f, indent=2, sort_keys=True)
        f.write("\n")


def _format_validation_error(err: ValidationError, origin: str) -> str:
    problems = []
    for item in err.errors():
        key = ".".join(str(part) for part in item["loc"]) or "<root>"
        problems.append(f"{origin} key '{key}': {item['msg']}")
    return "; ".join(problems)


def load_config_document(path: Path) -> dict:
    try:
        with open(path, "r") as f:
            document = json.load(f)
    except json.JSONDecodeError as err:
        raise ParameterError(f"config file {path} is not valid JSON: {err}") from None
    if not isinstance(document, dict):
        raise ParameterError(f"config file {path} must hold a JSON object")
    return document


def _merge(base: dict, overrides: dict) -> dict:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _drop_none(document: dict) -> dict:
    cleaned = {}
    for key, value in document.items():
        if isinstance(value, dict):
            value = _drop_none(value)
            if value:
                cleaned[key] = value
        elif value is not None:
            cleaned[key] = value
    return cleaned


def resolve_config(args: argparse.Namespace, length: int) -> SeparationConfig:
    """Defaults < config file < flags. The noise length always follows the input signal."""
    document = load_config_document(args.config) if getattr(args, "config", None) else {}
    overrides = _drop_none({
        "noise": {"length": length, "n_max": getattr(args, "n_max", None)},
        "spline_order": getattr(args, "order", None),
        "knot_target": getattr(args, "knots", None),
        "solver": {
            "q": getattr(args, "q", None),
            "lambda": getattr(args, "lambda_", None),
            "epsilon": getattr(args, "epsilon", None),
            "max_iter": getattr(args, "max_iter", None),
            "init": getattr(args, "init", None),
        },
    })
    merged = _merge(document, overrides)
    if "knot_target" not in merged:
        merged["knot_target"] = default_knot_target(length, merged.get("spline_order", 4))
    try:
        return SeparationConfig.model_validate(merged)
    except ValidationError as err:
        origin = "config" if args.config else "flag"
        raise ParameterError(_format_validation_error(err, origin)) from None


def _prepare_output(args: argparse.Namespace) -> RunManifest:
    output_dir = Path(args.out)
    output_dir.mkdir(parents=True, exist_ok=True)
    if not os.access(output_dir, os.W_OK):
        raise ParameterError(f"output directory {output_dir} is not writable")
    config_path = Path(args.config) if getattr(args, "config", None) else None
    return RunManifest(args.command, config_path, args.seed, output_dir)


def _write_trace(manifest: RunManifest, name: str, signal: Signal, plot: bool, title: str) -> None:
    write_signal_csv(manifest.output_dir / f"{name}.csv", signal)
    if plot:
        write_line_svg(manifest.output_dir / f"{name}.svg", signal.times, signal.samples, title, "t [s]", "amplitude")


def _print_banner(title: str) -> None:
    print("=" * 60)
    print(title)
    print("=" * 60)


def run_synth(args: argparse.Namespace) -> None:
    try:
        spec = SynthSpec(
            length=args.length,
            seed=args.seed,
            noise_n_max=args.n_max,
            noise_amplitude=args.noise_amp,
            wavelet_count=args.wavelets,
            dt=args.dt,
        )
    except ValidationError as err:
        raise ParameterError(_format_validation_error(err, "flag")) from None
    manifest = _prepare_output(args)
    scenario = synth_scenario(spec)
    _write_trace(manifest, "noise", scenario.noise, args.plot, "Simulated low-frequency noise")
    _write_trace(manifest, "signal", scenario.signal, args.plot, "Synthetic broadband signal")
    _write_trace(manifest, "mixed", scenario.mixed, args.plot, "Signal plus noise")
    manifest.write(resolve_config(args, spec.length), {"step": None, "synth": spec.model_dump(mode="json")})

    _print_banner("SYNTHETIC SCENARIO")
    print(f"  Samples: {spec.length}  n_max: {spec.noise_n_max}  seed: {spec.seed}")
    print(f"  Output:  {manifest.output_dir}")


def _solver_report(result: FocussResult) -> dict:
    return {
        "iterations": result.iterations,
        "converged": result.converged,
        "residual_norm": result.residual_norm,
        "functional_trace": [float(v) for v in result.functional_trace],
        "objective_trace": [float(v) for v in result.objective_trace],
        "coefficients": [float(v) for v in result.coefficients],
    }


def run_filter(args: argparse.Namespace) -> None:
    signal = read_signal_csv(args.input)
    config = resolve_config(args, signal.length)
    manifest = _prepare_output(args)
    knots = read_partition_json(args.knots_file) if args.knots_file else None

    result = separate(signal, config, knots=knots)
    _write_trace(manifest, "filtered", result.f_v, args.plot, f"Recovered component (q={config.solver.q:g})")
    _write_trace(manifest, "noise_estimate", result.noise_estimate, args.plot, "Noise estimate")
    write_partition_json(manifest.output_dir / "knots.json", result.knots)
    _write_json(manifest.output_dir / "solver.json",
                {**_solver_report(result.solver), "rank": result.rank, "shared_dim": result.shared_dim})
    manifest.write(config, {"step": None, "input": str(args.input), "knots_file": args.knots_file})

    _print_banner("FILTER")
    print(f"  q: {config.solver.q:g}  lambda: {config.solver.lambda_:g}  knots: {result.knots.size}")
    print(f"  Iterations: {result.solver.iterations}  converged: {result.solver.converged}")
    print(f"  Residual norm: {result.solver.residual_norm:.6g}")


def _threads(args: argparse.Namespace) -> int:
    if args.threads is not None:
        return args.threads
    value = os.environ.get(THREADS_ENV, "0")
    try:
        threads = int(value)
    except ValueError:
        raise ParameterError(f"{THREADS_ENV} must be an integer, got {value!r}") from None
    if threads < 0:
        raise ParameterError(f"{THREADS_ENV} must be >= 0, got {threads}")
    return threads


def run_sweep(args: argparse.Namespace) -> None:
    signal = read_signal_csv(args.input)
    truth = read_signal_csv(args.truth)
    config = resolve_config(args, signal.length)
    manifest = _prepare_output(args)
    threads = _threads(args)

    result = sweep_q(signal, truth, args.step, config, threads=threads)
    write_sweep_csv(manifest.output_dir / "sweep.csv", result)
    _write_json(manifest.output_dir / "summary.json", {"seed": args.seed, **sweep_summary(result)})
    if args.plot:
        write_line_svg(manifest.output_dir / "sweep.svg", result.q_values, result.errors,
                       "Approximation error against q", "q", "error norm")
    manifest.write(config, {"step": args.step, "threads": threads,
                            "input": str(args.input), "truth": str(args.truth)})

    _print_banner("Q SWEEP")
    print(f"  Grid points: {result.q_values.size}  failed: {len(result.failures)}")
    print(f"  Best q:      {result.best_q:g}")
    print(f"  Best error:  {result.best_error:.6f}")
    if result.second_best_q is not None:
        print(f"  Second q:    {result.second_best_q:g}  error {result.second_best_error:.6f}")
    print(f"  FFT error:   {result.fft_error:.6f}")


def run_baseline(args: argparse.Namespace) -> None:
    signal = read_signal_csv(args.input)
    config = resolve_config(args, signal.length)
    manifest = _prepare_output(args)

    filtered = fft_baseline(signal, config.noise)
    _write_trace(manifest, "baseline", filtered, args.plot, "FFT band-stop baseline")
    manifest.write(config, {"step": None, "input": str(args.input)})

    _print_banner("FFT BASELINE")
    print(f"  Removed bins |n| <= {config.noise.n_max}  output: {manifest.output_dir / 'baseline.csv'}")


def run_compare(args: argparse.Namespace) -> None:
    signal = read_signal_csv(args.input)
    truth = read_signal_csv(args.truth)
    config = resolve_config(args, signal.length)
    manifest = _prepare_output(args)

    comparison = compare(signal, truth, config)
    _write_trace(manifest, "error_focuss", comparison.focuss_error, args.plot,
                 f"|f^q - f^s| (q={config.solver.q:g})")
    _write_trace(manifest, "error_fft", comparison.fft_error, args.plot, "|f^f - f^s|")
    _write_json(manifest.output_dir / "summary.json", {
        "seed": args.seed,
        "q": config.solver.q,
        "focuss_error": comparison.focuss_norm,
        "fft_error": comparison.fft_norm,
    })
    manifest.write(config, {"step": None, "input": str(args.input), "truth": str(args.truth)})

    _print_banner("COMPARISON")
    print(f"  FOCUSS error (q={config.solver.q:g}): {comparison.focuss_norm:.6f}")
    print(f"  FFT error:                {comparison.fft_norm:.6f}")


def run_basis(args: argparse.Namespace) -> None:
    signal = read_signal_csv(args.input)
    config = resolve_config(args, signal.length)
    manifest = _prepare_output(args)

    partitions = basis_partitions(signal, config)
    for name, partition in partitions.items():
        basis = BSplineBasis.from_partition(partition, config.spline_order)
        write_basis_csv(manifest.output_dir / f"basis_{name}.csv", basis, signal.times)
        write_partition_json(manifest.output_dir / f"knots_{name}.json", partition)
    manifest.write(config, {"step": None, "input": str(args.input)})

    _print_banner("B-SPLINE BASES")
    names = ", ".join(partitions)
    print(f"  Knots: {config.knot_target}  order: {config.spline_order}  partitions: {names}")


def _nonnegative_int(value: str) -> int:
    number = int(value)
    if number < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {value}")
    return number


class _HelpfulParser(argparse.ArgumentParser):
    """Prints the full help before a usage error."""

    def error(self, message):
        self.print_help(sys.stderr)
        self.exit(2, f"\n{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", required=True, help="Output directory")
    common.add_argument("--seed", type=_nonnegative_int, default=0, help="Seed recorded with every output")
    common.add_argument("--plot", action="store_true", help="Also write SVG line plots")
    common.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Logging level")

    configured = argparse.ArgumentParser(add_help=False)
    configured.add_argument("--config", help="JSON file mirroring SeparationConfig")
    configured.add_argument("--n-max", dest="n_max", type=_nonnegative_int, help="Highest noise Fourier index")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--lambda", dest="lambda_", type=float, help="Regularization parameter")
    solver.add_argument("--epsilon", type=float, help="Relative convergence threshold")
    solver.add_argument("--max-iter", dest="max_iter", type=int, help="Iteration cap")
    solver.add_argument("--init", choices=["ridge", "ones"], help="Initial coefficient vector")
    solver.add_argument("--knots", type=_nonnegative_int, help="Number of interior knots")
    solver.add_argument("--order", type=int, help="Spline order m (4 = cubic)")

    parser = _HelpfulParser(prog="subsep", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", parents=[common], help="Write a seeded noise/signal/mixed scenario")
    synth.add_argument("--length", type=int, default=403, help="Samples per trace")
    synth.add_argument("--n-max", dest="n_max", type=_nonnegative_int, default=21, help="Highest noise Fourier index")
    synth.add_argument("--noise-amp", dest="noise_amp", type=float, default=1.0, help="Noise RMS")
    synth.add_argument("--wavelets", type=int, default=8, help="Number of Ricker wavelets")
    synth.add_argument("--dt", type=float, default=1.0, help="Sample interval in seconds")
    synth.set_defaults(handler=run_synth, config=None)

    filt = commands.add_parser("filter", parents=[common, configured, solver], help="Separate one trace")
    filt.add_argument("--input", required=True, help="Signal CSV")
    filt.add_argument("--q", type=float, required=True, help=Q_HELP)
    filt.add_argument("--knots-file", dest="knots_file", help="Reuse a knots.json partition")
    filt.set_defaults(handler=run_filter)

    sweep = commands.add_parser("sweep", parents=[common, configured, solver], help="Error against q")
    sweep.add_argument("--input", required=True, help="Signal CSV")
    sweep.add_argument("--truth", required=True, help="Noise-free signal CSV")
    sweep.add_argument("--step", type=float, required=True, help="q grid step")
    sweep.add_argument("--threads", type=_nonnegative_int, help=f"Parallel solves (default ${THREADS_ENV}, 0 = serial)")
    sweep.set_defaults(handler=run_sweep)

    baseline = commands.add_parser("baseline", parents=[common, configured], help="FFT band-stop filter")
    baseline.add_argument("--input", required=True, help="Signal CSV")
    baseline.set_defaults(handler=run_baseline)

    comp = commands.add_parser("compare", parents=[common, configured, solver], help="Error traces against the truth")
    comp.add_argument("--input", required=True, help="Signal CSV")
    comp.add_argument("--truth", required=True, help="Noise-free signal CSV")
    comp.add_argument("--q", type=float, required=True, help=Q_HELP)
    comp.set_defaults(handler=run_compare)

    basis = commands.add_parser("basis", parents=[common, configured, solver],
                                help="B-spline bases on curvature and uniform knots")
    basis.add_argument("--input", required=True, help="Signal CSV")
    basis.set_defaults(handler=run_basis)
    return parser


def dispatch(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:
        return exit_.code if isinstance(exit_.code, int) else 2

    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT)
    try:
        args.handler(args)
    except (SubsepError, ValueError, OSError) as err:
        logger.debug("Command %s failed", args.command, exc_info=True)
        print(f"error: {err}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(dispatch())
