"""Command line entry point: match, diagnose, bench, robustness, pedagogical."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .config import OUTPUT_FORMATS, ExperimentConfig, load_config
from .errors import ConfigError, SpectralMatchError
from .experiment_service import ExperimentService, RunRecord, pedagogical_transcript
from .market_io import load_matrix_csv, write_records, write_tables
from .spectral import DiagnosticReport, diagnose

LOGGER = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"


def _emit_records(records: List[RunRecord], config: ExperimentConfig) -> None:
    if config.output_format == "json":
        payload = [record.to_dict() for record in records]
        if not config.include_timings:
            for item in payload:
                item.pop("timings", None)
        write_records(payload, "json", config.out)
        return
    rows = [row for record in records for row in record.rows(config.include_timings)]
    write_records(rows, "csv", config.out)


def cmd_match(config: ExperimentConfig) -> RunRecord:
    record = ExperimentService(config).run_match()
    _emit_records([record], config)
    return record


def cmd_diagnose(features_path: Path, fmt: str = "csv", out: Optional[Path] = None) -> DiagnosticReport:
    report = diagnose(load_matrix_csv(features_path))
    spectrum = [
        {
            "component": index + 1,
            "singular_value": report.singular_values[index],
            "explained_ratio": report.explained_ratios[index],
            "cumulative_ratio": report.cumulative_ratios[index],
        }
        for index in range(len(report.singular_values))
    ]
    diagnosis = {
        "rho1": report.rho1,
        "effective_rank": report.effective_rank,
        "band": report.band.value,
        "rho_range": report.band.rho_range,
        "effective_rank_range": report.band.effective_rank_range,
        "approx_ratio_note": report.approx_ratio_note,
        "recommendation": report.band.recommendation,
        "tie_warning": report.tie_warning,
    }
    write_tables({"spectrum": spectrum, "diagnosis": [diagnosis]}, fmt, out)
    return report


def cmd_bench(config: ExperimentConfig) -> List[RunRecord]:
    records = ExperimentService(config).run_bench()
    _emit_records(records, config)
    return records


def cmd_robustness(config: ExperimentConfig) -> Dict[str, List[dict]]:
    tables = ExperimentService(config).run_robustness()
    write_tables(tables, config.output_format, config.out)
    return tables


def cmd_pedagogical(fmt: str = "text", out: Optional[Path] = None) -> dict:
    text, numbers = pedagogical_transcript()
    if fmt == "json":
        write_records([numbers], "json", out)
    elif out is not None:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return numbers


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    overrides = {
        "features_path": args.features,
        "preferences_path": args.preferences,
        "capacities_path": args.capacities,
        "market_path": args.market,
        "seeds": args.seeds,
        "noise_levels": args.noise,
        "distributions": args.dist,
        "models": args.model,
        "strength": args.strength,
        "mechanisms": args.mechanisms,
        "num_agents": args.agents,
        "num_objects": args.objects,
        "epsilon": args.epsilon,
        "output_format": args.format,
        "out": args.out,
    }
    if args.no_timings:
        overrides["include_timings"] = False
    return load_config(args.config, **overrides)


def _run_match(args: argparse.Namespace) -> int:
    cmd_match(_config_from_args(args))
    return 0


def _run_diagnose(args: argparse.Namespace) -> int:
    if args.features is None:
        raise ConfigError("diagnose needs --features")
    cmd_diagnose(args.features, args.format or "csv", args.out)
    return 0


def _run_bench(args: argparse.Namespace) -> int:
    cmd_bench(_config_from_args(args))
    return 0


def _run_robustness(args: argparse.Namespace) -> int:
    cmd_robustness(_config_from_args(args))
    return 0


def _run_pedagogical(args: argparse.Namespace) -> int:
    cmd_pedagogical("json" if args.format == "json" else "text", args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--features", type=Path, help="CSV of object features (header + one row per object)")
    common.add_argument("--preferences", type=Path, help="CSV of agent feature weights")
    common.add_argument("--capacities", type=Path, help="one integer capacity per line")
    common.add_argument("--market", type=Path, help="bundled JSON market")
    common.add_argument("--config", type=Path, help="JSON experiment config")
    common.add_argument("--seeds", help="count N (seeds 0..N-1) or comma list")
    common.add_argument("--noise", help="comma list of noise standard deviations")
    common.add_argument("--dist", help="comma list of preference distributions, or 'all'")
    common.add_argument("--model", help="comma list of utility models (names or 1-10)")
    common.add_argument("--strength", type=float, help="non-linearity strength (default: maximum)")
    common.add_argument("--mechanisms", help="comma list from svd, svd2d, random, serial, oracle")
    common.add_argument("--agents", type=int, help="synthetic market size I")
    common.add_argument("--objects", type=int, help="synthetic market size J")
    common.add_argument("--epsilon", type=float, help="gain floor for clipped log-NSW (default 0.01)")
    common.add_argument("--format", choices=OUTPUT_FORMATS, help="output format")
    common.add_argument("--out", type=Path, help="output path (default: stdout)")
    common.add_argument("--no-timings", action="store_true", help="omit wall-clock fields")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(prog="spectral_match", description=__doc__)
    commands = parser.add_subparsers(dest="command", required=True)
    for name, handler, help_text in (
        ("match", _run_match, "run mechanisms on one market"),
        ("diagnose", _run_diagnose, "spectral deployment diagnostics for a feature file"),
        ("bench", _run_bench, "seeded synthetic benchmark"),
        ("robustness", _run_robustness, "distribution x noise grid and non-linear models"),
        ("pedagogical", _run_pedagogical, "three-product worked example"),
    ):
        sub = commands.add_parser(name, parents=[common], help=help_text)
        sub.set_defaults(handler=handler)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format=LOG_FORMAT,
    )
    try:
        return args.handler(args)
    except SpectralMatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception:  # pylint: disable=broad-except
        LOGGER.exception("Command %s failed", args.command)
        return 1


if __name__ == "__main__":
    sys.exit(main())
