"""Command line entry point.

Each pipeline has a subcommand that evaluates the scenario (scanning it when
the scenario declares a scan). ``scan`` runs the scenario's own pipeline and
series; ``repro`` runs every bundled figure scenario.
"""
from __future__ import annotations

import argparse
import logging
import sys
from importlib import resources
from pathlib import Path

from . import masks, optics
from .errors import ScenarioError
from .scan import DEFAULT_SEED, PIPELINES, programmed_mask, run_series
from .scenario import build_scenario, load_scenario
from .tables import write_table

log = logging.getLogger("slmion")

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2


def bundled_scenarios() -> list[Path]:
    root = resources.files("slmion") / "scenarios"
    return sorted(Path(str(p)) for p in root.iterdir() if p.name.endswith(".scn"))


def _output_name(scenario, label: str, index: int) -> str:
    template = scenario.output.get("name") or (scenario.name + ("_{value}" if label else ""))
    return template.format(value=label, index=index)


def write_results(scenario, out: Path, fmt: str, seed: int, jobs: int,
                  pipeline: str | None = None) -> list[str]:
    """Run ``scenario`` and write its tables; returns the failure messages."""
    out.mkdir(parents=True, exist_ok=True)
    failures = []
    for i, (label, table) in enumerate(run_series(scenario, pipeline, seed, jobs)):
        name = _output_name(scenario, label, i)
        write_table(table, out / f"{name}.{fmt}", fmt)
        failures.extend(f"{name}: {msg}" for msg in table.failures)
    return failures


def _dump_single_point(scenario, pipeline: str, out: Path) -> None:
    """Mask and field files for an unscanned run of the mask or field pipeline."""
    f = optics.ion_source_field(scenario.ion_chain(), scenario.grid())
    mask, _ = programmed_mask(scenario, f)
    masks.save_mask(mask, out / "mask.txt")
    if pipeline == "field":
        image = optics.detector_image(f, mask, scenario.optical_train())
        optics.save_field(image, out / "detector_field.txt")


def _load(path):
    if path is None:
        return build_scenario({})
    return load_scenario(path)


def _report(failures) -> int:
    for msg in failures:
        print(f"failed {msg}", file=sys.stderr)
    if failures:
        print(f"{len(failures)} scan point(s) failed", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_pipeline(args) -> int:
    scenario = _load(args.scenario)
    out = Path(args.out)
    failures = write_results(scenario, out, args.format, args.seed, args.jobs, args.command)
    if args.command in ("mask", "field") and scenario.scan.variable is None and not failures:
        _dump_single_point(scenario, args.command, out)
    return _report(failures)


def cmd_scan(args) -> int:
    scenario = _load(args.scenario)
    failures = write_results(scenario, Path(args.out), args.format, args.seed, args.jobs)
    return _report(failures)


def cmd_repro(args) -> int:
    paths = [Path(args.scenario)] if args.scenario else bundled_scenarios()
    # validate everything before writing anything
    scenarios = [load_scenario(p) for p in paths]
    failures = []
    for s in scenarios:
        failures += write_results(s, Path(args.out) / s.name, args.format, args.seed, args.jobs)
    return _report(failures)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slmion", description="SLM-controlled emission of trapped ions: figure tables.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "mask": "synthesize an SLM mask and estimate its efficiency",
        "field": "propagate the ion field through the SLM round trip",
        "entangle": "herald fidelity, success probability and rate",
        "coeffs": "steady state and the C1, C2 coefficients",
        "motion": "thermal occupation, position spread and C3",
        "scan": "run the scenario's own scan",
        "repro": "regenerate every bundled figure table",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--scenario", help="scenario file (.scn, TOML with unit suffixes)")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                       help=f"random seed (default: {DEFAULT_SEED})")
        p.add_argument("--format", choices=("dat", "csv"), default="dat")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        if name in PIPELINES:
            p.set_defaults(func=cmd_pipeline)
        elif name == "scan":
            p.set_defaults(func=cmd_scan)
        else:
            p.set_defaults(func=cmd_repro)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.seed < 0 or args.seed >= 2 ** 64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ScenarioError as exc:
        for msg in exc.errors:
            print(f"error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
