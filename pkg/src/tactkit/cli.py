"""Command-line entry point.

Exit status: 0 on success, 1 on a domain error (bad description, failed
analysis, unreadable store), 2 on a usage error.
"""

from __future__ import annotations

import argparse
import logging
import shutil
import sys
import time
from pathlib import Path

from tactkit.coordinator import resume_experiment, run_experiment
from tactkit.errors import DescriptionError, TactError
from tactkit.experiment import load_experiment_description, parse_experiment_description
from tactkit.harness import CommandTarget, SyntheticTarget, SyntheticTargetSpec
from tactkit.report import AnalysisSettings, generate_report, render_text, write_report
from tactkit.store import ResultsStore
from tactkit.strategies import GridStrategy, TaguchiStrategy, build_strategy

log = logging.getLogger("tactkit")

SYNTHETIC_COPY = "syntheticTarget.json"
EXPORT_FILE = "results.tsv"


def _read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise TactError(f"{path}: cannot read ({e.strerror})") from None


def _pair(text):
    if "*" not in text:
        raise argparse.ArgumentTypeError(f"{text!r} is not of the form A*B")
    f, g = (x.strip() for x in text.split("*", 1))
    return f, g


def _scale(text):
    name, sep, value = text.partition("=")
    try:
        if not sep:
            raise ValueError
        return name.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not of the form NAME=NUMBER") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tactkit", description="Automated configuration tuning experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    v = sub.add_parser("validate", help="check an experiment description")
    v.add_argument("description")

    d = sub.add_parser("design", help="print the planned design matrix without running anything")
    d.add_argument("description")

    r = sub.add_parser("run", help="run an experiment")
    r.add_argument("description")
    r.add_argument("environment", help="environment description; copied verbatim, never parsed")
    r.add_argument("outdir")
    r.add_argument("--synthetic", metavar="SPEC.json", help="use a synthetic target instead of the commands")
    r.add_argument("--max-trials", type=int, help="stop after this many trials")

    s = sub.add_parser("resume", help="continue an interrupted experiment")
    s.add_argument("outdir")
    s.add_argument("--max-trials", type=int)

    for name, text in (("analyze", "write report and plot-data files for a store"),
                       ("report", "print the text report for a store")):
        a = sub.add_parser(name, help=text)
        a.add_argument("outdir")
        a.add_argument("--interaction", type=_pair, action="append", default=None, metavar="A*B",
                       help="interaction pair to tabulate and model (repeatable)")
        a.add_argument("--scale", type=_scale, action="append", default=None, metavar="NAME=DIVISOR")
        a.add_argument("--significance", type=float, default=0.05)
        a.add_argument("--first", type=int, default=0, help="first trial sequence number to analyse")
        a.add_argument("--last", type=int, help="last trial sequence number to analyse")
        if name == "analyze":
            a.add_argument("--out", help="directory for report files (default OUTDIR/analysis)")
    return p


# ------------------------------------------------------------------ commands

def cmd_validate(args) -> int:
    text = _read_text(args.description)
    try:
        desc = parse_experiment_description(text)
    except DescriptionError as e:
        print(f"{args.description}: invalid", file=sys.stderr)
        print(f"  {e.path or '(document)'}: {e.message}", file=sys.stderr)
        return 1
    print(f"{args.description}: ok ({len(desc.control_factors)} target factors, "
          f"{len(desc.noise_factors)} noise factors, {len(desc.metrics)} metrics, "
          f"strategy {desc.strategy})")
    return 0


def cmd_design(args) -> int:
    desc = load_experiment_description(args.description)
    strategy = build_strategy(desc)
    if isinstance(strategy, TaguchiStrategy):
        rep = strategy.phase1
        alloc = ", ".join(f"{k}={v}" for k, v in rep.allocation.items())
        print(f"# {rep.array} columns {alloc}; {strategy.replications} replications")
        sys.stdout.write(rep.design.to_tsv())
    elif isinstance(strategy, GridStrategy):
        print(f"# full factorial; {len(strategy.plan) // len(strategy.design.rows)} replications")
        sys.stdout.write(strategy.design.to_tsv())
    else:
        raise TactError(f"strategy {desc.strategy!r} chooses combinations adaptively; it has no fixed design")
    return 0


def _print_summary(summary, outdir):
    print(f"{summary.trials} trials, {summary.failures} failed, stopped: {summary.stopped_by}; "
          f"results in {outdir}")


def _synthetic(path) -> SyntheticTarget:
    try:
        return SyntheticTarget(SyntheticTargetSpec.load(path))
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise TactError(f"{path}: not a usable synthetic target ({e})") from None


def cmd_run(args) -> int:
    desc_text = _read_text(args.description)
    desc = parse_experiment_description(desc_text)
    env_text = _read_text(args.environment)
    target = _synthetic(args.synthetic) if args.synthetic else CommandTarget(desc)
    strategy = build_strategy(desc)
    store = ResultsStore.create(args.outdir, desc, desc_text, env_text, started=time.time())
    if args.synthetic:
        shutil.copyfile(args.synthetic, Path(args.outdir) / SYNTHETIC_COPY)
    try:
        summary = run_experiment(desc, strategy, target, store, max_trials=args.max_trials)
    except KeyboardInterrupt:
        print(f"interrupted after {len(store.records)} trials; continue with: tactkit resume {args.outdir}",
              file=sys.stderr)
        return 1
    finally:
        (Path(args.outdir) / EXPORT_FILE).write_text(store.export_tab_separated(), encoding="utf-8")
    _print_summary(summary, args.outdir)
    return 0


def cmd_resume(args) -> int:
    outdir = Path(args.outdir)
    desc = load_experiment_description(outdir / "experimentDescription.xml")
    spec = outdir / SYNTHETIC_COPY
    target = _synthetic(spec) if spec.exists() else CommandTarget(desc)
    try:
        store, _, summary = resume_experiment(outdir, build_strategy, target, max_trials=args.max_trials)
    except KeyboardInterrupt:
        print(f"interrupted; continue with: tactkit resume {outdir}", file=sys.stderr)
        return 1
    (outdir / EXPORT_FILE).write_text(store.export_tab_separated(), encoding="utf-8")
    _print_summary(summary, outdir)
    return 0


def _analysis_settings(args, desc) -> AnalysisSettings:
    """Command-line options win; otherwise reuse the strategy's own settings."""
    s = desc.settings
    inter = args.interaction
    if inter is None:
        inter = [_pair(x.strip()) for x in s.get("interactions", "").split(",") if x.strip()]
    scale = args.scale
    if scale is None:
        scale = [(k[len("scale."):], float(v)) for k, v in s.items() if k.startswith("scale.")]
    return AnalysisSettings(tuple(inter), tuple(scale), args.significance, args.first, args.last)


def _load_store(outdir):
    return ResultsStore.load(outdir)


def cmd_analyze(args) -> int:
    store = _load_store(args.outdir)
    bundle = generate_report(store, _analysis_settings(args, store.description))
    out = Path(args.out) if args.out else Path(args.outdir) / "analysis"
    for path in write_report(bundle, out):
        print(path)
    return 0


def cmd_report(args) -> int:
    store = _load_store(args.outdir)
    sys.stdout.write(render_text(generate_report(store, _analysis_settings(args, store.description))))
    return 0


COMMANDS = {
    "validate": cmd_validate,
    "design": cmd_design,
    "run": cmd_run,
    "resume": cmd_resume,
    "analyze": cmd_analyze,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except TactError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
