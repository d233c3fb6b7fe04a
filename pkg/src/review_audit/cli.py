"""Command-line entry point: ``review-audit <command> [flags]``.

Exit codes: 0 success (warnings allowed), 1 load or validation failure,
2 analysis precondition failure, 64 usage error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from . import assignment, graph, report
from .errors import AuditError, InfeasibleError, ParseError, PreconditionError, ValidationError
from .graph import ConvergenceError
from .io import load_dataset, write_dataset, write_dataset_csv
from .synth import SynthConfig, generate_synthetic

EXIT_OK, EXIT_LOAD, EXIT_PRECONDITION, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _pair(text, cast=float):
    try:
        a, b = text.split(",")
        return cast(a), cast(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two comma-separated values, got {text!r}") from None


def _u64(text):
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="review-audit", description="Audit a peer-review dataset.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def cmd(name, help_, needs_input=True, seed=False):
        p = sub.add_parser(name, help=help_)
        if needs_input:
            p.add_argument("--input", required=True, help="dataset JSON file or CSV directory")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--format", choices=("json", "csv", "md"), action="append",
                       help="output format (repeatable; default: all)")
        if seed:
            p.add_argument("--seed", type=_u64, required=True)
        return p

    def messy_flags(p):
        p.add_argument("--mu", type=int, default=100)
        p.add_argument("--alpha", type=float, default=0.01)
        p.add_argument("--granularity", type=float, default=0.05)

    def boot_flags(p):
        p.add_argument("--iterations", type=int, default=1000)
        p.add_argument("--accept-frac", type=float, default=0.237)

    p = cmd("audit", "run every analysis section", seed=True)
    messy_flags(p)
    boot_flags(p)
    cmd("validate", "check a dataset against the schema")

    p = cmd("synth", "generate a synthetic dataset", needs_input=False, seed=True)
    p.add_argument("--papers", type=int, default=200)
    p.add_argument("--reviewers", type=int, default=100)
    p.add_argument("--reviews-per-paper", type=int, default=3)
    p.add_argument("--spread", type=float, default=4.0, help="latent quality spread")
    p.add_argument("--noise", type=float, default=0.5, help="reviewer noise sd")
    p.add_argument("--bias", type=float, default=0.0, help="reviewer bias sd")
    p.add_argument("--shift", type=float, default=0.0, help="calibration shift")
    p.add_argument("--accept-frac", type=float, default=0.237)
    p.add_argument("--acs", type=int, default=0, help="number of area chairs")
    p.add_argument("--planted-messy", type=_pair, metavar="T,B")
    p.add_argument("--planted-fragment", type=lambda s: _pair(s, int), metavar="SUBJECT,COUNT")

    cmd("bids", "bid statistics")
    p = cmd("graph", "co-review graph fragmentation")
    p.add_argument("--kind", choices=("reviewer", "paper", "both"), default="both")
    p = cmd("assign", "load-constrained reviewer assignment")
    p.add_argument("--paper-load", type=int, default=3)
    p.add_argument("--reviewer-cap", type=int, help="default: ceil(load * papers / reviewers)")
    cmd("calibration", "score calibration and subject areas")
    p = cmd("agreement", "group comparisons and pairwise agreement")
    p.add_argument("--population", choices=report.POPULATIONS)
    p = cmd("messy", "messy-middle grid")
    messy_flags(p)
    p = cmd("bootstrap", "bootstrap decision variance", seed=True)
    boot_flags(p)
    p = cmd("anomalies", "review/ranking inconsistencies")
    p.add_argument("--population", choices=report.POPULATIONS)
    cmd("top2k", "accepted papers plus as many best-scoring rejected papers")
    return parser


def _formats(args):
    return tuple(args.format) if args.format else ("json", "csv", "md")


def _emit(args, dataset, name, sections, config=None):
    rep = report.build_report(dataset, sections, config)
    written = report.write_outputs(args.out, rep, sections, _formats(args), json_name=f"{name}.json")
    for sec in sections.values():
        for w in sec.warnings:
            print(f"warning: {sec.name}: {w}", file=sys.stderr)
    print(f"wrote {len(written)} file(s) to {args.out}")


def _single(args, dataset):
    c = args.command
    pops = (args.population,) if getattr(args, "population", None) else report.POPULATIONS
    if c == "bids":
        secs = [report.bids_section(dataset)]
    elif c == "graph":
        kinds = {"reviewer": (graph.GraphKind.REVIEWER,), "paper": (graph.GraphKind.PAPER,),
                 "both": (graph.GraphKind.REVIEWER, graph.GraphKind.PAPER)}[args.kind]
        secs = [report.co_review_section(dataset, kinds)]
    elif c == "calibration":
        secs = [report.calibration_section(dataset), report.subject_areas_section(dataset)]
    elif c == "agreement":
        secs = [report.pools_section(dataset, pops), report.rebuttals_section(dataset),
                report.ordinal_section(dataset, pops)]
    elif c == "messy":
        cfg = report.AuditConfig(mu=args.mu, alpha=args.alpha, granularity=args.granularity)
        secs = [report.randomness_section(dataset, cfg, bootstrap=False)]
        return secs, cfg
    elif c == "bootstrap":
        cfg = report.AuditConfig(seed=args.seed, iterations=args.iterations, accept_frac=args.accept_frac)
        secs = [report.randomness_section(dataset, cfg, messy=False)]
        return secs, cfg
    elif c == "anomalies":
        secs = [report.anomalies_section(dataset, pops)]
    elif c == "top2k":
        secs = [report.top2k_section(dataset)]
    elif c == "assign":
        secs = [_assign_section(args, dataset)]
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(f"unknown command {c!r}")
    return secs, None


def _assign_section(args, dataset):
    sims = assignment.build_similarities(dataset)
    papers = [p.paper_id for p in dataset.papers]
    reviewers = [r.reviewer_id for r in dataset.reviewers if not r.is_ac]
    if not reviewers:
        raise PreconditionError("no non-AC reviewers to assign")
    cap = args.reviewer_cap or math.ceil(args.paper_load * len(papers) / len(reviewers))
    res = assignment.assign_reviewers(sims, args.paper_load, cap, papers, reviewers)
    sec = report.Section("assign")
    sec.data = {
        "paper_load": res.paper_load,
        "reviewer_cap": res.reviewer_cap,
        "total_similarity": res.total_similarity,
        "n_pairs": len(res.pairs),
    }
    sec.tables["assignment.csv"] = (("paper", "reviewer", "score"), res.rows())
    return sec


def _synth(args):
    cfg = SynthConfig(
        n_papers=args.papers, n_reviewers=args.reviewers, reviews_per_paper=args.reviews_per_paper,
        seed=args.seed, latent_quality_spread=args.spread, reviewer_noise_sd=args.noise,
        reviewer_bias_sd=args.bias, calibration_shift=args.shift, accept_fraction=args.accept_frac,
        n_acs=args.acs, planted_messy_window=args.planted_messy, planted_fragment=args.planted_fragment,
    )
    dataset = generate_synthetic(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    formats = _formats(args)
    if "csv" in formats:
        write_dataset_csv(dataset, out / "dataset_csv")
    if "json" in formats or "md" in formats:
        write_dataset(dataset, out / "dataset.json")
    print(f"wrote synthetic dataset ({len(dataset.papers)} papers) to {out}")


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage() + "review-audit: error: a command is required")
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE

    try:
        if args.command == "synth":
            _synth(args)
            return EXIT_OK
        dataset = load_dataset(args.input)
    except ParseError as exc:
        print(f"error: parse failure: {exc}", file=sys.stderr)
        return EXIT_LOAD
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LOAD
    except OSError as exc:
        print(f"error: cannot read {args.input}: {exc}", file=sys.stderr)
        return EXIT_LOAD
    except (PreconditionError, InfeasibleError) as exc:
        print(f"error: {args.command}: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION

    try:
        if args.command == "validate":
            print(f"ok: {len(dataset.papers)} papers, {len(dataset.reviews)} reviews")
            return EXIT_OK
        if args.command == "audit":
            cfg = report.AuditConfig(args.seed, args.mu, args.alpha, args.granularity,
                                     args.iterations, args.accept_frac)
            _emit(args, dataset, "report", report.run_audit(dataset, cfg), cfg)
            return EXIT_OK
        secs, cfg = _single(args, dataset)
        _emit(args, dataset, args.command, {s.name: s for s in secs}, cfg)
        return EXIT_OK
    except report.SectionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (PreconditionError, InfeasibleError, ConvergenceError) as exc:
        print(f"error: {args.command}: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except AuditError as exc:  # pragma: no cover - defensive
        print(f"error: {args.command}: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
