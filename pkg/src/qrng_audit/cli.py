"""``qrng-audit`` command line.

Exit codes: 0 random, 1 I/O or parse error, 2 usage or config error,
3 non_random, 4 some test not applicable and none failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

from . import __version__
from .annealer import effective_noise, generate_stream, load_sim_config
from .bitstream import (
    CorruptStreamError,
    ExplicitLengthRequiredError,
    SpinParseError,
    StreamMetadata,
    meta_path_for,
    read_metadata,
    read_packed,
    spin_csv_to_packed,
)
from .nist import NON_RANDOM, SuiteConfig, run_all
from .nist.core import dumps
from .report import FORMATS, render
from .runner import CheckpointMismatchError, ExperimentMatrix, SourceError, load_plan, run_experiment

EXIT_RANDOM = 0
EXIT_IO = 1
EXIT_USAGE = 2
EXIT_NON_RANDOM = 3
EXIT_NOT_APPLICABLE = 4

log = logging.getLogger("qrng_audit")


class UsageError(Exception):
    pass


def default_jobs() -> int:
    env = os.environ.get("QRNG_AUDIT_JOBS")
    if env:
        try:
            jobs = int(env)
        except ValueError:
            raise UsageError(f"QRNG_AUDIT_JOBS must be an integer, got {env!r}") from None
        if jobs < 1:
            raise UsageError("QRNG_AUDIT_JOBS must be >= 1")
        return jobs
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def _positive_int(text: str) -> int:
    try:
        v = int(float(text)) if "e" in text.lower() else int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _write_atomic_stream(out: Path, write) -> None:
    """Call ``write(fh)`` on a temp file next to ``out`` and rename it into place."""
    fd, tmp = tempfile.mkstemp(prefix=f".{out.name}.", suffix=".tmp", dir=out.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            write(fh)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_suite_config(path: str | None, args) -> SuiteConfig:
    d = {}
    if path:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        if not isinstance(d, dict):
            raise UsageError("suite config must be a JSON object")
    try:
        cfg = SuiteConfig.from_dict(d)
        overrides = {}
        if getattr(args, "alpha", None) is not None:
            overrides["alpha"] = args.alpha
        if getattr(args, "strict", None) is not None:
            overrides["strict"] = args.strict
        if getattr(args, "workdir", None):
            overrides["spectral_workdir"] = args.workdir
        return replace(cfg, **overrides) if overrides else cfg
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid suite config: {exc}") from None


# -- subcommands ----------------------------------------------------------


def cmd_generate(args) -> int:
    try:
        graph, config, noise, attenuation = load_sim_config(args.config)
        if args.seed is not None:
            noise = replace(noise, rng_seed=args.seed)
        if args.postprocess is not None:
            config = replace(config, postprocess_sampling=args.postprocess)
        noise = effective_noise(config, noise, attenuation)
    except (ValueError, KeyError) as exc:
        print(f"error: invalid simulator config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out)
    holder = {}

    def write(fh):
        _, holder["meta"] = generate_stream(graph, config, noise, args.anneals, sink=fh)

    _write_atomic_stream(out, write)
    meta: StreamMetadata = holder["meta"]
    try:
        meta_path = meta_path_for(out)
        _write_atomic_stream(meta_path, lambda fh: fh.write(meta.to_json().encode()))
    except BaseException:
        out.unlink(missing_ok=True)
        raise
    print(meta.bit_count)
    return EXIT_RANDOM


def cmd_ingest(args) -> int:
    meta = spin_csv_to_packed(args.spins, args.out, source_descriptor=f"spins:{args.spins}")
    print(meta.bit_count)
    return EXIT_RANDOM


def cmd_test(args) -> int:
    cfg = _load_suite_config(args.suite_config, args)
    path = Path(args.bits)
    if args.bit_count is not None:
        meta = args.bit_count
    else:
        meta = read_metadata(path) if meta_path_for(path).exists() else None
    seq = read_packed(path, meta)
    report = run_all(seq, cfg, jobs=args.jobs, dataset_id=args.dataset_id or path.stem,
                     tests=args.tests)
    if args.out:
        _write_atomic_stream(Path(args.out), lambda fh: fh.write(report.to_json().encode()))
    for r in report.results:
        shown = ", ".join(f"{v:.5f}" for v in r.headline) or r.note
        print(f"{r.test_name:28s} {r.verdict:15s} {shown}")
    if report.verdict == NON_RANDOM:
        print(f"verdict: non_random ({', '.join(report.failed_tests)})")
        return EXIT_NON_RANDOM
    if report.any_not_applicable:
        print("verdict: not all tests applicable, none failed")
        return EXIT_NOT_APPLICABLE
    print("verdict: random")
    return EXIT_RANDOM


def cmd_experiment(args) -> int:
    try:
        records, cfg = load_plan(args.plan)
    except json.JSONDecodeError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        print(f"error: invalid plan: {exc}", file=sys.stderr)
        return EXIT_USAGE
    overrides = {}
    if args.alpha is not None:
        overrides["alpha"] = args.alpha
    if args.workdir:
        overrides["spectral_workdir"] = args.workdir
    try:
        cfg = replace(cfg, **overrides) if overrides else cfg
    except ValueError as exc:
        raise UsageError(f"invalid suite config: {exc}") from None
    matrix = run_experiment(records, cfg, args.checkpoints, jobs=args.jobs)
    matrix.save(args.out)
    if args.csv:
        _write_atomic_stream(Path(args.csv), lambda fh: fh.write(matrix.to_csv().encode()))
    print(render(matrix, "plain").summary)
    return EXIT_RANDOM


def cmd_report(args) -> int:
    matrix = ExperimentMatrix.load(args.matrix)
    rep = render(matrix, args.format, args.alpha)
    if args.format == "csv":
        # keep the CSV a bare table; the summary goes to stderr
        text = rep.body + "\n"
        print(rep.summary, file=sys.stderr)
    else:
        text = str(rep)
    if args.out:
        _write_atomic_stream(Path(args.out), lambda fh: fh.write(text.encode()))
    else:
        sys.stdout.write(text)
    return EXIT_RANDOM


# -- parser ---------------------------------------------------------------


def _tristate(p, name: str, help: str) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument(f"--{name}", dest=name.replace("-", "_"), action="store_true", default=None, help=help)
    g.add_argument(f"--no-{name}", dest=name.replace("-", "_"), action="store_false")


def build_parser(jobs_default: int) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qrng-audit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    g = sub.add_parser("generate", help="simulate anneals and write a .bits stream")
    g.add_argument("--config", required=True, help="simulator INI file ([graph], [config], [noise])")
    g.add_argument("--anneals", required=True, type=_positive_int, help="number of anneal-readout cycles")
    g.add_argument("--out", required=True, help="output .bits path (metadata goes to <out>.meta)")
    g.add_argument("--seed", type=int, help="override [noise] rng_seed")
    _tristate(g, "postprocess", "override [config] postprocess_sampling")
    g.set_defaults(func=cmd_generate)

    i = sub.add_parser("ingest", help="convert a spin CSV into a .bits stream")
    i.add_argument("--spins", required=True, help="CSV with header anneal_index,q<id>,...")
    i.add_argument("--out", required=True, help="output .bits path")
    i.set_defaults(func=cmd_ingest)

    t = sub.add_parser("test", help="run the test battery on a .bits stream")
    t.add_argument("--bits", required=True, help="input .bits path")
    t.add_argument("--bit-count", type=_positive_int, help="bit length when there is no .meta sidecar")
    t.add_argument("--suite-config", help="JSON object of SuiteConfig fields")
    t.add_argument("--out", help="write the results document here")
    t.add_argument("--dataset-id", help="dataset id recorded in the results (default: file stem)")
    t.add_argument("--tests", nargs="+", metavar="NAME", help="run only these tests")
    t.add_argument("--alpha", type=float, help="significance level (default 0.01)")
    _tristate(t, "strict", "enforce recommended minimum lengths (default on)")
    t.add_argument("--workdir", help="scratch directory for the out-of-core spectral test")
    t.add_argument("--jobs", type=_positive_int, default=jobs_default, help="parallel tests")
    t.set_defaults(func=cmd_test)

    e = sub.add_parser("experiment", help="run a plan of datasets with checkpointing")
    e.add_argument("--plan", required=True, help="JSON plan file")
    e.add_argument("--checkpoints", required=True, help="checkpoint directory (resumable)")
    e.add_argument("--out", required=True, help="matrix JSON output path")
    e.add_argument("--csv", help="also export the matrix as CSV")
    e.add_argument("--alpha", type=float, help="override the plan's significance level")
    e.add_argument("--workdir", help="scratch directory for the out-of-core spectral test")
    e.add_argument("--jobs", type=_positive_int, default=jobs_default, help="parallel tests per dataset")
    e.set_defaults(func=cmd_experiment)

    r = sub.add_parser("report", help="render a matrix file")
    r.add_argument("--matrix", required=True, help="matrix JSON from 'experiment'")
    r.add_argument("--format", choices=FORMATS, default="markdown")
    r.add_argument("--alpha", type=float, help="flag threshold (default: the matrix's alpha)")
    r.add_argument("--out", help="write here instead of standard output")
    r.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    try:
        jobs = default_jobs()
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    parser = build_parser(jobs)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CheckpointMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SpinParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (OSError, CorruptStreamError, ExplicitLengthRequiredError, SourceError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
