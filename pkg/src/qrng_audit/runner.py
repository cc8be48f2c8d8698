"""Dataset registry, checkpointed suite runs and the verdict matrix."""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

from .annealer import AnnealerConfig, NoiseModel, default_graph, effective_noise, generate_stream, stream_digest
from .bitstream import BitSequence, atomic_write_bytes, read_metadata, read_packed
from .nist import NON_RANDOM, NOT_APPLICABLE, RANDOM, SuiteConfig, TestResult
from .nist.battery import TEST_NAMES, SuiteReport, row_labels, run_test, table_rows
from .nist.core import dumps

log = logging.getLogger(__name__)

NOT_RUN = "not_run"
MATRIX_FORMAT = "qrng-audit-matrix/1"

# Published dataset sizes, kept as metadata for the demo experiment.
TABLE1_BITS = {
    "test1": 2563745952, "test2": 2573540192, "test3": 2540168656, "test4": 2553250672,
    "test5": 2610469760, "test6": 2580696896, "test7": 2574846768, "test8": 2580371776,
}
_CANONICAL = (
    ("test1", 1, True), ("test2", 2000, True), ("test3", 10, True), ("test4", 100, True),
    ("test5", 1, False), ("test6", 2000, False), ("test7", 10, False), ("test8", 100, False),
)


class CheckpointMismatchError(RuntimeError):
    """A checkpoint directory was written under a different suite config or source."""


class SourceError(OSError):
    """A dataset source could not be resolved to a bit sequence."""


@dataclass
class DatasetRecord:
    """One dataset.

    ``source`` is a ``.bits`` path or ``sim:<digest>``; for simulated
    datasets ``simulation`` holds ``n_anneals``, ``noise`` (NoiseModel
    fields) and ``attenuation``.
    """

    dataset_id: str
    annealing_time_us: int
    postprocess_sampling: bool
    bit_count: int
    source: str = ""
    simulation: dict | None = None

    def __post_init__(self):
        if self.bit_count <= 0:
            raise ValueError(f"{self.dataset_id}: bit_count must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetRecord":
        return cls(**d)


def canonical_experiments(bit_count: int | None = None) -> list[DatasetRecord]:
    """The eight (annealing time, post-processing) configurations.

    Bit counts default to the published dataset sizes.
    """
    return [
        DatasetRecord(ds, t, pp, bit_count or TABLE1_BITS[ds])
        for ds, t, pp in _CANONICAL
    ]


def simulated_record(dataset_id: str, annealing_time_us: int, postprocess_sampling: bool,
                     n_bits: int, noise: NoiseModel, attenuation: float = 0.01) -> DatasetRecord:
    """A dataset backed by the default 2032-qubit simulator; ``n_bits`` is rounded up to whole anneals."""
    graph = default_graph()
    n_anneals = -(-n_bits // graph.n_active)
    config = AnnealerConfig(annealing_time_us, postprocess_sampling)
    digest = stream_digest(graph, config, effective_noise(config, noise, attenuation))
    return DatasetRecord(dataset_id, annealing_time_us, postprocess_sampling,
                         n_anneals * graph.n_active, f"sim:{digest}",
                         {"n_anneals": n_anneals, "noise": noise.to_dict(), "attenuation": attenuation})


def resolve_source(record: DatasetRecord) -> BitSequence:
    if record.simulation is not None:
        sim = record.simulation
        config = AnnealerConfig(record.annealing_time_us, record.postprocess_sampling)
        noise = effective_noise(config, NoiseModel(**sim["noise"]), sim.get("attenuation", 0.01))
        seq, _ = generate_stream(default_graph(), config, noise, int(sim["n_anneals"]))
        return seq
    path = Path(record.source)
    try:
        meta = read_metadata(path)
    except FileNotFoundError:
        meta = record.bit_count
    try:
        return read_packed(path, meta)
    except OSError as exc:
        raise SourceError(f"{record.dataset_id}: cannot read {path}: {exc}") from exc


# -- checkpointed runs ----------------------------------------------------


@dataclass
class DatasetColumn:
    record: DatasetRecord
    report: SuiteReport

    @property
    def config_digest(self) -> str:
        return self.report.config.digest()


def _checkpoint_stamp(record: DatasetRecord, cfg: SuiteConfig) -> dict:
    return {"config_digest": cfg.digest(), "source": record.source, "bit_count": record.bit_count}


def run_dataset(record: DatasetRecord, cfg: SuiteConfig, checkpoint_dir=None, jobs: int = 1,
                seq: BitSequence | None = None,
                on_result: Callable[[str, TestResult], None] | None = None) -> DatasetColumn:
    """Run every test on one dataset, reusing per-test checkpoints.

    Results land in ``<checkpoint_dir>/<dataset_id>/<test_name>.result``.
    A directory stamped with a different config digest or source is
    refused with :class:`CheckpointMismatchError`.
    """
    ckdir = None
    done: dict[str, TestResult] = {}
    if checkpoint_dir is not None:
        ckdir = Path(checkpoint_dir) / record.dataset_id
        ckdir.mkdir(parents=True, exist_ok=True)
        stamp_path = ckdir / "checkpoint.json"
        stamp = _checkpoint_stamp(record, cfg)
        if stamp_path.exists():
            existing = json.loads(stamp_path.read_text())
            if existing != stamp:
                raise CheckpointMismatchError(
                    f"{ckdir} holds results for {existing}, refusing to mix with {stamp}")
        else:
            atomic_write_bytes(stamp_path, dumps(stamp).encode())
        for name in TEST_NAMES:
            p = ckdir / f"{name}.result"
            if p.exists():
                done[name] = TestResult.from_dict(json.loads(p.read_text()))
    todo = [n for n in TEST_NAMES if n not in done]
    if todo:
        if seq is None:
            seq = resolve_source(record)
        if len(seq) != record.bit_count:
            raise SourceError(f"{record.dataset_id}: source has {len(seq)} bits, record says {record.bit_count}")

        def one(name):
            res = run_test(name, seq, cfg)
            if ckdir is not None:
                atomic_write_bytes(ckdir / f"{name}.result", dumps(res.to_dict()).encode())
            if on_result is not None:
                on_result(name, res)
            return name, res

        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                done.update(pool.map(one, todo))
        else:
            for name in todo:
                log.info("%s: %s", record.dataset_id, name)
                done.update([one(name)])
    results = [done[n] for n in TEST_NAMES]
    return DatasetColumn(record, SuiteReport(results, cfg, record.dataset_id))


# -- the matrix -----------------------------------------------------------


@dataclass
class ExperimentMatrix:
    """Datasets (columns) by report rows, with the full per-test results."""

    datasets: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    config: SuiteConfig = field(default_factory=SuiteConfig)

    @property
    def rows(self) -> list[str]:
        return row_labels()

    @property
    def alpha(self) -> float:
        return self.config.alpha

    @property
    def dataset_ids(self) -> list[str]:
        return [d.dataset_id for d in self.datasets]

    def column(self, dataset_id: str) -> list[tuple[str, list[float], str]]:
        res = self.results.get(dataset_id)
        if res is None:
            return [(label, [], NOT_RUN) for label in self.rows]
        return table_rows(res, self.alpha)

    def cell(self, row: str, dataset_id: str) -> tuple[list[float], str]:
        for label, ps, verdict in self.column(dataset_id):
            if label == row:
                return ps, verdict
        raise KeyError(row)

    def summary(self) -> dict:
        out = {}
        for ds in self.dataset_ids:
            res = self.results.get(ds)
            if res is None:
                out[ds] = {"verdict": NOT_RUN, "failed": [], "not_applicable": []}
                continue
            failed = [r.test_name for r in res if r.verdict == NON_RANDOM]
            na = [r.test_name for r in res if not r.applicable]
            applicable = [r for r in res if r.applicable]
            verdict = NON_RANDOM if failed else (RANDOM if applicable else NOT_APPLICABLE)
            out[ds] = {"verdict": verdict, "failed": failed, "not_applicable": na}
        return out

    def to_dict(self) -> dict:
        return {
            "format": MATRIX_FORMAT,
            "config": self.config.to_dict(semantic_only=True),
            "config_digest": self.config.digest(),
            "rows": self.rows,
            "datasets": [d.to_dict() for d in self.datasets],
            "cells": {
                ds: [{"row": label, "p_values": ps, "verdict": v} for label, ps, v in self.column(ds)]
                for ds in self.dataset_ids
            },
            "summary": self.summary(),
            "results": {
                ds: [r.to_dict() for r in self.results[ds]]
                for ds in self.dataset_ids if ds in self.results
            },
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentMatrix":
        if d.get("format") != MATRIX_FORMAT:
            raise ValueError(f"not a matrix document (format={d.get('format')!r})")
        cfg = SuiteConfig.from_dict(d["config"])
        datasets = [DatasetRecord.from_dict(r) for r in d["datasets"]]
        results = {ds: [TestResult.from_dict(r) for r in rs] for ds, rs in d["results"].items()}
        return cls(datasets, results, cfg)

    def save(self, path) -> None:
        atomic_write_bytes(path, self.to_json().encode())

    @classmethod
    def load(cls, path) -> "ExperimentMatrix":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_csv(self) -> str:
        """Rows = tests, columns = datasets, cells = ``;``-joined full-precision p-values."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["test", *self.dataset_ids])
        cols = [self.column(ds) for ds in self.dataset_ids]
        for i, label in enumerate(self.rows):
            cells = []
            for col in cols:
                _, ps, verdict = col[i]
                cells.append(";".join(repr(p) for p in ps) if ps else verdict)
            w.writerow([label, *cells])
        return buf.getvalue()


def aggregate(columns: list[DatasetColumn]) -> ExperimentMatrix:
    """Assemble columns into a matrix; all columns must share one suite config."""
    if not columns:
        return ExperimentMatrix()
    digests = {c.config_digest for c in columns}
    if len(digests) > 1:
        raise CheckpointMismatchError(f"columns were produced under different suite configs: {sorted(digests)}")
    ids = [c.record.dataset_id for c in columns]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate dataset ids: {ids}")
    return ExperimentMatrix(
        [c.record for c in columns],
        {c.record.dataset_id: list(c.report.results) for c in columns},
        columns[0].report.config,
    )


# -- plans ----------------------------------------------------------------


def load_plan(path) -> tuple[list[DatasetRecord], SuiteConfig]:
    """Read a JSON plan.

    Either ``{"datasets": [...record dicts...]}`` or the canonical shortcut
    ``{"canonical": {"n_bits": N, "noise_off": {...}, "noise_on": {...},
    "attenuation": a}}`` which simulates all eight configurations.  An
    optional ``"suite"`` object overrides :class:`SuiteConfig` fields.
    Relative ``.bits`` paths resolve against the plan's directory.
    """
    path = Path(path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    unknown = set(doc) - {"datasets", "canonical", "suite"}
    if unknown:
        raise ValueError(f"unknown plan keys: {sorted(unknown)}")
    cfg = SuiteConfig.from_dict(doc.get("suite", {}))
    records = []
    if "canonical" in doc:
        records += canonical_plan(**doc["canonical"])
    for d in doc.get("datasets", []):
        d = dict(d)
        if d.get("simulation") is None and d.get("source") and not d["source"].startswith("sim:"):
            src = Path(d["source"])
            if not src.is_absolute():
                d["source"] = str(path.parent / src)
        records.append(DatasetRecord.from_dict(d))
    ids = [r.dataset_id for r in records]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate dataset ids in plan: {ids}")
    return records, cfg


def canonical_plan(n_bits: int, noise_off: dict | None = None, noise_on: dict | None = None,
                   attenuation: float = 0.01, seed: int = 0) -> list[DatasetRecord]:
    """Eight simulated datasets.

    ``noise_off`` is the raw noise for post-processing-off jobs and
    ``noise_on`` the raw noise for post-processing-on jobs (attenuated by
    the post-processing model).  Each dataset gets its own seed.
    """
    records = []
    for k, (ds, t, pp) in enumerate(_CANONICAL):
        raw = dict((noise_on if pp else noise_off) or {})
        raw["rng_seed"] = seed * 16 + k + 1
        records.append(simulated_record(ds, t, pp, n_bits, NoiseModel(**raw), attenuation))
    return records


def run_experiment(records: list[DatasetRecord], cfg: SuiteConfig, checkpoint_dir=None,
                   jobs: int = 1, on_result=None) -> ExperimentMatrix:
    columns = []
    for rec in records:
        log.info("dataset %s (%d bits)", rec.dataset_id, rec.bit_count)
        columns.append(run_dataset(rec, cfg, checkpoint_dir, jobs=jobs, on_result=on_result))
    return aggregate(columns)
