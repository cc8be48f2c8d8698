"""Render an :class:`~qrng_audit.runner.ExperimentMatrix` as text.

Cells show p-values to five decimals.  Any p-value below ``alpha`` is
flagged with a trailing ``*``; a cell that holds a pair (serial,
cumulative sums) shows both values separated by ``;``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from .nist import NOT_APPLICABLE
from .runner import NOT_RUN, ExperimentMatrix

__all__ = ["FORMATS", "RenderedReport", "format_cell", "format_p", "parse_csv", "render"]

FORMATS = ("markdown", "csv", "plain")
FLAG = "*"

_PLACEHOLDER = {NOT_APPLICABLE: "n/a", NOT_RUN: "not run"}


@dataclass(frozen=True)
class RenderedReport:
    format: str
    body: str
    summary: str

    def __str__(self) -> str:
        return self.body + "\n" + self.summary + "\n"


def format_p(p: float, alpha: float) -> str:
    text = f"{p:.5f}"
    return text + FLAG if p < alpha else text


def format_cell(ps: list[float], verdict: str, alpha: float) -> str:
    if not ps:
        return _PLACEHOLDER.get(verdict, verdict)
    return ";".join(format_p(p, alpha) for p in ps)


def _summary_lines(matrix: ExperimentMatrix, alpha: float) -> list[str]:
    if not matrix.dataset_ids:
        return ["no datasets"]
    lines = []
    passing = 0
    for ds in matrix.dataset_ids:
        col = matrix.column(ds)
        if all(v == NOT_RUN for _, _, v in col):
            lines.append(f"{ds}: not run")
            continue
        failed = []
        applicable = False
        for label, ps, _ in col:
            if ps:
                applicable = True
                if any(p < alpha for p in ps):
                    failed.append(label)
        if failed:
            lines.append(f"{ds}: FAIL ({len(failed)}) {', '.join(failed)}")
        elif applicable:
            passing += 1
            lines.append(f"{ds}: PASS")
        else:
            lines.append(f"{ds}: no applicable tests")
    total = len(matrix.dataset_ids)
    if passing == total:
        lines.append(f"overall: all {total} datasets pass every applicable test at alpha={alpha}")
    else:
        lines.append(f"overall: {passing} of {total} datasets pass every applicable test at alpha={alpha}")
    return lines


def _grid(matrix: ExperimentMatrix, alpha: float) -> list[list[str]]:
    cols = [matrix.column(ds) for ds in matrix.dataset_ids]
    grid = []
    for i, label in enumerate(matrix.rows):
        grid.append([label] + [format_cell(c[i][1], c[i][2], alpha) for c in cols])
    return grid


def render(matrix: ExperimentMatrix, format: str = "markdown", alpha: float | None = None) -> RenderedReport:
    """Render ``matrix`` in canonical row order.

    Raises
    ------
    ValueError
        For a format other than ``markdown``, ``csv`` or ``plain``.
    """
    if format not in FORMATS:
        raise ValueError(f"unknown report format {format!r}; expected one of {FORMATS}")
    alpha = matrix.alpha if alpha is None else alpha
    header = ["Test name", *matrix.dataset_ids]
    grid = _grid(matrix, alpha)
    summary = _summary_lines(matrix, alpha)

    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(grid)
        return RenderedReport(format, buf.getvalue().rstrip("\n"), "\n".join(summary))

    if format == "markdown":
        lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
        lines += ["| " + " | ".join(row) + " |" for row in grid]
        body = "\n".join(lines)
        return RenderedReport(format, body, "\n".join(f"- {s}" for s in summary))

    widths = [max(len(r[k]) for r in [header, *grid]) for k in range(len(header))]
    fmt = lambda row: "  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip()
    lines = [fmt(header), "  ".join("-" * w for w in widths)]
    lines += [fmt(row) for row in grid]
    return RenderedReport(format, "\n".join(lines), "\n".join(summary))


def parse_csv(text: str) -> dict[str, dict[str, list[float] | str]]:
    """Read a rendered CSV back into ``{row: {dataset_id: p-values or placeholder}}``."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        return {}
    ids = rows[0][1:]
    out = {}
    for row in rows[1:]:
        cells = {}
        for ds, cell in zip(ids, row[1:]):
            if cell in _PLACEHOLDER.values():
                cells[ds] = cell
            else:
                cells[ds] = [float(v.rstrip(FLAG)) for v in cell.split(";")]
        out[row[0]] = cells
    return out

