"""
Series ingestion and machine-readable reports.

Reports are JSON documents with a fixed key order; floats are written with
17 significant digits so that reruns with the same manifest are
byte-identical apart from the timestamp.
"""

from __future__ import annotations

import csv
import datetime as _dt
import io
import math
import re
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SeriesFormatError

_INT_RE = re.compile(r"^[+-]?\d+$")


@dataclass
class RunManifest:
    command: str
    config: dict
    master_seed: int | None
    artifact_version: str
    timestamp: str

    @classmethod
    def create(cls, command: str, config: dict, master_seed: int | None = None) -> "RunManifest":
        from . import __version__

        now = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
        return cls(command, config, master_seed, __version__, now)

    def as_dict(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "master_seed": self.master_seed,
            "artifact_version": self.artifact_version,
            "timestamp": self.timestamp,
        }


def _parse_count(token: str, line: int) -> int:
    token = token.strip()
    if not _INT_RE.match(token):
        raise SeriesFormatError(f"not a base-10 integer: {token!r}", line)
    value = int(token)
    if value < 0:
        raise SeriesFormatError(f"negative count {value}", line)
    return value


def read_series(path, format: str = "plain", column: str | int | None = None):
    """Read a count series.

    ``plain``: one integer per line, blank lines ignored. ``csv``: the column
    is selected by header name or zero-based index; a header row is detected
    when the selected field of the first row is not an integer.
    """
    from .process import CountSeries

    text = Path(path).read_text()
    values: list[int] = []
    if format == "plain":
        for n, raw in enumerate(text.splitlines(), start=1):
            if raw.strip():
                values.append(_parse_count(raw, n))
    elif format == "csv":
        rows = list(csv.reader(io.StringIO(text)))
        start = 0
        idx = 0 if column is None else column
        if rows:
            first = [c.strip() for c in rows[0]]
            if isinstance(idx, str) and not idx.lstrip("-").isdigit():
                if idx not in first:
                    raise SeriesFormatError(f"column {idx!r} not found in header", 1)
                idx = first.index(idx)
                start = 1
            else:
                idx = int(idx)
                if idx >= len(first):
                    raise SeriesFormatError(f"column index {idx} out of range", 1)
                if not _INT_RE.match(first[idx]):
                    start = 1
        for n, row in enumerate(rows[start:], start=start + 1):
            if not row or all(not c.strip() for c in row):
                continue
            if idx >= len(row):
                raise SeriesFormatError(f"row has no column {idx}", n)
            values.append(_parse_count(row[idx], n))
    else:
        raise ValueError(f"unknown series format {format!r}")
    if not values:
        raise SeriesFormatError("empty series")
    return CountSeries(values)


def write_series(series, path=None) -> None:
    body = "".join(f"{int(v)}\n" for v in np.asarray(getattr(series, "values", series)))
    if path is None or path == "-":
        sys.stdout.write(body)
    else:
        Path(path).write_text(body)


# ---------------------------------------------------------------------------
# JSON with fixed float formatting
# ---------------------------------------------------------------------------


def _dump(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or obj is True or obj is False:
        return {None: "null", True: "true", False: "false"}[obj]
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return "null"
        return format(x, ".17g")
    if isinstance(obj, str):
        import json

        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_dump(str(k), indent, level + 1)}: {_dump(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(_dump(v, indent, level + 1) for v in seq) + "]"
        items = [pad + _dump(v, indent, level + 1) for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    return _dump(obj, indent, 0) + "\n"


# ---------------------------------------------------------------------------
# Report documents
# ---------------------------------------------------------------------------


def fit_document(fit, implied: dict | None = None) -> dict:
    doc = {
        "method": fit.method,
        "family": fit.family,
        "estimates": {"alpha": fit.alpha, "mu": fit.mu, "phi": fit.phi},
        "std_errors": None if fit.std_errors is None else {k: fit.std_errors.get(k) for k in ("alpha", "mu", "phi")
                                                           if k in fit.std_errors},
        "loglik": fit.loglik,
        "aic": fit.aic,
        "bic": fit.bic,
        "k": fit.k,
        "converged": fit.converged,
        "warnings": list(fit.warnings),
    }
    if implied is not None:
        doc["implied"] = implied
    return doc


def test_document(report) -> dict:
    return {
        "test_name": report.test_name,
        "statistic": report.statistic,
        "threshold": report.threshold,
        "p_value": report.p_value,
        "direction": report.direction,
        "level": report.level,
        "reject": report.reject,
        "details": report.details or {},
    }


test_document.__test__ = False


def mc_document(result) -> dict:
    cfg = result.config
    grid = []
    for T in cfg.sample_sizes:
        row = {"T": T, "cells": []}
        for param in ("alpha", "mu", "phi"):
            for method in cfg.methods:
                key = (method, param, T)
                if key in result.cells:
                    c = result.cells[key]
                    row["cells"].append({
                        "parameter": param,
                        "method": method,
                        "bias": c.bias,
                        "mse": c.mse,
                        "bias_se": c.bias_se,
                        "n_ok": c.n_ok,
                        "n_failed": c.n_failed,
                    })
        grid.append(row)
    return {"family": cfg.family, "truth": cfg.truth, "grid": grid}


def write_report(document: dict, path=None, manifest: RunManifest | None = None) -> str:
    """Serialize ``document`` (plus manifest) to ``path`` or stdout."""
    doc = dict(document)
    if manifest is not None:
        doc["manifest"] = manifest.as_dict()
    text = dumps(doc)
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        try:
            Path(path).write_text(text)
        except OSError as exc:
            raise OSError(f"cannot write report to {path}: {exc.strerror}") from exc
    return text


# ---------------------------------------------------------------------------
# LaTeX layouts
# ---------------------------------------------------------------------------


def latex_dispersion_table(family: str, alphas, phis, table) -> str:
    head = " & ".join(f"$\\alpha = {a:g}$" for a in alphas)
    lines = [
        "\\begin{tabular}{l" + "c" * len(alphas) + "}",
        "\\hline",
        f"$\\phi \\downarrow$ / $\\alpha \\rightarrow$ & {head}\\\\ \\hline",
    ]
    for phi, row in zip(phis, table):
        lines.append(f"$\\phi = {phi:g}$ & " + " & ".join(f"{v:.4f}" for v in row) + "\\\\")
    lines += ["\\hline", "\\end{tabular}"]
    return "\n".join(lines) + "\n"


def latex_mc_table(result) -> str:
    cfg = result.config
    cols = [(p, m) for p in ("alpha", "mu", "phi") for m in cfg.methods if (m, p, cfg.sample_sizes[0]) in result.cells]
    sym = {"alpha": "\\alpha", "mu": "\\mu", "phi": "\\phi"}
    head = " & ".join(f"$\\widehat{{{sym[p]}}}_{{\\mathrm{{{m.upper()}}}}}$" for p, m in cols)
    lines = ["\\begin{tabular}{l" + "r" * len(cols) + "}", "\\hline", f"$T$ & {head}\\\\ \\hline"]
    for T in cfg.sample_sizes:
        cells = [result.cells[(m, p, T)] for p, m in cols]
        lines.append(f"{T} & " + " & ".join(f"{c.bias:.4f}" for c in cells) + "\\\\")
        lines.append("    & " + " & ".join(f"({c.mse:.4f})" for c in cells) + "\\\\")
    lines += ["\\hline", "\\end{tabular}"]
    return "\n".join(lines) + "\n"
