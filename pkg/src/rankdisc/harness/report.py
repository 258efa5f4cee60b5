"""JSON and CSV emission for reports, diphoragrams and metric tables.

JSON reports carry ``"schema": "rankdisc.report/1"``. They contain no
timestamp, so the same input and parameters always produce the same bytes.
"""

from __future__ import annotations

import csv
import json
from dataclasses import fields
from pathlib import Path

from .. import __version__
from ..detect import ChangePointReport, DetectionParams, plain as _plain
from ..discrepancy import Diphoragram
from .experiment import ExperimentMetrics

REPORT_SCHEMA = "rankdisc.report/1"
METRICS_SCHEMA = "rankdisc.metrics/1"


def params_dict(params: DetectionParams) -> dict:
    data = {f.name: getattr(params, f.name) for f in fields(params) if f.name != "spectrum"}
    return _plain(data)


def report_document(report: ChangePointReport, params: DetectionParams | None = None, extra: dict | None = None) -> dict:
    doc = {
        "schema": REPORT_SCHEMA,
        "version": __version__,
        "parameters": params_dict(params) if params is not None else {},
        "report": report.to_dict(),
    }
    if extra:
        doc.update(extra)
    return _plain(doc)


def _open_for_write(path):
    path = Path(path)
    try:
        return path.open("w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def emit_report(obj, path, fmt: str | None = None, params: DetectionParams | None = None, extra: dict | None = None) -> None:
    """Write a report (JSON), or a diphoragram / metrics table (CSV)."""
    path = Path(path)
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "json"
    if isinstance(obj, ChangePointReport):
        if fmt != "json":
            raise ValueError("change-point reports are written as JSON")
        with _open_for_write(path) as fh:
            json.dump(report_document(obj, params, extra), fh, indent=2, sort_keys=True)
            fh.write("\n")
    elif isinstance(obj, Diphoragram):
        with _open_for_write(path) as fh:
            write_diphoragram(obj, fh)
    elif isinstance(obj, (list, tuple)) and all(isinstance(m, ExperimentMetrics) for m in obj):
        with _open_for_write(path) as fh:
            if fmt == "json":
                json.dump(_plain({"schema": METRICS_SCHEMA, "version": __version__,
                                  "cells": [dict(m.row(), records=m.records) for m in obj]}), fh, indent=2, sort_keys=True)
                fh.write("\n")
            else:
                write_metrics(obj, fh)
    else:
        raise TypeError(f"cannot emit object of type {type(obj).__name__}")


def write_diphoragram(diph: Diphoragram, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t", "delta"])
    for t, v in zip(diph.times, diph.values):
        w.writerow([int(t), repr(float(v))])


METRIC_COLUMNS = ["label", "method", "n", "n_failed", "confidence", "power", "detection_rate",
                  "mean_signed_error", "mean_abs_error", "mean_inverse_p_value"]


def write_metrics(metrics, fh) -> None:
    w = csv.DictWriter(fh, fieldnames=METRIC_COLUMNS, lineterminator="\n")
    w.writeheader()
    for m in metrics:
        w.writerow({k: ("" if v is None else v) for k, v in m.row().items()})


def load_report(path) -> ChangePointReport:
    with Path(path).open() as fh:
        doc = json.load(fh)
    if doc.get("schema") != REPORT_SCHEMA:
        raise ValueError(f"{path}: unsupported schema {doc.get('schema')!r}")
    return ChangePointReport.from_dict(doc["report"])
