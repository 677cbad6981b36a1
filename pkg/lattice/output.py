"""Deterministic CSV and JSON artifacts with a provenance header."""

import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .models import LatticeSpec

TOOL = "lattice-defects"


def format_number(value) -> str:
    if isinstance(value, float):
        return f"{value:.15g}"
    return str(value)


def _rounded(value):
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float):
        return float(f"{value:.15g}") if math.isfinite(value) else None
    if isinstance(value, dict):
        return {str(k): _rounded(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_rounded(v) for v in value]
    return value


def make_header(spec: LatticeSpec | None, **params) -> dict:
    header = {"tool": TOOL, "version": __version__, "spec_hash": spec.spec_hash() if spec else None}
    header.update(params)
    return header


def _emit(text: str, path: Path | None):
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="")


def render_csv(header: dict, columns: list[str], rows) -> str:
    buffer = io.StringIO()
    for key in sorted(header):
        buffer.write(f"# {key}={format_number(header[key])}\r\n")
    writer = csv.writer(buffer)
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_number(v) for v in row])
    return buffer.getvalue()


def render_json(header: dict, payload: dict) -> str:
    document = {"meta": header, **payload}
    return json.dumps(_rounded(document), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_csv(path: Path | None, header: dict, columns: list[str], rows):
    _emit(render_csv(header, columns, rows), path)


def write_json(path: Path | None, header: dict, payload: dict):
    _emit(render_json(header, payload), path)
