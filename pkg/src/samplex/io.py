"""File formats: feature CSVs and canonical JSON."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path

import numpy as np

from samplex.errors import InputError
from samplex.geometry import PointSet


def parse_features_csv(text: str, source: str = "<features>") -> PointSet:
    """Parse ``f0,f1,...,f{D-1}[,label]`` rows into a :class:`PointSet`."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise InputError(f"{source}: empty feature file") from None
    has_label = bool(header) and header[-1] == "label"
    feature_cols = header[:-1] if has_label else header
    expected = [f"f{i}" for i in range(len(feature_cols))]
    if not feature_cols or feature_cols != expected:
        raise InputError(f"{source}: header must be f0,...,f{{D-1}}[,label], got {','.join(header)}")
    rows, labels = [], []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise InputError(f"{source} line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            rows.append([float(v) for v in row[: len(feature_cols)]])
            if has_label:
                lab = float(row[-1])
                if lab != int(lab):
                    raise ValueError(f"label {row[-1]!r} is not an integer")
                labels.append(int(lab))
        except ValueError as exc:
            raise InputError(f"{source} line {lineno}: {exc}") from None
    if not rows:
        raise InputError(f"{source}: no data rows")
    points = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(points)):
        raise InputError(f"{source}: non-finite feature values")
    return PointSet(points, np.asarray(labels, dtype=np.int64) if has_label else None)


def read_features_csv(path) -> PointSet:
    path = Path(path)
    return parse_features_csv(path.read_text(encoding="utf-8"), source=str(path))


def format_features_csv(points: PointSet) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = [f"f{i}" for i in range(points.dim)]
    if points.has_labels:
        header.append("label")
    writer.writerow(header)
    for i, row in enumerate(points.points):
        fields = [repr(float(v)) for v in row]
        if points.has_labels:
            fields.append(str(int(points.labels[i])))
        writer.writerow(fields)
    return buf.getvalue()


def write_features_csv(points: PointSet, path) -> None:
    Path(path).write_text(format_features_csv(points), encoding="utf-8")


def dumps_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(doc, path) -> None:
    Path(path).write_text(dumps_json(doc), encoding="utf-8")


def read_json(path):
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
