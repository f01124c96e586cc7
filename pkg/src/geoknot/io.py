"""Text formats: XYZ coordinates, writhe-matrix CSV, manifests, reports and run configs."""
from __future__ import annotations

import csv
import math
import os
from pathlib import Path

import numpy as np

from .geometry import FUNCTIONAL_NAMES, PolygonalCurve, WritheMatrix, _coords

MANIFEST_COLUMNS = ("id", "label", "path", "seed", "chain_id", *FUNCTIONAL_NAMES, "move_index")
PROBE_COLUMNS = ("functional", "mi_nats", "rank")
TAU_COLUMNS = ("feature_set", "m", "m_a", "tau", "flag")
SYMMETRY_TOL = 1e-6


class FormatError(ValueError):
    """Malformed input file."""


def fmt(x):
    return f"{x:.12g}"


def write_xyz(curve, path):
    x = _coords(curve)
    if not np.all(np.isfinite(x)):
        raise FormatError("coordinates must be finite")
    lines = [str(len(x))] + [" ".join(fmt(v) for v in row) for row in x.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def parse_xyz(text, source="<string>"):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError(f"{source}: empty file")
    try:
        n = int(lines[0])
    except ValueError:
        raise FormatError(f"{source}: line 1 must be the vertex count") from None
    body = lines[1:]
    if len(body) != n:
        raise FormatError(f"{source}: declared {n} vertices, found {len(body)} coordinate lines")
    rows = []
    for k, line in enumerate(body, start=2):
        parts = line.split()
        if len(parts) != 3:
            raise FormatError(f"{source}:{k}: expected 'x y z'")
        try:
            row = [float(p) for p in parts]
        except ValueError:
            raise FormatError(f"{source}:{k}: not a number") from None
        if not all(math.isfinite(v) for v in row):
            raise FormatError(f"{source}:{k}: non-finite coordinate")
        rows.append(row)
    return np.array(rows, dtype=np.float64).reshape(n, 3)


def read_xyz(path):
    return PolygonalCurve(parse_xyz(Path(path).read_text(), str(path)))


def write_writhe_matrix(W, path):
    entries = W.entries if isinstance(W, WritheMatrix) else np.asarray(W, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        for row in entries.tolist():
            fh.write(",".join(fmt(v) for v in row) + "\n")


def read_writhe_matrix(path):
    with open(path, newline="") as fh:
        try:
            rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
        except ValueError:
            raise FormatError(f"{path}: non-numeric entry") from None
    n = len(rows)
    if n == 0 or any(len(r) != n for r in rows):
        raise FormatError(f"{path}: writhe matrix must be square")
    W = np.array(rows)
    if not np.all(np.isfinite(W)):
        raise FormatError(f"{path}: non-finite entry")
    if np.max(np.abs(W - W.T)) > SYMMETRY_TOL:
        raise FormatError(f"{path}: writhe matrix is not symmetric")
    return WritheMatrix(W)


def write_gauss_dump(diagrams, path):
    with open(path, "w") as fh:
        for d in diagrams:
            fh.write(d.gauss_string() + "\n")


def write_manifest(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_COLUMNS)
        for row in rows:
            w.writerow([fmt(row[c]) if isinstance(row[c], float) else row[c]
                        for c in MANIFEST_COLUMNS])


def read_manifest(path, check_paths=True):
    """Manifest rows as dicts with numeric functional columns; paths resolved against the file."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(MANIFEST_COLUMNS[:-1]) - set(reader.fieldnames or ())
        if missing:
            raise FormatError(f"{path}: missing columns {sorted(missing)}")
        rows = list(reader)
    seen = set()
    for row in rows:
        if row["id"] in seen:
            raise FormatError(f"{path}: duplicate id {row['id']}")
        seen.add(row["id"])
        for name in FUNCTIONAL_NAMES:
            try:
                row[name] = float(row[name])
            except ValueError:
                raise FormatError(f"{path}: bad value in column {name}") from None
            if not math.isfinite(row[name]):
                raise FormatError(f"{path}: non-finite value in column {name}")
        row["resolved_path"] = (path.parent / row["path"]) if row["path"] else None
        if check_paths and row["resolved_path"] is not None and not row["resolved_path"].exists():
            raise FormatError(f"{path}: coordinate file {row['path']} not found")
    return rows


def write_probe_report(report, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PROBE_COLUMNS)
        for name, score, rank in report.rows():
            w.writerow([name, fmt(score), rank])


def write_tau_report(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TAU_COLUMNS)
        for r in rows:
            w.writerow([r["feature_set"], fmt(r["m"]), fmt(r["m_a"]), fmt(r["tau"]), r["flag"]])


def read_config(path):
    """``key=value`` lines; ``#`` starts a comment. Keys are normalised to snake_case."""
    out = {}
    for k, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"{path}:{k}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def default_output_dir():
    return os.environ.get("GEOKNOT_OUT", "geoknot_out")


def record_row(record, path):
    row = {"id": record.id, "label": record.label, "path": path, "seed": record.seed,
           "chain_id": record.chain_id, "move_index": record.move_index}
    row.update(record.functionals.as_dict())
    return row


def export_records(records, out_dir, manifest_name="manifest.csv", prefix=""):
    """Write one XYZ file per record plus a manifest; returns the manifest path."""
    out = Path(out_dir)
    (out / "xyz").mkdir(parents=True, exist_ok=True)
    rows = []
    for r in records:
        rel = f"xyz/{prefix}{r.label}_{r.id:06d}.xyz"
        write_xyz(r.coords, out / rel)
        rows.append(record_row(r, rel))
    write_manifest(rows, out / manifest_name)
    return out / manifest_name
