"""File formats: panels (CSV, HDCV binary), matrices, paths, JSON documents."""
from __future__ import annotations

import csv
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .model import CoefficientScheme, InnovationSpec, SeriesPanel

MAGIC = b"HDCV"
VERSION = 1
_HEADER = struct.Struct("<4sBQQQ")
NO_SEED = 2**64 - 1


def atomic_write(path, data: bytes | str):
    """Write to a temp file in the target directory, then rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def fmt(x: float) -> str:
    """Round-trippable decimal (17 significant digits)."""
    return repr(float(x))


def panel_to_bytes(panel: SeriesPanel) -> bytes:
    seed = NO_SEED if panel.seed is None else int(panel.seed)
    header = _HEADER.pack(MAGIC, VERSION, panel.n, panel.d, seed)
    return header + np.ascontiguousarray(panel.data, dtype="<f8").tobytes()


def panel_from_bytes(raw: bytes) -> SeriesPanel:
    if len(raw) < _HEADER.size:
        raise ValueError("truncated panel file")
    magic, version, n, d, seed = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError("not an HDCV panel file")
    if version != VERSION:
        raise ValueError(f"unsupported HDCV version {version}")
    body = raw[_HEADER.size:]
    if len(body) != 8 * n * d:
        raise ValueError("panel payload size does not match header")
    data = np.frombuffer(body, dtype="<f8").reshape(n, d).astype(float)
    return SeriesPanel(data, seed=None if seed == NO_SEED else seed)


def panel_to_csv(panel: SeriesPanel) -> str:
    lines = [",".join(f"y{k}" for k in range(1, panel.d + 1))]
    lines += [",".join(fmt(x) for x in row) for row in panel.data]
    return "\n".join(lines) + "\n"


def panel_from_csv(text: str) -> SeriesPanel:
    rows = list(csv.reader(text.splitlines()))
    if not rows:
        raise ValueError("empty CSV")
    header, body = rows[0], [r for r in rows[1:] if r]
    if any(not h.strip().startswith("y") for h in header):
        raise ValueError("CSV header must be y1,...,yd")
    return SeriesPanel(np.array(body, dtype=float).reshape(len(body), len(header)))


def save_panel(panel: SeriesPanel, path):
    path = Path(path)
    if path.suffix.lower() == ".csv":
        atomic_write(path, panel_to_csv(panel))
    else:
        atomic_write(path, panel_to_bytes(panel))


def load_panel(path) -> SeriesPanel:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] == MAGIC:
        return panel_from_bytes(raw)
    return panel_from_csv(raw.decode())


def matrix_to_csv(A) -> str:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return "\n".join(",".join(fmt(x) for x in row) for row in A) + "\n"


def matrix_from_csv(text: str) -> np.ndarray:
    rows = [r for r in csv.reader(text.splitlines()) if r]
    return np.array(rows, dtype=float)


def load_matrix(path) -> np.ndarray:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] == MAGIC:
        return panel_from_bytes(raw).data
    return matrix_from_csv(raw.decode())


def path_to_csv(path) -> str:
    cols = ["t"] + [f"value_{j}" for j in range(1, path.L + 1)]
    lines = [",".join(cols)]
    for t, row in zip(path.grid, path.values):
        lines.append(",".join([fmt(t)] + [fmt(x) for x in row]))
    return "\n".join(lines) + "\n"


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, default=_default) + "\n"


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def load_scheme(doc_or_path) -> tuple[CoefficientScheme, InnovationSpec]:
    """Scheme JSON with an ``innovations`` block -> (scheme, innovations)."""
    doc = doc_or_path if isinstance(doc_or_path, dict) else read_json(doc_or_path)
    scheme = CoefficientScheme.from_dict(doc)
    innov = InnovationSpec.from_dict(doc.get("innovations") or {})
    return scheme, innov


def scheme_document(scheme: CoefficientScheme, innov: InnovationSpec) -> dict:
    doc = scheme.to_dict()
    doc["innovations"] = innov.to_dict()
    return doc
