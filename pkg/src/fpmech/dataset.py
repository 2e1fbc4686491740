"""In-memory feature table plus its CSV/JSON-sidecar file format."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MissingFeatureTable

META_COLUMNS = ("id", "emission_nm", "qy", "maturation_state", "flags")


def fmt_float(x) -> str:
    """Shortest round-trip repr; identical input always gives identical text."""
    x = float(x)
    if x == 0.0:
        return "0.0"
    return repr(x)


@dataclass
class FeatureDataset:
    ids: list
    columns: tuple
    X: np.ndarray
    emission_nm: np.ndarray
    qy: np.ndarray
    sequences: list | None = None
    maturation_state: list | None = None
    flags: list | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.ids = list(self.ids)
        self.columns = tuple(self.columns)
        self.X = np.asarray(self.X, dtype=np.float64)
        self.emission_nm = np.asarray(self.emission_nm, dtype=np.float64)
        self.qy = np.asarray(self.qy, dtype=np.float64)
        n = len(self.ids)
        if self.X.shape != (n, len(self.columns)):
            raise ValueError(f"feature matrix shape {self.X.shape} != ({n}, {len(self.columns)})")
        if self.emission_nm.shape != (n,) or self.qy.shape != (n,):
            raise ValueError("emission_nm and qy must have one entry per row")

    def __len__(self):
        return len(self.ids)

    def column_index(self, names) -> np.ndarray:
        pos = {c: i for i, c in enumerate(self.columns)}
        return np.array([pos[c] for c in names], dtype=np.int64)

    def matrix(self, names) -> np.ndarray:
        return self.X[:, self.column_index(names)]

    def subset(self, rows) -> "FeatureDataset":
        rows = np.asarray(rows)
        if rows.dtype == bool:
            rows = np.flatnonzero(rows)

        def pick(seq):
            return None if seq is None else [seq[i] for i in rows]

        return FeatureDataset(
            ids=[self.ids[i] for i in rows],
            columns=self.columns,
            X=self.X[rows],
            emission_nm=self.emission_nm[rows],
            qy=self.qy[rows],
            sequences=pick(self.sequences),
            maturation_state=pick(self.maturation_state),
            flags=pick(self.flags),
            meta=dict(self.meta),
        )


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def sidecar_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".meta.json")


def write_feature_table(ds: FeatureDataset, path, meta: dict | None = None) -> None:
    """Write one row per protein plus a ``<stem>.meta.json`` sidecar."""
    path = Path(path)
    n = len(ds)
    states = ds.maturation_state or [""] * n
    flags = ds.flags or [()] * n
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(META_COLUMNS) + list(ds.columns))
        for i in range(n):
            w.writerow(
                [ds.ids[i], fmt_float(ds.emission_nm[i]), fmt_float(ds.qy[i]), states[i], ";".join(flags[i])]
                + [fmt_float(v) for v in ds.X[i]]
            )
    side = dict(meta or {})
    side["table_sha256"] = file_sha256(path)
    side["n_rows"] = n
    side["columns"] = list(ds.columns)
    write_json(sidecar_path(path), side)


def read_feature_table(path) -> FeatureDataset:
    path = Path(path)
    if not path.exists():
        raise MissingFeatureTable(f"feature table {path} not found")
    side = sidecar_path(path)
    meta = json.loads(side.read_text(encoding="utf-8")) if side.exists() else {}
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        if tuple(header[: len(META_COLUMNS)]) != META_COLUMNS:
            raise ValueError(f"{path}: unexpected header")
        columns = tuple(header[len(META_COLUMNS):])
        ids, em, qy, states, flags, rows = [], [], [], [], [], []
        for row in r:
            ids.append(row[0])
            em.append(float(row[1]))
            qy.append(float(row[2]))
            states.append(row[3])
            flags.append(tuple(f for f in row[4].split(";") if f))
            rows.append([float(v) for v in row[len(META_COLUMNS):]])
    X = np.array(rows, dtype=np.float64).reshape(len(ids), len(columns))
    return FeatureDataset(
        ids=ids, columns=columns, X=X, emission_nm=np.array(em), qy=np.array(qy),
        maturation_state=states, flags=flags, meta=meta,
    )
