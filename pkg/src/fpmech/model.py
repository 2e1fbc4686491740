"""Emission bands, training-fold feature selection and band-specific forests."""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import InsufficientBandData, NoModelForBand

BANDS = ("GFP_like", "Red", "FarRed")
EXCLUDED = "Excluded"
TOP_K_FEATURES = 25
MIN_BAND_ROWS = 3


def assign_band(em: float) -> str:
    """Emission maximum (nm) to band label; half-open intervals."""
    if not em > 0:
        raise ValueError(f"emission maximum must be positive, got {em}")
    if 500.0 <= em < 560.0:
        return "GFP_like"
    if 580.0 <= em < 610.0:
        return "Red"
    if em >= 610.0:
        return "FarRed"
    return EXCLUDED


def assign_bands(em) -> np.ndarray:
    return np.array([assign_band(float(e)) for e in np.asarray(em)], dtype=object)


def abs_pearson(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """|corr(X[:, j], y)| per column; zero-variance columns (or target) score 0."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xc = X - X.mean(axis=0)
    yc = y - y.mean()
    sxx = np.sqrt((xc * xc).sum(axis=0))
    syy = np.sqrt(yc @ yc)
    num = yc @ xc
    out = np.zeros(X.shape[1])
    ok = (sxx > 0) & (syy > 0)
    out[ok] = np.abs(num[ok] / (sxx[ok] * syy))
    return np.minimum(out, 1.0)


def select_features(X: np.ndarray, y: np.ndarray, columns, k: int = TOP_K_FEATURES) -> list[str]:
    """Top-``k`` columns by |Pearson r| against ``y``.

    Constant columns are never selected. Ties on |r| go to the
    lexicographically smaller column name.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] < MIN_BAND_ROWS:
        raise InsufficientBandData(f"{X.shape[0]} training rows < {MIN_BAND_ROWS}")
    columns = list(columns)
    rho = abs_pearson(X, y)
    varying = X.max(axis=0) > X.min(axis=0)
    order = sorted((j for j in range(len(columns)) if varying[j]), key=lambda j: (-rho[j], columns[j]))
    return [columns[j] for j in order[:k]]


@dataclass(frozen=True)
class EtRegressorConfig:
    n_trees: int = 300
    candidate_features_per_split: int | None = None  # None: all features
    min_samples_split: int = 2
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")


class ExtraTreesForest:
    """Extremely randomized regression trees, no bootstrap.

    Each split draws one uniform cut-point inside the node range of every
    candidate feature and keeps the largest variance reduction. Tree ``i``
    is seeded with ``rng_seed ^ i``.
    """

    def __init__(self, config: EtRegressorConfig | None = None):
        self.config = config or EtRegressorConfig()
        self.n_features = None
        self.feature = self.threshold = self.left = self.right = self.value = None
        self.roots = None

    def fit(self, X, y) -> "ExtraTreesForest":
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] == 0:
            raise ValueError("X must be (n, k) with n == len(y) > 0")
        cfg = self.config
        k = X.shape[1]
        mf = k if cfg.candidate_features_per_split is None else max(1, min(k, cfg.candidate_features_per_split))
        parts = []
        offset = 0
        roots = []
        for i in range(cfg.n_trees):
            seed = (int(cfg.rng_seed) ^ i) & 0xFFFFFFFFFFFFFFFF
            f, t, l, r, v = _kernels.build_tree(X, y, seed, mf, cfg.min_samples_split)
            l = np.where(l >= 0, l + offset, -1)
            r = np.where(r >= 0, r + offset, -1)
            parts.append((f, t, l, r, v))
            roots.append(offset)
            offset += len(f)
        self.n_features = k
        self.feature = np.concatenate([p[0] for p in parts]).astype(np.int64)
        self.threshold = np.concatenate([p[1] for p in parts])
        self.left = np.concatenate([p[2] for p in parts]).astype(np.int64)
        self.right = np.concatenate([p[3] for p in parts]).astype(np.int64)
        self.value = np.concatenate([p[4] for p in parts])
        self.roots = np.asarray(roots, dtype=np.int64)
        return self

    def predict(self, X) -> np.ndarray:
        if self.roots is None:
            raise RuntimeError("forest is not fitted")
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} feature columns")
        if X.shape[0] == 0:
            return np.zeros(0)
        return _kernels.predict_forest(self.feature, self.threshold, self.left, self.right, self.value, self.roots, X)

    def arrays(self) -> dict:
        return {
            "feature": self.feature, "threshold": self.threshold, "left": self.left,
            "right": self.right, "value": self.value, "roots": self.roots,
        }


@dataclass
class BandModel:
    band: str
    selected: list
    forest: ExtraTreesForest | None
    train_q90: float
    train_q10: float
    n_train: int = 0
    train_mean: float = 0.0
    kind: str = "forest"  # "forest" or "mean"
    meta: dict = field(default_factory=dict)

    def predict_raw(self, X_sel: np.ndarray) -> np.ndarray:
        if self.kind == "mean" or self.forest is None:
            return np.full(X_sel.shape[0], self.train_mean)
        return self.forest.predict(X_sel)


def fit_band(
    X: np.ndarray,
    y: np.ndarray,
    columns,
    band: str,
    cfg: EtRegressorConfig | None = None,
    k: int = TOP_K_FEATURES,
    select: bool = True,
) -> BandModel:
    """Select features on the training rows and grow the band forest.

    ``X``/``y`` must already be restricted to the band's training rows and
    ``columns`` to the candidate pool. With ``select=False`` all non-constant
    candidate columns are used.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] < MIN_BAND_ROWS:
        raise InsufficientBandData(f"band {band}: {X.shape[0]} training rows < {MIN_BAND_ROWS}")
    cfg = cfg or EtRegressorConfig()
    columns = list(columns)
    selected = select_features(X, y, columns, k if select else len(columns))
    q90, q10 = np.quantile(y, [0.9, 0.1])
    model = BandModel(
        band=band, selected=selected, forest=None, train_q90=float(q90), train_q10=float(q10),
        n_train=int(X.shape[0]), train_mean=float(y.mean()),
    )
    if not selected:
        model.kind = "mean"
        return model
    idx = [columns.index(c) for c in selected]
    model.forest = ExtraTreesForest(cfg).fit(X[:, idx], y)
    return model


def fit_band_mean(y: np.ndarray, band: str) -> BandModel:
    y = np.asarray(y, dtype=np.float64)
    if y.shape[0] < 1:
        raise InsufficientBandData(f"band {band}: no training rows")
    q90, q10 = np.quantile(y, [0.9, 0.1])
    return BandModel(band=band, selected=[], forest=None, train_q90=float(q90), train_q10=float(q10),
                     n_train=int(y.shape[0]), train_mean=float(y.mean()), kind="mean")


def predict_rows(model: BandModel, X: np.ndarray, columns, clip: bool = True) -> np.ndarray:
    columns = list(columns)
    idx = [columns.index(c) for c in model.selected]
    raw = model.predict_raw(np.asarray(X, dtype=np.float64)[:, idx])
    return np.clip(raw, 0.0, 1.0) if clip else raw


def predict(models: dict, row, em: float, columns=None) -> float:
    """Route one feature row through the model of its emission band.

    ``row`` is a :class:`~fpmech.propagate.FeatureVector` or a plain array
    (then ``columns`` names its entries). The output is clipped to [0, 1].
    """
    band = assign_band(em)
    if band not in models:
        raise NoModelForBand(f"no fitted model for band {band} (em={em})")
    values = getattr(row, "values", row)
    if columns is None:
        columns = getattr(row, "names", None)
    if columns is None:
        raise ValueError("columns are required for a bare array row")
    return float(predict_rows(models[band], np.asarray(values, dtype=np.float64)[None, :], columns)[0])


# ---------------------------------------------------------------------------
# serialization: a zip with fixed timestamps so identical models give identical bytes

_ZIP_DATE = (1980, 1, 1, 0, 0, 0)


def _zip_write(zf: zipfile.ZipFile, name: str, data: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_ZIP_DATE)
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    zf.writestr(info, data)


def _npy_bytes(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    np.lib.format.write_array(buf, np.ascontiguousarray(arr), allow_pickle=False)
    return buf.getvalue()


def save_models(models: dict, path, extra: dict | None = None) -> None:
    """Write band models to a self-describing ``.npz`` archive."""
    header = {"format": "fpmech-band-models", "version": 1, "extra": extra or {}, "bands": {}}
    arrays = {}
    for band in sorted(models):
        m = models[band]
        entry = {
            "selected": list(m.selected), "train_q90": m.train_q90, "train_q10": m.train_q10,
            "n_train": m.n_train, "train_mean": m.train_mean, "kind": m.kind, "meta": m.meta,
        }
        if m.forest is not None:
            entry["config"] = asdict(m.forest.config)
            entry["n_features"] = m.forest.n_features
            for key, arr in m.forest.arrays().items():
                arrays[f"{band}.{key}"] = arr
        header["bands"][band] = entry
    with zipfile.ZipFile(path, "w") as zf:
        _zip_write(zf, "header.json", json.dumps(header, sort_keys=True, indent=1).encode())
        for name in sorted(arrays):
            _zip_write(zf, f"{name}.npy", _npy_bytes(arrays[name]))


def load_models(path) -> tuple[dict, dict]:
    with zipfile.ZipFile(Path(path)) as zf:
        header = json.loads(zf.read("header.json"))
        models = {}
        for band, entry in header["bands"].items():
            forest = None
            if "config" in entry:
                forest = ExtraTreesForest(EtRegressorConfig(**entry["config"]))
                forest.n_features = entry["n_features"]
                for key in ("feature", "threshold", "left", "right", "value", "roots"):
                    with zf.open(f"{band}.{key}.npy") as fh:
                        setattr(forest, key, np.lib.format.read_array(io.BytesIO(fh.read())))
            models[band] = BandModel(
                band=band, selected=entry["selected"], forest=forest,
                train_q90=entry["train_q90"], train_q10=entry["train_q10"], n_train=entry["n_train"],
                train_mean=entry["train_mean"], kind=entry["kind"], meta=entry.get("meta", {}),
            )
    return models, header.get("extra", {})
