"""Random CV, homology-controlled evaluation, ablations and the clamp stress test."""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .config import RunConfig
from .dataset import FeatureDataset
from .errors import DegenerateTarget, InsufficientBandData, SequenceTooShort, TooFewSamples
from .model import (
    BANDS,
    EXCLUDED,
    EtRegressorConfig,
    assign_bands,
    fit_band,
    fit_band_mean,
    predict_rows,
)
from .signals import CLAMP_NAMES, family_mapping

logger = logging.getLogger(__name__)

KMER = 5
BUCKETS = ("B70_85", "B50_70", "Blt50")
BUCKET_LABELS = {"B70_85": "70-85", "B50_70": "50-70", "Blt50": "<50"}
EMISSION_COLUMN = "emission_nm"


# ---------------------------------------------------------------------------
# 5-mer Jaccard homology split


def kmer_set(seq: str, k: int = KMER) -> set:
    if len(seq) < k:
        raise SequenceTooShort(f"sequence of length {len(seq)} has no {k}-mers")
    return {seq[t:t + k] for t in range(len(seq) - k + 1)}


def kmer_jaccard(seq_a: str, seq_b: str, k: int = KMER) -> float:
    a = kmer_set(seq_a, k)
    b = kmer_set(seq_b, k)
    return len(a & b) / len(a | b)


def jaccard_matrix(sequences, k: int = KMER) -> np.ndarray:
    """All-pairs k-mer Jaccard similarity via a sparse incidence product."""
    vocab: dict[str, int] = {}
    rows, cols = [], []
    for i, seq in enumerate(sequences):
        for km in sorted(kmer_set(seq, k)):
            rows.append(i)
            cols.append(vocab.setdefault(km, len(vocab)))
    n = len(sequences)
    M = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, len(vocab)))
    inter = (M @ M.T).toarray()
    sizes = np.asarray(M.sum(axis=1)).ravel()
    union = sizes[:, None] + sizes[None, :] - inter
    return inter / union


def bucket_of(m: float) -> str:
    if 0.70 <= m < 0.85:
        return "B70_85"
    if 0.50 <= m < 0.70:
        return "B50_70"
    if m < 0.50:
        return "Blt50"
    raise ValueError(f"similarity {m} >= 0.85 cannot belong to the test set")


@dataclass(frozen=True)
class SplitPlan:
    train_ids: tuple
    test_ids: tuple
    m: dict  # test id -> max Jaccard to the train set
    bucket: dict  # test id -> bucket key
    nearest_any: dict  # every id -> max Jaccard to any other protein
    tau: float = 0.85

    def bucket_members(self, key: str) -> list:
        return [i for i in self.test_ids if self.bucket[i] == key]


def homology_split(records, tau: float = 0.85) -> SplitPlan:
    """Fixed train/test split from sequences alone.

    ``records`` is any sequence of objects with ``id`` and ``sequence``
    attributes, or of ``(id, sequence)`` pairs.
    """
    ids, seqs = [], []
    for r in records:
        if isinstance(r, tuple):
            ids.append(r[0])
            seqs.append(r[1])
        else:
            ids.append(r.id)
            seqs.append(r.sequence)
    if len(ids) < 2:
        raise ValueError("homology split needs at least two proteins")
    J = jaccard_matrix(seqs)
    np.fill_diagonal(J, -np.inf)
    best = J.max(axis=1)
    is_train = best >= tau
    train = [i for i, t in zip(ids, is_train) if t]
    test = [i for i, t in zip(ids, is_train) if not t]
    tr_idx = np.flatnonzero(is_train)
    m, bucket = {}, {}
    for k in np.flatnonzero(~is_train):
        mk = float(J[k, tr_idx].max()) if len(tr_idx) else 0.0
        m[ids[k]] = mk
        bucket[ids[k]] = bucket_of(mk)
    return SplitPlan(
        train_ids=tuple(train), test_ids=tuple(test), m=m, bucket=bucket,
        nearest_any={i: float(b) for i, b in zip(ids, best)}, tau=tau,
    )


# ---------------------------------------------------------------------------
# stratified folds


@dataclass(frozen=True)
class FoldPlan:
    seed: int
    fold_of: dict  # id -> fold index
    Q: int
    n_folds: int = 5

    def fold_array(self, ids) -> np.ndarray:
        return np.array([self.fold_of[i] for i in ids], dtype=np.int64)


def quantile_bins(y, Q: int) -> np.ndarray:
    """Rank-based quantile bins; ties keep index order."""
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    order = np.argsort(y, kind="stable")
    ranks = np.empty(n, dtype=np.int64)
    ranks[order] = np.arange(n)
    return (ranks * Q) // n


def make_folds(y, seed: int, ids=None, n_folds: int = 5) -> FoldPlan:
    """Quantile-stratified folds: shuffle each bin, then deal round-robin.

    Dealing continues across bins from where the previous bin stopped, which
    keeps overall fold sizes within one of each other.
    """
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    if n < 10:
        raise TooFewSamples(f"{n} samples < 10")
    ids = list(range(n)) if ids is None else list(ids)
    Q = min(5, n // 5)
    z = quantile_bins(y, Q)
    rng = np.random.default_rng(seed)
    fold = np.empty(n, dtype=np.int64)
    cursor = 0
    for b in range(Q):
        members = np.flatnonzero(z == b)
        members = members[rng.permutation(len(members))]
        fold[members] = (cursor + np.arange(len(members))) % n_folds
        cursor = (cursor + len(members)) % n_folds
    return FoldPlan(seed=seed, fold_of={i: int(f) for i, f in zip(ids, fold)}, Q=Q, n_folds=n_folds)


# ---------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class RegressionMetrics:
    r: float
    mae: float
    compression: float
    r_defined: bool = True


def pearson_mae_compression(y, yhat) -> RegressionMetrics:
    """Sample Pearson r, MAE and sd(yhat)/sd(y) (population sd for both).

    A constant prediction has no correlation; r is then reported as 0 with
    ``r_defined=False``.
    """
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.shape != yhat.shape or y.ndim != 1:
        raise ValueError("y and yhat must be 1-D and equal length")
    if len(y) < 2:
        raise DegenerateTarget("need at least two values")
    # ptp rather than std: the std of a constant vector can round to a tiny nonzero value
    if np.ptp(y) == 0:
        raise DegenerateTarget("sd(y) = 0")
    sy = y.std()
    sp = yhat.std()
    mae = float(np.abs(y - yhat).mean())
    if np.ptp(yhat) == 0:
        return RegressionMetrics(0.0, mae, 0.0, r_defined=False)
    yc = y - y.mean()
    pc = yhat - yhat.mean()
    r = float((yc @ pc) / np.sqrt((yc @ yc) * (pc @ pc)))
    return RegressionMetrics(r, mae, float(sp / sy))


def _topk_order(yhat: np.ndarray, largest: bool) -> np.ndarray:
    idx = np.arange(len(yhat))
    key = -yhat if largest else yhat
    return np.lexsort((idx, key))


def topk_metrics(y, yhat, q90, q10, K: int) -> tuple[float, float]:
    """Bright and dark precision among the K highest / lowest predictions.

    ``q90``/``q10`` may be scalars or per-row arrays (each held-out row
    judged by its own training fold's thresholds). Ties in ``yhat`` keep
    index order.
    """
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    n = len(y)
    if not 1 <= K <= n:
        raise ValueError(f"K={K} must be in [1, {n}]")
    bright = y >= np.asarray(q90, dtype=np.float64)
    dark = y <= np.asarray(q10, dtype=np.float64)
    bright = np.broadcast_to(bright, (n,))
    dark = np.broadcast_to(dark, (n,))
    top = _topk_order(yhat, True)[:K]
    bottom = _topk_order(yhat, False)[:K]
    return float(bright[top].mean()), float(dark[bottom].mean())


@dataclass
class MetricsReport:
    pearson_r: float
    mae: float
    compression: float
    bright_p: dict
    dark_p: dict
    n: int
    flags: tuple = ()


def metrics_report(y, yhat, q90, q10, ks=(5, 10, 15, 20, 25)) -> MetricsReport:
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    n = len(y)
    flags = []
    try:
        reg = pearson_mae_compression(y, yhat)
        r, mae, c = reg.r, reg.mae, reg.compression
        if not reg.r_defined:
            flags.append("r_undefined")
    except DegenerateTarget:
        r = c = float("nan")
        mae = float(np.abs(y - yhat).mean()) if n else float("nan")
        flags.append("degenerate_target")
    bright, dark = {}, {}
    for K in ks:
        if K <= n:
            bright[K], dark[K] = topk_metrics(y, yhat, q90, q10, K)
        else:
            bright[K] = dark[K] = float("nan")
    return MetricsReport(r, mae, c, bright, dark, n, tuple(flags))


# ---------------------------------------------------------------------------
# ablation conditions


@dataclass(frozen=True)
class AblationCondition:
    name: str
    key: str
    columns: tuple  # candidate pool (empty for band mean)
    routing: str = "band_specific"  # or "global"
    target: str = "true_y"  # or "shuffled_y"
    baseline: str = "none"  # none | band_mean | emission_only | v54_only

    @property
    def n_features(self) -> int:
        return len(self.columns)


def table4_conditions() -> list[AblationCondition]:
    """The nine audited ablation conditions in table order."""
    s = family_mapping()
    nonid = tuple(s.nonid_columns)
    return [
        AblationCondition("Shuffle QY labels", "shuffle_qy", nonid, target="shuffled_y"),
        AblationCondition("Band mean", "band_mean", (), baseline="band_mean"),
        AblationCondition("Emission maximum only", "emission_only", (EMISSION_COLUMN,), baseline="emission_only"),
        AblationCondition("Global 52-feature model", "global_52", nonid, routing="global"),
        AblationCondition("V54 clamp only", "v54_only", tuple(CLAMP_NAMES), baseline="v54_only"),
        AblationCondition("Steric-channel only, no clamp", "steric_only", s.nonid_channel("steric")),
        AblationCondition("Hydrophobic-channel only, no clamp", "hydrophobic_only", s.nonid_channel("hydrophobic")),
        AblationCondition("Enrichment only, no clamp", "enrichment_only", s.nonid_enrichment),
        AblationCondition("Full pre-specified mechanism model", "full", nonid),
    ]


def get_condition(key: str) -> AblationCondition:
    for c in table4_conditions():
        if c.key == key or c.name == key:
            return c
    raise KeyError(f"unknown condition {key!r}")


def condition_matrix(ds: FeatureDataset, cond: AblationCondition) -> np.ndarray:
    if cond.columns == (EMISSION_COLUMN,):
        return ds.emission_nm[:, None].copy()
    if not cond.columns:
        return np.zeros((len(ds), 0))
    return ds.matrix(cond.columns)


def cell_seed(base: int, *parts) -> int:
    """Deterministic 63-bit seed for one (seed, fold, band, condition) cell."""
    text = ":".join(str(p) for p in (base,) + parts)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little") >> 1


# ---------------------------------------------------------------------------
# fitting one training fold


@dataclass
class FoldFit:
    models: dict  # band (or "global") -> BandModel
    q90: float
    q10: float
    skipped_bands: tuple = ()


def fit_fold(
    X: np.ndarray,
    y_train_target: np.ndarray,
    y_train_true: np.ndarray,
    bands_train: np.ndarray,
    cond: AblationCondition,
    cfg: RunConfig,
    seed_parts=(),
) -> FoldFit:
    """Fit every band model of one condition on training rows only.

    ``X`` holds the condition's columns for the training rows. Screening
    thresholds come from the true training labels.
    """
    q90, q10 = np.quantile(y_train_true, [0.9, 0.1])
    models = {}
    skipped = []
    groups = [("global", np.ones(len(bands_train), dtype=bool))] if cond.routing == "global" else [
        (b, bands_train == b) for b in BANDS
    ]
    for band, mask in groups:
        if not mask.any():
            skipped.append(band)
            continue
        try:
            if cond.baseline == "band_mean":
                models[band] = fit_band_mean(y_train_target[mask], band)
            else:
                et = EtRegressorConfig(
                    n_trees=cfg.et.n_trees,
                    candidate_features_per_split=cfg.et.candidate_features_per_split,
                    min_samples_split=cfg.et.min_samples_split,
                    rng_seed=cell_seed(cfg.et.rng_seed, *seed_parts, band, cond.key),
                )
                models[band] = fit_band(
                    X[mask], y_train_target[mask], cond.columns, band, et, k=cfg.top_k_features
                )
        except InsufficientBandData as exc:
            logger.warning("skipping band %s: %s", band, exc)
            skipped.append(band)
    return FoldFit(models=models, q90=float(q90), q10=float(q10), skipped_bands=tuple(skipped))


def predict_fold(fit: FoldFit, X: np.ndarray, bands: np.ndarray, cond: AblationCondition) -> np.ndarray:
    """Predictions for held-out rows; NaN where the band has no model."""
    out = np.full(X.shape[0], np.nan)
    for key, model in fit.models.items():
        mask = np.ones(len(bands), dtype=bool) if key == "global" else bands == key
        if mask.any():
            out[mask] = predict_rows(model, X[mask], cond.columns)
    return out


def _in_band(ds: FeatureDataset) -> tuple[FeatureDataset, np.ndarray]:
    bands = assign_bands(ds.emission_nm)
    keep = bands != EXCLUDED
    if not keep.all():
        logger.info("dropping %d rows outside the modelling bands", int((~keep).sum()))
    return ds.subset(keep), bands[keep]


# ---------------------------------------------------------------------------
# random cross-validation


@dataclass
class CVResult:
    condition: AblationCondition
    ids: list
    y: np.ndarray
    bands: np.ndarray
    seeds: tuple
    oof: np.ndarray  # (n_seeds, n), NaN where skipped
    q90_row: np.ndarray  # (n_seeds, n) threshold applied to each held-out row
    q10_row: np.ndarray
    fold_plans: list
    selections: list = field(default_factory=list)  # (seed, fold, band, selected)
    thresholds: dict = field(default_factory=dict)  # (seed, fold) -> (q90, q10)
    skipped: list = field(default_factory=list)  # (seed, fold, band)
    reports: list = field(default_factory=list)  # per seed MetricsReport

    @property
    def n_oof(self) -> int:
        return int(np.isfinite(self.oof).sum())

    def summary(self) -> dict:
        rs = np.array([r.pearson_r for r in self.reports])
        maes = np.array([r.mae for r in self.reports])
        cs = np.array([r.compression for r in self.reports])
        return {
            "R_mean": float(np.mean(rs)), "R_sd": float(np.std(rs, ddof=1)) if len(rs) > 1 else 0.0,
            "MAE_mean": float(np.mean(maes)), "MAE_sd": float(np.std(maes, ddof=1)) if len(maes) > 1 else 0.0,
            "C_mean": float(np.mean(cs)),
        }


def training_target(y_train: np.ndarray, cond: AblationCondition, *parts) -> np.ndarray:
    """Labels a condition trains on; the shuffle null permutes training labels only."""
    if cond.target != "shuffled_y":
        return y_train
    rng = np.random.default_rng(cell_seed(0, "shuffle", cond.key, *parts))
    return y_train[rng.permutation(len(y_train))]


def run_random_cv(
    ds: FeatureDataset,
    cfg: RunConfig,
    condition: AblationCondition,
    fold_plans: list | None = None,
) -> CVResult:
    """Seeds x folds out-of-fold evaluation of one condition.

    Rows outside the modelling bands are dropped first. Selection, fitting
    and bright/dark thresholds use training-fold rows only. ``fold_plans``
    (one per seed) overrides the label-derived fold assignment.
    """
    ds, bands = _in_band(ds)
    n = len(ds)
    y = ds.qy
    Xc = condition_matrix(ds, condition)
    seeds = tuple(cfg.seeds)
    oof = np.full((len(seeds), n), np.nan)
    q90_row = np.full((len(seeds), n), np.nan)
    q10_row = np.full((len(seeds), n), np.nan)
    res = CVResult(condition, ds.ids, y, bands, seeds, oof, q90_row, q10_row, fold_plans=[])
    for si, seed in enumerate(seeds):
        plan = fold_plans[si] if fold_plans is not None else make_folds(y, seed, ds.ids, cfg.folds)
        res.fold_plans.append(plan)
        fold = plan.fold_array(ds.ids)
        for f in range(plan.n_folds):
            test = fold == f
            train = ~test
            if not test.any():
                continue
            y_fit = training_target(y[train], condition, seed, f)
            fit = fit_fold(Xc[train], y_fit, y[train], bands[train], condition, cfg, (seed, f))
            res.thresholds[(seed, f)] = (fit.q90, fit.q10)
            for band, m in fit.models.items():
                res.selections.append((seed, f, band, list(m.selected)))
            for band in fit.skipped_bands:
                if (bands[test] == band).any():
                    res.skipped.append((seed, f, band))
            oof[si, test] = predict_fold(fit, Xc[test], bands[test], condition)
            q90_row[si, test] = fit.q90
            q10_row[si, test] = fit.q10
        ok = np.isfinite(oof[si])
        res.reports.append(metrics_report(y[ok], oof[si, ok], q90_row[si, ok], q10_row[si, ok], cfg.screening_k))
    return res


def feature_recurrence(res: CVResult, top: int = 10) -> list[tuple[str, str, int]]:
    """(band, column, count) of appearances in the top-``top`` selected features."""
    counts: dict[tuple[str, str], int] = {}
    for _seed, _fold, band, selected in res.selections:
        for col in selected[:top]:
            counts[(band, col)] = counts.get((band, col), 0) + 1
    band_order = {b: i for i, b in enumerate(BANDS + ("global",))}
    return sorted(
        ((b, c, k) for (b, c), k in counts.items()),
        key=lambda t: (band_order.get(t[0], 99), -t[2], t[1]),
    )


# ---------------------------------------------------------------------------
# homology-controlled evaluation


@dataclass
class HomologyResult:
    condition: AblationCondition
    split: SplitPlan
    rows: list  # (seed, scope, MetricsReport)
    predictions: dict  # seed -> {id: prediction}
    models: dict  # seed -> {band: BandModel}
    absent_buckets: tuple = ()


def run_homology_eval(
    ds: FeatureDataset,
    split: SplitPlan,
    cfg: RunConfig,
    condition: AblationCondition,
) -> HomologyResult:
    """Fit once on the fixed training set per seed and score every test bucket.

    Buckets without test proteins are listed in ``absent_buckets`` and get no
    metrics row.
    """
    ds, bands = _in_band(ds)
    pos = {i: k for k, i in enumerate(ds.ids)}
    train_idx = np.array([pos[i] for i in split.train_ids if i in pos], dtype=np.int64)
    test_ids = [i for i in split.test_ids if i in pos]
    test_idx = np.array([pos[i] for i in test_ids], dtype=np.int64)
    Xc = condition_matrix(ds, condition)
    y = ds.qy
    absent = tuple(b for b in BUCKETS if not any(split.bucket[i] == b for i in test_ids))
    out = HomologyResult(condition, split, [], {}, {}, absent)
    for seed in cfg.seeds:
        y_fit = training_target(y[train_idx], condition, seed, "homology")
        fit = fit_fold(
            Xc[train_idx], y_fit, y[train_idx], bands[train_idx], condition, cfg, (seed, "homology")
        )
        pred = predict_fold(fit, Xc[test_idx], bands[test_idx], condition)
        out.models[seed] = fit.models
        out.predictions[seed] = {i: float(p) for i, p in zip(test_ids, pred)}
        scopes = [("overall", np.ones(len(test_ids), dtype=bool))] + [
            (b, np.array([split.bucket[i] == b for i in test_ids], dtype=bool)) for b in BUCKETS if b not in absent
        ]
        for scope, mask in scopes:
            ok = mask & np.isfinite(pred)
            if not ok.any():
                continue
            rep = metrics_report(y[test_idx][ok], pred[ok], fit.q90, fit.q10, cfg.screening_k)
            out.rows.append((seed, scope, rep))
    return out


# ---------------------------------------------------------------------------
# clamp-descriptor stress test

STRESS_SETTINGS = (
    ("Gaussian noise, sigma=0.10", "gaussian", 0.10),
    ("Gaussian noise, sigma=0.20", "gaussian", 0.20),
    ("Gaussian noise, sigma=0.30", "gaussian", 0.30),
    ("Feature dropout, p=0.10", "dropout", 0.10),
    ("Feature dropout, p=0.20", "dropout", 0.20),
    ("Bad-structure subset, 20%", "bad_structure", 0.20),
)
BAD_STRUCTURE_SIGMA = 0.30
STRESS_CONDITIONS = ("enrichment_only", "full", "v54_only")


def perturb_enrichment(
    X_test: np.ndarray,
    enrich_mask: np.ndarray,
    train_mean: np.ndarray,
    train_sd: np.ndarray,
    kind: str,
    param: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Corrupt enrichment columns of held-out rows; other columns are untouched.

    Noise is added on the training-fold z-score scale. Dropout replaces cells
    with the training-fold column mean.
    """
    X = X_test.copy()
    if param == 0:
        return X
    cols = np.flatnonzero(enrich_mask)
    sub = X[:, cols]
    if kind == "gaussian":
        sub = sub + param * train_sd[cols] * rng.standard_normal(sub.shape)
    elif kind == "dropout":
        drop = rng.random(sub.shape) < param
        sub = np.where(drop, train_mean[cols], sub)
    elif kind == "bad_structure":
        n_bad = int(round(param * sub.shape[0]))
        bad = rng.permutation(sub.shape[0])[:n_bad]
        sub[bad] = sub[bad] + BAD_STRUCTURE_SIGMA * train_sd[cols] * rng.standard_normal((n_bad, len(cols)))
    else:
        raise ValueError(f"unknown perturbation {kind!r}")
    X[:, cols] = sub
    return X


@dataclass
class StressResult:
    settings: tuple
    seeds: tuple
    r: dict  # (setting name, condition key) -> per-seed R array
    buffer: dict  # setting name -> Buffer_R
    ci: dict  # setting name -> (lo, hi)
    oof: dict  # (setting name, condition key) -> (n_seeds, n) predictions
    y: np.ndarray = None

    def table(self) -> list[dict]:
        rows = [{
            "setting": "Clean input",
            **{f"R_{c}": float(np.mean(self.r[("clean", c)])) for c in STRESS_CONDITIONS},
            "buffer_R": float("nan"), "ci_lo": float("nan"), "ci_hi": float("nan"),
        }]
        for name, _kind, _param in self.settings:
            rows.append({
                "setting": name,
                **{f"R_{c}": float(np.mean(self.r[(name, c)])) for c in STRESS_CONDITIONS},
                "buffer_R": self.buffer[name], "ci_lo": self.ci[name][0], "ci_hi": self.ci[name][1],
            })
        return rows


def _pearson_rows(y: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Row-wise Pearson r for stacked resamples (B, n)."""
    yc = y - y.mean(axis=-1, keepdims=True)
    pc = p - p.mean(axis=-1, keepdims=True)
    den = np.sqrt((yc * yc).sum(-1) * (pc * pc).sum(-1))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = (yc * pc).sum(-1) / den
    return np.where(den > 0, r, 0.0)


def buffer_r(r_enr_clean, r_enr_stress, r_full_clean, r_full_stress) -> float:
    return float((r_enr_clean - r_enr_stress) - (r_full_clean - r_full_stress))


def v54_stress(
    ds: FeatureDataset,
    cfg: RunConfig,
    settings=STRESS_SETTINGS,
    n_boot: int | None = None,
) -> StressResult:
    """Clean-train / corrupted-test comparison of enrichment-only, full and clamp-only models.

    Every (seed, fold, band, condition) model is fitted once; the clean and
    all corrupted held-out matrices are scored with that same model, and the
    enrichment-only and full models see the same corruption draw.
    """
    ds, bands = _in_band(ds)
    n = len(ds)
    y = ds.qy
    seeds = tuple(cfg.seeds)
    n_boot = cfg.bootstrap_resamples if n_boot is None else n_boot
    conds = [get_condition(k) for k in STRESS_CONDITIONS]
    all_cols = list(dict.fromkeys(c for cond in conds for c in cond.columns))
    X_all = ds.matrix(all_cols)
    enrich_mask = np.array([c.startswith("ch_") for c in all_cols])
    col_pos = {c: i for i, c in enumerate(all_cols)}
    names = ["clean"] + [s[0] for s in settings]
    oof = {(nm, c.key): np.full((len(seeds), n), np.nan) for nm in names for c in conds}
    for si, seed in enumerate(seeds):
        plan = make_folds(y, seed, ds.ids, cfg.folds)
        fold = plan.fold_array(ds.ids)
        for f in range(plan.n_folds):
            test = fold == f
            train = ~test
            if not test.any():
                continue
            mu = X_all[train].mean(axis=0)
            sd = X_all[train].std(axis=0)
            variants = {"clean": X_all[test]}
            for k, (name, kind, param) in enumerate(settings):
                rng = np.random.default_rng(cell_seed(seed, "stress", f, k))
                variants[name] = perturb_enrichment(X_all[test], enrich_mask, mu, sd, kind, param, rng)
            for cond in conds:
                idx = [col_pos[c] for c in cond.columns]
                fit = fit_fold(X_all[train][:, idx], y[train], y[train], bands[train], cond, cfg, (seed, f))
                for name, Xt in variants.items():
                    oof[(name, cond.key)][si, test] = predict_fold(fit, Xt[:, idx], bands[test], cond)
    r = {}
    for key, pred in oof.items():
        r[key] = np.array([_pearson_rows(y[np.isfinite(p)], p[np.isfinite(p)]) for p in pred])
    ok = np.all([np.isfinite(p).all(axis=0) for p in oof.values()], axis=0)
    rows = np.flatnonzero(ok)
    boot_rng = np.random.default_rng(cell_seed(cfg.et.rng_seed, "bootstrap"))
    boot_idx = rows[boot_rng.integers(0, len(rows), size=(n_boot, len(rows)))]
    yb = y[boot_idx]

    def boot_r(name, ckey):
        # (n_seeds, n_boot)
        return np.array([_pearson_rows(yb, oof[(name, ckey)][si][boot_idx]) for si in range(len(seeds))])

    buffer, ci = {}, {}
    if n_boot:
        ec, fc = boot_r("clean", "enrichment_only"), boot_r("clean", "full")
    for name, _kind, _param in settings:
        buffer[name] = buffer_r(
            r[("clean", "enrichment_only")].mean(), r[(name, "enrichment_only")].mean(),
            r[("clean", "full")].mean(), r[(name, "full")].mean(),
        )
        if n_boot:
            es, fs = boot_r(name, "enrichment_only"), boot_r(name, "full")
            dist = ((ec - es) - (fc - fs)).mean(axis=0)
            lo, hi = np.quantile(dist, [0.025, 0.975])
            ci[name] = (float(lo), float(hi))
        else:
            ci[name] = (float("nan"), float("nan"))
    return StressResult(tuple(settings), seeds, r, buffer, ci, oof, y)
