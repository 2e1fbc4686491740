"""Command-line entry point: ``fpmech <command> [options]``.

Every command reads and writes files only. Each output directory gets a
``<command>.run.json`` sidecar holding the full configuration, its hash and
the hashes of the feature schema and seed table.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .chromophore import anchor_structure
from .config import RunConfig, load_config
from .dataset import (
    FeatureDataset,
    file_sha256,
    fmt_float,
    read_feature_table,
    write_feature_table,
    write_json,
)
from .errors import ConfigMismatch, FpmechError
from .evaluate import (
    BUCKET_LABELS,
    BUCKETS,
    STRESS_CONDITIONS,
    CVResult,
    MetricsReport,
    SplitPlan,
    feature_recurrence,
    get_condition,
    homology_split,
    run_homology_eval,
    run_random_cv,
    table4_conditions,
    v54_stress,
)
from .ingest import load_metadata, parse_structure
from .model import save_models
from .propagate import featurize
from .signals import default_seed_table, family_mapping

logger = logging.getLogger("fpmech")

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2
FEATURE_TABLE = "features.csv"
SPLIT_TABLE = "split.csv"
FEATURIZE_KEYS = ("locality_radius", "edge_cutoff", "beta_threshold", "epsilon", "chromophore_codes")


# ---------------------------------------------------------------------------
# helpers


def build_config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    changes = {}
    for key in ("metadata", "structures", "out"):
        val = getattr(args, key, None)
        if val is not None:
            changes[key] = str(val)
    if getattr(args, "seeds", None):
        changes["seeds"] = tuple(int(s) for s in args.seeds.split(","))
    return cfg.replace(**changes) if changes else cfg


def provenance(cfg: RunConfig) -> dict:
    return {
        "config": cfg.to_dict(),
        "config_hash": cfg.hash,
        "schema_hash": family_mapping().hash,
        "seed_table_hash": default_seed_table().hash,
    }


def write_run_sidecar(out: Path, command: str, cfg: RunConfig, inputs=(), extra=None) -> None:
    side = {"command": command, **provenance(cfg)}
    side["inputs"] = {Path(p).name: file_sha256(p) for p in inputs}
    if extra:
        side.update(extra)
    write_json(out / f"{command}.run.json", side)


def write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt_float(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_rows(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def feature_table_path(args, cfg: RunConfig) -> Path:
    if getattr(args, "features", None):
        return Path(args.features)
    return Path(cfg.out) / FEATURE_TABLE


def load_features(path: Path, cfg: RunConfig) -> FeatureDataset:
    """Read a feature table and refuse it if it was built under other settings."""
    ds = read_feature_table(path)
    meta = ds.meta
    schema = family_mapping()
    if meta.get("schema_hash") not in (None, schema.hash):
        raise ConfigMismatch(f"{path}: schema hash {meta['schema_hash']} != {schema.hash}")
    if meta.get("seed_table_hash") not in (None, default_seed_table().hash):
        raise ConfigMismatch(f"{path}: seed table hash differs from the installed table")
    built = meta.get("config", {})
    now = cfg.to_dict()
    for key in FEATURIZE_KEYS:
        if key in built and built[key] != now[key]:
            raise ConfigMismatch(f"{path}: {key}={built[key]!r} at featurization, {now[key]!r} now")
    if tuple(ds.columns) != schema.candidate_columns:
        raise ConfigMismatch(f"{path}: column layout does not match the feature schema")
    return ds


K_HEADER = lambda ks: [f"bright_p@{k}" for k in ks] + [f"dark_p@{k}" for k in ks]  # noqa: E731
METRIC_HEADER = ["condition", "seed", "scope", "n", "R", "MAE", "C"]


def metric_row(cond: str, seed, scope: str, rep: MetricsReport, ks) -> list:
    return [cond, seed, scope, rep.n, rep.pearson_r, rep.mae, rep.compression] + [
        rep.bright_p[k] for k in ks
    ] + [rep.dark_p[k] for k in ks]


def mean_row(cond: str, scope: str, reps: list[MetricsReport], ks) -> list:
    def avg(vals):
        return float(np.mean(vals))

    return [cond, "mean", scope, reps[0].n, avg([r.pearson_r for r in reps]), avg([r.mae for r in reps]),
            avg([r.compression for r in reps])] + [avg([r.bright_p[k] for r in reps]) for k in ks] + [
        avg([r.dark_p[k] for r in reps]) for k in ks]


def cv_rows(res: CVResult, ks) -> list[list]:
    key = res.condition.key
    rows = [metric_row(key, seed, "oof", rep, ks) for seed, rep in zip(res.seeds, res.reports)]
    rows.append(mean_row(key, "oof", res.reports, ks))
    return rows


def oof_rows(res: CVResult) -> list[list]:
    rows = []
    for si, seed in enumerate(res.seeds):
        for j, pid in enumerate(res.ids):
            p = res.oof[si, j]
            if np.isfinite(p):
                rows.append([res.condition.key, seed, pid, res.bands[j], res.fold_plans[si].fold_of[pid], res.y[j], p])
    return rows


OOF_HEADER = ["condition", "seed", "id", "band", "fold", "qy", "prediction"]


def write_split(plan: SplitPlan, path: Path) -> None:
    rows = []
    for pid in sorted(plan.nearest_any):
        if pid in plan.m:
            rows.append([pid, "test", plan.m[pid], BUCKET_LABELS[plan.bucket[pid]], plan.nearest_any[pid]])
        else:
            rows.append([pid, "train", "", "", plan.nearest_any[pid]])
    write_rows(path, ["id", "partition", "m", "bucket", "max_jaccard_any"], rows)


def read_split(path: Path, tau: float) -> SplitPlan:
    label_to_key = {v: k for k, v in BUCKET_LABELS.items()}
    train, test, m, bucket, near = [], [], {}, {}, {}
    for row in read_rows(path):
        pid = row["id"]
        near[pid] = float(row["max_jaccard_any"])
        if row["partition"] == "train":
            train.append(pid)
        else:
            test.append(pid)
            m[pid] = float(row["m"])
            bucket[pid] = label_to_key[row["bucket"]]
    return SplitPlan(tuple(train), tuple(test), m, bucket, near, tau)


def summary_text(title: str, lines) -> str:
    return "\n".join([title, "=" * len(title), *lines]) + "\n"


# ---------------------------------------------------------------------------
# commands


def cmd_featurize(args) -> int:
    cfg = build_config(args)
    if not cfg.metadata:
        raise FpmechError("--metadata is required")
    out = Path(cfg.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    records = load_metadata(cfg.metadata)
    base = Path(cfg.structures) if cfg.structures else Path(cfg.metadata).parent
    st = default_seed_table()
    ids, rows, em, qy, states, flags, skipped = [], [], [], [], [], [], []
    for rec in records:
        path = Path(rec.structure_path)
        if not path.is_absolute():
            path = base / path
        try:
            s = parse_structure(path, source=rec.extra.get("source") or "experimental", structure_id=rec.id)
            anchor = anchor_structure(s, cfg.chromophore_codes)
            fv = featurize(
                s, anchor, st, locality_radius=cfg.locality_radius, edge_cutoff=cfg.edge_cutoff,
                beta_threshold=cfg.beta_threshold, epsilon=cfg.epsilon, codes=cfg.chromophore_codes,
            )
        except (FpmechError, OSError, FloatingPointError) as exc:
            logger.warning("skipping %s: %s: %s", rec.id, type(exc).__name__, exc)
            skipped.append([rec.id, type(exc).__name__, str(exc)])
            continue
        ids.append(rec.id)
        rows.append(fv.values)
        em.append(rec.emission_nm)
        qy.append(rec.qy)
        states.append(fv.maturation_state)
        flags.append(fv.flags)
    schema = family_mapping()
    X = np.array(rows).reshape(len(ids), len(schema.candidate_columns))
    ds = FeatureDataset(ids, schema.candidate_columns, X, np.array(em), np.array(qy),
                        maturation_state=states, flags=flags)
    table = out / FEATURE_TABLE
    write_feature_table(ds, table, provenance(cfg))
    write_rows(out / "featurize_skipped.csv", ["id", "reason", "message"], skipped)
    write_run_sidecar(out, "featurize", cfg, [cfg.metadata], {"n_rows": len(ids), "n_skipped": len(skipped)})
    (out / "featurize_summary.txt").write_text(summary_text("featurize", [
        f"proteins in metadata: {len(records)}",
        f"featurized: {len(ids)}",
        f"skipped: {len(skipped)}",
        f"columns: {len(schema.candidate_columns)} (family {len(schema.family_columns)}, "
        f"non-identity {len(schema.nonid_columns)})",
    ]), encoding="utf-8")
    logger.info("featurized %d/%d proteins into %s", len(ids), len(records), table)
    if not ids:
        return EXIT_FATAL
    return EXIT_PARTIAL if skipped else EXIT_OK


def cmd_split(args) -> int:
    cfg = build_config(args)
    if not cfg.metadata:
        raise FpmechError("--metadata is required")
    out = Path(cfg.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    records = load_metadata(cfg.metadata)
    plan = homology_split(records, tau=cfg.jaccard_tau)
    write_split(plan, out / SPLIT_TABLE)
    write_run_sidecar(out, "split", cfg, [cfg.metadata])
    counts = {b: len(plan.bucket_members(b)) for b in BUCKETS}
    (out / "split_summary.txt").write_text(summary_text("split", [
        f"train: {len(plan.train_ids)}", f"test: {len(plan.test_ids)}",
        *[f"bucket {BUCKET_LABELS[b]}: {counts[b]}" for b in BUCKETS],
    ]), encoding="utf-8")
    return EXIT_OK


def _conditions(args) -> list:
    if getattr(args, "condition", None):
        return [get_condition(k) for k in args.condition.split(",")]
    return table4_conditions()


def cmd_eval_random(args) -> int:
    cfg = build_config(args)
    out = Path(cfg.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    table = feature_table_path(args, cfg)
    ds = load_features(table, cfg)
    cond = get_condition(args.condition or "full")
    res = run_random_cv(ds, cfg, cond)
    ks = cfg.screening_k
    write_rows(out / "eval_random.csv", METRIC_HEADER + K_HEADER(ks), cv_rows(res, ks))
    write_rows(out / "eval_random_oof.csv", OOF_HEADER, oof_rows(res))
    write_rows(out / "recurrence.csv", ["band", "column", "count"], feature_recurrence(res))
    write_rows(out / "eval_random_skipped.csv", ["seed", "fold", "band"], res.skipped)
    write_run_sidecar(out, "eval-random", cfg, [table], {"condition": cond.key})
    s = res.summary()
    (out / "eval_random_summary.txt").write_text(summary_text(f"eval-random ({cond.name})", [
        f"rows: {len(res.ids)}  seeds: {len(res.seeds)}  pooled OOF predictions: {res.n_oof}",
        f"R = {s['R_mean']:.3f} +/- {s['R_sd']:.3f}",
        f"MAE = {s['MAE_mean']:.3f} +/- {s['MAE_sd']:.3f}",
        f"compression = {s['C_mean']:.3f}",
    ]), encoding="utf-8")
    return EXIT_PARTIAL if res.skipped else EXIT_OK


def cmd_eval_homology(args) -> int:
    cfg = build_config(args)
    out = Path(cfg.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    table = feature_table_path(args, cfg)
    ds = load_features(table, cfg)
    split_path = Path(args.split) if args.split else Path(cfg.out) / SPLIT_TABLE
    inputs = [table]
    if split_path.exists():
        plan = read_split(split_path, cfg.jaccard_tau)
        inputs.append(split_path)
    elif cfg.metadata:
        plan = homology_split(load_metadata(cfg.metadata), tau=cfg.jaccard_tau)
        inputs.append(cfg.metadata)
    else:
        raise FpmechError(f"no split file at {split_path} and no --metadata to compute one")
    cond = get_condition(args.condition or "full")
    res = run_homology_eval(ds, plan, cfg, cond)
    ks = cfg.screening_k
    wanted = None
    if args.bucket:
        label_to_key = {v: k for k, v in BUCKET_LABELS.items()}
        wanted = {label_to_key.get(b, b) for b in args.bucket.split(",")}
    rows = []
    by_scope: dict[str, list] = {}
    for seed, scope, rep in res.rows:
        if wanted is not None and scope != "overall" and scope not in wanted:
            continue
        label = BUCKET_LABELS.get(scope, scope)
        rows.append(metric_row(cond.key, seed, label, rep, ks))
        by_scope.setdefault(label, []).append(rep)
    rows += [mean_row(cond.key, label, reps, ks) for label, reps in by_scope.items()]
    write_rows(out / "eval_homology.csv", METRIC_HEADER + K_HEADER(ks), rows)
    pred_rows = [
        [cond.key, seed, pid, BUCKET_LABELS[plan.bucket[pid]], p]
        for seed in cfg.seeds for pid, p in sorted(res.predictions[seed].items())
    ]
    write_rows(out / "eval_homology_predictions.csv", ["condition", "seed", "id", "bucket", "prediction"], pred_rows)
    models_dir = out / "models"
    models_dir.mkdir(exist_ok=True)
    for seed in cfg.seeds:
        save_models(res.models[seed], models_dir / f"homology_{cond.key}_seed{seed}.npz",
                    {"config_hash": cfg.hash, "seed": seed, "condition": cond.key})
    write_run_sidecar(out, "eval-homology", cfg, inputs, {
        "condition": cond.key, "absent_buckets": [BUCKET_LABELS[b] for b in res.absent_buckets],
    })
    lines = [f"train: {len(plan.train_ids)}  test: {len(plan.test_ids)}"]
    for label, reps in by_scope.items():
        lines.append(f"{label}: n={reps[0].n}  R={np.mean([r.pearson_r for r in reps]):.3f}")
    for b in res.absent_buckets:
        lines.append(f"{BUCKET_LABELS[b]}: absent (no test proteins)")
    (out / "eval_homology_summary.txt").write_text(summary_text(f"eval-homology ({cond.name})", lines),
                                                   encoding="utf-8")
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = build_config(args)
    out = Path(cfg.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    table = feature_table_path(args, cfg)
    ds = load_features(table, cfg)
    ks = cfg.screening_k
    metrics, oof, summary, lines = [], [], [], []
    partial = False
    for cond in _conditions(args):
        res = run_random_cv(ds, cfg, cond)
        partial |= bool(res.skipped)
        metrics += cv_rows(res, ks)
        oof += oof_rows(res)
        s = res.summary()
        summary.append([cond.name, cond.key, cond.n_features, res.n_oof, s["R_mean"], s["R_sd"], s["MAE_mean"],
                        s["C_mean"]])
        lines.append(f"{cond.name:<40s} features={cond.n_features:>3d}  R={s['R_mean']:.3f}  OOF={res.n_oof}")
    write_rows(out / "ablation.csv",
               ["condition", "key", "n_features", "n_oof", "R_mean", "R_sd", "MAE_mean", "C_mean"], summary)
    write_rows(out / "ablation_metrics.csv", METRIC_HEADER + K_HEADER(ks), metrics)
    write_rows(out / "ablation_oof.csv", OOF_HEADER, oof)
    write_run_sidecar(out, "ablate", cfg, [table])
    (out / "ablation_summary.txt").write_text(summary_text("ablate", lines), encoding="utf-8")
    return EXIT_PARTIAL if partial else EXIT_OK


def cmd_stress(args) -> int:
    cfg = build_config(args)
    out = Path(cfg.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    table = feature_table_path(args, cfg)
    ds = load_features(table, cfg)
    res = v54_stress(ds, cfg)
    header = ["setting"] + [f"R_{c}" for c in STRESS_CONDITIONS] + ["buffer_R", "ci_lo", "ci_hi"]
    rows = [[r[h] for h in header] for r in res.table()]
    write_rows(out / "stress.csv", header, rows)
    write_run_sidecar(out, "stress", cfg, [table])
    lines = [f"{r[0]:<32s} Buffer_R={r[-3]: .4f}  95% CI [{r[-2]: .4f}, {r[-1]: .4f}]" for r in rows[1:]]
    (out / "stress_summary.txt").write_text(summary_text("stress", lines), encoding="utf-8")
    return EXIT_OK


def cmd_report(args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    cfg = build_config(args)
    out = Path(cfg.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    ks = list(cfg.screening_k)
    png_meta = {"Software": None}
    made = []
    inputs = []
    for name in ("ablation_metrics.csv", "eval_random.csv", "eval_homology.csv"):
        src = out / name
        if not src.exists():
            continue
        inputs.append(src)
        series = [r for r in read_rows(src) if r["seed"] == "mean"]
        frontier = []
        fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
        for r in series:
            label = r["condition"] if r["scope"] in ("oof", "overall") else f"{r['condition']} {r['scope']}"
            bright = [float(r[f"bright_p@{k}"]) for k in ks]
            dark = [float(r[f"dark_p@{k}"]) for k in ks]
            axes[0].plot(ks, bright, marker="o", label=label)
            axes[1].plot(ks, dark, marker="o", label=label)
            frontier += [[r["condition"], r["scope"], k, b, d] for k, b, d in zip(ks, bright, dark)]
        for ax, title in zip(axes, ("Bright P@K", "Dark P@K")):
            ax.set_xlabel("K")
            ax.set_ylim(0, 1)
            ax.set_title(title)
        axes[1].legend(fontsize=6, loc="best")
        fig.tight_layout()
        stem = Path(name).stem
        fig.savefig(out / f"frontier_{stem}.png", dpi=100, metadata=png_meta)
        plt.close(fig)
        write_rows(out / f"frontier_{stem}.csv", ["condition", "scope", "K", "bright_p", "dark_p"], frontier)
        made.append(f"frontier_{stem}.png")
    rec = out / "recurrence.csv"
    if rec.exists():
        inputs.append(rec)
        rows = read_rows(rec)
        bands = list(dict.fromkeys(r["band"] for r in rows))
        cols = sorted({r["column"] for r in rows})
        fig, ax = plt.subplots(figsize=(6, max(3.0, 0.18 * len(cols))))
        if rows:
            x = [bands.index(r["band"]) for r in rows]
            y = [cols.index(r["column"]) for r in rows]
            size = [12 * float(r["count"]) for r in rows]
            ax.scatter(x, y, s=size, alpha=0.6)
        ax.set_xticks(range(len(bands)), bands)
        ax.set_yticks(range(len(cols)), cols, fontsize=5)
        ax.set_title("Top-10 recurrence across seed-folds")
        fig.tight_layout()
        fig.savefig(out / "recurrence_bubbles.png", dpi=100, metadata=png_meta)
        plt.close(fig)
        made.append("recurrence_bubbles.png")
    if not made:
        raise FpmechError(f"nothing to report in {out}; run eval-random, eval-homology or ablate first")
    write_run_sidecar(out, "report", cfg, inputs, {"figures": made})
    return EXIT_OK


COMMANDS = {
    "featurize": cmd_featurize,
    "split": cmd_split,
    "eval-random": cmd_eval_random,
    "eval-homology": cmd_eval_homology,
    "ablate": cmd_ablate,
    "stress": cmd_stress,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fpmech", description="Mechanism-feature QY modelling pipeline.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON run configuration; explicit flags take precedence")
        sp.add_argument("--metadata", help="protein table (CSV)")
        sp.add_argument("--structures", help="directory holding the structure files")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seeds", help="comma-separated seeds, e.g. 0,1,2,3,4")
        sp.add_argument("--features", help=f"feature table (default <out>/{FEATURE_TABLE})")
        if name in ("eval-random", "eval-homology", "ablate"):
            sp.add_argument("--condition", help="ablation condition key(s), comma-separated")
        if name == "eval-homology":
            sp.add_argument("--split", help=f"split table (default <out>/{SPLIT_TABLE})")
            sp.add_argument("--bucket", help="restrict bucket rows, e.g. 70-85,<50")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except (FpmechError, KeyError, ValueError, OSError) as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
