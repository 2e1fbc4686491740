"""Mechanism-informed features and band-specific models for fluorescent-protein quantum yield."""

from ._kernels import BACKEND
from .chromophore import ClampDescriptors, CroAnchor, anchor_structure, clamp_descriptors, register_chromophore
from .config import RunConfig
from .dataset import FeatureDataset, read_feature_table, write_feature_table
from .evaluate import (
    AblationCondition,
    FoldPlan,
    MetricsReport,
    SplitPlan,
    homology_split,
    kmer_jaccard,
    make_folds,
    pearson_mae_compression,
    run_homology_eval,
    run_random_cv,
    table4_conditions,
    topk_metrics,
    v54_stress,
)
from .graph import ChannelId, MechanismGraph, build_graph
from .ingest import AtomRecord, ProteinRecord, Residue, Structure, load_metadata, parse_structure
from .model import BandModel, EtRegressorConfig, ExtraTreesForest, assign_band, fit_band, predict
from .propagate import FeatureVector, featurize
from .signals import FeatureSchema, SeedTable, default_seed_table, family_mapping

__version__ = "0.1.0"

__all__ = [
    "AblationCondition", "AtomRecord", "BACKEND", "BandModel", "ChannelId", "ClampDescriptors", "CroAnchor",
    "EtRegressorConfig", "ExtraTreesForest", "FeatureDataset", "FeatureSchema", "FeatureVector", "FoldPlan",
    "MechanismGraph", "MetricsReport", "ProteinRecord", "Residue", "RunConfig", "SeedTable", "SplitPlan",
    "Structure", "anchor_structure", "assign_band", "build_graph", "clamp_descriptors", "default_seed_table",
    "family_mapping", "featurize", "fit_band", "homology_split", "kmer_jaccard", "load_metadata",
    "make_folds", "parse_structure", "pearson_mae_compression", "predict", "read_feature_table",
    "register_chromophore", "run_homology_eval", "run_random_cv", "table4_conditions", "topk_metrics",
    "v54_stress", "write_feature_table",
]
