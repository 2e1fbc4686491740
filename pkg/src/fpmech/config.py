"""Run configuration with canonical hashing."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .model import EtRegressorConfig


@dataclass(frozen=True)
class RunConfig:
    metadata: str = ""
    structures: str = ""
    out: str = ""
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    folds: int = 5
    locality_radius: float = 12.0
    edge_cutoff: float = 8.0
    beta_threshold: float = 0.05
    epsilon: float = 1e-8
    top_k_features: int = 25
    et: EtRegressorConfig = field(default_factory=EtRegressorConfig)
    screening_k: tuple[int, ...] = (5, 10, 15, 20, 25)
    jaccard_tau: float = 0.85
    bootstrap_resamples: int = 1000
    chromophore_codes: tuple[str, ...] = ("CR2", "CR8", "CRO", "CRQ", "CSY")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "et" in d and isinstance(d["et"], dict):
            d["et"] = EtRegressorConfig(**d["et"])
        for key in ("seeds", "screening_k", "chromophore_codes"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def canonical_json(self, exclude_paths: bool = True) -> str:
        d = self.to_dict()
        if exclude_paths:
            for key in ("metadata", "structures", "out"):
                d.pop(key)
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self) -> str:
        """Hash of every setting that affects numbers (paths excluded)."""
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]


def load_config(path) -> RunConfig:
    return RunConfig.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
