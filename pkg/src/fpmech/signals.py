"""Per-residue seed signals and the channel/signal/region feature schema.

The schema is the single source of column names and their order. Counts
are asserted at import time so that an edit to the signal assignment that
breaks the 121 / 73 / 52 accounting fails immediately.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

SIGNALS = (
    "bulky",
    "flex_risk",
    "rotatable_burden",
    "hydrophobic",
    "bulky_contact",
    "charge",
    "hbond_donor",
    "hbond_acceptor",
    "aromatic",
    "total_contact_burden",
    "is_PHE",
    "is_TYR",
    "is_HIS",
    "is_ALA",
    "aux_polarity",
    "aux_volume",
    "aux_is_GLY",
    "aux_is_PRO",
    "aux_net_hbond",
)
IDENTITY_SIGNALS = frozenset({"is_PHE", "is_TYR", "is_HIS", "is_ALA", "aux_is_GLY", "aux_is_PRO"})

ACTIVE_CHANNELS = ("steric", "hydrophobic")
REGIONS = ("phenolate", "bridge", "imidazolinone")

CHANNEL_SIGNALS = {
    "steric": (
        "bulky", "flex_risk", "rotatable_burden", "charge", "hbond_donor",
        "hbond_acceptor", "aromatic", "is_PHE", "is_TYR", "is_HIS",
    ),
    "hydrophobic": (
        "hydrophobic", "bulky_contact", "charge", "hbond_donor", "hbond_acceptor",
        "aromatic", "is_PHE", "is_TYR", "is_HIS", "flex_risk",
        "total_contact_burden", "is_ALA",
    ),
}

# signal -> family; identity flags are assigned to the family they were mapped
# under and then removed by the identity filter
SIGNAL_FAMILY = {
    "bulky": "steric",
    "flex_risk": "steric",
    "rotatable_burden": "steric",
    "hydrophobic": "hydrophobic",
    "bulky_contact": "hydrophobic",
    "charge": "charge",
    "hbond_donor": "hbond",
    "hbond_acceptor": "hbond",
    "aromatic": "aromatic",
    "is_PHE": "aromatic",
    "is_TYR": "aromatic",
    "is_HIS": "aromatic",
    "total_contact_burden": "solvent",
    "is_ALA": "solvent",
}

CLAMP_NAMES = (
    "clamp_phenolate_contact",
    "clamp_bridge_contact",
    "clamp_imidazolinone_contact",
    "clamp_phenolate_mindist",
    "clamp_bridge_mindist",
    "clamp_imidazolinone_mindist",
    "clamp_asymmetry",
)

FALLBACK_CODE = "UNK"


def column_name(channel: str, signal: str, region: str) -> str:
    return f"ch_{channel}__{signal}__{region}"


def parse_column(name: str) -> tuple[str, str, str] | None:
    """Inverse of :func:`column_name`; ``None`` for clamp columns."""
    if not name.startswith("ch_"):
        return None
    channel, signal, region = name[3:].split("__")
    return channel, signal, region


def _family_of(channel: str, signal: str) -> str:
    # flex_risk routed through the hydrophobic channel counts as solvent-related
    if channel == "hydrophobic" and signal == "flex_risk":
        return "solvent"
    return SIGNAL_FAMILY[signal]


@dataclass(frozen=True)
class FeatureSchema:
    candidate_columns: tuple[str, ...]
    family_columns: tuple[str, ...]
    nonid_columns: tuple[str, ...]
    column_family: dict

    @property
    def enrichment_columns(self) -> tuple[str, ...]:
        return tuple(c for c in self.candidate_columns if c.startswith("ch_"))

    @property
    def nonid_enrichment(self) -> tuple[str, ...]:
        return tuple(c for c in self.nonid_columns if c.startswith("ch_"))

    @property
    def clamp_columns(self) -> tuple[str, ...]:
        return CLAMP_NAMES

    def nonid_channel(self, channel: str) -> tuple[str, ...]:
        prefix = f"ch_{channel}__"
        return tuple(c for c in self.nonid_columns if c.startswith(prefix))

    @property
    def unused_columns(self) -> tuple[str, ...]:
        fam = set(self.family_columns)
        return tuple(c for c in self.candidate_columns if c not in fam)

    @property
    def hash(self) -> str:
        payload = "\n".join(
            ["candidate"] + list(self.candidate_columns)
            + ["family"] + list(self.family_columns)
            + ["nonid"] + list(self.nonid_columns)
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@lru_cache(maxsize=1)
def family_mapping() -> FeatureSchema:
    candidate = []
    family = []
    column_family = {}
    for channel in ACTIVE_CHANNELS:
        mapped = set(CHANNEL_SIGNALS[channel])
        for region in REGIONS:
            for signal in SIGNALS:
                name = column_name(channel, signal, region)
                candidate.append(name)
                if signal in mapped:
                    family.append(name)
                    column_family[name] = _family_of(channel, signal)
    candidate.extend(CLAMP_NAMES)
    family.extend(CLAMP_NAMES)
    for name in CLAMP_NAMES:
        column_family[name] = "clamp"
    nonid = [c for c in family if not (parse_column(c) and parse_column(c)[1] in IDENTITY_SIGNALS)]
    schema = FeatureSchema(tuple(candidate), tuple(family), tuple(nonid), column_family)
    _check_counts(schema)
    return schema


def _check_counts(schema: FeatureSchema) -> None:
    n_sig = len(SIGNALS)
    expected = {
        "candidate": (len(schema.candidate_columns), n_sig * 2 * 3 + 7),
        "candidate=121": (len(schema.candidate_columns), 121),
        "family=73": (len(schema.family_columns), 73),
        "nonid=52": (len(schema.nonid_columns), 52),
        "nonid enrichment=45": (len(schema.nonid_enrichment), 45),
        "steric nonid=21": (len(schema.nonid_channel("steric")), 21),
        "hydrophobic nonid=24": (len(schema.nonid_channel("hydrophobic")), 24),
        "unused=48": (len(schema.unused_columns), 48),
    }
    bad = {k: v for k, v in expected.items() if v[0] != v[1]}
    if bad:
        raise AssertionError(f"feature accounting broken: {bad}")


class SeedTable:
    """Immutable lookup from residue code to the 19 seed signals."""

    def __init__(self, codes, values: np.ndarray, content_hash: str):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (len(codes), len(SIGNALS)):
            raise ValueError(f"seed table shape {values.shape} does not match {len(codes)} x {len(SIGNALS)}")
        if FALLBACK_CODE not in codes:
            raise ValueError("seed table has no fallback row")
        for sig in IDENTITY_SIGNALS:
            col = values[:, SIGNALS.index(sig)]
            if not np.all((col == 0) | (col == 1)):
                raise ValueError(f"identity signal {sig} must be 0/1")
        self.codes = tuple(codes)
        self._index = {c: i for i, c in enumerate(self.codes)}
        self.values = values
        self.values.setflags(write=False)
        self.hash = content_hash

    @classmethod
    def from_csv(cls, path=None) -> "SeedTable":
        if path is None:
            raw = resources.files("fpmech").joinpath("data/seed_table.csv").read_bytes()
        else:
            raw = Path(path).read_bytes()
        lines = [ln for ln in raw.decode("utf-8").splitlines() if ln.strip() and not ln.startswith("#")]
        header = lines[0].split(",")
        if header[0] != "aa3" or tuple(header[1:]) != SIGNALS:
            raise ValueError("seed table header must be aa3 followed by the 19 signals in order")
        codes, rows = [], []
        for ln in lines[1:]:
            parts = ln.split(",")
            codes.append(parts[0].strip().upper())
            rows.append([float(p) for p in parts[1:]])
        return cls(codes, np.array(rows), hashlib.sha256(raw).hexdigest()[:16])

    def seed_vector(self, aa3: str) -> np.ndarray:
        i = self._index.get(aa3.upper(), self._index[FALLBACK_CODE])
        return self.values[i]

    def matrix(self, codes) -> np.ndarray:
        fb = self._index[FALLBACK_CODE]
        idx = [self._index.get(c.upper(), fb) for c in codes]
        return self.values[idx]


@lru_cache(maxsize=1)
def default_seed_table() -> SeedTable:
    return SeedTable.from_csv()


def seed_vector(aa3: str, table: SeedTable | None = None) -> np.ndarray:
    return (table or default_seed_table()).seed_vector(aa3)
