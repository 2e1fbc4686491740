"""PDB-format structure parsing and metadata loading."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    EmptyStructure,
    InvalidQy,
    InvalidRecord,
    MalformedRecord,
    MissingColumn,
    SequenceTooShort,
)

logger = logging.getLogger(__name__)

WATER_CODES = frozenset({"HOH", "WAT", "DOD", "H2O"})
METADATA_COLUMNS = ("id", "sequence", "emission_nm", "qy", "structure_path")
MIN_SEQUENCE_LENGTH = 5


@dataclass(frozen=True)
class AtomRecord:
    atom_name: str
    element: str
    position: tuple[float, float, float]

    def __post_init__(self):
        if not self.atom_name:
            raise MalformedRecord("empty atom name")
        if not all(math.isfinite(c) for c in self.position):
            raise MalformedRecord(f"non-finite coordinate for atom {self.atom_name}")


@dataclass(frozen=True)
class Residue:
    chain_id: str
    seq_index: int
    aa3: str
    atoms: tuple[AtomRecord, ...]
    is_hetero: bool = False
    icode: str = ""

    def __post_init__(self):
        if not self.atoms:
            raise MalformedRecord(f"residue {self.aa3} {self.chain_id}{self.seq_index} has no atoms")
        if self.aa3 != self.aa3.upper():
            raise MalformedRecord(f"residue name {self.aa3!r} is not uppercase")

    @property
    def key(self) -> str:
        """Stable identifier, ``chain:seq[icode]``."""
        return f"{self.chain_id}:{self.seq_index}{self.icode}"

    @property
    def coords(self) -> np.ndarray:
        return np.array([a.position for a in self.atoms], dtype=np.float64)

    @property
    def centre(self) -> np.ndarray:
        return self.coords.mean(axis=0)

    def atom(self, name: str) -> AtomRecord | None:
        for a in self.atoms:
            if a.atom_name == name:
                return a
        return None


@dataclass(frozen=True)
class Structure:
    id: str
    residues: tuple[Residue, ...]
    source: str = "experimental"
    n_waters_dropped: int = 0

    def __post_init__(self):
        if self.source not in ("experimental", "predicted"):
            raise ValueError(f"unknown structure source {self.source!r}")
        if not self.residues:
            raise EmptyStructure(f"{self.id}: no residues")

    def __len__(self):
        return len(self.residues)

    def all_coords(self) -> np.ndarray:
        return np.concatenate([r.coords for r in self.residues], axis=0)


@dataclass(frozen=True)
class ProteinRecord:
    id: str
    sequence: str
    emission_nm: float
    qy: float
    structure_path: str
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.sequence) < MIN_SEQUENCE_LENGTH:
            raise SequenceTooShort(
                f"{self.id}: sequence length {len(self.sequence)} < {MIN_SEQUENCE_LENGTH}"
            )
        if not (0.0 <= self.qy <= 1.0):
            raise InvalidQy(f"{self.id}: qy={self.qy} outside [0, 1]")
        if not (self.emission_nm > 0 and math.isfinite(self.emission_nm)):
            raise InvalidRecord(f"{self.id}: emission_nm={self.emission_nm} must be positive")


def _guess_element(atom_name_field: str) -> str:
    # used only when columns 77-78 are blank; two-letter elements are not recovered
    for ch in atom_name_field:
        if ch.isalpha():
            return ch.upper()
    return ""


def _float_field(line: str, lo: int, hi: int, what: str, lineno: int, default=None) -> float:
    text = line[lo:hi].strip()
    if not text:
        if default is not None:
            return default
        raise MalformedRecord(f"line {lineno}: missing {what}")
    try:
        return float(text)
    except ValueError:
        raise MalformedRecord(f"line {lineno}: cannot parse {what} from {text!r}") from None


def parse_structure_text(text: str, structure_id: str = "structure", source: str = "experimental") -> Structure:
    """Parse PDB-format text into a :class:`Structure`.

    Only the first model is read. Alternate locations are resolved per atom
    name to the highest occupancy, ties keeping the first one encountered.
    Waters are dropped and counted.
    """
    # group key -> {atom_name: (occupancy, AtomRecord)}; dicts keep file order
    groups: dict[tuple, dict[str, tuple[float, AtomRecord]]] = {}
    hetero: dict[tuple, bool] = {}
    saw_model = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        rec = line[:6]
        if rec.startswith("MODEL"):
            if saw_model:
                break
            saw_model = True
            continue
        if rec.startswith("ENDMDL"):
            break
        if rec not in ("ATOM  ", "HETATM"):
            continue
        if len(line) < 54:
            raise MalformedRecord(f"line {lineno}: coordinate record truncated")
        name_field = line[12:16]
        atom_name = name_field.strip()
        res_name = line[17:20].strip().upper()
        chain = line[21:22].strip()
        try:
            seq = int(line[22:26])
        except ValueError:
            raise MalformedRecord(f"line {lineno}: bad residue number {line[22:26]!r}") from None
        icode = line[26:27].strip()
        x = _float_field(line, 30, 38, "x", lineno)
        y = _float_field(line, 38, 46, "y", lineno)
        z = _float_field(line, 46, 54, "z", lineno)
        occ = _float_field(line, 54, 60, "occupancy", lineno, default=1.0) if len(line) > 54 else 1.0
        element = line[76:78].strip().capitalize() if len(line) >= 78 else ""
        if not element:
            element = _guess_element(name_field)
        atom = AtomRecord(atom_name, element, (x, y, z))
        key = (chain, seq, icode, res_name)
        slot = groups.setdefault(key, {})
        hetero.setdefault(key, rec == "HETATM")
        prev = slot.get(atom_name)
        if prev is None or occ > prev[0]:
            slot[atom_name] = (occ, atom)

    if not groups:
        raise EmptyStructure(f"{structure_id}: no ATOM/HETATM records")

    residues = []
    seen: set[tuple] = set()
    n_water = 0
    for (chain, seq, icode, res_name), atoms in groups.items():
        if res_name in WATER_CODES:
            n_water += 1
            continue
        ident = (chain, seq, icode)
        if ident in seen:
            # microheterogeneity: two residue names at one position; keep the first
            logger.warning("%s: duplicate residue %s%s%s (%s) ignored", structure_id, chain, seq, icode, res_name)
            continue
        seen.add(ident)
        residues.append(
            Residue(
                chain_id=chain,
                seq_index=seq,
                aa3=res_name,
                atoms=tuple(a for _, a in atoms.values()),
                is_hetero=hetero[(chain, seq, icode, res_name)],
                icode=icode,
            )
        )
    if not residues:
        raise EmptyStructure(f"{structure_id}: no residues left after dropping waters")
    return Structure(id=structure_id, residues=tuple(residues), source=source, n_waters_dropped=n_water)


def parse_structure(path, source: str = "experimental", structure_id: str | None = None) -> Structure:
    path = Path(path)
    text = path.read_text(encoding="utf-8", errors="replace")
    sid = structure_id if structure_id is not None else path.stem
    return parse_structure_text(text, structure_id=sid, source=source)


def load_metadata(path) -> list[ProteinRecord]:
    """Read the comma-delimited protein table, validating each row.

    Extra columns are kept on ``ProteinRecord.extra``.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in METADATA_COLUMNS if c not in header]
        if missing:
            raise MissingColumn(f"{path}: missing column(s) {', '.join(missing)}")
        records = []
        for rowno, row in enumerate(reader, start=2):
            try:
                em = float(row["emission_nm"])
                qy = float(row["qy"])
            except (TypeError, ValueError):
                raise InvalidRecord(f"{path}:{rowno}: non-numeric emission_nm/qy") from None
            extra = {k: v for k, v in row.items() if k not in METADATA_COLUMNS and k is not None}
            records.append(
                ProteinRecord(
                    id=row["id"].strip(),
                    sequence=row["sequence"].strip().upper(),
                    emission_nm=em,
                    qy=qy,
                    structure_path=row["structure_path"].strip(),
                    extra=extra,
                )
            )
    ids = [r.id for r in records]
    if len(set(ids)) != len(ids):
        raise InvalidRecord(f"{path}: duplicate protein ids")
    return records


def format_pdb(s: Structure) -> str:
    """Render a structure as fixed-column PDB ATOM/HETATM records."""
    lines = []
    serial = 1
    for r in s.residues:
        rec = "HETATM" if r.is_hetero else "ATOM  "
        for a in r.atoms:
            name = a.atom_name if len(a.atom_name) == 4 else f" {a.atom_name:<3s}"
            x, y, z = a.position
            lines.append(
                f"{rec}{serial:5d} {name}{' '}{r.aa3:>3s} {r.chain_id:1s}{r.seq_index:4d}{r.icode:1s}   "
                f"{x:8.3f}{y:8.3f}{z:8.3f}{1.0:6.2f}{0.0:6.2f}          {a.element:>2s}"
            )
            serial += 1
    lines.append("END")
    return "\n".join(lines) + "\n"
