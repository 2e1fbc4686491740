"""Synthetic structures and feature tables for tests, benchmarks and demos.

Nothing here is used by the production pipeline. The GFP-like structures are
geometric mock-ups (an idealised planar chromophore inside a cylindrical
shell of residues), not real proteins.
"""

from __future__ import annotations

import numpy as np

from .dataset import FeatureDataset
from .ingest import AtomRecord, Residue, Structure
from .signals import family_mapping

STANDARD_AA = (
    "ALA", "ARG", "ASN", "ASP", "CYS", "GLN", "GLU", "GLY", "HIS", "ILE",
    "LEU", "LYS", "MET", "PHE", "PRO", "SER", "THR", "TRP", "TYR", "VAL",
)
ONE_LETTER = dict(zip(STANDARD_AA, "ARNDCQEGHILKMFPSTWYV"))

_SIDE_CHAIN = {
    "GLY": (),
    "ALA": ("CB",),
    "SER": ("CB", "OG"),
    "CYS": ("CB", "SG"),
    "THR": ("CB", "OG1", "CG2"),
    "VAL": ("CB", "CG1", "CG2"),
    "PRO": ("CB", "CG", "CD"),
    "ASP": ("CB", "CG", "OD1", "OD2"),
    "ASN": ("CB", "CG", "OD1", "ND2"),
    "ILE": ("CB", "CG1", "CG2", "CD1"),
    "LEU": ("CB", "CG", "CD1", "CD2"),
    "MET": ("CB", "CG", "SD", "CE"),
    "GLU": ("CB", "CG", "CD", "OE1", "OE2"),
    "GLN": ("CB", "CG", "CD", "OE1", "NE2"),
    "LYS": ("CB", "CG", "CD", "CE", "NZ"),
    "HIS": ("CB", "CG", "ND1", "CD2", "CE1", "NE2"),
    "PHE": ("CB", "CG", "CD1", "CD2", "CE1", "CE2", "CZ"),
    "ARG": ("CB", "CG", "CD", "NE", "CZ", "NH1", "NH2"),
    "TYR": ("CB", "CG", "CD1", "CD2", "CE1", "CE2", "CZ", "OH"),
    "TRP": ("CB", "CG", "CD1", "CD2", "NE1", "CE2", "CE3", "CZ2", "CZ3", "CH2"),
}


def _unit(v):
    return v / np.linalg.norm(v)


def ideal_chromophore(origin=(0.0, 0.0, 0.0)) -> dict[str, np.ndarray]:
    """Approximate planar GFP-type chromophore with CRO atom names."""
    o = np.asarray(origin, dtype=np.float64)
    ring = {}
    names = ("C1", "N2", "CA2", "C2", "N3")
    for k, name in enumerate(names):
        ang = np.deg2rad(90.0 + 72.0 * k)
        ring[name] = np.array([1.19 * np.cos(ang), 1.19 * np.sin(ang), 0.0])
    atoms = dict(ring)
    out_ca2 = _unit(ring["CA2"])
    atoms["CB2"] = ring["CA2"] + 1.35 * out_ca2
    centre = atoms["CB2"] + (1.45 + 1.39) * out_ca2
    perp = np.array([-out_ca2[1], out_ca2[0], 0.0])
    hexa = ("CG2", "CD1", "CE1", "CZ", "CE2", "CD2")
    for k, name in enumerate(hexa):
        ang = np.pi + np.deg2rad(60.0 * k)
        atoms[name] = centre + 1.39 * (np.cos(ang) * out_ca2 + np.sin(ang) * perp)
    atoms["OH"] = atoms["CZ"] + 1.36 * out_ca2
    atoms["O2"] = ring["C2"] + 1.23 * _unit(ring["C2"])
    atoms["CA1"] = ring["C1"] + 1.50 * _unit(ring["C1"])
    atoms["N1"] = atoms["CA1"] + np.array([0.0, 1.45, 0.3])
    atoms["CB1"] = atoms["CA1"] + np.array([0.9, 0.4, 1.1])
    atoms["OG1"] = atoms["CB1"] + np.array([0.4, 0.3, 1.3])
    atoms["CA3"] = ring["N3"] + 1.45 * _unit(ring["N3"])
    atoms["C3"] = atoms["CA3"] + np.array([0.5, -0.6, 1.3])
    atoms["O3"] = atoms["C3"] + np.array([0.0, 0.0, 1.23])
    return {k: v + o for k, v in atoms.items()}


def make_residue(rng, aa3, centre, chain="A", seq=1, spread=1.5, hetero=False) -> Residue:
    names = ("N", "CA", "C", "O") + _SIDE_CHAIN.get(aa3, ("CB",))
    pos = np.asarray(centre, dtype=np.float64) + rng.normal(scale=spread, size=(len(names), 3))
    atoms = tuple(
        AtomRecord(n, n[0], tuple(float(round(x, 3)) for x in p)) for n, p in zip(names, pos)
    )
    return Residue(chain_id=chain, seq_index=seq, aa3=aa3, atoms=atoms, is_hetero=hetero)


def chromophore_residue(chain="A", seq=66, origin=(0.0, 0.0, 0.0), code="CRO") -> Residue:
    atoms = tuple(
        AtomRecord(n, n[0], tuple(float(round(x, 3)) for x in p))
        for n, p in ideal_chromophore(origin).items()
    )
    return Residue(chain_id=chain, seq_index=seq, aa3=code, atoms=atoms, is_hetero=True)


def random_local_structure(rng, n_residues=15, radius=10.0, structure_id="synthetic") -> Structure:
    """A CRO residue surrounded by ``n_residues`` random residues.

    Residue centres are drawn inside a ball of ``radius`` A around the
    chromophore, so with the default 12 A locality every residue is usually
    a graph node.
    """
    cro = chromophore_residue()
    cro_centre = cro.coords.mean(axis=0)
    residues = []
    for i in range(n_residues):
        direction = _unit(rng.normal(size=3))
        r = radius * rng.uniform(0.25, 1.0) ** (1 / 3)
        aa = STANDARD_AA[rng.integers(len(STANDARD_AA))]
        seq = i + 1 if i < 65 else i + 2
        residues.append(make_residue(rng, aa, cro_centre + r * direction, seq=seq, spread=1.2))
    residues.insert(min(65, len(residues)), cro)
    return Structure(id=structure_id, residues=tuple(residues), source="predicted")


def gfp_like_structure(rng, n_residues=230, structure_id="gfp_like", barrel_radius=12.0) -> Structure:
    """Barrel-shaped mock FP: residues on a cylinder plus an inner pocket, CRO at 66."""
    cro = chromophore_residue(seq=66)
    cro_centre = cro.coords.mean(axis=0)
    residues = []
    n_inner = 18
    for i in range(1, n_residues + 1):
        if i == 66:
            residues.append(cro)
            continue
        aa = STANDARD_AA[rng.integers(len(STANDARD_AA))]
        if i % (n_residues // n_inner) == 0:
            direction = _unit(rng.normal(size=3))
            centre = cro_centre + rng.uniform(4.5, 8.0) * direction
        else:
            theta = rng.uniform(0, 2 * np.pi)
            z = rng.uniform(-20.0, 20.0)
            rad = barrel_radius + rng.normal(scale=1.0)
            centre = cro_centre + np.array([rad * np.cos(theta), rad * np.sin(theta), z])
        residues.append(make_residue(rng, aa, centre, seq=i, spread=1.3))
    return Structure(id=structure_id, residues=tuple(residues), source="predicted")


def structure_sequence(s: Structure) -> str:
    return "".join(ONE_LETTER.get(r.aa3, "X") for r in s.residues if r.aa3 in ONE_LETTER or r.is_hetero)


def rigid_transform(s: Structure, rotation: np.ndarray, translation: np.ndarray) -> Structure:
    residues = []
    for r in s.residues:
        atoms = tuple(
            AtomRecord(a.atom_name, a.element, tuple((rotation @ np.asarray(a.position) + translation).tolist()))
            for a in r.atoms
        )
        residues.append(Residue(r.chain_id, r.seq_index, r.aa3, atoms, r.is_hetero, r.icode))
    return Structure(id=s.id, residues=tuple(residues), source=s.source, n_waters_dropped=s.n_waters_dropped)


def random_rotation(rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def planted_dataset(
    n: int = 150,
    seed: int = 0,
    n_informative: int = 3,
    snr: float = 2.0,
    band_fractions=(0.6, 0.25, 0.15),
) -> FeatureDataset:
    """Feature table with QY linear in a few non-identity columns plus noise.

    ``snr`` is the variance ratio of the planted signal to the noise. The
    informative columns are the first ``n_informative`` non-identity
    enrichment columns; every other column is independent noise.
    """
    rng = np.random.default_rng(seed)
    schema = family_mapping()
    cols = schema.candidate_columns
    X = rng.normal(size=(n, len(cols)))
    informative = [cols.index(c) for c in schema.nonid_enrichment[:n_informative]]
    coef = np.linspace(1.0, 0.5, n_informative)
    signal = X[:, informative] @ coef
    signal = (signal - signal.mean()) / signal.std()
    noise = rng.normal(size=n) / np.sqrt(snr)
    bands = rng.choice(3, size=n, p=np.asarray(band_fractions) / np.sum(band_fractions))
    em = np.where(bands == 0, rng.uniform(500, 560, n), np.where(bands == 1, rng.uniform(580, 610, n), rng.uniform(610, 680, n)))
    y = np.clip(0.5 + 0.12 * (signal + noise), 0.0, 1.0)
    ids = [f"syn{i:04d}" for i in range(n)]
    seqs = [_random_sequence(rng) for _ in range(n)]
    return FeatureDataset(ids=ids, columns=cols, X=X, emission_nm=em, qy=y, sequences=seqs)


def _random_sequence(rng, length=60) -> str:
    return "".join(rng.choice(list("ARNDCQEGHILKMFPSTWYV"), size=length))


def mutate_sequence(rng, seq: str, rate: float) -> str:
    """Point-substitute each position with probability ``rate``."""
    letters = list("ARNDCQEGHILKMFPSTWYV")
    return "".join(rng.choice(letters) if rng.random() < rate else c for c in seq)


def write_corpus(directory, n: int = 30, seed: int = 0, n_residues: int = 120, n_families: int = 4) -> str:
    """Write ``n`` mock FP structures plus a ``metadata.csv`` into ``directory``.

    Sequences come from ``n_families`` random ancestors mutated at rates
    between 0 and 15%, so the 5-mer split sees close and distant neighbours.
    Returns the metadata path.
    """
    from pathlib import Path

    from .ingest import format_pdb

    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    ancestors = [_random_sequence(rng, 150) for _ in range(n_families)]
    lines = ["id,sequence,emission_nm,qy,structure_path,source"]
    for i in range(n):
        pid = f"fp{i:03d}"
        s = gfp_like_structure(rng, n_residues=n_residues, structure_id=pid)
        (out / f"{pid}.pdb").write_text(format_pdb(s), encoding="utf-8")
        seq = mutate_sequence(rng, ancestors[i % n_families], float(rng.choice([0.0, 0.005, 0.015, 0.03, 0.05, 0.08, 0.15])))
        band = rng.choice(3, p=[0.6, 0.25, 0.15])
        em = (rng.uniform(500, 560), rng.uniform(580, 610), rng.uniform(610, 670))[band]
        qy = float(np.clip(rng.beta(2, 2), 0.0, 1.0))
        lines.append(f"{pid},{seq},{em:.1f},{qy:.3f},{pid}.pdb,predicted")
    meta = out / "metadata.csv"
    meta.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(meta)
