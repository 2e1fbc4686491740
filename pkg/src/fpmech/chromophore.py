"""Mature-chromophore registration, region decomposition and clamp descriptors."""

from __future__ import annotations

import dataclasses
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import MissingRegionAtoms, NoChromophore
from .ingest import Residue, Structure
from .signals import CLAMP_NAMES, REGIONS

logger = logging.getLogger(__name__)

CHROMOPHORE_CODES = frozenset({"CRO", "CR2", "CR8", "CRQ", "CSY"})

# mature chromophore atom names (PDB chemical component convention)
CRO_REGION_ATOMS = {
    "phenolate": ("CG2", "CD1", "CD2", "CE1", "CE2", "CZ", "OH"),
    "bridge": ("CB2",),
    "imidazolinone": ("C1", "N2", "CA2", "C2", "N3"),
}
TYR_RING_ATOMS = ("CG", "CD1", "CD2", "CE1", "CE2", "CZ", "OH")

CLAMP_CONTACT_RADIUS = 6.0
CLAMP_DECAY = 3.0
MINDIST_SENTINEL = 999.0


@dataclass(frozen=True)
class CroAnchor:
    """Registered chromophore.

    ``cro_residues`` are the residues that make up the chromophore (one
    hetero residue, or the X-Tyr-Gly triad). Region fields are empty until
    :func:`decompose_regions` has run.
    """

    cro_residues: tuple[Residue, ...]
    maturation_state: str
    region_atoms: dict = field(default_factory=dict)
    region_centres: dict = field(default_factory=dict)
    cro_centre: np.ndarray | None = None
    flags: tuple[str, ...] = ()

    @property
    def is_decomposed(self) -> bool:
        return len(self.region_centres) == len(REGIONS)

    @property
    def cro_keys(self) -> frozenset:
        return frozenset(r.key for r in self.cro_residues)


@dataclass(frozen=True)
class ClampDescriptors:
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (len(CLAMP_NAMES),):
            raise ValueError("clamp vector must have 7 entries")

    def as_dict(self) -> dict:
        return dict(zip(CLAMP_NAMES, self.values.tolist()))


def _tyr_ring_centroid(res: Residue) -> np.ndarray:
    pts = [a.position for a in res.atoms if a.atom_name in TYR_RING_ATOMS]
    if not pts:
        pts = [a.position for a in res.atoms if a.atom_name == "CB"] or [a.position for a in res.atoms]
    return np.mean(np.asarray(pts, dtype=np.float64), axis=0)


def find_triads(s: Structure) -> list[tuple[Residue, Residue, Residue]]:
    """All (X, TYR, GLY) runs of consecutive residues within a chain."""
    out = []
    res = s.residues
    for i in range(len(res) - 2):
        a, b, c = res[i], res[i + 1], res[i + 2]
        if not (a.chain_id == b.chain_id == c.chain_id):
            continue
        if b.aa3 == "TYR" and c.aa3 == "GLY":
            out.append((a, b, c))
    return out


def register_chromophore(s: Structure, codes=CHROMOPHORE_CODES) -> CroAnchor:
    """Anchor the mature chromophore.

    A hetero residue carrying a chromophore code wins outright (first one in
    file order). Otherwise the X-Tyr-Gly triad whose Tyr ring centroid lies
    closest to the structure centroid is registered as the chromophore.
    """
    codes = frozenset(c.upper() for c in codes)
    for r in s.residues:
        if r.aa3 in codes:
            return CroAnchor(cro_residues=(r,), maturation_state="native_cro")
    triads = find_triads(s)
    if not triads:
        raise NoChromophore(f"{s.id}: no chromophore hetero residue and no X-Tyr-Gly triad")
    centroid = s.all_coords().mean(axis=0)
    dists = [float(np.linalg.norm(_tyr_ring_centroid(t[1]) - centroid)) for t in triads]
    best = int(np.argmin(dists))  # first minimum on ties
    return CroAnchor(cro_residues=triads[best], maturation_state="registered_triad")


def _triad_region_spec(anchor: CroAnchor):
    x, tyr, gly = anchor.cro_residues
    return {
        "phenolate": [(tyr, n) for n in TYR_RING_ATOMS],
        "bridge": [(tyr, "CA"), (tyr, "CB")],
        "imidazolinone": [(x, "C"), (x, "O"), (gly, "N"), (gly, "CA"), (gly, "C")],
    }


def _native_region_spec(anchor: CroAnchor):
    (cro,) = anchor.cro_residues
    return {region: [(cro, n) for n in names] for region, names in CRO_REGION_ATOMS.items()}


def decompose_regions(anchor: CroAnchor) -> CroAnchor:
    """Split the chromophore into phenolate, bridge and imidazolinone atom sets.

    Missing atoms shrink a region to the atoms present; a region with no
    atoms at all falls back to the centroid of its host residue. Both cases
    are flagged on the returned anchor and warned about.
    """
    spec = _native_region_spec(anchor) if anchor.maturation_state == "native_cro" else _triad_region_spec(anchor)
    region_atoms = {}
    centres = {}
    flags = list(anchor.flags)
    for region in REGIONS:
        wanted = spec[region]
        pts = []
        for res, name in wanted:
            a = res.atom(name)
            if a is not None:
                pts.append(a.position)
        if len(pts) < len(wanted):
            missing = len(wanted) - len(pts)
            if not pts:
                # triad imidazolinone falls back to the Gly, everything else to its first host
                host = wanted[-1][0] if region == "imidazolinone" else wanted[0][0]
                pts = [a.position for a in host.atoms]
                flags.append(f"region_fallback:{region}")
            else:
                flags.append(f"region_partial:{region}")
            warnings.warn(MissingRegionAtoms(f"{region}: {missing} required atom(s) missing"), stacklevel=2)
        arr = np.asarray(pts, dtype=np.float64)
        region_atoms[region] = arr
        centres[region] = arr.mean(axis=0)
    all_pts = np.concatenate([region_atoms[r] for r in REGIONS], axis=0)
    return dataclasses.replace(
        anchor,
        region_atoms=region_atoms,
        region_centres=centres,
        cro_centre=all_pts.mean(axis=0),
        flags=tuple(flags),
    )


def anchor_structure(s: Structure, codes=CHROMOPHORE_CODES) -> CroAnchor:
    return decompose_regions(register_chromophore(s, codes))


def is_chromophore_residue(res: Residue, anchor: CroAnchor, codes=CHROMOPHORE_CODES) -> bool:
    return res.key in anchor.cro_keys or res.aa3 in codes


def environment_residues(s: Structure, anchor: CroAnchor, codes=CHROMOPHORE_CODES) -> list[Residue]:
    """Non-chromophore residues sorted by (chain, number, insertion code).

    Sorting makes every downstream sum independent of file order.
    """
    env = [r for r in s.residues if not is_chromophore_residue(r, anchor, codes)]
    return sorted(env, key=lambda r: (r.chain_id, r.seq_index, r.icode))


def clamp_descriptors(s: Structure, anchor: CroAnchor, codes=CHROMOPHORE_CODES) -> ClampDescriptors:
    """Seven local clamp descriptors around the three chromophore regions.

    Per region: an exponential contact sum over residue centres within 6 A
    (decay 3 A) and the minimum atom distance from any environment residue
    to the region atoms. The last entry is phenolate minus imidazolinone
    contact.
    """
    if not anchor.is_decomposed:
        anchor = decompose_regions(anchor)
    env = environment_residues(s, anchor, codes)
    contact = np.zeros(len(REGIONS))
    mindist = np.full(len(REGIONS), MINDIST_SENTINEL)
    if env:
        centres = np.array([r.centre for r in env])
        atoms = np.concatenate([r.coords for r in env], axis=0)
        for k, region in enumerate(REGIONS):
            d = np.linalg.norm(centres - anchor.region_centres[region], axis=1)
            near = d < CLAMP_CONTACT_RADIUS
            contact[k] = float(np.exp(-d[near] / CLAMP_DECAY).sum())
            mindist[k] = float(cdist(atoms, anchor.region_atoms[region]).min())
    values = np.concatenate([contact, mindist, [contact[0] - contact[2]]])
    return ClampDescriptors(values)
