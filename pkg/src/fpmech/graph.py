"""Chromophore-local typed residue graph."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from . import _kernels
from .chromophore import CHROMOPHORE_CODES, CroAnchor, decompose_regions, environment_residues
from .errors import EmptyLocalNeighbourhood
from .ingest import Residue, Structure
from .signals import REGIONS

LOCALITY_RADIUS = 12.0
EDGE_CUTOFF = 8.0
ALPHA_DECAY = 5.0
BETA_DECAY = 3.0
STERIC_DECAY = 3.0


class ChannelId(str, enum.Enum):
    SPATIAL = "spatial"
    STERIC = "steric"
    HYDROPHOBIC = "hydrophobic"
    HBOND = "hbond"
    ELECTROSTATIC = "electrostatic"
    AROMATIC = "aromatic"

    @property
    def activated(self) -> bool:
        return self in ACTIVATED_CHANNELS


ACTIVATED_CHANNELS = (ChannelId.STERIC, ChannelId.HYDROPHOBIC)


def steric_weight(d):
    return np.exp(-np.asarray(d, dtype=np.float64) / STERIC_DECAY)


def hydrophobic_weight(d):
    return 1.0 / (1.0 + np.asarray(d, dtype=np.float64))


EDGE_WEIGHT = {
    ChannelId.STERIC: steric_weight,
    ChannelId.HYDROPHOBIC: hydrophobic_weight,
}


@dataclass(frozen=True)
class MechanismGraph:
    nodes: tuple[Residue, ...]
    centres: np.ndarray  # (n, 3) atom-mean residue centres
    src: np.ndarray  # edge endpoints, src < dst
    dst: np.ndarray
    distances: np.ndarray  # min-atom distance per edge
    weights: dict  # ChannelId -> (n_edges,)
    alpha: np.ndarray  # (n,)
    beta: np.ndarray  # (n, 3), columns follow REGIONS

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def node_keys(self) -> list[str]:
        return [r.key for r in self.nodes]

    def dense_weights(self, channel) -> np.ndarray:
        n = self.n_nodes
        W = np.zeros((n, n))
        w = self.weights[ChannelId(channel)]
        W[self.src, self.dst] = w
        W[self.dst, self.src] = w
        return W


def residue_distance(u: Residue, v: Residue) -> float:
    """Minimum Euclidean distance over all atom pairs."""
    return float(np.sqrt(cdist(u.coords, v.coords, "sqeuclidean").min()))


def _pack(residues) -> tuple[np.ndarray, np.ndarray]:
    coords = [r.coords for r in residues]
    offsets = np.zeros(len(coords) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([len(c) for c in coords])
    return np.concatenate(coords, axis=0), offsets


def build_graph(
    s: Structure,
    anchor: CroAnchor,
    locality_radius: float = LOCALITY_RADIUS,
    edge_cutoff: float = EDGE_CUTOFF,
    codes=CHROMOPHORE_CODES,
) -> MechanismGraph:
    """Build the chromophore-local graph for the two activated channels.

    Nodes are environment residues whose centre lies strictly within
    ``locality_radius`` of the chromophore centre. Any node pair closer than
    ``edge_cutoff`` (minimum atom distance) is joined in both channels.
    """
    if not anchor.is_decomposed:
        anchor = decompose_regions(anchor)
    env = environment_residues(s, anchor, codes)
    if env:
        centres = np.array([r.centre for r in env])
        d_cro = np.linalg.norm(centres - anchor.cro_centre, axis=1)
        keep = d_cro < locality_radius
    else:
        keep = np.zeros(0, dtype=bool)
    if not keep.any():
        raise EmptyLocalNeighbourhood(f"{s.id}: no residue within {locality_radius} A of the chromophore")
    nodes = tuple(r for r, k in zip(env, keep) if k)
    centres = centres[keep]
    d_cro = d_cro[keep]

    coords, offsets = _pack(nodes)
    dmat = _kernels.min_residue_distances(coords, offsets)
    src, dst = np.nonzero(np.triu(dmat < edge_cutoff, k=1))
    d = dmat[src, dst]
    weights = {ch: EDGE_WEIGHT[ch](d) for ch in ACTIVATED_CHANNELS}

    alpha = np.exp(-d_cro / ALPHA_DECAY)
    region_c = np.array([anchor.region_centres[r] for r in REGIONS])
    beta = np.exp(-cdist(centres, region_c) / BETA_DECAY)
    return MechanismGraph(
        nodes=nodes,
        centres=centres,
        src=src.astype(np.int64),
        dst=dst.astype(np.int64),
        distances=d,
        weights=weights,
        alpha=alpha,
        beta=beta,
    )


def write_edge_list(g: MechanismGraph, path, channel=ChannelId.STERIC) -> None:
    """Debug dump of one channel as ``u_id,v_id,weight`` rows."""
    channel = ChannelId(channel)
    keys = g.node_keys
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["u_id", "v_id", "weight"])
        for i, j, wt in zip(g.src, g.dst, g.weights[channel]):
            w.writerow([keys[i], keys[j], repr(float(wt))])
