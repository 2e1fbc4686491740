"""Two-step chromophore-local message passing and region readout."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .chromophore import CHROMOPHORE_CODES, CroAnchor, clamp_descriptors, decompose_regions
from .errors import EmptyLocalNeighbourhood
from .graph import EDGE_CUTOFF, LOCALITY_RADIUS, ChannelId, MechanismGraph, build_graph
from .ingest import Structure
from .signals import ACTIVE_CHANNELS, REGIONS, SIGNALS, SeedTable, default_seed_table, family_mapping

logger = logging.getLogger(__name__)

STEPS = 2
DAMPING = 0.1
BETA_THRESHOLD = 0.05
EPSILON = 1e-8


@dataclass(frozen=True)
class FeatureVector:
    protein_id: str
    values: np.ndarray
    schema_hash: str
    maturation_state: str = ""
    flags: tuple[str, ...] = ()

    @property
    def names(self) -> tuple[str, ...]:
        return family_mapping().candidate_columns

    def as_dict(self) -> dict:
        return dict(zip(self.names, self.values.tolist()))


def propagate_channel(g: MechanismGraph, st: SeedTable, ch, steps: int = STEPS) -> np.ndarray:
    """Node states after ``steps`` synchronous updates through channel ``ch``.

    Row ``u`` of the result is node ``u``'s 19-signal state. Each neighbour
    contribution to node ``u`` is scaled by ``u``'s own chromophore
    attenuation ``alpha_u``.
    """
    ch = ChannelId(ch)
    if not ch.activated:
        raise ValueError(f"channel {ch.value!r} is reserved, not activated for propagation")
    h0 = st.matrix([r.aa3 for r in g.nodes])
    return _kernels.propagate(
        np.ascontiguousarray(h0, dtype=np.float64), g.src, g.dst, g.weights[ch], g.alpha, steps, DAMPING
    )


def region_readout(
    states: np.ndarray,
    g: MechanismGraph,
    region: str,
    threshold: float = BETA_THRESHOLD,
    eps: float = EPSILON,
) -> np.ndarray:
    beta = g.beta[:, REGIONS.index(region)]
    support = beta > threshold
    if not support.any():
        return np.zeros(states.shape[1])
    b = beta[support]
    return (b @ states[support]) / (b.sum() + eps)


def featurize(
    s: Structure,
    a: CroAnchor,
    st: SeedTable | None = None,
    *,
    locality_radius: float = LOCALITY_RADIUS,
    edge_cutoff: float = EDGE_CUTOFF,
    beta_threshold: float = BETA_THRESHOLD,
    epsilon: float = EPSILON,
    codes=CHROMOPHORE_CODES,
) -> FeatureVector:
    """Assemble the 121-value candidate vector for one structure.

    Enrichment values come first (channel, then region, then signal), then
    the seven clamp descriptors. A structure with no residue in the local
    neighbourhood gets an all-zero enrichment block and the
    ``empty_local_neighbourhood`` flag.
    """
    st = st or default_seed_table()
    if not a.is_decomposed:
        a = decompose_regions(a)
    schema = family_mapping()
    flags = list(a.flags)
    enrichment = np.zeros(len(ACTIVE_CHANNELS) * len(REGIONS) * len(SIGNALS))
    try:
        g = build_graph(s, a, locality_radius=locality_radius, edge_cutoff=edge_cutoff, codes=codes)
    except EmptyLocalNeighbourhood as exc:
        logger.warning("%s", exc)
        flags.append("empty_local_neighbourhood")
        g = None
    if g is not None:
        blocks = []
        for ch in ACTIVE_CHANNELS:
            states = propagate_channel(g, st, ch)
            for region in REGIONS:
                blocks.append(region_readout(states, g, region, beta_threshold, epsilon))
        enrichment = np.concatenate(blocks)
    clamps = clamp_descriptors(s, a, codes).values
    values = np.concatenate([enrichment, clamps])
    if not np.all(np.isfinite(values)):
        raise FloatingPointError(f"{s.id}: non-finite feature values")
    return FeatureVector(
        protein_id=s.id,
        values=values,
        schema_hash=schema.hash,
        maturation_state=a.maturation_state,
        flags=tuple(flags),
    )
