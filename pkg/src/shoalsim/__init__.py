"""DAG-based BFT ordering (Bullshark + Shoal) with a discrete-event simulator."""

from shoalsim.bullshark import BullsharkOrderer, CommitRecord
from shoalsim.dag import LocalDag, Vertex, VertexId
from shoalsim.framework import ShoalConfig, ShoalState
from shoalsim.metrics import compute_metrics
from shoalsim.netsim import SimConfig, mode_config, run
from shoalsim.pacer import PacerKind, PacerPolicy

__all__ = [
    "BullsharkOrderer", "CommitRecord", "LocalDag", "Vertex", "VertexId", "ShoalConfig", "ShoalState",
    "compute_metrics", "SimConfig", "mode_config", "run", "PacerKind", "PacerPolicy",
]
