"""CDS-Hotstuff cost model, executable protocol simulation and safety checker."""
from .costs import (
    PHASES,
    CostLedger,
    consensus_compute_energy,
    consensus_total_energy,
    consensus_tx_energy,
    pbft_baseline_energy,
    phase_cycles,
)
from .hotstuff import ConsensusRun, FaultPlan, LatencyModel, SimMessage, run_consensus
from .checker import check_safety

__all__ = [
    "PHASES", "CostLedger", "consensus_compute_energy", "consensus_total_energy", "consensus_tx_energy",
    "pbft_baseline_energy", "phase_cycles", "ConsensusRun", "FaultPlan", "LatencyModel", "SimMessage",
    "run_consensus", "check_safety",
]
