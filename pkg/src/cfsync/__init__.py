"""cfsync: pilot-burst CFO/TO synchronization for cell-free massive MIMO.

Modules
-------
waveform    discrete observation model and burst synthesis
crb         contamination statistics, Fisher matrix, TO/CFO bounds
mle         joint grid-search estimator with LS channel elimination
geometry    AP placement, three-slope path loss, channel sampling
clustering  adaptive cluster classification and master selection
pilots      conflict graph, Dsatur coloring, swap-matching optimizer
harness     experiment runner, CSV/JSON outputs, CLI
kernels     compiled hot loops with a pure-Python reference fallback
"""

from .kernels import backend_name
from .types import (AccessPoint, ClusterPlan, ConflictMatrix,
                    DegenerateGeometryError, DistanceBound, FisherReport,
                    InfeasibleError, IntegerAlignmentError, InterfererStat,
                    LinkChannel, ModelMatrices, ObservationWindow,
                    PilotAssignment, PilotSequence, Scenario, SyncOffset,
                    ThetaVector)

__version__ = "0.1.0"
