"""Hot numerical kernels with a compiled core and a reference fallback.

Four loops dominate the simulator's runtime: the Monte-Carlo second-moment
and contamination-diagonal accumulators, the ML grid-energy scan, and the
swap-matching Markov chain.  A Cython extension implements them; the pure
NumPy/Python module `_reference` implements the identical arithmetic and is
selected automatically when the extension is missing or when the
CFSYNC_PURE_PYTHON environment variable is set to a nonempty value.

Both backends consume pre-drawn random streams, so results are
reproducible and comparable across backends.
"""

import os

from . import _reference

if os.environ.get("CFSYNC_PURE_PYTHON"):
    _impl = _reference
    BACKEND = "reference"
else:
    try:
        from . import _speedups as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = _reference
        BACKEND = "reference"

mc_delay_outer_moment = _impl.mc_delay_outer_moment
projection_energy_grid = _impl.projection_energy_grid
swap_chain = _impl.swap_chain
# the grouped-moment formulation in the reference beats the per-draw compiled
# loop for this one (see benchmarks/bench_kernels.py), so it is used always
mc_contamination_diag = _reference.mc_contamination_diag


def backend_name() -> str:
    return BACKEND
