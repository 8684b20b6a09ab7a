"""Hot-loop rollout kernel with compiled and pure-Python implementations.

The closed-loop simulation advances one step at a time with feedback through
the pose and the behavior history, so it cannot be vectorized; the compiled
Cython kernel exists for exactly this loop.  Both implementations share one
calling convention (see ``_reference.rollout`` for the authoritative
signature and the constants below) and are selected here at import time.
Set NAVOFFSET_PURE_PYTHON=1 to force the fallback;
``benchmarks/bench_kernels.py`` compares the two.
"""

import os

from ._reference import (
    KIND_BEARING,
    KIND_SINE,
    KIND_SQUARE,
    MODE_EXPERT,
    MODE_FEEDFORWARD,
    MODE_WITH_OFFSET,
    N_RUN_PARAMS,
    P_EXTRA_DRAG,
    P_EXTRA_ROUGH,
    P_EXTRA_SLIP,
    P_GOAL_X,
    P_INERTIA,
    P_K_HEADING,
    P_OMEGA_MAX,
    P_SLOW_GAIN,
    P_STOP_AT_GOAL,
    P_V_CAP,
    P_V_MAX,
    P_V_MIN,
)

if os.environ.get("NAVOFFSET_PURE_PYTHON"):
    from ._reference import rollout

    BACKEND = "python"
else:
    try:
        from ._core import rollout

        BACKEND = "compiled"
    except ImportError:  # extension not built; keep the package importable
        from ._reference import rollout

        BACKEND = "python"
