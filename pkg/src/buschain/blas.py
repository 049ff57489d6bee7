"""Process-wide BLAS thread policy.

The solvers alternate medium-size eigendecompositions with small matrix
products; multi-threaded OpenBLAS spends most of its time parking and
waking workers in that pattern (an order-of-magnitude slowdown measured on
the 243-dim chain).  Parallelism in this package lives at the task level
(sweep points, calibrations, channels), so BLAS is pinned to one thread the
first time a solver runs.
"""
from __future__ import annotations

_LIMITED = False


def limit_blas_threads() -> None:
    global _LIMITED
    if _LIMITED:
        return
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(limits=1, user_api="blas")
    except ImportError:
        pass
    _LIMITED = True
