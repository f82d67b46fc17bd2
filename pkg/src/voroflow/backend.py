"""Numba / numpy backend selection.

Hot kernels are compiled with numba by default. Setting the environment
variable ``VOROFLOW_NUMBA=0`` before import selects the pure-numpy fallback
implementations instead (same results, slower). ``benchmarks/benchmark_kernels.py``
compares the two paths.
"""

import os

USE_NUMBA = os.environ.get("VOROFLOW_NUMBA", "1") not in ("0", "false", "False")

if USE_NUMBA:
    from numba import njit, prange, set_num_threads, get_num_threads
else:  # pragma: no cover - exercised via VOROFLOW_NUMBA=0 runs
    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap

    prange = range

    def set_num_threads(n):
        pass

    def get_num_threads():
        return 1


def configure_threads(threads: int) -> None:
    """Set the numba thread count; 0 means 'leave at default (all cores)'."""
    if USE_NUMBA and threads > 0:
        set_num_threads(threads)
