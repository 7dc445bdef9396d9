"""Global tolerances and the numba switch."""
import os

TOL_NORM = 1e-8
TOL_PSD = 1e-9
TOL_ZERO = 1e-12
TOL_RANK = 1e-10


def _numba_requested():
    flag = os.environ.get("HYBRIDSIM_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "no", "off")


def numba_available():
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


USE_NUMBA = _numba_requested() and numba_available()


def max_workers():
    """Worker cap from HYBRIDSIM_THREADS (default 1)."""
    try:
        n = int(os.environ.get("HYBRIDSIM_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, n)
