"""Counter-based random streams: one independent stream per trajectory."""
import numpy as np


def trajectory_stream(seed, index):
    """Generator for trajectory ``index`` of a run with master ``seed``.

    Philox keyed by ``(seed, index)``, so any trajectory can be regenerated
    alone and batches can be processed in any order.
    """
    seed, index = int(seed), int(index)
    if not (0 <= seed < 2**64 and 0 <= index < 2**64):
        raise ValueError("seed and trajectory index must be in [0, 2**64)")
    return np.random.Generator(np.random.Philox(key=(seed << 64) | index))


def batches(n, size):
    """``(start, stop)`` pairs covering ``range(n)`` in order."""
    size = max(1, int(size))
    return [(s, min(n, s + size)) for s in range(0, n, size)]
