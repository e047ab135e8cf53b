"""Small numba kernels used by more than one module."""
import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def segment_sum(values, starts, stops):
    # sequential left-to-right: bitwise equal to a plain python loop
    out = np.zeros(len(starts))
    for q in range(len(starts)):
        acc = 0.0
        for k in range(starts[q], stops[q]):
            acc += values[k]
        out[q] = acc
    return out
