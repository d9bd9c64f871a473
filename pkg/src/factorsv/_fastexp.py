"""Vectorizable exp for numba loops (LLVM cannot vectorize libm calls here)."""

import math

import numpy as np
from numba import njit

_LOG2E = 1.4426950408889634
_LN2_HI = 6.93147180369123816490e-01
_LN2_LO = 1.90821492927058770002e-10


@njit(fastmath=True, cache=True)
def exp_inplace(x, ibuf):
    """Replace ``x`` by ``exp(max(x, -700))``; relative error below 1e-13.

    ``ibuf`` is an int64 scratch array of the same length.
    """
    n = x.shape[0]
    for i in range(n):
        xi = x[i]
        if xi < -700.0:
            xi = -700.0
        if xi > 700.0:
            xi = 700.0
        k = math.floor(xi * _LOG2E + 0.5)
        r = xi - k * _LN2_HI - k * _LN2_LO
        x[i] = 1.0 + r * (1.0 + r * (0.5 + r * (1.0 / 6 + r * (1.0 / 24 + r * (
            1.0 / 120 + r * (1.0 / 720 + r * (1.0 / 5040 + r * (1.0 / 40320 + r * (
                1.0 / 362880 + r * (1.0 / 3628800 + r / 39916800))))))))))
        ibuf[i] = (np.int64(k) + 1023) << 52
    scale = ibuf.view(np.float64)
    for i in range(n):
        x[i] *= scale[i]
