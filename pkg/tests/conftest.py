import math

import numpy as np
import pytest

from cocyclekit._rng import spawn_rng
from cocyclekit.torus_fourier import FourierMap

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
SILVER = math.sqrt(2.0) - 1.0


def random_skew_map(d, n, K, scale, seed, path=0):
    """Random u(n)-valued trig polynomial with modes |k|_1 <= K."""
    rng = spawn_rng(seed, path)
    coeffs = {}
    ks = []

    def rec(prefix):
        if len(prefix) == d:
            ks.append(tuple(prefix))
            return
        for x in range(-K, K + 1):
            if sum(abs(v) for v in prefix) + abs(x) <= K:
                rec(prefix + [x])

    rec([])
    done = set()
    for k in ks:
        if k in done:
            continue
        mk = tuple(-x for x in k)
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        if k == mk:
            a = 0.5 * (a - a.conj().T)
            coeffs[k] = scale * a
        else:
            coeffs[k] = scale * a
            coeffs[mk] = -scale * a.conj().T
        done.add(k)
        done.add(mk)
    return FourierMap(d, n, coeffs, skew=True)


@pytest.fixture
def golden():
    return GOLDEN
