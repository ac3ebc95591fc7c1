import itertools
import math

import numpy as np
import pytest


def ordered_inclusion(q, M):
    """P(h observed) by walking ordered draws: primary, then extras one at a time.

    Independent of both the sampler and the package's enumeration oracle: each
    ordered sequence of M-1 distinct extras has probability
    (N-M)!/(N-1)! given the primary.
    """
    q = np.asarray(q, dtype=float)
    N = q.size
    per_sequence = math.factorial(N - M) / math.factorial(N - 1)
    incl = np.zeros(N)
    for primary in range(N):
        others = [h for h in range(N) if h != primary]
        for seq in itertools.permutations(others, M - 1):
            w = q[primary] * per_sequence
            incl[primary] += w
            for h in seq:
                incl[h] += w
    return incl


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
