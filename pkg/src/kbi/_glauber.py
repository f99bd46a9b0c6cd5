"""Compiled single-spin Glauber updates.

Randomness inside these kernels comes from numba's own generator, seeded
at entry from an integer the caller draws off its ``np.random.Generator``;
a call is therefore a pure function of its arguments.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _flip_prob(x):
    # 1 / (1 + exp(x)) without overflow
    if x > 0.0:
        e = np.exp(-x)
        return e / (1.0 + e)
    return 1.0 / (1.0 + np.exp(x))


@njit(cache=True)
def _sweep(spins, order, indptr, indices, field, beta, J):
    n = order.shape[0]
    for a in range(n - 1, 0, -1):
        b = np.random.randint(0, a + 1)
        tmp = order[a]
        order[a] = order[b]
        order[b] = tmp
    for a in range(n):
        i = order[a]
        acc = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            acc += spins[indices[p]]
        dE = 2.0 * spins[i] * (field[i] + J * acc)
        if np.random.random() < _flip_prob(beta * dE):
            spins[i] = -spins[i]


@njit(cache=True)
def glauber_sweeps(spins, free, indptr, indices, field, beta, J, n_sweeps, seed):
    """Run ``n_sweeps`` random-order sweeps over the spins listed in ``free``
    (pinned spins are left out of ``free`` but still act on neighbours)."""
    np.random.seed(seed)
    order = free.copy()
    for _ in range(n_sweeps):
        _sweep(spins, order, indptr, indices, field, beta, J)


@njit(cache=True)
def glauber_chain_codes(spins, indptr, indices, field, beta, J, burn, n_samples, thin, seed):
    """Burn in, then record the state every ``thin`` sweeps as an integer
    code whose bit i is set when spin i is +1 (N <= 62)."""
    np.random.seed(seed)
    n = spins.shape[0]
    order = np.arange(n)
    for _ in range(burn):
        _sweep(spins, order, indptr, indices, field, beta, J)
    codes = np.empty(n_samples, np.int64)
    for s in range(n_samples):
        for _ in range(thin):
            _sweep(spins, order, indptr, indices, field, beta, J)
        c = 0
        for i in range(n):
            if spins[i] > 0:
                c |= 1 << i
        codes[s] = c
    return codes
