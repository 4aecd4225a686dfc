"""Synthetic fixtures shared by the statistical tests."""

import numpy as np

from gasc.corpus import Document


def block_psi(T, K, V, block=16, weight=10.0):
    """Senses with disjoint high-weight word blocks on a flat floor, constant in time."""
    p = np.ones((K, V))
    for k in range(K):
        p[k, k * block:(k + 1) * block] = weight
    p /= p.sum(axis=1, keepdims=True)
    return np.broadcast_to(p, (T, K, V)).copy()


def rising_phi(T, planted):
    """Genre 0: sense 0 rises 0.1 -> 0.7 (planted) or sits at 0.4 (stationary).

    Genre 1 is stationary at (0.2, 0.4, 0.4) in both cases.
    """
    phi = np.empty((T, 2, 3))
    rise = np.linspace(0.1, 0.7, T)
    for t in range(T):
        phi[t, 0] = [rise[t], (1 - rise[t]) / 2, (1 - rise[t]) / 2] if planted else [0.4, 0.3, 0.3]
        phi[t, 1] = [0.2, 0.4, 0.4]
    return phi


def graded_tr_corpus(seed, n_targets=11, per_bin=100, pool=20, window=5):
    """Targets x0..x{n-1}; target i swaps a fraction i/(n-1) of its bin-1 contexts.

    Bin 0 contexts come from the target's own pool A_i. In bin 1 each context
    word comes from a disjoint pool B_i with probability i/(n-1). x0 thus has
    identical context distributions in both bins and the last target has
    disjoint ones.
    """
    rng = np.random.default_rng(seed)
    docs = []
    for i in range(n_targets):
        c = i / (n_targets - 1)
        A = [f"a{i}_{j}" for j in range(pool)]
        B = [f"b{i}_{j}" for j in range(pool)]
        for t in (0, 1):
            for n in range(per_bin):
                ctx = [(B if (t == 1 and rng.random() < c) else A)[rng.integers(pool)]
                       for _ in range(2 * window)]
                docs.append(Document(f"x{i}-{t}-{n}", t, "prose",
                                     tuple(ctx[:window] + [f"x{i}"] + ctx[window:])))
    order = rng.permutation(len(docs))
    return [docs[k] for k in order]
