import numpy as np
import pytest

from signedergm import SignedNetwork


def random_network(n, seed, p_pos=0.2, p_neg=0.1):
    """iid signed network; edge probabilities apply per dyad."""
    rng = np.random.default_rng(seed)
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            u = rng.random()
            if u < p_pos:
                edges.append((i, j, 1))
            elif u < p_pos + p_neg:
                edges.append((i, j, -1))
    return SignedNetwork(n, edges)


def planted_network(n, k, seed, pin_pos=0.5, pin_neg=0.05,
                    pout_pos=0.05, pout_neg=0.4):
    """Equal-size planted blocks; returns (net, true_labels)."""
    rng = np.random.default_rng(seed)
    z = np.repeat(np.arange(k), n // k)
    z = np.concatenate([z, np.full(n - z.size, k - 1)])
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            a, b = (pin_pos, pin_neg) if z[i] == z[j] else (pout_pos, pout_neg)
            u = rng.random()
            if u < a:
                edges.append((i, j, 1))
            elif u < a + b:
                edges.append((i, j, -1))
    return SignedNetwork(n, edges), z


def dense_matrix(net):
    return net.signed_matrix()


@pytest.fixture(scope="session", autouse=True)
def _warm_numba():
    """Compile the sampler kernels once so per-test timings stay honest."""
    import signedergm as sg
    sg.sample_within(np.zeros(2), 3, sg.independent_spec(),
                     sg.SamplerConfig(burn_in=8, thin=1, n_samples=1), seed=0)
    yield
