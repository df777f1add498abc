import numpy as np
import pytest

from smpskit import KrausFamily, StochasticMPS
from smpskit.rand import random_density, random_kraus_family


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_smps(rng, D=3, d=2, N=8, rank=1, site_dependent=False):
    alphabet = tuple(range(d))
    if site_dependent:
        sites = tuple(random_kraus_family(D, alphabet, rng, rank) for _ in range(N))
    else:
        sites = (random_kraus_family(D, alphabet, rng, rank),) * N
    return StochasticMPS(sites, random_density(D, rng), np.eye(D))


def iid_family(probs):
    return KrausFamily(tuple(range(len(probs))), tuple(np.sqrt(p) * np.eye(1) for p in probs))
