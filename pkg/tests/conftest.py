"""Shared fixtures and helpers for the test suite."""

import numpy as np
import pytest

from sgflm.lattice import build_lattice
from sgflm.model import Dataset, Theta


def random_dataset(rng, rows=4, cols=5, J=4, wrap=True):
    """A random small replicate with standard-normal scores."""
    lattice = build_lattice(rows, cols, wrap, "four_nearest")
    n = lattice.n_sites
    scores = rng.normal(size=(n, J))
    responses = (rng.random(n) < 0.5).astype(float)
    return Dataset(lattice, scores, responses)


def random_theta(rng, p, eta_scale=1.0):
    return Theta(
        eta=float(rng.uniform(-eta_scale, eta_scale)),
        alpha=float(rng.normal(scale=0.5)),
        beta=rng.normal(scale=0.7, size=p),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)
