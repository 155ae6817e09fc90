from __future__ import annotations

import numpy as np
import pytest

from tracepursuit import Dataset, compute_moments, slice_response


def make_dataset(rng, n, p, dist="normal", y_mode="linear"):
    """Random dataset for structural tests; y depends on the first columns."""
    if dist == "normal":
        x = rng.standard_normal((n, p))
    elif dist == "uniform":
        x = rng.uniform(-1.0, 2.0, size=(n, p))
    else:
        raise ValueError(dist)
    if y_mode == "linear":
        y = x[:, 0] + 0.5 * x[:, min(1, p - 1)] + 0.3 * rng.standard_normal(n)
    elif y_mode == "noise":
        y = rng.standard_normal(n)
    else:
        raise ValueError(y_mode)
    return Dataset.from_arrays(x, y)


def random_case(rng, n_range=(30, 100), p_range=(2, 8), fmax=4, h_choices=(2, 4), dist=None):
    """One random (dataset, slices, working set, candidate) instance."""
    n = int(rng.integers(*n_range, endpoint=True))
    p = int(rng.integers(*p_range, endpoint=True))
    dist = dist or ("normal" if rng.random() < 0.5 else "uniform")
    d = make_dataset(rng, n, p, dist=dist)
    h = int(rng.choice(h_choices))
    s = slice_response(d.y, h)
    ksz = int(rng.integers(0, min(fmax, p - 1), endpoint=True))
    f = tuple(sorted(rng.choice(np.arange(1, p + 1), size=ksz, replace=False).tolist()))
    j = int(rng.choice([c for c in range(1, p + 1) if c not in f]))
    return d, s, f, j


@pytest.fixture
def rng():
    return np.random.default_rng(20240214)


@pytest.fixture
def small_case():
    r = np.random.default_rng(7)
    d = make_dataset(r, 80, 5)
    s = slice_response(d.y, 4)
    m = compute_moments(d, s, (1, 2))
    return d, s, m
