"""Shared fixtures and the seed manifest for all randomized tests."""

import numpy as np
import pytest

from junctionflow import Box, LimitedCoupling, make_quadratic_flux, make_skewed_flux

# Every randomized test draws from one of these named streams so reruns are
# reproducible; change a seed here and nowhere else.
SEEDS = {
    "fluxes": 101,
    "germs": 202,
    "pairs": 303,
    "hj": 404,
    "scl": 505,
    "acceptance": 606,
}


def rng(name: str) -> np.random.Generator:
    return np.random.default_rng(SEEDS[name])


@pytest.fixture
def quad_flux():
    return make_quadratic_flux(-1.0, 1.0, 1.0)


@pytest.fixture
def quad_box(quad_flux):
    return Box(quad_flux, quad_flux)


@pytest.fixture
def skewed_box(quad_flux):
    return Box(quad_flux, make_skewed_flux(-1.1, 1.2, 0.9, 0.15))


@pytest.fixture
def limited_half(quad_box):
    return LimitedCoupling(-0.5, quad_box)
