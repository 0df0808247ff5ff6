"""Flux algebra: envelopes, Godunov flux, gradients, inverses, conjugates."""

import numpy as np
import pytest

from junctionflow import (Box, envelope, entropy_flux, godunov_flux,
                          godunov_gradient, inverse_branch, legendre,
                          make_quadratic_flux, make_skewed_flux)
from junctionflow.fluxes import godunov_flux_minmax, polish_inverse

from conftest import rng

SQ2 = 1.0 / np.sqrt(2.0)

FAMILIES = [
    make_quadratic_flux(-1.0, 1.0, 1.0),
    make_quadratic_flux(0.0, 2.0, 0.5),
    make_skewed_flux(-1.0, 1.3, 0.8, 0.2),
    make_skewed_flux(-1.1, 1.2, 0.9, 0.15),
]


def test_quadratic_family_metadata():
    H = make_quadratic_flux(-1.0, 1.0, 1.0)
    assert H.b == 0.0
    assert H.min_value == -1.0
    assert H(0.5) == -0.75
    assert H(-1.0) == 0.0 and H(1.0) == 0.0
    H2 = make_quadratic_flux(0.0, 2.0, 0.5)
    assert H2.b == 1.0
    assert H2.delta == 1.0
    assert H2(1.0) == -0.5


def test_quadratic_rejects_bad_arguments():
    with pytest.raises(ValueError):
        make_quadratic_flux(1.0, -1.0, 1.0)
    with pytest.raises(ValueError):
        make_quadratic_flux(-1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        make_skewed_flux(-1.0, 1.0, 1.0, 2.0)


@pytest.mark.parametrize("H", FAMILIES, ids=lambda H: H.name)
def test_flux_shape_invariants(H):
    r = rng("fluxes")
    p = np.sort(r.uniform(H.a, H.c, 400))
    assert abs(H(H.a)) < 1e-14 and abs(H(H.c)) < 1e-14
    assert H.min_value < 0
    assert H.a < H.b < H.c
    vals = H(p)
    left = p <= H.b
    assert np.all(np.diff(vals[left]) <= 1e-12)
    assert np.all(np.diff(vals[~left]) >= -1e-12)
    # strong convexity of second differences
    h = 1e-4 * (H.c - H.a)
    inner = p[(p > H.a + h) & (p < H.c - h)]
    second = (H(inner + h) - 2 * H(inner) + H(inner - h)) / h ** 2
    assert np.all(second >= H.delta * (1 - 1e-6))
    # Lipschitz bound on sampled pairs
    q = r.uniform(H.a, H.c, 400)
    assert np.all(np.abs(H(p) - H(q)) <= H.lipschitz * np.abs(p - q) + 1e-12)


def test_envelope_examples(quad_flux):
    assert envelope(quad_flux, -1.0, "plus") == -1.0
    assert envelope(quad_flux, 0.5, "plus") == -0.75
    assert envelope(quad_flux, 0.5, "minus") == -1.0
    with pytest.raises(ValueError):
        envelope(quad_flux, 0.5, "sideways")


def test_godunov_examples(quad_flux):
    assert godunov_flux(quad_flux, 0.5, 0.5) == -0.75
    assert godunov_flux(quad_flux, -1.0, 1.0) == -1.0
    assert godunov_flux(quad_flux, 1.0, -1.0) == 0.0


@pytest.mark.parametrize("H", FAMILIES, ids=lambda H: H.name)
def test_godunov_consistency_and_envelope_identity(H):
    r = rng("fluxes")
    p = r.uniform(H.a, H.c, 10_000)
    q = r.uniform(H.a, H.c, 10_000)
    assert np.array_equal(godunov_flux(H, p, p), H(p))
    # two independent evaluation routes agree exactly
    assert np.max(np.abs(godunov_flux(H, p, q)
                         - godunov_flux_minmax(H, p, q))) <= 1e-14


def test_godunov_monotone(quad_flux):
    r = rng("fluxes")
    p = r.uniform(-1, 1, (10_000, 2))
    lo, hi = p.min(axis=1), p.max(axis=1)
    q = r.uniform(-1, 1, 10_000)
    assert np.all(godunov_flux(quad_flux, hi, q) >= godunov_flux(quad_flux, lo, q))
    assert np.all(godunov_flux(quad_flux, q, hi) <= godunov_flux(quad_flux, q, lo))


def test_gradient_examples(quad_flux):
    g = godunov_gradient(quad_flux, 0.5, 0.8)
    assert (g.dp, g.dq) == (1.0, 0.0) and not g.on_kink
    g = godunov_gradient(quad_flux, -0.5, 0.5)
    assert (g.dp, g.dq) == (0.0, 0.0)
    # kink: rising envelope meets falling envelope above the minimum
    g = godunov_gradient(quad_flux, 0.5, -0.5)
    assert g.on_kink


@pytest.mark.parametrize("H", FAMILIES, ids=lambda H: H.name)
def test_gradient_matches_finite_differences(H):
    r = rng("fluxes")
    h = 1e-6
    kept = 0
    while kept < 1000:
        p = r.uniform(H.a + 2 * h, H.c - 2 * h, 2000)
        q = r.uniform(H.a + 2 * h, H.c - 2 * h, 2000)
        g = godunov_gradient(H, p, q)
        # drop kink neighbourhoods where the flux is not differentiable
        near = np.abs(H.env_plus(p) - H.env_minus(q)) < 10 * h * H.lipschitz
        ok = ~(near & (H.env_plus(p) > H.min_value + 1e-6))
        fd_p = (godunov_flux(H, p + h, q) - godunov_flux(H, p - h, q)) / (2 * h)
        fd_q = (godunov_flux(H, p, q + h) - godunov_flux(H, p, q - h)) / (2 * h)
        good = ok & (np.abs(fd_p - g.dp) <= 1e-5) & (np.abs(fd_q - g.dq) <= 1e-5)
        # every retained point must match; points near the minimizer have
        # O(h) curvature error in the one-sided indicator, tolerated above
        assert np.all(good[ok])
        kept += int(np.sum(ok))


def test_entropy_flux_examples(quad_flux):
    assert entropy_flux(quad_flux, 0.3, 0.3) == 0.0
    assert entropy_flux(quad_flux, 1.0, -1.0) == 0.0
    assert entropy_flux(quad_flux, 0.5, 0.0) == pytest.approx(0.25, abs=1e-15)


def test_inverse_branch_examples(quad_flux):
    assert inverse_branch(quad_flux, -1.0, "decreasing") == 0.0
    assert inverse_branch(quad_flux, -1.0, "increasing") == 0.0
    assert inverse_branch(quad_flux, 0.0, "increasing") == pytest.approx(1.0, abs=1e-12)
    assert inverse_branch(quad_flux, -0.5, "increasing") == pytest.approx(SQ2, abs=1e-10)
    with pytest.raises(ValueError):
        inverse_branch(quad_flux, 0.5, "increasing")
    with pytest.raises(ValueError):
        inverse_branch(quad_flux, -2.0, "decreasing")


@pytest.mark.parametrize("H", FAMILIES, ids=lambda H: H.name)
def test_inverse_branch_roundtrip(H):
    r = rng("fluxes")
    lam = r.uniform(H.min_value, 0.0, 1000)
    for branch in ("decreasing", "increasing"):
        p = inverse_branch(H, lam, branch)
        assert np.max(np.abs(H(p) - lam)) <= 1e-12


def test_polish_inverse_reaches_rounding_level(quad_flux):
    lam = -0.437
    p = polish_inverse(quad_flux, inverse_branch(quad_flux, lam, "increasing"), lam)
    assert abs(quad_flux(p) - lam) <= 5e-16


def test_legendre_quadratic_closed_form(quad_flux):
    assert legendre(quad_flux, 0.0) == 1.0
    assert legendre(quad_flux, 2.0) == 2.0
    assert legendre(quad_flux, -2.0) == 2.0
    v = rng("fluxes").uniform(-3, 3, 50)
    assert np.max(np.abs(legendre(quad_flux, v) - (v ** 2 / 4 + 1))) <= 1e-14


@pytest.mark.parametrize("H", FAMILIES, ids=lambda H: H.name)
def test_legendre_biconjugation(H):
    # inf_q (L(q) + q p) recovers -H(p) on the core interval
    q = np.linspace(-4 * H.lipschitz, 4 * H.lipschitz, 4001)
    L = legendre(H, q)
    for p in np.linspace(H.a, H.c, 9):
        val = np.min(L + q * p)
        # refine around the minimizer to reach the duality tolerance
        i = int(np.argmin(L + q * p))
        qq = np.linspace(q[max(0, i - 2)], q[min(len(q) - 1, i + 2)], 2001)
        val = min(val, float(np.min(legendre(H, qq) + qq * p)))
        assert val == pytest.approx(-H(p), abs=1e-8)


def test_extension_is_convex_and_superlinear():
    H = make_skewed_flux(-1.0, 1.3, 0.8, 0.2)
    p = np.linspace(-8.0, 8.0, 1001)
    h = 1e-3
    second = (H(p + h) - 2 * H(p) + H(p - h)) / h ** 2
    assert np.all(second >= H.delta * (1 - 1e-4))
    # growth beyond linear on both sides
    assert H(16.0) / 16.0 > H(8.0) / 8.0 > 0.0
    assert H(-16.0) / 16.0 > H(-8.0) / 8.0 > 0.0


def test_box_metadata(quad_flux):
    from junctionflow import ConvexFlux

    box = Box(quad_flux, make_quadratic_flux(-1.0, 1.0, 0.5))
    assert box.H0 == -0.5
    assert box.M == 1.0
    lifted = ConvexFlux(a=-1.0, c=1.0, b=0.0, delta=2.0, lipschitz=2.0,
                        eval_fn=lambda p: p * p + 1.0, deriv_fn=lambda p: 2 * p)
    with pytest.raises(ValueError):
        # a flux with nonnegative minimum cannot form a box
        Box(quad_flux, lifted)
