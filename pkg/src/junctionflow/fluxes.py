"""Convex flux objects and the pointwise flux algebra built on them.

A flux here is a strongly convex function H on an interval [a, c] with
H(a) = H(c) = 0 and a negative interior minimum at b.  Everything downstream
(monotone envelopes, Godunov flux, entropy flux, branch inverses, convex
conjugate) is expressed through this object.  All operations accept scalars
or numpy arrays and are pure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

# Absolute tolerance in the argument for branch-inverse bisections.  Germ
# membership downstream works at 1e-10 in flux values, so the inverses need
# headroom below that.
BISECTION_TOL = 1e-13

# Detection tolerance for the kink set of the Godunov flux.
KINK_TOL = 1e-12


def _match(value, *refs):
    """Return a python float when every input was scalar, else the array."""
    if all(np.ndim(r) == 0 for r in refs):
        return float(value)
    return value


@dataclass(frozen=True)
class ConvexFlux:
    """Strongly convex flux on [a, c] with H(a) = H(c) = 0 and minimum at b.

    ``delta`` is a lower bound for H'' on [a, c] and ``lipschitz`` bounds
    |H'| there.  Outside [a, c] the flux is extended from the nearer endpoint
    e as H(e) + H'(e)(p - e) + (delta/2)(p - e)^2, which preserves strong
    convexity and superlinearity; schemes run under their step-size gates
    never leave [a, c], so the extension only feeds the variational oracle.
    """

    a: float
    c: float
    b: float
    delta: float
    lipschitz: float
    eval_fn: Callable
    deriv_fn: Callable
    kappa: float | None = None  # set for the pure quadratic family
    name: str = "flux"

    def __post_init__(self):
        if not (self.a < self.b < self.c):
            raise ValueError(f"need a < b < c, got {self.a}, {self.b}, {self.c}")
        if self.delta <= 0 or self.lipschitz <= 0:
            raise ValueError("delta and lipschitz must be positive")

    @property
    def min_value(self) -> float:
        return float(self.eval_fn(self.b))

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        core = self.eval_fn(np.clip(p, self.a, self.c))
        da = self.deriv_fn(self.a)
        dc = self.deriv_fn(self.c)
        below = da * (p - self.a) + 0.5 * self.delta * (p - self.a) ** 2
        above = dc * (p - self.c) + 0.5 * self.delta * (p - self.c) ** 2
        out = np.where(p < self.a, below, np.where(p > self.c, above, core))
        return _match(out, p)

    def deriv(self, p):
        p = np.asarray(p, dtype=float)
        core = self.deriv_fn(np.clip(p, self.a, self.c))
        below = self.deriv_fn(self.a) + self.delta * (p - self.a)
        above = self.deriv_fn(self.c) + self.delta * (p - self.c)
        out = np.where(p < self.a, below, np.where(p > self.c, above, core))
        return _match(out, p)

    def env_plus(self, p):
        """Nondecreasing envelope: H(b) left of b, H(p) right of it."""
        p = np.asarray(p, dtype=float)
        out = np.where(p <= self.b, self.min_value, self(p))
        return _match(out, p)

    def env_minus(self, p):
        """Nonincreasing envelope: H(p) left of b, H(b) right of it."""
        p = np.asarray(p, dtype=float)
        out = np.where(p <= self.b, self(p), self.min_value)
        return _match(out, p)

    def inverse(self, lam, branch: str, tol: float = BISECTION_TOL):
        """Unique p on the requested monotone branch with H(p) = lam.

        ``branch`` is "decreasing" (p in [a, b]) or "increasing" (p in [b, c]).
        lam must lie in [H(b), 0]; values within 1e-12 outside are clamped.
        """
        return inverse_branch(self, lam, branch, tol=tol)

    def deriv_inverse(self, xi):
        """Inverse of H' on the extended line (H' is strictly increasing)."""
        xi = np.asarray(xi, dtype=float)
        da, dc = self.deriv(self.a), self.deriv(self.c)
        lo = np.where(xi < da, self.a + (xi - da) / self.delta, self.a)
        hi = np.where(xi > dc, self.c + (xi - dc) / self.delta, self.c)
        lo, hi = np.broadcast_arrays(lo, hi)
        lo, hi = lo.copy(), hi.copy()
        for _ in range(90):
            mid = 0.5 * (lo + hi)
            go_right = self.deriv(mid) < xi
            lo = np.where(go_right, mid, lo)
            hi = np.where(go_right, hi, mid)
        out = 0.5 * (lo + hi)
        return _match(out, xi)


def envelope(H: ConvexFlux, p, side: str):
    """Monotone envelope of H at p; ``side`` is "plus" or "minus"."""
    if side == "plus":
        return H.env_plus(p)
    if side == "minus":
        return H.env_minus(p)
    raise ValueError(f"side must be 'plus' or 'minus', got {side!r}")


def godunov_flux(H: ConvexFlux, p_minus, p_plus):
    """Two-point Godunov flux, via the envelope form max(H+(p1), H-(p2))."""
    return _match(
        np.maximum(H.env_plus(np.asarray(p_minus, dtype=float)),
                   H.env_minus(np.asarray(p_plus, dtype=float))),
        p_minus, p_plus,
    )


def godunov_flux_minmax(H: ConvexFlux, p_minus, p_plus):
    """Godunov flux from the min/max definition (independent of envelopes).

    min of H over [p1, p2] when p1 <= p2, max over [p2, p1] otherwise,
    resolved case by case using only the minimizer location.  Kept as a
    second route so the envelope identity is a real cross-check.
    """
    p1 = np.asarray(p_minus, dtype=float)
    p2 = np.asarray(p_plus, dtype=float)
    h1, h2 = H(p1), H(p2)
    min_between = np.where((p1 <= H.b) & (H.b <= p2), H.min_value,
                           np.where(p1 > H.b, h1, h2))
    max_between = np.maximum(h1, h2)
    out = np.where(p1 <= p2, min_between, max_between)
    return _match(out, p_minus, p_plus)


class GodunovGradient(NamedTuple):
    dp: float
    dq: float
    on_kink: bool


def godunov_gradient(H: ConvexFlux, p, q) -> GodunovGradient:
    """Gradient of the Godunov flux away from its kink set.

    The kink set is {H+(p) = H-(q) > min H}; on it the returned pair is a
    one-sided subgradient choice and ``on_kink`` is set so the caller can
    decide what to do with it.
    """
    pa = np.asarray(p, dtype=float)
    qa = np.asarray(q, dtype=float)
    dp = np.where((H.env_minus(qa) < H(pa)) & (H.deriv(pa) > 0.0), H.deriv(pa), 0.0)
    dq = np.where((H(qa) > H.env_plus(pa)) & (H.deriv(qa) < 0.0), H.deriv(qa), 0.0)
    ep, em = H.env_plus(pa), H.env_minus(qa)
    kink = (np.abs(ep - em) <= KINK_TOL) & (ep > H.min_value + KINK_TOL)
    if np.ndim(p) == 0 and np.ndim(q) == 0:
        return GodunovGradient(float(dp), float(dq), bool(kink))
    return GodunovGradient(dp, dq, kink)


def entropy_flux(H: ConvexFlux, q, k):
    """Kruzhkov entropy flux sign(q - k) (H(q) - H(k)); sign(0) = 0."""
    qa = np.asarray(q, dtype=float)
    ka = np.asarray(k, dtype=float)
    return _match(np.sign(qa - ka) * (H(qa) - H(ka)), q, k)


def inverse_branch(H: ConvexFlux, lam, branch: str, tol: float = BISECTION_TOL):
    """Bisect H = lam on one monotone branch of H.

    Vectorized over lam.  lam outside [H(b), 0] by more than 1e-12 is
    rejected; tiny excursions (roundoff from upstream root-finding) are
    clamped onto the admissible range.
    """
    lam = np.asarray(lam, dtype=float)
    hb = H.min_value
    if np.any(lam < hb - 1e-12) or np.any(lam > 1e-12):
        raise ValueError(f"flux level {lam} outside [{hb}, 0]")
    lam = np.clip(lam, hb, 0.0)
    if lam.ndim == 0:
        return _inverse_branch_scalar(H, float(lam), branch, tol)
    if branch == "decreasing":
        lo = np.full(lam.shape, H.a)
        hi = np.full(lam.shape, H.b)
        # H decreasing on [a, b]: move right while H(mid) > lam
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            go_right = H(mid) > lam
            lo = np.where(go_right, mid, lo)
            hi = np.where(go_right, hi, mid)
            if np.max(hi - lo) <= tol:
                break
    elif branch == "increasing":
        lo = np.full(lam.shape, H.b)
        hi = np.full(lam.shape, H.c)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            go_right = H(mid) < lam
            lo = np.where(go_right, mid, lo)
            hi = np.where(go_right, hi, mid)
            if np.max(hi - lo) <= tol:
                break
    else:
        raise ValueError(f"branch must be 'decreasing' or 'increasing', got {branch!r}")
    # at the minimum level the root is the minimizer itself
    out = np.where(lam == hb, H.b, 0.5 * (lo + hi))
    return _match(out, lam)


def _inverse_branch_scalar(H: ConvexFlux, lam: float, branch: str, tol: float) -> float:
    """Float bisection; the bracket never leaves [a, c] so the core applies."""
    if lam == H.min_value:
        return H.b
    f = H.eval_fn
    if branch == "decreasing":
        lo, hi = H.a, H.b
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if f(mid) > lam:
                lo = mid
            else:
                hi = mid
    elif branch == "increasing":
        lo, hi = H.b, H.c
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if f(mid) < lam:
                lo = mid
            else:
                hi = mid
    else:
        raise ValueError(f"branch must be 'decreasing' or 'increasing', got {branch!r}")
    return 0.5 * (lo + hi)


def polish_inverse(H: ConvexFlux, p0, lam: float, *, ulps: int = 6):
    """Nudge a root of H = lam by whole ulps to minimize |H(p) - lam|.

    Fixed-point tests of the junction schemes need flux-value matches at the
    rounding level, which plain bisection does not deliver.
    """
    p = float(p0)
    slope = H.deriv(p)
    if slope != 0.0:
        for _ in range(3):
            p = p - (H(p) - lam) / H.deriv(p)
    best, best_err = p, abs(H(p) - lam)
    for direction in (np.inf, -np.inf):
        q = p
        for _ in range(ulps):
            q = np.nextafter(q, direction)
            err = abs(H(q) - lam)
            if err < best_err:
                best, best_err = float(q), err
    return best


def legendre(H: ConvexFlux, velocity):
    """Convex conjugate L(q) = sup_p (-q p - H(p)) over the extended line.

    Closed form for the quadratic family; golden-section search to 1e-10 in
    the argument otherwise (the objective is strictly concave).
    """
    v = np.asarray(velocity, dtype=float)
    if H.kappa is not None:
        p_star = 0.5 * ((H.a + H.c) - v / H.kappa)
        return _match(-v * p_star - H(p_star), velocity)
    # bracket the maximizer, where H'(p) = -v, using the quadratic tails
    da, dc = H.deriv(H.a), H.deriv(H.c)
    lo = np.where(-v < da, H.a + (-v - da) / H.delta, H.a) - 1.0
    hi = np.where(-v > dc, H.c + (-v - dc) / H.delta, H.c) + 1.0
    lo, hi = np.broadcast_arrays(lo, hi)
    lo, hi = lo.copy(), hi.copy()
    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
    for _ in range(140):
        x1 = hi - inv_phi * (hi - lo)
        x2 = lo + inv_phi * (hi - lo)
        take_right = (-v * x1 - H(x1)) < (-v * x2 - H(x2))
        lo = np.where(take_right, x1, lo)
        hi = np.where(take_right, hi, x2)
        if np.max(hi - lo) <= 1e-10:
            break
    p_star = 0.5 * (lo + hi)
    return _match(-v * p_star - H(p_star), velocity)


def make_quadratic_flux(a: float, c: float, kappa: float) -> ConvexFlux:
    """Canonical family H(p) = kappa (p - a)(p - c): minimum at the midpoint."""
    if not a < c:
        raise ValueError(f"need a < c, got a={a}, c={c}")
    if kappa <= 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    return ConvexFlux(
        a=a, c=c, b=0.5 * (a + c),
        delta=2.0 * kappa,
        lipschitz=kappa * (c - a),
        eval_fn=lambda p: kappa * (p - a) * (p - c),
        deriv_fn=lambda p: kappa * (2.0 * p - a - c),
        kappa=kappa,
        name=f"quadratic(a={a}, c={c}, kappa={kappa})",
    )


def make_skewed_flux(a: float, c: float, kappa: float, skew: float) -> ConvexFlux:
    """Asymmetric family H(p) = kappa (p - a)(p - c)(1 + skew p).

    Stays strongly convex for small |skew|; the minimizer is off-center,
    which is what makes it a useful second test family.
    """
    if not a < c:
        raise ValueError(f"need a < c, got a={a}, c={c}")
    if kappa <= 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    if 1.0 + skew * a <= 0 or 1.0 + skew * c <= 0:
        raise ValueError("1 + skew*p must stay positive on [a, c]")

    def f(p):
        return kappa * (p - a) * (p - c) * (1.0 + skew * p)

    def df(p):
        return kappa * (skew * (p - a) * (p - c)
                        + (1.0 + skew * p) * (2.0 * p - a - c))

    def d2f(p):
        return 2.0 * kappa * (1.0 + skew * (3.0 * p - a - c))

    delta = min(d2f(a), d2f(c))
    if delta <= 0:
        raise ValueError("skew too large: flux no longer strongly convex")
    lo, hi = a, c
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if df(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    b = 0.5 * (lo + hi)
    return ConvexFlux(
        a=a, c=c, b=b, delta=delta,
        lipschitz=max(abs(df(a)), abs(df(c))),
        eval_fn=f, deriv_fn=df,
        name=f"skewed(a={a}, c={c}, kappa={kappa}, skew={skew})",
    )


@dataclass(frozen=True)
class Box:
    """Pair of branch fluxes and the product box Q = [a_L,c_L] x [a_R,c_R]."""

    left: ConvexFlux
    right: ConvexFlux

    def __post_init__(self):
        if self.H0 >= 0:
            raise ValueError("both fluxes must have a negative minimum")

    @property
    def H0(self) -> float:
        return max(self.left.min_value, self.right.min_value)

    @property
    def M(self) -> float:
        return max(abs(self.left.a), abs(self.left.c),
                   abs(self.right.a), abs(self.right.c))

    @property
    def max_lipschitz(self) -> float:
        return max(self.left.lipschitz, self.right.lipschitz)

    @property
    def max_delta(self) -> float:
        return max(self.left.delta, self.right.delta)

    def contains(self, kL: float, kR: float, tol: float = 0.0) -> bool:
        return (self.left.a - tol <= kL <= self.left.c + tol
                and self.right.a - tol <= kR <= self.right.c + tol)
