"""Junction coupling conditions and the germ algebra.

Covers the two-branch convex case (coupling rules, the effective flux
limiter, germ membership/generation/dissipativity/maximality) and, in a
separate set of objects, the multi-branch concave case with its
non-dissipativity construction.  All predicates compare flux values at a
single membership tolerance of 1e-10.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .fluxes import Box, ConvexFlux, entropy_flux, inverse_branch, polish_inverse

GERM_TOL = 1e-10
SIGN_TIE_TOL = 1e-13
LIMITER_TOL = 1e-12


def _sgn(x, tol: float = SIGN_TIE_TOL):
    x = np.asarray(x, dtype=float)
    out = np.where(np.abs(x) <= tol, 0.0, np.sign(x))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# coupling conditions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LimitedCoupling:
    """Effective junction rule max(A, H_L^+(pL), H_R^-(pR)) with A in [H0, 0]."""

    A: float
    box: Box

    def __post_init__(self):
        if not (self.box.H0 - 1e-12 <= self.A <= 1e-12):
            raise ValueError(
                f"flux limiter A={self.A} outside admissible [{self.box.H0}, 0]")

    @property
    def lipschitz_bounds(self) -> tuple[float, float]:
        return (self.box.left.lipschitz, self.box.right.lipschitz)

    @property
    def kind(self) -> str:
        return "limited"

    def __call__(self, pL, pR):
        return np.maximum(self.A, np.maximum(self.box.left.env_plus(pL),
                                             self.box.right.env_minus(pR)))


@dataclass(frozen=True)
class GeneralCoupling:
    """User-supplied monotone junction rule with declared Lipschitz bounds.

    The declared bounds feed the time-step gates; ``validate_coupling``
    cross-checks them by sampling since a closure cannot expose its own
    derivative bounds.
    """

    fn: Callable
    box: Box
    lipschitz_bounds: tuple[float, float]
    name: str = "general"

    @property
    def kind(self) -> str:
        return "general"

    def __call__(self, pL, pR):
        return self.fn(pL, pR)


def godunov_coupling(box: Box) -> GeneralCoupling:
    """The junction Godunov rule max(H_L^+(pL), H_R^-(pR)) as a general coupling."""
    return GeneralCoupling(
        fn=lambda pL, pR: np.maximum(box.left.env_plus(pL), box.right.env_minus(pR)),
        box=box,
        lipschitz_bounds=(box.left.lipschitz, box.right.lipschitz),
        name="godunov",
    )


def as_general(limited: LimitedCoupling) -> GeneralCoupling:
    """Wrap a limited rule so the limiter-recovery machinery can run on it."""
    return GeneralCoupling(
        fn=limited,
        box=limited.box,
        lipschitz_bounds=limited.lipschitz_bounds,
        name=f"limited(A={limited.A})",
    )


def eval_coupling(F, pL, pR):
    out = F(np.asarray(pL, dtype=float), np.asarray(pR, dtype=float))
    if np.ndim(pL) == 0 and np.ndim(pR) == 0:
        return float(out)
    return out


@dataclass
class ValidationReport:
    ok: bool
    monotonicity_ok: bool
    monotonicity_witness: tuple | None
    endpoint_residuals: tuple[float, float]
    lipschitz_estimate: tuple[float, float]
    messages: list[str] = field(default_factory=list)


def validate_coupling(F, samples: int = 4000, rng=None) -> ValidationReport:
    """Sample the box for monotonicity, endpoint identities and slope bounds.

    Returns a failed report (never raises) so callers can print diagnostics.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    box = F.box
    HL, HR = box.left, box.right
    pL = rng.uniform(HL.a, HL.c, samples)
    pR = rng.uniform(HR.a, HR.c, samples)
    h = 1e-4 * min(HL.c - HL.a, HR.c - HR.a)

    msgs: list[str] = []
    witness = None
    mono_ok = True

    pL2 = np.minimum(pL + rng.uniform(0.0, HL.c - HL.a, samples), HL.c)
    d1 = F(pL2, pR) - F(pL, pR)
    bad = np.nonzero(d1 < -1e-12)[0]
    if bad.size:
        i = int(bad[np.argmin(d1[bad])])
        witness = (("first", float(pL[i]), float(pL2[i]), float(pR[i]), float(d1[i])))
        mono_ok = False
        msgs.append("coupling decreases in its first argument at a sampled pair")

    pR2 = np.minimum(pR + rng.uniform(0.0, HR.c - HR.a, samples), HR.c)
    d2 = F(pL, pR2) - F(pL, pR)
    bad = np.nonzero(d2 > 1e-12)[0]
    if bad.size and mono_ok:
        i = int(bad[np.argmax(d2[bad])])
        witness = (("second", float(pR[i]), float(pR2[i]), float(pL[i]), float(d2[i])))
        mono_ok = False
        msgs.append("coupling increases in its second argument at a sampled pair")

    res_a = abs(float(F(HL.a, HR.a)))
    res_c = abs(float(F(HL.c, HR.c)))
    if res_a > 1e-12 or res_c > 1e-12:
        msgs.append("endpoint identities F(a_L,a_R)=0=F(c_L,c_R) violated")

    pL_h = np.clip(pL + h, HL.a, HL.c)
    pR_h = np.clip(pR + h, HR.a, HR.c)
    lip1 = float(np.max(np.abs(F(pL_h, pR) - F(pL, pR)) / np.abs(pL_h - pL)))
    lip2 = float(np.max(np.abs(F(pL, pR_h) - F(pL, pR)) / np.abs(pR_h - pR)))

    ok = mono_ok and res_a <= 1e-12 and res_c <= 1e-12
    return ValidationReport(ok, mono_ok, witness, (res_a, res_c), (lip1, lip2), msgs)


def flux_limiter(F, box: Box | None = None, tol: float = LIMITER_TOL) -> float:
    """Effective flux limiter of a general coupling rule.

    With level maps pL(lam) on the decreasing branch of H_L and pR(lam) on
    the increasing branch of H_R, the limiter is the unique root of
    K(lam) = F(pL(lam), pR(lam)) - lam on [H0, 0]; if already
    F(pL(H0), pR(H0)) < H0 the floor H0 is returned.
    """
    box = F.box if box is None else box
    HL, HR = box.left, box.right
    H0 = box.H0
    bbar_L = inverse_branch(HL, H0, "decreasing")
    bbar_R = inverse_branch(HR, H0, "increasing")
    if float(F(bbar_L, bbar_R)) < H0:
        return H0

    def K(lam):
        return float(F(inverse_branch(HL, lam, "decreasing"),
                       inverse_branch(HR, lam, "increasing"))) - lam

    k_hi = K(0.0)
    if k_hi > tol:
        raise ValueError(
            "limiter bracket failure: K(0) > 0, coupling violates the "
            "endpoint identity F(a_L, a_R) = 0")
    lo, hi = H0, 0.0  # K(lo) >= 0 >= K(hi)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if K(mid) >= 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol:
            break
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# the two-branch germ
# ---------------------------------------------------------------------------

GermPoint = tuple[float, float]


def _check_A(A: float, box: Box):
    if not (box.H0 - 1e-12 <= A <= 1e-12):
        raise ValueError(f"A={A} outside [{box.H0}, 0]")


def germ_contains(A: float, k: GermPoint, box: Box, tol: float = GERM_TOL) -> bool:
    """Membership of a trace pair in the germ of level-A stationary states.

    Requires equal flux values (Rankine-Hugoniot), the common value >= A,
    and at least one of: value = A, the right state on its decreasing
    branch, the left state on its increasing branch.
    """
    _check_A(A, box)
    kL, kR = k
    if not box.contains(kL, kR, tol=tol):
        raise ValueError(f"point {k} outside the state box")
    return bool(germ_contains_many(A, np.asarray([kL]), np.asarray([kR]), box, tol)[0])


def germ_contains_many(A: float, kL, kR, box: Box, tol: float = GERM_TOL):
    """Vectorized membership predicate (no box rejection; see germ_contains)."""
    HL, HR = box.left, box.right
    vL, vR = HL(kL), HR(kR)
    lam = 0.5 * (vL + vR)
    rh = np.abs(vL - vR) <= tol
    above = lam >= A - tol
    cond = ((np.abs(lam - A) <= tol)
            | (np.abs(vR - HR.env_minus(kR)) <= tol)
            | (np.abs(vL - HL.env_plus(kL)) <= tol))
    return rh & above & cond


@lru_cache(maxsize=256)
def _generating_set_cached(A: float, box: Box) -> tuple[GermPoint, ...]:
    HL, HR = box.left, box.right
    pbar_L = inverse_branch(HL, A, "decreasing")
    pbar_R = inverse_branch(HR, A, "increasing")
    return ((HL.a, HR.a), (HL.c, HR.c), (pbar_L, pbar_R))


def generating_set(A: float, box: Box) -> list[GermPoint]:
    """The three germ points whose entropy inequalities generate membership."""
    _check_A(A, box)
    return list(_generating_set_cached(float(A), box))


def dissipation_gap(k: GermPoint, khat: GermPoint, box: Box) -> float:
    """Entropy-flux gap of a pair of junction states (>= 0 means compatible)."""
    HL, HR = box.left, box.right
    kL, kR = k
    hL, hR = khat
    left = _sgn(kL - hL) * (HL(kL) - HL(hL))
    right = _sgn(kR - hR) * (HR(kR) - HR(hR))
    return float(left - right)


def dissipation_gap_many(kL, kR, hL, hR, box: Box):
    HL, HR = box.left, box.right
    return (_sgn(np.asarray(kL) - hL) * (HL(kL) - HL(hL))
            - _sgn(np.asarray(kR) - hR) * (HR(kR) - HR(hR)))


def germ_from_generators(A: float, k: GermPoint, box: Box,
                         tol: float = GERM_TOL) -> bool:
    """Membership via entropy-flux tests against the three generators only."""
    _check_A(A, box)
    kL, kR = k
    HL, HR = box.left, box.right
    for (gL, gR) in generating_set(A, box):
        if entropy_flux(HL, kL, gL) - entropy_flux(HR, kR, gR) < -tol:
            return False
    return True


def maximality_witness(A: float, k: GermPoint, box: Box,
                       tol: float = GERM_TOL) -> GermPoint:
    """Germ member with strictly negative gap against a non-member pair.

    The input must satisfy Rankine-Hugoniot and fail membership.  When the
    common value sits below A the witness is the pair of extreme roots of
    H = A; otherwise (value above A, both states on the wrong monotone
    sides) the opposite-branch roots of H = A.
    """
    _check_A(A, box)
    kL, kR = k
    HL, HR = box.left, box.right
    vL, vR = HL(kL), HR(kR)
    if abs(vL - vR) > tol:
        raise ValueError("witness requires a Rankine-Hugoniot pair")
    if germ_contains(A, k, box, tol=tol):
        raise ValueError("point already belongs to the germ")
    lam = 0.5 * (vL + vR)
    if lam < A:
        return (inverse_branch(HL, A, "decreasing"),
                inverse_branch(HR, A, "increasing"))
    return (inverse_branch(HL, A, "increasing"),
            inverse_branch(HR, A, "decreasing"))


# admissible (left-branch side, right-branch side) combinations for germ
# points strictly above level A; at level A all four combinations qualify
_SIDES_ABOVE_A = (("decreasing", "decreasing"),
                  ("increasing", "increasing"),
                  ("increasing", "decreasing"))
_SIDES_AT_A = _SIDES_ABOVE_A + (("decreasing", "increasing"),)


def sample_germ(A: float, box: Box, n: int, rng, polish: bool = False):
    """Draw n germ points by flux level, uniformly over [A, 0].

    A quarter of the draws sit exactly at level A where all four side
    combinations are admissible.  With ``polish`` the Rankine-Hugoniot
    equality is tightened to the rounding level (needed by fixed-point
    tests; bisection accuracy alone leaks through time stepping).
    """
    _check_A(A, box)
    HL, HR = box.left, box.right
    at_A = rng.random(n) < 0.25
    lam = np.where(at_A, A, rng.uniform(A, 0.0, n))
    combo = np.where(at_A, rng.integers(0, 4, n), rng.integers(0, 3, n))
    kL = np.empty(n)
    kR = np.empty(n)
    for ci, (sL, sR) in enumerate(_SIDES_AT_A):
        mask = combo == ci
        if not np.any(mask):
            continue
        kL[mask] = inverse_branch(HL, lam[mask], sL)
        kR[mask] = inverse_branch(HR, lam[mask], sR)
    if polish:
        for i in range(n):
            kL[i] = polish_inverse(HL, kL[i], lam[i])
            target = A if at_A[i] else HL(kL[i])
            kR[i] = polish_inverse(HR, kR[i], target)
    return kL, kR


def sample_rh_nonmembers(A: float, box: Box, n: int, rng):
    """Rankine-Hugoniot pairs outside the germ, for maximality probes.

    Half have common value below A (any sides), half above A on the
    inadmissible side combination (left decreasing, right increasing).
    """
    _check_A(A, box)
    HL, HR = box.left, box.right
    floor = box.H0
    below = rng.random(n) < 0.5
    span_lo = max(HL.min_value, HR.min_value)
    lam = np.where(below,
                   rng.uniform(span_lo, A, n),
                   rng.uniform(A, 0.0, n))
    # keep clear of the membership tolerance around A and of level 0
    lam = np.clip(lam, span_lo, -1e-6)
    lam = np.where(np.abs(lam - A) < 1e-6, lam - np.where(below, 1e-6, -1e-6), lam)
    kL = np.empty(n)
    kR = np.empty(n)
    sides = rng.integers(0, 2, (n, 2))
    for i in range(n):
        if below[i]:
            sL = "decreasing" if sides[i, 0] else "increasing"
            sR = "decreasing" if sides[i, 1] else "increasing"
        else:
            sL, sR = "decreasing", "increasing"
        kL[i] = inverse_branch(HL, lam[i], sL)
        kR[i] = inverse_branch(HR, lam[i], sR)
    return kL, kR


def halfline_germ_contains(A: float, kR: float, HR: ConvexFlux,
                           tol: float = GERM_TOL) -> bool:
    """Boundary germ on a single right branch: H(k) = max(A, H^-(k))."""
    if not (HR.min_value - 1e-12 <= A <= 1e-12):
        raise ValueError(f"A={A} outside [{HR.min_value}, 0]")
    return bool(abs(HR(kR) - max(A, HR.env_minus(kR))) <= tol)


# ---------------------------------------------------------------------------
# multi-branch junctions (concave fluxes, stated directly in that convention)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConcaveFlux:
    """Concave branch flux f on [a, c] with f(a) = f(c) = 0 and f_max > 0."""

    a: float
    c: float
    b: float
    fmax: float
    lipschitz: float
    eval_fn: Callable
    name: str = "concave"

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        out = self.eval_fn(np.clip(q, self.a, self.c))
        return float(out) if out.ndim == 0 else out

    def env_plus(self, q):
        """sup of f over [a, q]: f(q) up to the maximizer, f_max beyond."""
        q = np.asarray(q, dtype=float)
        out = np.where(q <= self.b, self(q), self.fmax)
        return float(out) if out.ndim == 0 else out

    def env_minus(self, q):
        """sup of f over [q, c]: f_max up to the maximizer, f(q) beyond."""
        q = np.asarray(q, dtype=float)
        out = np.where(q <= self.b, self.fmax, self(q))
        return float(out) if out.ndim == 0 else out

    def inverse(self, lam: float, side: str) -> float:
        """q on the rising ("+", q <= b) or falling ("-", q >= b) side with f(q) = lam."""
        if not (-1e-12 <= lam <= self.fmax + 1e-12):
            raise ValueError(f"level {lam} outside [0, {self.fmax}]")
        lam = min(max(lam, 0.0), self.fmax)
        if lam == self.fmax:
            return self.b
        f = self.eval_fn  # scalar arithmetic; inputs stay inside [a, c]
        if side == "+":
            lo, hi = self.a, self.b
            while hi - lo > 1e-13:
                mid = 0.5 * (lo + hi)
                if f(mid) < lam:
                    lo = mid
                else:
                    hi = mid
        elif side == "-":
            lo, hi = self.b, self.c
            while hi - lo > 1e-13:
                mid = 0.5 * (lo + hi)
                if f(mid) > lam:
                    lo = mid
                else:
                    hi = mid
        else:
            raise ValueError(f"side must be '+' or '-', got {side!r}")
        return 0.5 * (lo + hi)


def make_concave_quadratic(a: float, c: float, kappa: float) -> ConcaveFlux:
    """f(q) = kappa (q - a)(c - q): the canonical concave branch flux."""
    if not a < c:
        raise ValueError(f"need a < c, got a={a}, c={c}")
    if kappa <= 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    b = 0.5 * (a + c)
    return ConcaveFlux(
        a=a, c=c, b=b,
        fmax=kappa * (b - a) * (c - b),
        lipschitz=kappa * (c - a),
        eval_fn=lambda q: kappa * (q - a) * (c - q),
        name=f"concave_quadratic(a={a}, c={c}, kappa={kappa})",
    )


@dataclass(frozen=True)
class MultiBranchJunction:
    """N >= 2 weighted concave branches meeting at one vertex.

    ``incoming``/``outgoing`` are sequences of (flux, weight); each side's
    weights sum to one and every weight lies in (0, 1].
    """

    incoming: tuple
    outgoing: tuple

    def __post_init__(self):
        object.__setattr__(self, "incoming", tuple(self.incoming))
        object.__setattr__(self, "outgoing", tuple(self.outgoing))
        if not self.incoming or not self.outgoing:
            raise ValueError("need at least one incoming and one outgoing branch")
        for side in (self.incoming, self.outgoing):
            s = sum(th for _, th in side)
            if abs(s - 1.0) > 1e-12:
                raise ValueError(f"branch weights sum to {s}, expected 1")
            for f, th in side:
                if not (0.0 < th <= 1.0):
                    raise ValueError(f"weight {th} outside (0, 1]")
                if f.fmax <= 0:
                    raise ValueError("branch flux must have positive maximum")

    @property
    def branches(self) -> tuple:
        return self.incoming + self.outgoing

    @property
    def n_in(self) -> int:
        return len(self.incoming)

    @property
    def n_out(self) -> int:
        return len(self.outgoing)

    @property
    def A0(self) -> float:
        return min(f.fmax for f, _ in self.branches)


def multibranch_germ_contains(junction: MultiBranchJunction, A: float,
                              p: Sequence[float], tol: float = GERM_TOL) -> bool:
    """Membership in the multi-branch stationary germ at limiter A.

    All weighted branch flux values must agree with the level
    min(A, rising envelopes on incoming, falling envelopes on outgoing).
    """
    if not (0.0 - 1e-12 <= A <= junction.A0 + 1e-12):
        raise ValueError(f"A={A} outside [0, {junction.A0}]")
    branches = junction.branches
    if len(p) != len(branches):
        raise ValueError(f"expected {len(branches)} states, got {len(p)}")
    n_in = junction.n_in
    levels = [f(p[i]) / th for i, (f, th) in enumerate(branches)]
    env_terms = [f.env_plus(p[i]) / th for i, (f, th) in enumerate(branches[:n_in])]
    env_terms += [f.env_minus(p[n_in + j]) / th
                  for j, (f, th) in enumerate(branches[n_in:])]
    lam = min([A] + env_terms)
    return bool(max(abs(v - lam) for v in levels) <= tol)


def multibranch_dissipation_gap(junction: MultiBranchJunction,
                                p_prime: Sequence[float],
                                p: Sequence[float]) -> float:
    """Incoming minus outgoing entropy-flux totals for a pair of junction states."""
    branches = junction.branches
    if len(p_prime) != len(branches) or len(p) != len(branches):
        raise ValueError("state lists must cover every branch")
    n_in = junction.n_in
    gap = 0.0
    for i, (f, _) in enumerate(branches[:n_in]):
        gap += _sgn(p_prime[i] - p[i]) * (f(p_prime[i]) - f(p[i]))
    for j, (f, _) in enumerate(branches[n_in:]):
        gap -= _sgn(p_prime[n_in + j] - p[n_in + j]) * (f(p_prime[n_in + j]) - f(p[n_in + j]))
    return float(gap)


def dissipation_counterexample(junction: MultiBranchJunction, A: float,
                               alpha0: int, lam: float | None = None):
    """Pair of germ members violating the entropy inequality (3+ branches).

    The reference state sits at level A, incoming on rising sides and
    outgoing on falling sides.  The second state sits at level lam < A with
    branch ``alpha0`` keeping its side and every other branch flipped.  When
    alpha0 carries weight one (a singleton side) that assignment degenerates
    to a zero gap, so the level-carrying role moves to the smallest-weight
    branch on the opposite side, which the 3+ branch count guarantees has
    weight below one.  Two-branch junctions are rejected: there the germ is
    dissipative and no such pair exists.
    """
    branches = junction.branches
    if len(branches) < 3:
        raise ValueError("dissipation holds for two branches; no counterexample")
    if not (0.0 < A <= junction.A0 + 1e-12):
        raise ValueError(f"A={A} outside (0, {junction.A0}]")
    lam = 0.5 * A if lam is None else lam
    if not (0.0 < lam < A):
        raise ValueError(f"lam={lam} outside (0, {A})")
    if not (0 <= alpha0 < len(branches)):
        raise ValueError(f"alpha0={alpha0} out of range")

    n_in = junction.n_in
    side_of = lambda idx: "+" if idx < n_in else "-"
    flip = {"+": "-", "-": "+"}

    p_prime = [f.inverse(th * A, side_of(i)) for i, (f, th) in enumerate(branches)]

    theta0 = branches[alpha0][1]
    if theta0 < 1.0 - 1e-12:
        carrier = alpha0
    else:
        opposite = (range(n_in, len(branches)) if alpha0 < n_in
                    else range(0, n_in))
        carrier = min(opposite, key=lambda i: branches[i][1])

    p = []
    for i, (f, th) in enumerate(branches):
        side = side_of(i) if i == carrier else flip[side_of(i)]
        p.append(f.inverse(th * lam, side))

    if not multibranch_germ_contains(junction, A, p_prime):
        raise AssertionError("constructed reference state left the germ")
    if not multibranch_germ_contains(junction, A, p):
        raise AssertionError("constructed comparison state left the germ")
    return p_prime, p


def sample_multibranch_germ(junction: MultiBranchJunction, A: float, n: int, rng):
    """Draw n germ members by level; levels below A need a side carrying them."""
    if not (0.0 <= A <= junction.A0 + 1e-12):
        raise ValueError(f"A={A} outside [0, {junction.A0}]")
    branches = junction.branches
    n_in = junction.n_in
    out = []
    for _ in range(n):
        if rng.random() < 0.25:
            lam = A
            sides = ["+" if rng.random() < 0.5 else "-" for _ in branches]
        else:
            lam = rng.uniform(0.0, A)
            sides = ["+" if rng.random() < 0.5 else "-" for _ in branches]
            carriers = [i for i, s in enumerate(sides)
                        if (i < n_in and s == "+") or (i >= n_in and s == "-")]
            if not carriers:
                i = int(rng.integers(0, len(branches)))
                sides[i] = "+" if i < n_in else "-"
        out.append([f.inverse(th * lam, sides[i])
                    for i, (f, th) in enumerate(branches)])
    return out
