"""Kobayashi distance and Kobayashi-Royden norm.

Normalisation: k_D(0, r) = arctanh r, so that horosphere radii are
measured as (1/2) log R.

On the unit models (disc, ball, polydisc and products of these) both
quantities are closed forms.  On other convex domains they are
bracketed:

* lower: holomorphic maps contract, so k_Omega(z, w) is at least the
  distance between the images under a linear functional, either in the
  half-plane cut out by a supporting functional or in the whole planar
  image of the domain;
* upper: the complex line through z and w meets the domain in a planar
  convex region S, and the inclusion S -> Omega contracts, so
  k_Omega(z, w) <= k_S(z, w).  A chain of Euclidean balls along the
  chord gives a crude fallback.

Planar distances come from :mod:`kobalab.planar`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import domains as dm
from .domains import Ball, Domain, DomainError, FunctionalHull, Polydisc, Product, inner
from .planar import PlanarDisc, PlanarPolygon
from .tolerances import DEFAULT, DEFAULT_BUDGET

RANDOM_CONTACTS = 64
SLICE_RAYS = 512
IMAGE_LINES = 256
# planar brackets stop refining once narrower than this
PLANAR_WIDTH = 1e-7


@dataclass(frozen=True)
class DistanceBracket:
    lo: float
    hi: float
    exact: bool

    def __post_init__(self):
        if not 0 <= self.lo <= self.hi:
            raise ValueError(f"invalid bracket [{self.lo}, {self.hi}]")

    @property
    def gap(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, value: float, slack: float = 0.0) -> bool:
        return self.lo - slack <= value <= self.hi + slack

    def to_json(self) -> dict:
        return {"lo": float(self.lo), "hi": float(self.hi), "exact": bool(self.exact)}

    @classmethod
    def from_json(cls, obj):
        return cls(float(obj["lo"]), float(obj["hi"]), bool(obj["exact"]))


@dataclass(frozen=True)
class NormBracket(DistanceBracket):
    pass


# -- closed forms ------------------------------------------------------------

def _atanh_from(sigma, one_minus_sq):
    """arctanh(sigma) using 1 - sigma^2 computed without cancellation."""
    sigma = np.asarray(sigma, dtype=float)
    one_minus_sq = np.asarray(one_minus_sq, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        far = 0.5 * (np.log1p(sigma) - np.log(one_minus_sq / (1 + sigma)))
    near = np.arctanh(np.minimum(sigma, 0.5))
    return np.where(sigma >= 0.5, far, near)


def _unit_check(mod_sq, what):
    if np.any(~np.isfinite(mod_sq)) or np.any(mod_sq >= 1.0):
        raise DomainError(f"{what} must lie in the open unit ball")


def poincare_distance(z, w):
    """k_D(z, w) = arctanh |(z - w) / (1 - conj(w) z)|; broadcasts over arrays."""
    z = np.asarray(z, dtype=np.complex128)
    w = np.asarray(w, dtype=np.complex128)
    _unit_check(np.abs(z) ** 2, "z")
    _unit_check(np.abs(w) ** 2, "w")
    return ball_distance(z[..., None], w[..., None])


def ball_distance(z, w):
    """Closed-form Kobayashi distance of the unit ball; broadcasts over leading axes."""
    z = np.asarray(z, dtype=np.complex128)
    w = np.asarray(w, dtype=np.complex128)
    nz = np.sum(np.abs(z) ** 2, axis=-1)
    nw = np.sum(np.abs(w) ** 2, axis=-1)
    _unit_check(nz, "z")
    _unit_check(nw, "w")
    d = w - z
    # |1 - <z,w>|^2 sigma^2 = |d|^2 - (1/2) sum_{i,j} |z_i d_j - z_j d_i|^2
    num = np.sum(np.abs(d) ** 2, axis=-1)
    if z.shape[-1] > 1:
        cross = z[..., :, None] * d[..., None, :] - z[..., None, :] * d[..., :, None]
        num = num - 0.5 * np.sum(np.abs(cross) ** 2, axis=(-2, -1))
    den = np.abs(1 - np.sum(z * np.conj(w), axis=-1)) ** 2
    sigma = np.sqrt(np.maximum(num, 0.0) / den)
    one_minus = (1 - nz) * (1 - nw) / den
    out = _atanh_from(sigma, one_minus)
    return float(out) if np.ndim(out) == 0 else out


def product_distance(factors):
    """Distance on a product from the factor distances: their maximum."""
    vals = list(factors)
    if not vals:
        raise ValueError("product_distance needs at least one factor")
    if any(v < 0 for v in vals):
        raise ValueError("factor distances must be non-negative")
    return max(vals)


_blocks = dm.model_blocks


def model_distance(dom: Domain, z, w):
    """Closed-form distance on models; broadcasts over leading axes."""
    z = np.asarray(z, dtype=np.complex128)
    w = np.asarray(w, dtype=np.complex128)
    vals = [ball_distance(z[..., b], w[..., b]) for b in _blocks(dom)]
    out = np.max(np.stack([np.asarray(v) for v in vals]), axis=0)
    return float(out) if np.ndim(out) == 0 else out


def _ball_norm(z, v):
    nz = float(np.sum(np.abs(z) ** 2))
    if nz >= 1:
        raise DomainError("point must lie in the open ball")
    zv = abs(complex(inner(v, z)))
    return math.sqrt(float(np.sum(np.abs(v) ** 2)) / (1 - nz) + zv ** 2 / (1 - nz) ** 2)


def model_norm(dom: Domain, z, v) -> float:
    z = np.asarray(z, dtype=np.complex128)
    v = np.asarray(v, dtype=np.complex128)
    return max(_ball_norm(z[b], v[b]) for b in _blocks(dom))


# -- lower bounds --------------------------------------------------------------

def halfplane_distance(f: dm.SupportFunctional, z, w) -> float:
    """Distance of the images of z, w in the half-plane {Re zeta < offset} under <., n>."""
    p = f.offset - complex(inner(z, f.n))
    q = f.offset - complex(inner(w, f.n))
    if p.real <= 0 or q.real <= 0:
        raise DomainError("functional does not separate the points from its zero set")
    num = abs(p - q)
    den = abs(p + q.conjugate())
    # 1 - m^2 = 4 Re p Re q / |p + conj q|^2
    return float(_atanh_from(num / den, 4 * p.real * q.real / den ** 2))


def _halfplane_norm(f, z, v) -> float:
    p = f.offset - complex(inner(z, f.n))
    return abs(complex(inner(v, f.n))) / (2 * p.real)


def _contacts(dom, z, w, seed):
    """Boundary contacts: the two chord exits and seeded random rays from the centre."""
    pts = []
    if w is not None and not np.allclose(z, w, rtol=0, atol=0):
        d = w - z
        pts.append(dm.boundary_hits(dom, w, d[None])[0])
        pts.append(dm.boundary_hits(dom, z, -d[None])[0])
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((RANDOM_CONTACTS, dom.dim)) + 1j * rng.standard_normal((RANDOM_CONTACTS, dom.dim))
    pts += list(dm.boundary_hits(dom, dom.center, dirs))
    return [dm.project_to_boundary(dom, p) for p in pts]


def _functionals(dom, z, w, seed):
    tol = max(dom.tol(), 1e-12)
    return [dm._support_at(dom, p, tol) for p in _contacts(dom, z, w, seed)]


def _image_region(dom: Domain, n):
    """The image of the domain under zeta = <z, n>, or a region containing it."""
    n = np.asarray(n, dtype=np.complex128)
    c = complex(inner(dom.center, n))
    if dom.is_model:
        r = sum(float(np.linalg.norm(n[b])) for b in _blocks(dom))
        return PlanarDisc(0j, r)
    if isinstance(dom, FunctionalHull):
        return PlanarPolygon(dom.vertices @ np.conj(n))
    u = np.exp(2j * np.pi * np.arange(IMAGE_LINES) / IMAGE_LINES)
    h = np.array([dom.support(n * uk) for uk in u])
    return PlanarPolygon.from_halfplanes(u, h, interior=c)


def _image_directions(dom, z, w, funcs):
    dirs = []
    if w is not None:
        d = w - z
        dirs.append(d / np.linalg.norm(d))
    dirs += [f.n / np.linalg.norm(f.n) for f in funcs[:2]]
    dirs += list(np.eye(dom.dim, dtype=np.complex128))
    return dirs


def caratheodory_lower_bound(dom: Domain, z, w, budget: int = DEFAULT_BUDGET,
                             seed: int = 0) -> float:
    """Lower bound for k_Omega(z, w) from linear left-inverse candidates."""
    z, w = dom.check(z), dom.check(w)
    if not (dom.contains(z) and dom.contains(w)):
        raise DomainError("points must lie in the domain")
    if np.array_equal(z, w):
        return 0.0
    funcs = _functionals(dom, z, w, seed)
    best = max(halfplane_distance(f, z, w) for f in funcs)
    # planar images: a cheap pass over all directions, then refine the two best
    cands = []
    for n in _image_directions(dom, z, w, funcs):
        region = _image_region(dom, n)
        a, b = complex(inner(z, n)), complex(inner(w, n))
        lo, hi = region.distance_bracket(a, b, budget=budget // 16, width=PLANAR_WIDTH)
        best = max(best, lo)
        cands.append((hi, region, a, b))
    cands.sort(key=lambda c: -c[0])
    for hi, region, a, b in cands[:2]:
        if hi > best:
            best = max(best, region.distance_bracket(a, b, budget=budget, width=PLANAR_WIDTH)[0])
    return float(best)


# -- upper bounds --------------------------------------------------------------

def _ball_slice(z, v):
    """{zeta : |z + zeta v| < 1}, a disc."""
    nv = float(np.sum(np.abs(v) ** 2))
    c = -complex(inner(z, v)) / nv
    r = math.sqrt((1 - float(np.sum(np.abs(z) ** 2))) / nv + abs(c) ** 2)
    return PlanarDisc(c, r)


def _slice_region(dom: Domain, z, v):
    """{zeta : z + zeta v in the domain} (or a convex region inside it)."""
    if dom.is_model:
        # one disc per ball block that moves; a single moving block is exact
        discs = [_ball_slice(z[b], v[b]) for b in _blocks(dom) if np.any(v[b] != 0)]
        if len(discs) == 1:
            return discs[0]
    if isinstance(dom, FunctionalHull):
        n = dom.normals
        a = np.conj(n) @ v  # <v, n_k>
        r = dom.offsets - np.real(np.conj(n) @ z)
        keep = np.abs(a) > 1e-14 * np.abs(a).max()
        # Re(a zeta) = Re(conj(conj a) zeta)
        return PlanarPolygon.from_halfplanes(np.conj(a[keep]), r[keep])
    # inscribed polygon through boundary points of the slice
    theta = np.exp(2j * np.pi * np.arange(SLICE_RAYS) / SLICE_RAYS)
    pts = dm.boundary_hits(dom, z, theta[:, None] * v[None, :])
    zeta = inner(pts - z, v) / float(np.sum(np.abs(v) ** 2))
    return PlanarPolygon(zeta)


def chain_upper_bound(dom: Domain, z, w, max_steps: int = 10_000) -> float:
    """Sum of ball distances along the chord, each step inside a Euclidean ball."""
    total, x = 0.0, np.array(z, dtype=np.complex128)
    for _ in range(max_steps):
        rest = w - x
        L = float(np.linalg.norm(rest))
        if L == 0:
            return total
        delta = float(dm.boundary_distance(dom, x))
        step = min(L, 0.5 * delta)
        total += math.atanh(step / delta)
        x = w.copy() if step == L else x + rest * (step / L)
    return math.inf


def lempert_upper_bound(dom: Domain, z, w, budget: int = DEFAULT_BUDGET,
                        seed: int = 0) -> float:
    """Upper bound for k_Omega(z, w) from analytic discs through z and w."""
    z, w = dom.check(z), dom.check(w)
    if not (dom.contains(z) and dom.contains(w)):
        raise DomainError("points must lie in the domain")
    if np.array_equal(z, w):
        return 0.0
    chain = chain_upper_bound(dom, z, w)
    region = _slice_region(dom, z, w - z)
    return float(min(chain, region.distance_bracket(0j, 1 + 0j, budget=budget, width=PLANAR_WIDTH)[1]))


# -- public entry points ---------------------------------------------------------

def kobayashi_distance(dom: Domain, z, w, budget: int = DEFAULT_BUDGET, seed: int = 0,
                       tol_exact: float = DEFAULT.tol_exact) -> DistanceBracket:
    z, w = dom.check(z), dom.check(w)
    if not (dom.contains(z) and dom.contains(w)):
        raise DomainError("points must lie in the domain")
    if dom.is_model:
        d = model_distance(dom, z, w)
        return DistanceBracket(d, d, True)
    # the same ordered pair for (z, w) and (w, z) keeps brackets symmetric
    key = lambda p: tuple(np.concatenate([p.real, p.imag]))
    if key(w) < key(z):
        z, w = w, z
    lo = caratheodory_lower_bound(dom, z, w, budget, seed)
    hi = lempert_upper_bound(dom, z, w, budget, seed)
    lo = min(lo, hi)
    return DistanceBracket(lo, hi, hi - lo <= tol_exact)


def kobayashi_royden_norm(dom: Domain, z, v, budget: int = DEFAULT_BUDGET, seed: int = 0,
                          tol_exact: float = DEFAULT.tol_exact) -> NormBracket:
    z = dom.check(z)
    v = np.asarray(dm.as_point(v, dom.dim))
    if not dom.contains(z):
        raise DomainError("point must lie in the domain")
    if np.linalg.norm(v) == 0:
        raise DomainError("tangent vector must be nonzero")
    if dom.is_model:
        k = model_norm(dom, z, v)
        return NormBracket(k, k, True)
    funcs = _functionals(dom, z, None, seed)
    lo = max(_halfplane_norm(f, z, v) for f in funcs)
    cands = []
    for n in [v / np.linalg.norm(v)] + list(np.eye(dom.dim, dtype=np.complex128)):
        a, b = complex(inner(z, n)), complex(inner(v, n))
        if b != 0:
            region = _image_region(dom, n)
            l, h = region.norm_bracket(a, b, budget=budget // 16)
            lo = max(lo, l)
            cands.append((h, region, a, b))
    cands.sort(key=lambda c: -c[0])
    for h, region, a, b in cands[:2]:
        if h > lo:
            lo = max(lo, region.norm_bracket(a, b, budget=budget)[0])
    hi = float(np.linalg.norm(v)) / float(dm.boundary_distance(dom, z))
    hi = min(hi, _slice_region(dom, z, v).norm_bracket(0j, 1.0, budget=budget)[1])
    lo = min(lo, hi)
    return NormBracket(lo, hi, hi - lo <= tol_exact * max(1.0, hi))
