"""Geodesic segments, rays and complex geodesics.

On the unit models everything is explicit.  Each model is split into
ball blocks (a polydisc coordinate is a ball of dimension one).  The
block where z and w are farthest apart carries a complex geodesic of
its own ball, and every other block follows a slowed-down copy of its
own complex geodesic.  The max formula for products makes the result a
complex geodesic of the whole domain, with the dominant block's
projection as left inverse.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import domains as dm
from . import metric
from .domains import Domain, DomainError
from .planar import PlanarDisc
from .tolerances import DEFAULT_BUDGET

SEGMENT = "Segment"
RAY = "Ray"


# -- ball automorphisms ------------------------------------------------------------

def ball_involution(a, x):
    """The automorphism of the unit ball swapping ``a`` and 0; ``x`` has shape (..., m)."""
    a = np.asarray(a, dtype=np.complex128)
    x = np.asarray(x, dtype=np.complex128)
    na2 = float(np.sum(np.abs(a) ** 2))
    if na2 == 0:
        return -x
    xa = np.sum(x * np.conj(a), axis=-1)[..., None]
    Px = xa * a / na2
    s = math.sqrt(1 - na2)
    return (a - Px - s * (x - Px)) / (1 - xa)


def _disc_involution(a, x):
    return (a - x) / (1 - np.conj(a) * x)


# -- paths -------------------------------------------------------------------------

@dataclass(frozen=True)
class GeodesicPath:
    """A parametrised curve in a domain; segments live on [0, 1], rays on [0, inf)."""

    dom: Domain
    curve: Callable = field(repr=False)
    kind: str = SEGMENT
    defect: float = 0.0

    def sample(self, t):
        """Points at parameter(s) ``t``; shape ``t.shape + (N,)``."""
        return self.curve(np.asarray(t, dtype=float))

    def __call__(self, t):
        return self.sample(t)

    def csv_rows(self, ts):
        ts = np.asarray(ts, dtype=float)
        pts = self.sample(ts)
        base = pts[0]
        dist = _pairwise(self.dom, base[None], pts)[0] if self.dom.is_model else None
        bd = dm.boundary_distance_many(self.dom, pts)
        header = ["t"] + [f"{p}_z{j + 1}" for j in range(self.dom.dim) for p in ("re", "im")]
        header += ["boundary_distance", "k_to_start"]
        rows = []
        for i, t in enumerate(ts):
            row = [float(t)]
            for c in pts[i]:
                row += [float(c.real), float(c.imag)]
            k = float(dist[i]) if dist is not None else float(
                metric.kobayashi_distance(self.dom, base, pts[i]).mid)
            rows.append(row + [float(bd[i]), k])
        return header, rows

    def write_csv(self, path, ts):
        header, rows = self.csv_rows(ts)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)


@dataclass(frozen=True)
class ComplexGeodesic:
    """Holomorphic disc ``phi`` with left inverse ``rho`` (rho(phi(zeta)) = zeta)."""

    dom: Domain
    phi: Callable = field(repr=False)
    rho: Callable = field(repr=False)

    def check(self, grid: int = 100, seed: int = 0):
        """(left-inverse error, isometry error) on seeded points of the disc."""
        rng = np.random.default_rng(seed)
        r = 0.95 * np.sqrt(rng.random(grid))
        zeta = r * np.exp(2j * np.pi * rng.random(grid))
        inv = float(np.max(np.abs(self.rho(self.phi(zeta)) - zeta)))
        pts = self.phi(zeta)
        i, j = np.triu_indices(grid, 1)
        kd = metric.poincare_distance(zeta[i], zeta[j])
        ko = metric.model_distance(self.dom, pts[i], pts[j])
        return inv, float(np.max(np.abs(ko - kd)))


def _ball_geodesic(z, w):
    """Complex geodesic of a ball block with phi(0) = z, phi(tanh k(z, w)) = w."""
    y = ball_involution(z, w)
    ny = float(np.linalg.norm(y))
    if ny == 0:
        e = np.zeros(len(z), dtype=np.complex128)
        e[0] = 1.0
    else:
        e = y / ny

    def phi(zeta):
        zeta = np.asarray(zeta, dtype=np.complex128)
        return ball_involution(z, zeta[..., None] * e)

    def rho(x):
        return np.sum(ball_involution(z, x) * np.conj(e), axis=-1)

    return phi, rho


def complex_geodesic_through(dom: Domain, z, w) -> ComplexGeodesic:
    """A complex geodesic phi with phi(0) = z and phi(tanh k(z, w)) = w."""
    if not dom.is_model:
        raise NotImplementedError("complex geodesics are constructed on model domains only")
    z, w = dom.check(z), dom.check(w)
    if not (dom.contains(z) and dom.contains(w)):
        raise DomainError("points must lie in the domain")
    if np.array_equal(z, w):
        raise DomainError("z and w must differ")
    blocks = metric._blocks(dom)
    dists = np.array([metric.ball_distance(z[b], w[b]) for b in blocks])
    star = int(np.argmax(dists))  # first maximiser, i.e. lowest index on ties
    t = math.tanh(dists[star])
    parts = []
    for b, d in zip(blocks, dists):
        if d == 0:
            parts.append((b, None, 0.0))
        else:
            phi_b, _ = _ball_geodesic(z[b], w[b])
            parts.append((b, phi_b, math.tanh(d) / t))
    _, rho_star = _ball_geodesic(z[blocks[star]], w[blocks[star]])

    def phi(zeta):
        zeta = np.asarray(zeta, dtype=np.complex128)
        out = np.empty(zeta.shape + (dom.dim,), dtype=np.complex128)
        for b, phi_b, beta in parts:
            out[..., b] = z[b] if phi_b is None else phi_b(beta * zeta)
        return out

    def rho(x):
        return rho_star(np.asarray(x)[..., blocks[star]])

    return ComplexGeodesic(dom, phi, rho)


# -- segments ----------------------------------------------------------------------

def _constant(dom, z, kind=SEGMENT):
    return GeodesicPath(dom, lambda t: np.broadcast_to(z, np.shape(t) + (dom.dim,)).copy(), kind, 0.0)


def geodesic_segment(dom: Domain, z, w, budget: int = DEFAULT_BUDGET, seed: int = 0) -> GeodesicPath:
    """Geodesic from z to w parametrised proportionally to distance on [0, 1]."""
    z, w = dom.check(z), dom.check(w)
    if not (dom.contains(z) and dom.contains(w)):
        raise DomainError("points must lie in the domain")
    if np.array_equal(z, w):
        return _constant(dom, z)
    if dom.is_model:
        cg = complex_geodesic_through(dom, z, w)
        D = metric.model_distance(dom, z, w)

        def curve(t):
            pts = cg.phi(np.tanh(np.asarray(t) * D))
            pts[np.asarray(t) == 1.0] = w  # land exactly on the endpoint
            return pts

        path = GeodesicPath(dom, curve, SEGMENT, 0.0)
        return GeodesicPath(dom, curve, SEGMENT, check_geodesic(path))
    return _general_segment(dom, z, w, budget, seed)


def _general_segment(dom, z, w, budget, seed):
    """Hyperbolic segment of the slice through z and w.

    Its length in the domain is at most the slice distance, which is at
    most the upper end of the distance bracket, so the bracket width
    bounds how far the curve is from being a geodesic.
    """
    bracket = metric.kobayashi_distance(dom, z, w, budget, seed)
    region = metric._slice_region(dom, z, w - z)
    nodes = np.linspace(0.0, 1.0, 257)
    if isinstance(region, PlanarDisc):
        c, r = region.center, region.radius
        a = -c / r
        D = metric.poincare_distance(a, (1 - c) / r)
        m = _disc_involution(a, (1 - c) / r)
        zeta = c + r * _disc_involution(a, np.tanh(nodes * D) * m / abs(m))
    else:
        fit = list(region.fits(0j, budget))[-1]
        zeta = fit.geodesic(1 + 0j, len(nodes))
    zeta[0], zeta[-1] = 0, 1

    def curve(t):
        t = np.asarray(t, dtype=float)
        re = np.interp(t, nodes, zeta.real)
        im = np.interp(t, nodes, zeta.imag)
        return z + (re + 1j * im)[..., None] * (w - z)

    slice_hi = region.distance_bracket(0j, 1 + 0j, budget=budget)[1]
    return GeodesicPath(dom, curve, SEGMENT, float(max(slice_hi - bracket.lo, 0.0)))


def bidisc_example_segment(r: float) -> GeodesicPath:
    """The explicit bidisc geodesic from (-r, 0) through (0, r) to (r, 0)."""
    if not 0 < r < 1:
        raise DomainError("r must lie in (0, 1)")

    def curve(t):
        t = np.asarray(t, dtype=float)
        first = t <= 0.5
        z1 = np.where(first, r * (2 * t - 1) / (1 - 2 * r * r * t),
                      r * (2 * t - 1) / (1 + r * r * (2 * t - 2)))
        z2 = np.where(first, 2 * t * r, (2 - 2 * t) * r)
        return np.stack([z1, z2], axis=-1).astype(np.complex128)

    return GeodesicPath(dm.Polydisc(2), curve, SEGMENT, 0.0)


# -- rays --------------------------------------------------------------------------

def geodesic_ray(dom: Domain, z0, p) -> GeodesicPath:
    """Unit-speed ray from z0 landing at the boundary point p.

    Every block follows the complex geodesic of its ball from its
    coordinate of z0 towards its coordinate of p; blocks where p is on
    the unit sphere reach it, the others stop inside.  The distance to
    z0 is t because at least one block is unit speed and the max formula
    applies.
    """
    if not dom.is_model:
        raise NotImplementedError("geodesic rays are constructed on model domains only")
    z0, p = dom.check(z0), dom.check(p)
    if not dom.contains(z0):
        raise DomainError("z0 must lie in the domain")
    if not dom.on_boundary(p):
        raise DomainError("p must lie on the boundary")
    disc = _ray_disc(dom, z0, p)

    def curve(t):
        return disc(np.tanh(np.asarray(t, dtype=float)))

    return GeodesicPath(dom, curve, RAY, 0.0)


# -- verification ------------------------------------------------------------------

def chebyshev_nodes(count: int, a: float = 0.0, b: float = 1.0) -> np.ndarray:
    """Chebyshev-Lobatto nodes on [a, b], increasing."""
    k = np.arange(count)
    x = -np.cos(np.pi * k / (count - 1)) if count > 1 else np.zeros(1)
    return a + (b - a) * (x + 1) / 2


def _pairwise(dom, P, Q):
    return metric.model_distance(dom, P[:, None, :], Q[None, :, :])


def check_geodesic(path: GeodesicPath, samples: int = 64, horizon: float = 5.0,
                   budget: int = DEFAULT_BUDGET, nodes=None) -> float:
    """Largest additivity defect |k(s,u) + k(u,t) - k(s,t)| over sampled s < u < t.

    Rays are sampled on [0, horizon].  Off the models the pairwise
    distances are bracket midpoints and the defect also absorbs the
    widest bracket.
    """
    if nodes is None:
        b = 1.0 if path.kind == SEGMENT else horizon
        nodes = chebyshev_nodes(samples, 0.0, b)
    pts = path.sample(np.asarray(nodes))
    n = len(pts)
    if n < 3:
        return 0.0
    if path.dom.is_model:
        K = _pairwise(path.dom, pts, pts)
        slack = 0.0
    else:
        K = np.zeros((n, n))
        slack = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                br = metric.kobayashi_distance(path.dom, pts[i], pts[j], budget)
                K[i, j] = K[j, i] = br.mid
                slack = max(slack, br.gap)
    # all triples s < u < t via broadcasting
    idx = np.arange(n)
    S, U, T = np.meshgrid(idx, idx, idx, indexing="ij")
    mask = (S < U) & (U < T)
    defect = np.abs(K[S, U] + K[U, T] - K[S, T])[mask]
    return float(defect.max() + slack)


# -- equicontinuity ----------------------------------------------------------------

@dataclass(frozen=True)
class ModulusTable:
    """Empirical modulus of continuity ``omega(delta)`` of a family of curves or discs."""

    deltas: np.ndarray
    omega: np.ndarray
    per_member: np.ndarray  # (members, len(deltas))
    targets: np.ndarray
    flagged: bool
    family: str

    def to_json(self):
        return {"family": self.family, "flagged": bool(self.flagged),
                "deltas": [float(d) for d in self.deltas], "omega": [float(o) for o in self.omega],
                "targets": [dm.complex_to_json(p) for p in self.targets]}


def _lag_modulus(pts, params, deltas):
    """max |pts[i] - pts[j]| over pairs with |params[i] - params[j]| <= delta."""
    gap = np.abs(params[:, None] - params[None, :])
    disp = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    return np.array([disp[gap <= d].max() for d in deltas])


def equicontinuity_probe(dom: Domain, z0, rays: int = 16, mesh: int = 12, seed: int = 0,
                         targets=None, family: str = "rays", points: int = 400,
                         flag_ratio: float = 0.05) -> ModulusTable:
    """Modulus of continuity of rays (in the parameter s = tanh t) or of complex geodesics.

    ``family="complex"`` uses, for every target p, the complex geodesic
    through z0 towards p, recentred by a disc automorphism so that its
    centre is the sampled point farthest from the boundary.  The family
    is flagged when omega at the smallest mesh size is still above
    ``flag_ratio * diameter``.
    """
    if not dom.is_model:
        raise NotImplementedError("the probe uses closed-form rays on model domains")
    z0 = dom.check(z0)
    if targets is None:
        targets = dm.sample_boundary(dom, rays, np.random.default_rng(seed))
    targets = np.array([dom.check(p) for p in targets])
    rings = _rings(points)
    spacing = 1.0 / (points - 1) if family == "rays" else 1.0 / rings
    deltas = np.geomspace(2 * spacing, 1.0, mesh)
    rows = []
    for p in targets:
        disc = _ray_disc(dom, z0, p)
        if family == "rays":
            s = np.linspace(0.0, 1.0, points)
            rows.append(_lag_modulus(disc(s), s, deltas))
        elif family == "complex":
            zeta = _polar_grid(points)
            vals = dm.boundary_distance_many(dom, disc(0.999 * zeta))
            c = 0.999 * zeta[int(np.argmax(vals))]
            recentred = disc(_disc_involution(c, zeta))
            rows.append(_lag_modulus(recentred, zeta, deltas))
        else:
            raise ValueError(f"unknown family {family!r}")
    per = np.array(rows)
    omega = per.max(axis=0)
    return ModulusTable(deltas, omega, per, targets, bool(omega[0] > flag_ratio * dom.diameter), family)


def _ray_disc(dom, z0, p):
    """The holomorphic disc zeta -> ray point at parameter zeta (closed unit disc)."""
    blocks = metric._blocks(dom)
    ys = []
    for b in blocks:
        y = ball_involution(z0[b], p[b])
        ny = float(np.linalg.norm(y))
        ys.append(y / ny if ny > 1 else y)

    def disc(zeta):
        zeta = np.asarray(zeta, dtype=np.complex128)
        out = np.empty(zeta.shape + (dom.dim,), dtype=np.complex128)
        for b, y in zip(blocks, ys):
            out[..., b] = ball_involution(z0[b], zeta[..., None] * y)
        return out

    return disc


def _rings(points):
    return max(2, int(math.sqrt(points / 4)))


def _polar_grid(points):
    rings = _rings(points)
    out = [np.zeros(1, complex)]
    for k in range(1, rings + 1):
        r = k / rings
        m = max(6, int(round(4 * rings * r)))
        out.append(r * np.exp(2j * np.pi * np.arange(m) / m))
    return np.concatenate(out)
