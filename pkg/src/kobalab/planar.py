"""Two-sided Kobayashi data for planar convex regions.

For a simply connected planar region G and a point a in G, the Riemann
map F_a with F_a(a) = 0 satisfies

    log|F_a(b)| = log|b - a| - h(b),

where h is the harmonic function with boundary values log|zeta - a|.
We fit h by least squares with harmonic functions (real parts of a
polynomial plus simple poles clustered outside the corners), measure
the boundary misfit eps, and by the maximum principle
|h - fit| <= eps throughout G.  This brackets

    k_G(a, b) = arctanh|F_a(b)|,   kappa_G(a; v) = |v| exp(-h(a)).

Discs are handled in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, HalfspaceIntersection

# (polynomial degree, poles per corner); refinement stops at the budget
LEVELS = ((8, 0), (16, 2), (24, 4), (32, 8), (40, 12), (48, 16), (56, 20), (64, 24))
# real unknowns allowed per unit of budget
COLUMNS_PER_BUDGET = 1 / 8
MIN_TURN = 0.05  # corners turning more than this (radians) get poles


def _atanh_interval(lo: float, hi: float) -> tuple[float, float]:
    """arctanh applied to a modulus interval, with 1 mapped to +inf."""
    def f(m):
        return math.inf if m >= 1.0 else math.atanh(max(m, 0.0))
    return f(lo), f(hi)


@dataclass(frozen=True)
class PlanarDisc:
    center: complex
    radius: float

    def contains(self, a) -> bool:
        return abs(a - self.center) < self.radius

    def distance_bracket(self, a, b, budget=None, width=None):
        u = (a - self.center) / self.radius
        v = (b - self.center) / self.radius
        m = abs(u - v) / abs(1 - np.conj(v) * u)
        d = math.atanh(min(m, 1.0 - 1e-17)) if m < 1 else math.inf
        return d, d

    def norm_bracket(self, a, v, budget=None, width=None):
        u = abs(a - self.center) / self.radius
        k = abs(v) / (self.radius * (1 - u * u))
        return k, k


class PlanarPolygon:
    """Convex polygon given by its vertices (any order, made counter-clockwise)."""

    def __init__(self, vertices):
        V = np.asarray(vertices, dtype=np.complex128)
        hull = ConvexHull(np.stack([V.real, V.imag], axis=1))
        V = V[hull.vertices]  # counter-clockwise for 2-D hulls
        self.vertices = V
        self.center = complex(V.mean())
        self.scale = float(np.abs(V - self.center).max())
        prev, nxt = np.roll(V, 1), np.roll(V, -1)
        e1 = (V - prev) / np.abs(V - prev)
        e2 = (nxt - V) / np.abs(nxt - V)
        self._turn = np.abs(np.angle(e2 / e1))
        out = e1 - e2
        self._out = out / np.where(np.abs(out) > 0, np.abs(out), 1.0)
        self._corner = self._turn > MIN_TURN
        self._edges = nxt - V
        # outward edge normals and offsets: Re(conj(nu_k) zeta) <= c_k
        self._nu = -1j * self._edges / np.abs(self._edges)
        self._c = np.real(np.conj(self._nu) * V)
        self._cache = {}

    @classmethod
    def from_halfplanes(cls, normals, offsets, interior=0j):
        """Region ``Re(conj(n_k) zeta) < c_k``; ``interior`` must satisfy all."""
        n = np.asarray(normals, dtype=np.complex128)
        c = np.asarray(offsets, dtype=float)
        hs = np.stack([n.real, n.imag, -c], axis=1)
        pts = HalfspaceIntersection(hs, np.array([interior.real, interior.imag])).intersections
        return cls(pts[:, 0] + 1j * pts[:, 1])

    def contains(self, a) -> bool:
        cross = np.imag(np.conj(self._edges) * (a - self.vertices))
        return bool(np.all(cross > 0))

    def nearest_boundary(self, a):
        """Nearest boundary point to ``a`` and the outward normal there."""
        V, E = self.vertices, self._edges
        s = np.clip(np.real((a - V) * np.conj(E)) / np.abs(E) ** 2, 0, 1)
        pts = V + s * E
        k = int(np.argmin(np.abs(pts - a)))
        return complex(pts[k]), complex(self._nu[k])

    def radial_boundary(self, zeta):
        """Boundary points on the rays from the centroid through ``zeta``."""
        d = np.asarray(zeta, dtype=np.complex128) - self.center
        dots = np.real(np.conj(self._nu)[None, :] * d[:, None])
        room = self._c - np.real(np.conj(self._nu) * self.center)
        with np.errstate(divide="ignore"):
            t = np.where(dots > 0, room[None, :] / dots, np.inf).min(axis=1)
        return self.center + t * d

    # -- fitting -----------------------------------------------------------
    def _poles(self, npole, sigma=4.0):
        if npole == 0 or not self._corner.any():
            return np.zeros(0, complex), np.zeros(0)
        k = np.arange(1, npole + 1)
        d = self.scale * np.exp(-sigma * (math.sqrt(npole) - np.sqrt(k)))
        V, out = self.vertices[self._corner], self._out[self._corner]
        return (V[:, None] + out[:, None] * d).ravel(), np.tile(d, len(V))

    def _basis(self, zeta, deg, poles, mirror=None):
        P, D = poles
        u = (zeta - self.center) / self.scale
        cols = [u[:, None] ** np.arange(deg + 1)]
        if len(P):
            cols.append(D[None, :] / (zeta[:, None] - P[None, :]))
        C = np.concatenate(cols, axis=1)
        out = [C.real, -C.imag[:, 1:]]
        if mirror is not None:
            out.append(np.log(np.abs(zeta - mirror))[:, None])
        return np.concatenate(out, axis=1)

    def _samples(self, per_perimeter, clustered, smallest):
        L = np.abs(self._edges)
        per = np.maximum(4, np.ceil(per_perimeter * L / L.sum())).astype(int)
        g = np.geomspace(smallest, 0.5, clustered)
        out = []
        for j in range(len(self.vertices)):
            s = [np.arange(per[j]) / per[j]]
            if self._corner[j]:
                s.append(g)
            if self._corner[(j + 1) % len(self.vertices)]:
                s.append(1 - g)
            s = np.unique(np.concatenate(s))
            out.append(self.vertices[j] + self._edges[j] * s[s < 1])
        return np.concatenate(out)

    def _columns(self, level):
        deg, npole = level
        return 2 * deg + 1 + 2 * npole * int(self._corner.sum())

    def fits(self, a, budget):
        """Yield a cheap harmonic fit of h_a, then the richest one affordable."""
        cap = max(budget * COLUMNS_PER_BUDGET, self._columns(LEVELS[0]))
        affordable = [lv for lv in LEVELS if self._columns(lv) <= cap] or [LEVELS[0]]
        for level in dict.fromkeys([affordable[min(2, len(affordable) - 1)], affordable[-1]]):
            key = (complex(a), level)
            if key not in self._cache:
                self._cache[key] = self._fit(a, level, self._columns(level))
            yield self._cache[key]

    def _near_boundary(self, a, count, smallest):
        """Extra poles, samples and a mirror point when ``a`` hugs the boundary."""
        q, nu = self.nearest_boundary(a)
        delta = abs(q - a)
        if delta > 0.2 * self.scale:
            return None, np.zeros(0, complex), np.zeros(0), np.zeros(0, complex)
        d = np.geomspace(0.5 * delta, self.scale, 12)
        taus = np.geomspace(smallest * delta, self.scale, count)
        taus = np.concatenate([-taus[::-1], [0.0], taus])
        extra = self.radial_boundary(q - 1e-3 * delta * nu + 1j * nu * taus)
        return 2 * q - a, q + nu * d, d, extra

    def _fit(self, a, level, cols):
        deg, npole = level
        P, D = self._poles(npole)
        mirror, Pa, Da, extra = self._near_boundary(a, 60, 1e-2)
        poles = (np.concatenate([P, Pa]), np.concatenate([D, Da]))
        z = np.concatenate([self._samples(max(2000, 4 * cols), 40, 1e-7), extra])
        A = self._basis(z, deg, poles, mirror)
        coef, *_ = np.linalg.lstsq(A, np.log(np.abs(z - a)), rcond=None)
        # misfit on a finer boundary grid, plus half the largest jump between
        # neighbouring checks to cover the gaps
        zc = self._samples(max(8000, 16 * cols), 120, 1e-9)
        if mirror is not None:
            zc = self._order(np.concatenate([zc, self._near_boundary(a, 400, 1e-3)[3]]))
        e = self._basis(zc, deg, poles, mirror) @ coef - np.log(np.abs(zc - a))
        jumps = np.abs(np.diff(np.append(e, e[0])))
        eps = float(np.abs(e).max() + 0.5 * jumps.max())
        return HarmonicFit(self, complex(a), deg, poles, mirror, coef, eps)

    def _order(self, zeta):
        """Sort boundary points by their angle about the centroid."""
        return zeta[np.argsort(np.angle(zeta - self.center))]

    # -- brackets ----------------------------------------------------------
    def distance_bracket(self, a, b, budget=10_000, width=1e-7):
        a, b = complex(a), complex(b)
        if a == b:
            return 0.0, 0.0
        lo, hi = 0.0, math.inf
        for fit in self.fits(a, budget):
            eps = fit.eps
            m = abs(b - a) * math.exp(-fit(b))
            l, h = _atanh_interval(m * math.exp(-eps), m * math.exp(eps))
            lo, hi = max(lo, l), min(hi, h)
            if hi - lo <= width:
                break
        return lo, hi

    def norm_bracket(self, a, v, budget=10_000, width=1e-7):
        a = complex(a)
        lo, hi = 0.0, math.inf
        for fit in self.fits(a, budget):
            eps = fit.eps
            k = abs(v) * math.exp(-fit(a))
            lo, hi = max(lo, k * math.exp(-eps)), min(hi, k * math.exp(eps))
            if hi - lo <= width * max(1.0, hi):
                break
        return lo, hi


class HarmonicFit:
    """Fitted h_a = Re P on a polygon, with boundary misfit ``eps``.

    ``riemann(zeta) = (zeta - a) exp(-P(zeta))`` approximates the Riemann
    map sending ``a`` to 0, up to a rotation.
    """

    def __init__(self, poly, a, deg, poles, mirror, coef, eps):
        self.poly, self.a, self.deg, self.poles, self.mirror = poly, a, deg, poles, mirror
        self.coef, self.eps = coef, eps
        nc = deg + 1 + len(poles[0])
        c = coef[:nc].astype(np.complex128)
        c[1:] += 1j * coef[nc:2 * nc - 1]
        self._c = c
        self._mu = float(coef[2 * nc - 1]) if mirror is not None else 0.0
        if mirror is not None:
            q, _ = poly.nearest_boundary(a)
            self._ref = q - mirror

    def __call__(self, b) -> float:
        return float((self.poly._basis(np.array([complex(b)]), self.deg, self.poles, self.mirror) @ self.coef)[0])

    def holomorphic(self, zeta):
        """P and P' at the points ``zeta``."""
        zeta = np.asarray(zeta, dtype=np.complex128)
        P, D = self.poles
        R, c0 = self.poly.scale, self.poly.center
        u = (zeta - c0) / R
        k = np.arange(self.deg + 1)
        nk = self.deg + 1
        val = (u[..., None] ** k) @ self._c[:nk]
        der = (k[1:] * u[..., None] ** (k[1:] - 1)) @ self._c[1:nk] / R
        if len(P):
            diff = zeta[..., None] - P
            val = val + (D / diff) @ self._c[nk:]
            der = der - (D / diff ** 2) @ self._c[nk:]
        if self.mirror is not None:
            val = val + self._mu * (np.log((zeta - self.mirror) / self._ref) + math.log(abs(self._ref)))
            der = der + self._mu / (zeta - self.mirror)
        return val, der

    def riemann(self, zeta):
        zeta = np.asarray(zeta, dtype=np.complex128)
        P, dP = self.holomorphic(zeta)
        F = (zeta - self.a) * np.exp(-P)
        dF = np.exp(-P) * (1 - (zeta - self.a) * dP)
        return F, dF

    def geodesic(self, b, count=257):
        """Points of the hyperbolic segment from a to b, equally spaced in distance.

        Newton continuation on F(zeta) = s F(b) along the preimage of the
        radius of the disc.
        """
        b = complex(b)
        Fb = complex(self.riemann(b)[0])
        D = math.atanh(min(abs(Fb), 1 - 1e-16))
        s = np.tanh(np.linspace(0, 1, count) * D) / abs(Fb)
        out = np.empty(count, dtype=np.complex128)
        zeta = self.a
        for i, si in enumerate(s):
            target = si * Fb
            if i == count - 1:
                zeta = b
            else:
                for _ in range(50):
                    F, dF = self.riemann(zeta)
                    step = (complex(F) - target) / complex(dF)
                    zeta -= step
                    if abs(step) < 1e-15 * max(1.0, abs(zeta)):
                        break
            out[i] = zeta
        return out
