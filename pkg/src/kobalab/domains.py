"""Bounded convex domains in C^N.

Every domain is described by a convex *defining value* ``g`` with
``g < 0`` exactly on the open domain.  For the unit models the value is
a norm minus one, for polyhedral hulls it is the largest normalised
facet value, so that ``-g(z)`` is the Euclidean distance to the boundary
in all cases.

Points are 1-D ``complex128`` arrays; most functions also accept a stack
of points with shape ``(..., N)``.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import optimize
from scipy.spatial import HalfspaceIntersection
from scipy.spatial.distance import pdist

from .tolerances import DEFAULT


class DomainError(ValueError):
    """Raised when a point or a construction is incompatible with a domain."""


def as_point(z, dim: int | None = None) -> np.ndarray:
    """Coerce ``z`` to a complex point, accepting ``[re, im]`` pairs."""
    if isinstance(z, np.ndarray) and np.iscomplexobj(z):
        arr = z.astype(np.complex128, copy=False)
    else:
        items = list(z) if isinstance(z, (list, tuple, np.ndarray)) else [z]
        arr = np.array([_scalar(c) for c in items], dtype=np.complex128)
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError("a point needs at least one coordinate")
    if not np.all(np.isfinite(arr)):
        raise DomainError("point has non-finite coordinates")
    if dim is not None and arr.size != dim:
        raise DomainError(f"dimension mismatch: point has {arr.size} coordinates, domain has {dim}")
    return arr


def _scalar(c) -> complex:
    if isinstance(c, (list, tuple)) and len(c) == 2:
        return complex(float(c[0]), float(c[1]))
    return complex(c)


def inner(z, w):
    """Hermitian product <z, w> = sum z_j conj(w_j), broadcast over leading axes."""
    return np.sum(np.asarray(z) * np.conj(w), axis=-1)


def complex_to_json(z) -> list:
    return [[float(c.real), float(c.imag)] for c in np.atleast_1d(z)]


@dataclass(frozen=True)
class SupportFunctional:
    """Real affine functional ``z -> Re<z, normal> - offset``, <= 0 on the closure."""

    normal: tuple
    offset: float
    contact: tuple | None = None

    @property
    def n(self) -> np.ndarray:
        return np.asarray(self.normal, dtype=np.complex128)

    def value(self, z):
        return np.real(inner(z, self.n)) - self.offset

    def to_json(self) -> dict:
        out = {"normal": complex_to_json(self.n), "offset": float(self.offset)}
        if self.contact is not None:
            out["contact"] = complex_to_json(np.asarray(self.contact))
        return out

    @classmethod
    def from_json(cls, obj) -> "SupportFunctional":
        normal = tuple(as_point(obj["normal"]))
        contact = obj.get("contact")
        if contact is not None:
            contact = tuple(as_point(contact))
        return cls(normal, float(obj["offset"]), contact)

    @classmethod
    def through(cls, normal, contact) -> "SupportFunctional":
        n = as_point(normal)
        c = as_point(contact)
        return cls(tuple(complex(x) for x in n), float(np.real(inner(c, n))),
                   tuple(complex(x) for x in c))


class Segment(enum.Enum):
    INTERIOR = "Interior"
    BOUNDARY = "Boundary"
    MIXED = "Mixed"


class Domain:
    """Common interface; concrete variants are frozen dataclasses below."""

    dim: int

    # -- geometry every variant provides -------------------------------
    def defining_value(self, z):
        raise NotImplementedError

    def support(self, v) -> float:
        """sup over the domain of Re<z, v>."""
        raise NotImplementedError

    @property
    def diameter(self) -> float:
        raise NotImplementedError

    @property
    def center(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def is_model(self) -> bool:
        return False

    # -- derived --------------------------------------------------------
    def tol(self, tol_bd: float = DEFAULT.tol_bd) -> float:
        return tol_bd * self.diameter

    def check(self, z) -> np.ndarray:
        return as_point(z, self.dim)

    def contains(self, z) -> bool:
        return bool(self.defining_value(self.check(z)) < 0)

    def on_boundary(self, z, tol_bd: float = DEFAULT.tol_bd) -> bool:
        return bool(abs(self.defining_value(self.check(z))) <= self.tol(tol_bd))

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Ball(Domain):
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise DomainError("dimension must be >= 1")

    def defining_value(self, z):
        return np.linalg.norm(z, axis=-1) - 1.0

    def support(self, v):
        return float(np.linalg.norm(v))

    @property
    def diameter(self):
        return 2.0

    @property
    def center(self):
        return np.zeros(self.dim, dtype=np.complex128)

    @property
    def is_model(self):
        return True

    def to_json(self):
        return {"type": "ball", "dim": self.dim}


@dataclass(frozen=True)
class Polydisc(Domain):
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise DomainError("dimension must be >= 1")

    def defining_value(self, z):
        return np.max(np.abs(z), axis=-1) - 1.0

    def support(self, v):
        return float(np.sum(np.abs(v)))

    @property
    def diameter(self):
        return 2.0 * math.sqrt(self.dim)

    @property
    def center(self):
        return np.zeros(self.dim, dtype=np.complex128)

    @property
    def is_model(self):
        return True

    def to_json(self):
        return {"type": "polydisc", "dim": self.dim}


@dataclass(frozen=True)
class Product(Domain):
    factors: tuple

    def __post_init__(self):
        if not self.factors:
            raise DomainError("a product needs at least one factor")
        object.__setattr__(self, "factors", tuple(self.factors))

    @property
    def dim(self):
        return sum(f.dim for f in self.factors)

    @property
    def blocks(self):
        out, start = [], 0
        for f in self.factors:
            out.append(slice(start, start + f.dim))
            start += f.dim
        return out

    def defining_value(self, z):
        z = np.asarray(z)
        vals = [f.defining_value(z[..., b]) for f, b in zip(self.factors, self.blocks)]
        return np.max(np.stack(vals, axis=0), axis=0)

    def support(self, v):
        v = np.asarray(v)
        return float(sum(f.support(v[b]) for f, b in zip(self.factors, self.blocks)))

    @property
    def diameter(self):
        return math.sqrt(sum(f.diameter ** 2 for f in self.factors))

    @property
    def center(self):
        return np.concatenate([f.center for f in self.factors])

    @property
    def is_model(self):
        return all(f.is_model for f in self.factors)

    def to_json(self):
        return {"type": "product", "dim": self.dim, "factors": [f.to_json() for f in self.factors]}


@dataclass(frozen=True)
class FunctionalHull(Domain):
    """Intersection of half-spaces ``Re<z, n_k> < c_k``.

    ``interior`` must satisfy every constraint strictly and the hull must
    fit in the real coordinate box ``[-box, box]^{2N}``.
    """

    dim: int
    functionals: tuple
    interior: tuple
    box: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "functionals", tuple(self.functionals))
        object.__setattr__(self, "interior", tuple(as_point(self.interior, self.dim)))
        if not self.functionals:
            raise DomainError("hull needs at least one functional")
        for f in self.functionals:
            if len(f.normal) != self.dim:
                raise DomainError("functional normal has wrong dimension")
            if np.linalg.norm(f.n) == 0:
                raise DomainError("functional normal must be nonzero")
        x0 = np.asarray(self.interior)
        if not all(f.value(x0) < 0 for f in self.functionals):
            raise DomainError("declared interior point violates a functional")
        A, c = self._real_system()
        for k in range(2 * self.dim):
            for sgn in (1.0, -1.0):
                obj = np.zeros(2 * self.dim)
                obj[k] = -sgn
                res = optimize.linprog(obj, A_ub=A, b_ub=c, bounds=[(None, None)] * (2 * self.dim),
                                       method="highs")
                if res.status == 3 or (res.status == 0 and -res.fun > self.box):
                    raise DomainError("hull is not contained in the declared bounding box")
                if res.status not in (0, 3):
                    raise DomainError(f"boundedness check failed: {res.message}")

    def _real_system(self):
        normals = np.array([f.n for f in self.functionals])
        A = np.hstack([normals.real, normals.imag])
        c = np.array([f.offset for f in self.functionals], dtype=float)
        return A, c

    @property
    def normals(self) -> np.ndarray:
        return np.array([f.n for f in self.functionals])

    @property
    def offsets(self) -> np.ndarray:
        return np.array([f.offset for f in self.functionals], dtype=float)

    def defining_value(self, z):
        n = self.normals
        scale = np.linalg.norm(n, axis=1)
        vals = np.real(np.tensordot(np.asarray(z), np.conj(n), axes=([-1], [1])))
        return np.max((vals - self.offsets) / scale, axis=-1)

    def support(self, v):
        verts = _hull_vertices(self)
        return float(np.max(np.real(verts @ np.conj(np.asarray(v)))))

    @property
    def vertices(self) -> np.ndarray:
        return _hull_vertices(self)

    @property
    def diameter(self):
        verts = _hull_vertices(self)
        pts = np.hstack([verts.real, verts.imag])
        return float(np.max(pdist(pts))) if len(pts) > 1 else 0.0

    @property
    def center(self):
        return np.asarray(self.interior, dtype=np.complex128)

    def to_json(self):
        return {"type": "hull", "dim": self.dim,
                "functionals": [f.to_json() for f in self.functionals],
                "interior": complex_to_json(np.asarray(self.interior)), "box": self.box}


@functools.lru_cache(maxsize=64)
def _hull_vertices(dom: FunctionalHull) -> np.ndarray:
    A, c = dom._real_system()
    x0 = np.asarray(dom.interior)
    hs = HalfspaceIntersection(np.hstack([A, -c[:, None]]), np.concatenate([x0.real, x0.imag]))
    pts = np.unique(np.round(hs.intersections, 13), axis=0)
    n = dom.dim
    return pts[:, :n] + 1j * pts[:, n:]


def from_json(obj) -> Domain:
    kind = obj.get("type")
    if kind == "ball":
        return Ball(int(obj["dim"]))
    if kind == "polydisc":
        return Polydisc(int(obj["dim"]))
    if kind == "product":
        dom = Product(tuple(from_json(f) for f in obj["factors"]))
        if "dim" in obj and int(obj["dim"]) != dom.dim:
            raise DomainError("product dimension must equal the sum of factor dimensions")
        return dom
    if kind == "hull":
        return FunctionalHull(int(obj["dim"]),
                              tuple(SupportFunctional.from_json(f) for f in obj["functionals"]),
                              tuple(as_point(obj["interior"])), float(obj.get("box", 10.0)))
    raise DomainError(f"unknown domain type {kind!r}")


def disc() -> Ball:
    return Ball(1)


def flatten_factors(dom: Domain) -> list:
    """Leaf factors of nested products, in coordinate order."""
    if isinstance(dom, Product):
        out = []
        for f in dom.factors:
            out.extend(flatten_factors(f))
        return out
    return [dom]


def is_polydisc_like(dom: Domain) -> bool:
    """True when the domain is a product of unit discs (in some nesting)."""
    return all(isinstance(f, Polydisc) or (isinstance(f, Ball) and f.dim == 1)
               for f in flatten_factors(dom))


# ----------------------------------------------------------------------
# operations


def model_blocks(dom: Domain) -> list:
    """Coordinate slices of the ball blocks of a model (one per polydisc coordinate)."""
    if isinstance(dom, Ball):
        return [slice(0, dom.dim)]
    if isinstance(dom, Polydisc):
        return [slice(j, j + 1) for j in range(dom.dim)]
    if isinstance(dom, Product):
        out = []
        for f, b in zip(dom.factors, dom.blocks):
            out += [slice(b.start + s.start, b.start + s.stop) for s in model_blocks(f)]
        return out
    raise DomainError(f"{type(dom).__name__} is not a model domain")


def contains(dom: Domain, z) -> bool:
    return dom.contains(z)


def boundary_distance(dom: Domain, z) -> float:
    z = dom.check(z)
    g = float(dom.defining_value(z))
    if g >= 0:
        raise DomainError("point is not inside the domain")
    return -g


def boundary_distance_many(dom: Domain, pts) -> np.ndarray:
    """Vectorised ``boundary_distance`` without the membership check (may be <= 0)."""
    return -np.asarray(dom.defining_value(np.asarray(pts)))


def supporting_functional_at(dom: Domain, xi, tol_bd: float = DEFAULT.tol_bd) -> SupportFunctional:
    xi = dom.check(xi)
    tol = dom.tol(tol_bd)
    if abs(float(dom.defining_value(xi))) > tol:
        raise DomainError("point is not on the boundary")
    return _support_at(dom, xi, tol)


def _support_at(dom, xi, tol):
    if isinstance(dom, Ball):
        return SupportFunctional.through(xi / np.linalg.norm(xi), xi)
    if isinstance(dom, Polydisc):
        mods = np.abs(xi)
        hits = np.nonzero(mods >= 1.0 - tol)[0]
        if hits.size == 0:
            raise DomainError("no coordinate has modulus 1")
        j = int(hits[0])
        n = np.zeros(dom.dim, dtype=np.complex128)
        n[j] = xi[j] / mods[j]
        return SupportFunctional.through(n, xi)
    if isinstance(dom, Product):
        for f, b in zip(dom.factors, dom.blocks):
            if float(f.defining_value(xi[b])) >= -tol:
                sub = _support_at(f, xi[b], tol)
                n = np.zeros(dom.dim, dtype=np.complex128)
                n[b] = sub.n
                return SupportFunctional.through(n, xi)
        raise DomainError("no factor is at the boundary")
    if isinstance(dom, FunctionalHull):
        n = dom.normals
        vals = (np.real(np.conj(n) @ xi) - dom.offsets) / np.linalg.norm(n, axis=1)
        k = int(np.argmax(vals))
        return SupportFunctional.through(n[k], xi)
    raise TypeError(f"unsupported domain {dom!r}")


def boundary_hit(dom: Domain, start, direction) -> np.ndarray:
    """First boundary point on the ray ``start + s*direction``, s > 0."""
    start = dom.check(start)
    d = np.asarray(direction, dtype=np.complex128)
    nd = np.linalg.norm(d)
    if nd == 0:
        raise DomainError("zero direction")
    d = d / nd

    def g(s):
        return float(dom.defining_value(start + s * d))

    hi = dom.diameter * 1.01 + 1e-12
    while g(hi) < 0:
        hi *= 2
    s = optimize.brentq(g, 0.0, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    p = start + s * d
    return project_to_boundary(dom, p)


def project_to_boundary(dom: Domain, z) -> np.ndarray:
    """Nearest boundary point for interior points (exact for all variants)."""
    z = np.array(z, dtype=np.complex128)
    if isinstance(dom, Ball):
        r = np.linalg.norm(z)
        return z / r if r > 0 else np.eye(dom.dim, dtype=np.complex128)[0]
    if isinstance(dom, Polydisc):
        j = int(np.argmax(np.abs(z)))
        m = abs(z[j])
        z[j] = z[j] / m if m > 0 else 1.0
        return z
    if isinstance(dom, Product):
        vals = [float(f.defining_value(z[b])) for f, b in zip(dom.factors, dom.blocks)]
        k = int(np.argmax(vals))
        b = dom.blocks[k]
        z[b] = project_to_boundary(dom.factors[k], z[b])
        return z
    if isinstance(dom, FunctionalHull):
        n = dom.normals
        scale = np.linalg.norm(n, axis=1)
        vals = (np.real(np.conj(n) @ z) - dom.offsets) / scale
        k = int(np.argmax(vals))
        return z - vals[k] * n[k] / scale[k]
    raise TypeError(f"unsupported domain {dom!r}")


def segment_location(dom: Domain, p, q, samples: int = 257,
                     tol_bd: float = DEFAULT.tol_bd) -> Segment:
    p, q = dom.check(p), dom.check(q)
    t = np.arange(1, samples + 1) / (samples + 1)
    pts = t[:, None] * p + (1 - t[:, None]) * q
    g = np.asarray(dom.defining_value(pts))
    tol = dom.tol(tol_bd)
    if np.all(g < -tol):
        return Segment.INTERIOR
    if np.all(np.abs(g) <= tol):
        return Segment.BOUNDARY
    return Segment.MIXED


@dataclass(frozen=True)
class LineTest:
    """Outcome of the numeric search for a point of a complex line inside a domain."""

    disjoint: bool
    min_value: float
    argmin: tuple
    certified: bool = False  # decided by a closed form rather than a numeric search

    def __bool__(self):
        return self.disjoint


def complex_line_disjoint(dom: Domain, p, q, grid: int = 41,
                          tol_bd: float = DEFAULT.tol_bd) -> LineTest:
    """Does the complex line ``q + C (p - q)`` miss the open domain?

    Multi-start search over the line parameter: a ``grid x grid`` lattice
    on the disc of parameters whose image lies within ``2 diam`` of ``q``,
    then coordinate golden-section descent from the best lattice points.
    """
    p, q = dom.check(p), dom.check(q)
    d = p - q
    nd = np.linalg.norm(d)
    if nd == 0:
        raise DomainError("p and q must differ")
    tol = dom.tol(tol_bd)
    if dom.is_model:
        # exact: some ball block of the line stays outside the open unit ball
        for b in model_blocks(dom):
            qb, db = q[b], d[b]
            ndb = float(np.linalg.norm(db))
            if ndb <= tol:
                gap = float(np.linalg.norm(qb))
                foot = qb
            else:
                lam = -complex(inner(qb, db)) / ndb ** 2
                foot = qb + lam * db
                gap = float(np.linalg.norm(foot))
            if gap >= 1.0 - tol:
                pt = np.array(q, dtype=np.complex128)
                pt[b] = foot
                return LineTest(True, float(dom.defining_value(pt)), tuple(pt), certified=True)
    R = 2.0 * dom.diameter / nd
    xs = np.linspace(-R, R, grid)
    X, Y = np.meshgrid(xs, xs)
    lam = (X + 1j * Y).ravel()
    lam = lam[np.abs(lam) <= R]
    vals = np.asarray(dom.defining_value(q + lam[:, None] * d))

    def g(x, y):
        return float(dom.defining_value(q + complex(x, y) * d))

    best = int(np.argmin(vals))
    if vals[best] < -tol:
        return LineTest(False, float(vals[best]), tuple(q + lam[best] * d))

    h = xs[1] - xs[0]
    best_val, best_pt = float(vals[best]), lam[best]
    for idx in np.argsort(vals)[:3]:
        x, y = lam[idx].real, lam[idx].imag
        val = g(x, y)
        step = h
        for _ in range(60):
            x = optimize.minimize_scalar(lambda s: g(s, y), bounds=(x - step, x + step),
                                         method="bounded", options={"xatol": 1e-12}).x
            y = optimize.minimize_scalar(lambda s: g(x, s), bounds=(y - step, y + step),
                                         method="bounded", options={"xatol": 1e-12}).x
            new = g(x, y)
            if val - new < 1e-14:
                step *= 0.5
                if step < 1e-10 * max(R, 1.0):
                    val = min(val, new)
                    break
            val = min(val, new)
        if val < best_val:
            best_val, best_pt = val, complex(x, y)
        if best_val < -tol:
            break
    return LineTest(best_val >= -tol, best_val, tuple(q + best_pt * d))


def sample_boundary(dom: Domain, count: int, rng: np.random.Generator) -> np.ndarray:
    """Boundary points hit by rays from the centre in random directions."""
    v = rng.standard_normal((count, dom.dim)) + 1j * rng.standard_normal((count, dom.dim))
    hits = boundary_hits(dom, dom.center, v)
    return np.array([project_to_boundary(dom, p) for p in hits])


def sample_interior(dom: Domain, count: int, rng: np.random.Generator,
                    shrink: float = 0.999) -> np.ndarray:
    """Random interior points: boundary rays from the centre, scaled by U^(1/(2N))."""
    c = dom.center
    bd = sample_boundary(dom, count, rng)
    s = shrink * rng.random(count) ** (1.0 / (2 * dom.dim))
    return c + s[:, None] * (bd - c)


def polyhedral_ball(normals: Sequence) -> FunctionalHull:
    """Hull circumscribing the unit ball, one tangent facet per unit normal."""
    fs = []
    for n in normals:
        n = as_point(n)
        n = n / np.linalg.norm(n)
        fs.append(SupportFunctional.through(n, n))
    dim = len(fs[0].normal)
    return FunctionalHull(dim, tuple(fs), tuple(np.zeros(dim)), box=10.0)


def symmetric_ball_hull() -> FunctionalHull:
    """64-facet circumscribed approximation of the unit ball of C^2.

    32 facets are tangent along the slice {z2 = 0}, 16 along {z1 = 0} and
    16 are mixed.  The facet set is invariant under (z1, z2) -> (z1, -z2),
    so the projection onto the first coordinate equals the slice
    {z2 = 0}, a regular 32-gon of inradius 1.
    """
    normals = [(np.exp(2j * np.pi * k / 32), 0) for k in range(32)]
    normals += [(0, np.exp(2j * np.pi * k / 16)) for k in range(16)]
    h = 1 / math.sqrt(2)
    normals += [(h * 1j ** a, h * 1j ** b) for a in range(4) for b in range(4)]
    return polyhedral_ball(normals)


def boundary_hits(dom: Domain, start, directions, iters: int = 64) -> np.ndarray:
    """Vectorised ray casting: for each direction the last bisection point inside.

    Returns points on ``start + s*d`` with ``s`` within ``2^-iters`` (relative)
    of the exit parameter, always on the inner side of the boundary.
    """
    start = dom.check(start)
    d = np.atleast_2d(np.asarray(directions, dtype=np.complex128))
    nd = np.linalg.norm(d, axis=1)
    if np.any(nd == 0):
        raise DomainError("zero direction")
    d = d / nd[:, None]
    lo = np.zeros(len(d))
    hi = np.full(len(d), dom.diameter * 1.01 + 1e-12)
    while True:
        out = np.asarray(dom.defining_value(start + hi[:, None] * d)) >= 0
        if out.all():
            break
        hi[~out] *= 2
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        inside = np.asarray(dom.defining_value(start + mid[:, None] * d)) < 0
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return start + lo[:, None] * d
