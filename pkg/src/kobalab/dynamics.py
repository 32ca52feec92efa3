"""Holomorphic self-maps, orbits, target sets and horosphere diagnostics.

Maps are small expression trees built from disc automorphisms, ball
automorphisms, linear maps, coordinate-wise products, compositions and
conjugations through a complex geodesic.  Every expression evaluates on
arrays of shape (..., N).  Coordinate indices (projections, j0) and
iterate indices (record sequences) are 1-based, as in the mathematics.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np

from . import domains as dm
from . import geodesics as geo
from . import metric
from .domains import Domain, DomainError
from .tolerances import DEFAULT, DEFAULT_BUDGET, Tolerances
from .visibility import farthest_point_clusters

PASS = "PASS"
FAIL = "FAIL"
INCONCLUSIVE = "Inconclusive"
CONVERGES_TO = "ConvergesTo"
MULTIPLE_POINTS = "MultiplePoints"

ESCAPE_DISTANCE = 5.0  # orbit counts as fixed-point free once it gets this far from its start
SEPARATION = 10.0  # cluster separation, in units of the convergence epsilon
MIN_TAIL = 8


class EscapeError(DomainError):
    """An image point left the closed domain by more than the boundary tolerance."""


def _cjson(x) -> list:
    x = complex(x)
    return [x.real, x.imag]


def _cparse(x) -> complex:
    if isinstance(x, (list, tuple)):
        if len(x) != 2:
            raise ValueError("complex numbers are [re, im] pairs")
        return complex(float(x[0]), float(x[1]))
    return complex(float(x))


# -- expressions -------------------------------------------------------------------

_KINDS: dict = {}


def _register(cls):
    _KINDS[cls.kind] = cls
    return cls


class MapExpr:
    """Base class; subclasses implement ``__call__`` on arrays of shape (..., N)."""

    kind: ClassVar[str] = ""

    def __call__(self, z):
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError


def _disc_in(z):
    z = np.asarray(z, dtype=np.complex128)
    if z.shape[-1] != 1:
        raise DomainError("disc maps act on one coordinate")
    return z[..., 0]


@_register
@dataclass(frozen=True)
class DiscMobius(MapExpr):
    """z -> e^{i theta} (z - a) / (1 - conj(a) z); a rotation when a = 0."""

    kind: ClassVar[str] = "disc_mobius"
    a: complex = 0j
    theta: float = 0.0

    def __post_init__(self):
        if abs(self.a) >= 1:
            raise ValueError("a must lie in the unit disc")

    def __call__(self, z):
        u = _disc_in(z)
        a = self.a
        return (np.exp(1j * self.theta) * (u - a) / (1 - np.conj(a) * u))[..., None]

    def to_json(self):
        return {"map": self.kind, "a": _cjson(self.a), "theta": self.theta}

    @classmethod
    def from_json(cls, obj):
        return cls(_cparse(obj.get("a", 0)), float(obj.get("theta", 0.0)))


@_register
@dataclass(frozen=True)
class DiscHyperbolic(MapExpr):
    """Hyperbolic automorphism with attracting point sigma and repelling point -sigma.

    In the half-plane coordinate H = (1 + u)/(1 - u), u = conj(sigma) z, it is
    H -> e^step H, so 0 goes to tanh(step/2) sigma.
    """

    kind: ClassVar[str] = "disc_hyperbolic"
    sigma: complex = 1 + 0j
    step: float = 1.0

    def __post_init__(self):
        if abs(abs(self.sigma) - 1) > 1e-12:
            raise ValueError("sigma must be unimodular")
        if not self.step > 0:
            raise ValueError("step must be positive")

    def __call__(self, z):
        u = np.conj(self.sigma) * _disc_in(z)
        e = math.exp(self.step)
        out = ((1 + u) * e - (1 - u)) / ((1 + u) * e + (1 - u))
        return (self.sigma * out)[..., None]

    def to_json(self):
        return {"map": self.kind, "sigma": _cjson(self.sigma), "step": self.step}

    @classmethod
    def from_json(cls, obj):
        return cls(_cparse(obj.get("sigma", 1)), float(obj.get("step", 1.0)))


@_register
@dataclass(frozen=True)
class DiscParabolic(MapExpr):
    """Parabolic automorphism fixing sigma: H -> H + i step in the half-plane coordinate."""

    kind: ClassVar[str] = "disc_parabolic"
    sigma: complex = 1 + 0j
    step: float = 1.0

    def __post_init__(self):
        if abs(abs(self.sigma) - 1) > 1e-12:
            raise ValueError("sigma must be unimodular")
        if self.step == 0:
            raise ValueError("step must be non-zero")

    def __call__(self, z):
        u = np.conj(self.sigma) * _disc_in(z)
        ib = 1j * self.step
        out = (2 * u + ib * (1 - u)) / (2 + ib * (1 - u))
        return (self.sigma * out)[..., None]

    def to_json(self):
        return {"map": self.kind, "sigma": _cjson(self.sigma), "step": self.step}

    @classmethod
    def from_json(cls, obj):
        return cls(_cparse(obj.get("sigma", 1)), float(obj.get("step", 1.0)))


@_register
@dataclass(frozen=True)
class Power(MapExpr):
    """z -> z^k on the disc."""

    kind: ClassVar[str] = "power"
    k: int = 2

    def __call__(self, z):
        return (_disc_in(z) ** self.k)[..., None]

    def to_json(self):
        return {"map": self.kind, "k": self.k}

    @classmethod
    def from_json(cls, obj):
        return cls(int(obj["k"]))


@_register
@dataclass(frozen=True)
class Constant(MapExpr):
    """The constant map with the given value."""

    kind: ClassVar[str] = "constant"
    value: tuple = (0j,)

    def __call__(self, z):
        z = np.asarray(z)
        v = np.asarray(self.value, dtype=np.complex128)
        return np.broadcast_to(v, z.shape[:-1] + v.shape).copy()

    def to_json(self):
        return {"map": self.kind, "value": [_cjson(v) for v in self.value]}

    @classmethod
    def from_json(cls, obj):
        return cls(tuple(_cparse(v) for v in obj["value"]))


@_register
@dataclass(frozen=True)
class CoordMap(MapExpr):
    """Coordinate-wise product of one-variable maps."""

    kind: ClassVar[str] = "coord_map"
    maps: tuple = ()

    def __call__(self, z):
        z = np.asarray(z, dtype=np.complex128)
        if z.shape[-1] != len(self.maps):
            raise DomainError("coord_map dimension mismatch")
        return np.concatenate([f(z[..., j:j + 1]) for j, f in enumerate(self.maps)], axis=-1)

    def to_json(self):
        return {"map": self.kind, "maps": [f.to_json() for f in self.maps]}

    @classmethod
    def from_json(cls, obj):
        return cls(tuple(map_from_json(m) for m in obj["maps"]))


@_register
@dataclass(frozen=True)
class BallAutomorphism(MapExpr):
    """z -> U phi_a(z), with phi_a the involution of the ball swapping a and 0."""

    kind: ClassVar[str] = "ball_automorphism"
    a: tuple = (0j,)
    U: tuple | None = None

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.complex128)
        if np.linalg.norm(a) >= 1:
            raise ValueError("a must lie in the unit ball")
        if self.U is not None:
            U = np.asarray(self.U, dtype=np.complex128)
            if U.shape != (len(a), len(a)) or not np.allclose(U.conj().T @ U, np.eye(len(a)), atol=1e-12):
                raise ValueError("U must be a unitary matrix of matching size")

    def __call__(self, z):
        out = geo.ball_involution(np.asarray(self.a), z)
        if self.U is not None:
            out = out @ np.asarray(self.U, dtype=np.complex128).T
        return out

    def to_json(self):
        obj = {"map": self.kind, "a": [_cjson(v) for v in self.a]}
        if self.U is not None:
            obj["U"] = [[_cjson(v) for v in row] for row in self.U]
        return obj

    @classmethod
    def from_json(cls, obj):
        U = obj.get("U")
        return cls(tuple(_cparse(v) for v in obj["a"]),
                   None if U is None else tuple(tuple(_cparse(v) for v in row) for row in U))


@_register
@dataclass(frozen=True)
class Linear(MapExpr):
    """z -> A z."""

    kind: ClassVar[str] = "linear"
    matrix: tuple = ((1 + 0j,),)

    def __call__(self, z):
        return np.asarray(z, dtype=np.complex128) @ np.asarray(self.matrix, dtype=np.complex128).T

    def to_json(self):
        return {"map": self.kind, "matrix": [[_cjson(v) for v in row] for row in self.matrix]}

    @classmethod
    def from_json(cls, obj):
        return cls(tuple(tuple(_cparse(v) for v in row) for row in obj["matrix"]))


@_register
@dataclass(frozen=True)
class Compose(MapExpr):
    """Composition in mathematical order: Compose((f, g))(z) = f(g(z))."""

    kind: ClassVar[str] = "compose"
    maps: tuple = ()

    def __call__(self, z):
        for f in reversed(self.maps):
            z = f(z)
        return np.asarray(z, dtype=np.complex128)

    def to_json(self):
        return {"map": self.kind, "maps": [f.to_json() for f in self.maps]}

    @classmethod
    def from_json(cls, obj):
        return cls(tuple(map_from_json(m) for m in obj["maps"]))


@_register
@dataclass(frozen=True)
class Projection(MapExpr):
    """z -> z_j (1-based j), a map onto the disc for polydiscs."""

    kind: ClassVar[str] = "projection"
    j: int = 1

    def __post_init__(self):
        if self.j < 1:
            raise ValueError("projection index is 1-based")

    def __call__(self, z):
        z = np.asarray(z, dtype=np.complex128)
        if self.j > z.shape[-1]:
            raise DomainError("projection index exceeds the dimension")
        return z[..., self.j - 1:self.j]

    def to_json(self):
        return {"map": self.kind, "j": self.j}

    @classmethod
    def from_json(cls, obj):
        return cls(int(obj["j"]))


@_register
@dataclass(frozen=True)
class Conjugate(MapExpr):
    """phi o f o rho for the complex geodesic phi through z and w (rho its left inverse)."""

    kind: ClassVar[str] = "conjugate"
    dom: Domain = None
    z: tuple = ()
    w: tuple = ()
    f: MapExpr = None
    _geo: geo.ComplexGeodesic = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_geo", geo.complex_geodesic_through(self.dom, self.z, self.w))

    def __call__(self, z):
        zeta = self._geo.rho(np.asarray(z, dtype=np.complex128))
        return self._geo.phi(self.f(zeta[..., None])[..., 0])

    def to_json(self):
        return {"map": self.kind, "domain": self.dom.to_json(),
                "z": [_cjson(v) for v in self.z], "w": [_cjson(v) for v in self.w],
                "f": self.f.to_json()}

    @classmethod
    def from_json(cls, obj):
        return cls(dm.from_json(obj["domain"]), tuple(_cparse(v) for v in obj["z"]),
                   tuple(_cparse(v) for v in obj["w"]), map_from_json(obj["f"]))


def map_from_json(obj) -> MapExpr:
    try:
        cls = _KINDS[obj["map"]]
    except KeyError:
        raise ValueError(f"unknown map kind {obj.get('map')!r}") from None
    return cls.from_json(obj)


# -- maps with a declared domain ---------------------------------------------------

@dataclass(frozen=True)
class HolomorphicMap:
    """An expression together with its domain and target (the domain by default).

    Construction evaluates the expression on seeded interior samples and
    rejects it if any image leaves the closed target by more than tol_bd.
    """

    expr: MapExpr
    dom: Domain
    target: Domain | None = None
    samples: int = 200
    seed: int = 0
    tol: Tolerances = DEFAULT

    def __post_init__(self):
        if self.target is None:
            object.__setattr__(self, "target", self.dom)
        rng = np.random.default_rng(self.seed)
        pts = dm.sample_interior(self.dom, self.samples, rng)
        img = self.expr(pts)
        if img.shape != (self.samples, self.target.dim):
            raise DomainError(f"map output has dimension {img.shape[-1]}, target has {self.target.dim}")
        g = np.asarray(self.target.defining_value(img))
        if not np.all(np.isfinite(img)) or np.any(g > self.target.tol(self.tol.tol_bd)):
            raise DomainError("map does not send the domain into the target")

    @property
    def is_self_map(self) -> bool:
        return self.target is self.dom or self.target == self.dom

    def __call__(self, z):
        return self.expr(z)

    def to_json(self) -> dict:
        obj = {"expr": self.expr.to_json(), "domain": self.dom.to_json()}
        if not self.is_self_map:
            obj["target"] = self.target.to_json()
        return obj


def evaluate(F: HolomorphicMap, z) -> np.ndarray:
    """F(z) for z in the domain; images outside the closed target beyond tol_bd raise."""
    z = F.dom.check(z)
    if not F.dom.contains(z):
        raise DomainError("point is not inside the domain")
    out = np.asarray(F.expr(z), dtype=np.complex128)
    g = float(F.target.defining_value(out))
    if not np.all(np.isfinite(out)) or g > F.target.tol(F.tol.tol_bd):
        raise EscapeError(f"image left the target (defining value {g:.3g})")
    return out


# -- distances -----------------------------------------------------------------------

def _distances(dom: Domain, P, Q, budget=DEFAULT_BUDGET):
    """(distance, bracket gap) arrays, broadcasting; inf where a point is not interior."""
    P, Q = np.broadcast_arrays(np.asarray(P, dtype=np.complex128), np.asarray(Q, dtype=np.complex128))
    shape = P.shape[:-1]
    if dom.is_model:
        # the same per-block |z|^2 < 1 test the closed forms use
        inside = np.ones(shape, dtype=bool)
        for b in dm.model_blocks(dom):
            inside &= (np.sum(np.abs(P[..., b]) ** 2, axis=-1) < 1) & (np.sum(np.abs(Q[..., b]) ** 2, axis=-1) < 1)
    else:
        inside = (np.asarray(dom.defining_value(P)) < 0) & (np.asarray(dom.defining_value(Q)) < 0)
        inside = np.broadcast_to(inside, shape)
    out = np.full(shape, np.inf)
    gap = np.zeros(shape)
    if dom.is_model:
        if inside.any():
            out[inside] = metric.model_distance(dom, P[inside], Q[inside])
        return out, gap
    for idx in zip(*np.nonzero(inside)):
        b = metric.kobayashi_distance(dom, P[idx], Q[idx], budget=budget)
        out[idx], gap[idx] = b.mid, b.gap
    return out, gap


def _block_distances(dom, z0, z):
    """Per-block distances on a model (inf for blocks on the boundary)."""
    out = []
    for b in dm.model_blocks(dom):
        zb = np.asarray(z)[..., b]
        if np.sum(np.abs(zb) ** 2) < 1:
            out.append(metric.ball_distance(np.asarray(z0)[b], zb))
        else:
            out.append(np.inf)
    return np.array(out)


def record_indices(dist) -> list:
    """1-based indices n at which dist[n] is a strict running maximum (n = 1 always counts).

    ``dist[0]`` is the distance of the start to itself and is ignored.
    """
    out, best = [], -np.inf
    for n in range(1, len(dist)):
        if n == 1 or dist[n] > best:
            out.append(n)
            best = dist[n]
    return out


# -- orbits --------------------------------------------------------------------------

def _clusters(dom, pts, h):
    """Boundary representatives and member counts of points clustered at resolution h."""
    if len(pts) == 0:
        return np.zeros((0, dom.dim), dtype=np.complex128), np.zeros(0, dtype=int)
    idx, label = farthest_point_clusters(pts, h)
    reps = np.array([dm.project_to_boundary(dom, pts[i]) for i in idx])
    return reps, np.bincount(label, minlength=len(idx))


@dataclass(frozen=True)
class OrbitRecord:
    dom: Domain
    z0: np.ndarray
    points: np.ndarray  # F^n(z0), n = 0..len-1
    dist_to_start: np.ndarray  # inf once a point is numerically on the boundary
    gaps: np.ndarray  # bracket gaps (zero on models)
    record_indices: list
    cluster_estimate: np.ndarray
    truncated: str | None = None  # reason the orbit stopped before n_max

    @property
    def n(self) -> int:
        return len(self.points) - 1

    @property
    def escaped(self) -> bool:
        return bool(np.max(self.dist_to_start) > ESCAPE_DISTANCE)

    def boundary_distances(self) -> np.ndarray:
        return dm.boundary_distance_many(self.dom, self.points)

    def tail(self) -> np.ndarray:
        """Last quarter of the orbit (at least MIN_TAIL points)."""
        k = max(MIN_TAIL, len(self.points) // 4)
        return self.points[-k:]

    def csv_rows(self):
        header = ["n"] + [f"{p}_z{j + 1}" for j in range(self.dom.dim) for p in ("re", "im")]
        header += ["dist_to_start", "is_record", "boundary_distance"]
        recs = set(self.record_indices)
        bd = self.boundary_distances()
        rows = []
        for n, z in enumerate(self.points):
            row = [n]
            for c in z:
                row += [float(c.real), float(c.imag)]
            rows.append(row + [float(self.dist_to_start[n]), int(n in recs), float(bd[n])])
        return header, rows

    def write_csv(self, path):
        header, rows = self.csv_rows()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)

    def to_json(self) -> dict:
        return {"z0": [_cjson(v) for v in self.z0], "n": self.n,
                "record_indices": list(self.record_indices),
                "max_dist_to_start": float(np.max(self.dist_to_start)),
                "escaped": self.escaped, "truncated": self.truncated,
                "cluster_estimate": [[_cjson(v) for v in p] for p in self.cluster_estimate]}


def _iterate(F: HolomorphicMap, z0, n_max):
    if not F.is_self_map:
        raise DomainError("orbits need a self-map")
    dom = F.dom
    z = dom.check(z0)
    if not dom.contains(z):
        raise DomainError("start point is not inside the domain")
    tol = dom.tol(F.tol.tol_bd)
    pts, reason = [z], None
    for _ in range(n_max):
        z = np.asarray(F.expr(z), dtype=np.complex128)
        if not np.all(np.isfinite(z)) or float(dom.defining_value(z)) > tol:
            reason = "escaped the closed domain beyond tol_bd"
            break
        pts.append(z)
    return np.array(pts), reason


def iterate_orbit(F: HolomorphicMap, z0, n_max: int, eps: float = 1e-6,
                  budget: int = DEFAULT_BUDGET) -> OrbitRecord:
    """Orbit of z0 with distances to the start, record indices and boundary clusters.

    Points that land on the boundary in floating point (within tol_bd) are
    kept and iterated further; their distance to the start is inf.
    """
    pts, reason = _iterate(F, z0, n_max)
    dom = F.dom
    dist, gaps = _distances(dom, pts[:1], pts, budget)
    bd = dm.boundary_distance_many(dom, pts)
    reps, _ = _clusters(dom, pts[bd <= eps], SEPARATION * eps)
    return OrbitRecord(dom, pts[0], pts, dist, gaps, record_indices(dist), reps, reason)


@dataclass(frozen=True)
class ClusterSet:
    """Boundary clusters of near-boundary orbit points."""

    points: np.ndarray
    counts: np.ndarray
    eps: float
    h: float

    def __len__(self):
        return len(self.points)

    def to_json(self) -> dict:
        return {"eps": self.eps, "h": self.h, "counts": [int(c) for c in self.counts],
                "points": [[_cjson(v) for v in p] for p in self.points]}


def target_set_estimate(F: HolomorphicMap, starts, n_max: int, eps: float = 1e-6,
                        h: float | None = None) -> ClusterSet:
    """Clusters of orbit points within eps of the boundary, pooled over all starts."""
    h = SEPARATION * eps if h is None else h
    near = []
    for z0 in starts:
        pts, _ = _iterate(F, z0, n_max)
        near.append(pts[dm.boundary_distance_many(F.dom, pts) <= eps])
    pts = np.concatenate(near) if near else np.zeros((0, F.dom.dim), dtype=np.complex128)
    reps, counts = _clusters(F.dom, pts, h)
    return ClusterSet(reps, counts, eps, h)


# -- sequential horospheres ----------------------------------------------------------

@dataclass(frozen=True)
class HorosphereSpec:
    """The sequential horosphere E_{z0}({z_n}, R) of a sequence tending to the boundary."""

    dom: Domain
    z0: np.ndarray
    sequence: np.ndarray
    R: float = 1.0

    def __post_init__(self):
        seq = np.atleast_2d(np.asarray(self.sequence, dtype=np.complex128))
        object.__setattr__(self, "sequence", seq)
        object.__setattr__(self, "z0", self.dom.check(self.z0))
        if not self.R > 0:
            raise ValueError("R must be positive")
        if len(seq) == 0 or dm.boundary_distance_many(self.dom, seq[-1:])[0] > 1e-2 * self.dom.diameter:
            raise ValueError("sequence must tend to the boundary")

    @property
    def threshold(self) -> float:
        return 0.5 * math.log(self.R)


@dataclass(frozen=True)
class HorosphereEstimate:
    value: float  # max of the differences over the tail
    differences: np.ndarray
    monotone: bool  # the tail differences are monotone (the limsup is approached cleanly)
    gap: float  # largest bracket gap involved (zero on models)
    member: bool

    def to_json(self) -> dict:
        return {"value": self.value, "monotone": self.monotone, "gap": self.gap,
                "member": self.member, "differences": [float(d) for d in self.differences]}


def horosphere_limsup(spec: HorosphereSpec, z, tail: int, tol: Tolerances = DEFAULT,
                      budget: int = DEFAULT_BUDGET) -> HorosphereEstimate:
    """max over the last ``tail`` entries of k(z, z_n) - k(z0, z_n)."""
    if len(spec.sequence) < tail:
        raise ValueError(f"sequence has {len(spec.sequence)} entries, fewer than tail={tail}")
    z = spec.dom.check(z)
    if not spec.dom.contains(z):
        raise DomainError("point is not inside the domain")
    seq = spec.sequence[-tail:]
    a, ga = _distances(spec.dom, z[None], seq, budget)
    b, gb = _distances(spec.dom, spec.z0[None], seq, budget)
    diff = a - b
    steps = np.diff(diff)
    gap = float(np.max(ga + gb))
    value = float(np.max(diff))
    noise = 1e-12 * max(1.0, float(np.max(np.abs(diff))))
    return HorosphereEstimate(value, diff, bool(np.all(steps >= -noise) or np.all(steps <= noise)), gap,
                              value < spec.threshold - (tol.tol_horo + gap))


@dataclass(frozen=True)
class InvarianceReport:
    status: str
    estimates: np.ndarray  # estimate for n = 1..n_checked
    records: list
    reason: str | None = None

    @property
    def max_estimate(self) -> float:
        return float(np.max(self.estimates)) if len(self.estimates) else float("nan")

    def to_json(self) -> dict:
        return {"status": self.status, "reason": self.reason, "max_estimate": self.max_estimate,
                "n_checked": len(self.estimates), "records_used": list(self.records),
                "estimates": [float(e) for e in self.estimates]}


def horosphere_orbit_invariance_check(F: HolomorphicMap, z0, n_max: int, tail: int,
                                      tol: Tolerances = DEFAULT,
                                      budget: int = DEFAULT_BUDGET) -> InvarianceReport:
    """Check that every F^n(z0), n <= n_max, lies in E_{z0}(records, 0).

    The orbit is continued past n_max until ``tail`` records beyond n_max
    are available (up to 20 (n_max + tail) iterates); the estimate for F^n(z0)
    is the max of k(F^n z0, z_{n_k}) - k(z0, z_{n_k}) over those records.
    """
    pts, _ = _iterate(F, z0, n_max)
    dom = F.dom
    cap = 20 * (n_max + tail)
    # extend in chunks until enough late records exist
    while True:
        dist, gaps = _distances(dom, pts[:1], pts, budget)
        recs = [n for n in record_indices(dist) if n > n_max and np.isfinite(dist[n])]
        if len(recs) >= tail or len(pts) - 1 >= cap:
            break
        more, reason = _iterate(F, pts[-1], n_max + tail)
        pts = np.concatenate([pts, more[1:]])
        if reason is not None or not np.isfinite(dist[-1]):
            dist, gaps = _distances(dom, pts[:1], pts, budget)
            recs = [n for n in record_indices(dist) if n > n_max and np.isfinite(dist[n])]
            break
    if not np.max(dist[np.isfinite(dist)], initial=0.0) > ESCAPE_DISTANCE and not np.isinf(dist).any():
        return InvarianceReport(INCONCLUSIVE, np.zeros(0), [], "orbit did not escape; the map may have fixed points")
    note = None
    if len(recs) < tail:
        # the orbit hit the boundary in floating point before n_max: check the
        # iterates that still have `tail` later finite records
        finite = [n for n in record_indices(dist) if np.isfinite(dist[n])]
        if len(finite) <= tail:
            return InvarianceReport(INCONCLUSIVE, np.zeros(0), recs, f"only {len(recs)} records beyond n_max")
        recs = finite[-tail:]
        n_max = recs[0] - 1
        note = f"orbit reached the boundary numerically; checked n <= {n_max}"
    recs = recs[-tail:]
    seq = pts[recs]
    if dm.boundary_distance_many(dom, seq[-1:])[0] > 1e-2 * dom.diameter:
        return InvarianceReport(INCONCLUSIVE, np.zeros(0), recs, "records did not approach the boundary")
    orbit = pts[1:n_max + 1]
    a, ga = _distances(dom, orbit[:, None], seq[None], budget)
    b, gb = _distances(dom, pts[:1][None], seq[None], budget)
    est = np.max(a - b, axis=1)
    slack = tol.tol_horo + float(np.max(ga + gb))
    return InvarianceReport(PASS if np.all(est <= slack) else FAIL, est, recs, note)


# -- polydisc Julia inequality -------------------------------------------------------

@dataclass(frozen=True)
class JuliaData:
    """Output of the record construction: j0, sigma, the rotation T and q_m."""

    j0: int  # 1-based
    sigma: complex
    rotation: np.ndarray  # diagonal of T (1 for non-unimodular coordinates)
    unimodular: tuple  # 1-based coordinates with |q_j| = 1
    q: np.ndarray
    residual: float  # |w_k^m - w_k'^m| for the last two usable records
    records: list

    def to_json(self) -> dict:
        return {"j0": self.j0, "sigma": _cjson(self.sigma),
                "rotation": [_cjson(v) for v in self.rotation],
                "unimodular": list(self.unimodular), "q": [_cjson(v) for v in self.q],
                "residual": self.residual, "records": list(self.records)}


def julia_record_data(F: HolomorphicMap, m: int, n_max: int = 200,
                      unimodular_tol: float = 1e-6) -> JuliaData | None:
    """Record construction on the polydisc, started at the origin.

    j0 is the coordinate that most often realises the distance at the last
    half of the records (lowest index on ties).  The terminal record n_K with
    that coordinate gives w = F^{n_K}(0); its coordinates within
    ``unimodular_tol`` of the circle are the unimodular ones, and their
    phases form the rotation T.  q_m is F^{n_K - m}(0) with unimodular
    coordinates replaced by their phases (T applied to (1, ..., 1, alpha)).
    Returns None when the orbit does not escape or no record exceeds m.
    """
    dom = F.dom
    if not dm.is_polydisc_like(dom):
        raise DomainError("julia checks need a polydisc")
    orbit = iterate_orbit(F, np.zeros(dom.dim), n_max)
    if not orbit.escaped:
        return None
    recs = [n for n in orbit.record_indices if n > m]
    if not recs:
        return None
    owners = [int(np.argmax(_block_distances(dom, orbit.z0, orbit.points[n]))) for n in recs]
    late = owners[len(owners) // 2:]
    j0 = int(np.argmax(np.bincount(late, minlength=dom.dim)))
    usable = [n for n, j in zip(recs, owners) if j == j0]
    nK = usable[-1]
    w = orbit.points[nK]
    uni = np.abs(w) >= 1 - unimodular_tol
    rot = np.ones(dom.dim, dtype=np.complex128)
    rot[uni] = w[uni] / np.abs(w[uni])
    q = orbit.points[nK - m].copy()
    q[uni] = rot[uni]
    resid = 0.0
    if len(usable) > 1:
        resid = float(np.linalg.norm(orbit.points[usable[-1] - m] - orbit.points[usable[-2] - m]))
    return JuliaData(j0 + 1, complex(rot[j0]), rot, tuple(int(j) + 1 for j in np.nonzero(uni)[0]),
                     q, resid, usable)


def zeta_grid(count: int = 33, radius: float = 0.99) -> np.ndarray:
    """Polar count x count grid of the closed disc of the given radius."""
    r = np.linspace(0.0, radius, count)
    th = 2 * np.pi * np.arange(count) / count
    return (r[:, None] * np.exp(1j * th)[None, :]).ravel()


def _iterate_map(F, x, m):
    for _ in range(m):
        x = F.expr(x)
    return x


@dataclass(frozen=True)
class JuliaReport:
    status: str
    m: int
    max_excess: float  # max of LHS - RHS over the grid
    identity_deviation: float  # max |g(zeta) - zeta|
    sigma_deviation: float  # max |g(zeta) - sigma|
    fixed_point_gap: float  # min |g(zeta) - zeta|, a proxy for interior fixed points
    label: str  # identity | constant | self-map (finite-m sample, not a limit)
    data: JuliaData | None = None
    reason: str | None = None

    def to_json(self) -> dict:
        return {"status": self.status, "m": self.m, "max_excess": self.max_excess,
                "identity_deviation": self.identity_deviation,
                "sigma_deviation": self.sigma_deviation,
                "fixed_point_gap": self.fixed_point_gap, "label": self.label,
                "reason": self.reason, "data": None if self.data is None else self.data.to_json()}


def _julia_quotient(sigma, x):
    return np.abs(sigma - x) ** 2 / (1 - np.abs(x) ** 2)


def julia_polydisc_check(F: HolomorphicMap, m: int, q_m=None, sigma=None, j0: int | None = None,
                         zeta_samples: int = 33, zetas=None, n_max: int = 200,
                         tol: Tolerances = DEFAULT) -> JuliaReport:
    """Compare |sigma - g(zeta)|^2/(1 - |g|^2) with |sigma - zeta|^2/(1 - |zeta|^2).

    g(zeta) is the j0-th coordinate of F^m(zeta q_m).  When the j0 entry of
    q_m is unimodular with phase tau, the right side uses tau zeta in place
    of zeta (the inequality written before the rotation T is undone).
    Missing q_m, sigma or j0 are taken from the record construction.
    """
    nan = float("nan")
    data = None
    if q_m is None or sigma is None or j0 is None:
        data = julia_record_data(F, m, n_max)
        if data is None:
            return JuliaReport(INCONCLUSIVE, m, nan, nan, nan, nan, "", None,
                               "orbit of the origin did not escape (the map may have fixed points)")
        q_m = data.q if q_m is None else q_m
        sigma = data.sigma if sigma is None else sigma
        j0 = data.j0 if j0 is None else j0
    q_m = np.asarray(q_m, dtype=np.complex128)
    zeta = zeta_grid(zeta_samples) if zetas is None else np.asarray(zetas, dtype=np.complex128).ravel()
    if np.any(np.abs(zeta) >= 1):
        raise DomainError("zeta samples must lie in the open disc")
    g = _iterate_map(F, zeta[:, None] * q_m[None], m)[:, j0 - 1]
    if np.any(np.abs(g) >= 1):
        lhs = np.where(np.abs(g) >= 1, np.inf, 0.0)
    else:
        lhs = _julia_quotient(sigma, g)
    # undo the rotation T: in the frame where q_m's unimodular entries are 1,
    # the j0 coordinate of zeta q_m is zeta, so here it is tau zeta
    qj = q_m[j0 - 1]
    tau = qj / abs(qj) if abs(abs(qj) - 1) <= 1e-6 else 1.0
    rhs = _julia_quotient(sigma, tau * zeta)
    excess = float(np.max(lhs - rhs))
    ident = float(np.max(np.abs(g - zeta)))
    sdev = float(np.max(np.abs(g - sigma)))
    label = "identity" if ident <= 1e-6 else "constant" if sdev <= 1e-6 else "self-map"
    status = PASS if excess <= tol.tol_julia else FAIL
    return JuliaReport(status, m, excess, ident, sdev, float(np.min(np.abs(g - zeta))), label, data)


# -- radial limits ---------------------------------------------------------------------

@dataclass(frozen=True)
class RadialEstimate:
    r: np.ndarray
    values: np.ndarray  # |1 - f(r sigma)| / (1 - r)
    estimate: float
    infinite: bool

    def to_json(self) -> dict:
        return {"r": [float(x) for x in self.r], "values": [float(v) for v in self.values],
                "estimate": self.estimate, "infinite": self.infinite}


def radial_limsup_estimate(f, sigma, r_grid=None) -> RadialEstimate:
    """Estimate limsup_{r -> 1} |1 - f(r sigma)| / (1 - r) for f into the disc.

    The default grid is r = 1 - 10^-j, j = 1..8; the estimate is the max of
    the last three values.  Growth by a factor >= 10 across those three
    (the 1/(1 - r) rate of a bounded-away numerator) flags it as infinite.
    """
    expr = f.expr if isinstance(f, HolomorphicMap) else f
    sigma = np.asarray(sigma, dtype=np.complex128)
    r = 1 - 10.0 ** -np.arange(1, 9) if r_grid is None else np.asarray(r_grid, dtype=float)
    vals = np.asarray(expr(r[:, None] * sigma[None]), dtype=np.complex128)
    if vals.shape[-1] != 1:
        raise DomainError("f must take values in the disc")
    vals = vals[:, 0]
    if np.any(np.abs(vals) >= 1):
        raise DomainError("f(r sigma) left the disc")
    q = np.abs(1 - vals) / (1 - r)
    last = q[-3:]
    infinite = bool(last[-1] >= 10 * last[0] and np.all(np.diff(last) > 0))
    return RadialEstimate(r, q, math.inf if infinite else float(np.max(last)), infinite)


# -- slice containment -----------------------------------------------------------------

@dataclass(frozen=True)
class ContainmentReport:
    status: str
    witnesses: list  # per point: 1-based j that works, or None

    def to_json(self) -> dict:
        return {"status": self.status, "witnesses": list(self.witnesses)}


def slice_containment_check(points, xi, tol: float = 1e-4, tol_bd: float = DEFAULT.tol_bd) -> ContainmentReport:
    """Each point must lie in some closed slice: z_j = xi_j if |xi_j| = 1, |z_j| = 1 otherwise."""
    xi = np.asarray(xi, dtype=np.complex128)
    pts = np.atleast_2d(np.asarray(points, dtype=np.complex128))
    if pts.size and pts.shape[-1] != len(xi):
        raise DomainError("dimension mismatch")
    uni = np.abs(np.abs(xi) - 1) <= tol_bd
    witnesses = []
    for z in pts:
        ok = np.where(uni, np.abs(z - xi) <= tol, np.abs(np.abs(z) - 1) <= tol)
        hit = np.nonzero(ok)[0]
        witnesses.append(int(hit[0]) + 1 if hit.size else None)
    return ContainmentReport(PASS if all(w is not None for w in witnesses) else FAIL, witnesses)


# -- Denjoy-Wolff verdicts ---------------------------------------------------------------

@dataclass(frozen=True)
class DWVerdict:
    status: str
    point: np.ndarray | None
    clusters: np.ndarray
    params: dict
    reason: str | None = None

    def to_json(self) -> dict:
        return {"status": self.status, "reason": self.reason, "params": self.params,
                "point": None if self.point is None else [_cjson(v) for v in self.point],
                "clusters": [[_cjson(v) for v in p] for p in self.clusters]}


def denjoy_wolff_verdict(F: HolomorphicMap, starts, n_max: int, eps: float = 1e-6) -> DWVerdict:
    """ConvergesTo(p), MultiplePoints(clusters) or Inconclusive from orbit tails.

    Orbits must get farther than ESCAPE_DISTANCE from their start.  The
    tails (last quarter, at least MIN_TAIL points) converge to p when all
    lie within eps of p.  Distinct clusters at separation 10 eps that show
    up in both halves of every tail give MultiplePoints.
    """
    starts = [F.dom.check(s) for s in starts]
    params = {"n_max": n_max, "eps": eps, "starts": [[_cjson(v) for v in s] for s in starts],
              "escape_distance": ESCAPE_DISTANCE, "separation": SEPARATION * eps}
    empty = np.zeros((0, F.dom.dim), dtype=np.complex128)
    orbits = [iterate_orbit(F, s, n_max, eps) for s in starts]
    if not all(o.escaped for o in orbits):
        return DWVerdict(INCONCLUSIVE, None, empty, params, "orbit did not escape")
    tails = [o.tail() for o in orbits]
    pooled = np.concatenate(tails)
    p = dm.project_to_boundary(F.dom, tails[0][-1])
    if np.max(np.linalg.norm(pooled - p, axis=1)) <= eps:
        return DWVerdict(CONVERGES_TO, p, p[None], params)
    h = SEPARATION * eps
    reps, _ = _clusters(F.dom, pooled, h)
    halves = [t[: len(t) // 2] for t in tails] + [t[len(t) // 2:] for t in tails]
    if len(reps) >= 2 and all(len(farthest_point_clusters(x, h)[0]) >= 2 for x in halves):
        return DWVerdict(MULTIPLE_POINTS, None, reps, params)
    return DWVerdict(INCONCLUSIVE, None, reps, params, "tails neither converge nor split")
