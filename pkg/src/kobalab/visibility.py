"""Numeric probes of essential, strong and complex visibility.

Compact sets are Kobayashi balls around a base point, and a probe
reports the radius it needed.  Endpoint sequences approach the two
boundary points, and for each index we build one or more geodesic
segments and measure how close they come to the base point.

On products, geodesics are far from unique: the block realising the
distance must move at unit speed, but every other block only has to
move no faster.  The adversarial family sends each slack block as far
away as its distance budget allows (this reproduces the bidisc Example);
the inward family sends it through its own centre.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import domains as dm
from . import geodesics as geo
from . import metric
from .domains import Domain, DomainError, Segment
from .tolerances import DEFAULT, DEFAULT_BUDGET

FINITE = "Finite"
ESCAPING = "Escaping"
INCONCLUSIVE = "Inconclusive"

ESCAPE_RADIUS = 2.0
ESCAPE_RUN = 6  # strictly increasing over this many consecutive doublings


# -- closest approach ----------------------------------------------------------------

def _distances_to(dom, pts, base, budget):
    if dom.is_model:
        return metric.model_distance(dom, pts, np.broadcast_to(base, pts.shape))
    return np.array([metric.kobayashi_distance(dom, p, base, budget).mid for p in pts])


def closest_approach_argmin(path: geo.GeodesicPath, base, grid: int = 257, xtol: float = 1e-13,
                            horizon: float = 5.0, budget: int = DEFAULT_BUDGET):
    """(min_t k(path(t), base), argmin t); grid search, then golden section to ``xtol``."""
    dom = path.dom
    base = dom.check(base)
    if not dom.contains(base):
        raise DomainError("base must lie in the domain")
    hi = 1.0 if path.kind == geo.SEGMENT else horizon
    ts = np.linspace(0.0, hi, grid)
    vals = _distances_to(dom, path.sample(ts), base, budget)
    i = int(np.argmin(vals))
    best_t, best = float(ts[i]), float(vals[i])
    lo_t, hi_t = ts[max(i - 1, 0)], ts[min(i + 1, grid - 1)]

    def f(t):
        return float(_distances_to(dom, path.sample(np.array([t])), base, budget)[0])

    # golden section: robust at the kinks where two blocks trade the max
    g = (math.sqrt(5) - 1) / 2
    a, b = float(lo_t), float(hi_t)
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    t, v = (c, fc) if fc <= fd else (d, fd)
    if v < best:
        best_t, best = t, v
    return best, best_t


def closest_approach(path: geo.GeodesicPath, base, **kw) -> float:
    return closest_approach_argmin(path, base, **kw)[0]


def example_crossing_value(r: float) -> float:
    """Closed-form closest approach of the bidisc Example curve to the origin."""
    return math.atanh((1 - math.sqrt((1 - r) * (1 + r))) / r)


# -- endpoint sequences ----------------------------------------------------------------

def radial_sequence(dom: Domain, p, k: int, center=None):
    c = dom.center if center is None else dom.check(center)
    return c + (1 - 2.0 ** (-k)) * (dom.check(p) - c)


def tangential_sequence(dom: Domain, p, k: int):
    """Unimodular blocks of p approach radially, the others slide in at rate sqrt(2^-k)."""
    p = dom.check(p)
    out = np.array(p, dtype=np.complex128)
    eps = 2.0 ** (-k)
    for b in metric._blocks(dom):
        nb = float(np.linalg.norm(p[b]))
        if nb >= 1 - dom.tol():
            out[b] = (1 - eps) * p[b]
        else:
            out[b] = p[b] * (1 - math.sqrt(eps))
    return out


# -- segment families ------------------------------------------------------------------

def _ball_path(z, w):
    """Unit-distance-speed geodesic of a ball block: s -> point at distance s from z."""
    d = metric.ball_distance(z, w)
    if d == 0:
        return (lambda s: np.broadcast_to(z, np.shape(s) + z.shape).copy()), 0.0
    phi, _ = geo._ball_geodesic(z, w)
    return (lambda s: phi(np.tanh(np.clip(s, 0.0, d)))), d


def _toward(z, target):
    """Unit-speed geodesic of a ball block from z heading to ``target`` (closed ball)."""
    y = geo.ball_involution(z, target)
    ny = float(np.linalg.norm(y))
    e = y / ny

    def path(s):
        return geo.ball_involution(z, np.tanh(np.asarray(s))[..., None] * e)
    return path


def _detour(zf, wf, L, target):
    """Block path z -> m -> w of total length <= L with m on the ray towards ``target``.

    m is pushed as far along the ray as the length budget allows.
    """
    out = _toward(zf, target)

    def cost(tau):
        return tau + metric.ball_distance(out(tau), wf)

    if cost(np.zeros(1))[0] > L + 1e-12:
        return None
    # nested grids: keep the last feasible node, zoom into the next cell
    lo, hi = 0.0, L
    for _ in range(5):
        taus = np.linspace(lo, hi, 65)
        ok = np.nonzero(cost(taus) <= L)[0]
        j = int(ok[-1])
        lo, hi = taus[j], taus[min(j + 1, 64)]
        if j == 64:
            break
    tau = float(lo)
    m = out(np.array([tau]))[0]
    back, back_len = _ball_path(m, wf)

    def path(s):
        s = np.asarray(s, dtype=float)
        first = out(np.minimum(s, tau))
        second = back(np.clip(s - tau, 0.0, back_len))
        return np.where((s <= tau)[..., None], first, second)
    return path, tau


def _assemble(dom, blocks, block_paths, L, kind=geo.SEGMENT):
    def curve(t):
        s = np.asarray(t, dtype=float) * L
        out = np.empty(s.shape + (dom.dim,), dtype=np.complex128)
        for b, f in zip(blocks, block_paths):
            out[..., b] = f(s)
        return out
    return geo.GeodesicPath(dom, curve, kind, 0.0)


def detour_segments(dom: Domain, z, w, mode: str = "out", directions: int = 8):
    """Geodesic segments z -> w of a model product whose slack blocks take detours.

    ``mode="out"`` pushes each slack block towards the boundary point
    that lets it travel farthest; ``mode="in"`` routes it through the
    block centre when the budget allows, otherwise as close as possible.
    """
    blocks = metric._blocks(dom)
    if len(blocks) < 2:
        return []
    dists = [metric.ball_distance(z[b], w[b]) for b in blocks]
    star = int(np.argmax(dists))
    L = dists[star]
    if L == 0:
        return []
    paths = []
    for b, d in zip(blocks, dists):
        zf, wf = z[b], w[b]
        if b == blocks[star]:
            paths.append(_ball_path(zf, wf)[0])
            continue
        best = None
        for target in _detour_targets(zf, wf, mode, directions):
            got = _detour(zf, wf, L, target)
            if got is None:
                continue
            f, tau = got
            m = f(np.array([tau]))[0]
            score = tau if mode == "out" else -metric.ball_distance(m, np.zeros_like(m))
            if best is None or score > best[0]:
                best = (score, f)
        paths.append(best[1] if best is not None else _ball_path(zf, wf)[0])
    return [_assemble(dom, blocks, paths, L)]


def _detour_targets(zf, wf, mode, directions):
    m = len(zf)
    if mode == "in":
        if np.allclose(zf, 0):
            return [wf] if not np.allclose(wf, 0) else [np.eye(m, dtype=np.complex128)[0]]
        # the ray through the centre, continued
        y = -zf / np.linalg.norm(zf)
        return [y]
    out = []
    for k in range(directions):
        u = np.zeros(m, dtype=np.complex128)
        u[k % m] = np.exp(2j * np.pi * k / directions)
        out.append(u)
    return out


# -- verdicts --------------------------------------------------------------------------

@dataclass
class VisibilityVerdict:
    pair: tuple
    mode: str
    status: str
    approach_radius: float
    evidence: list = field(default_factory=list)  # (family, k, r_k, closest, argmin t)
    base: tuple = ()

    @property
    def radius(self):
        return self.approach_radius if self.status == FINITE else self.status

    def to_json(self):
        return {"pair": [dm.complex_to_json(np.asarray(p)) for p in self.pair], "mode": self.mode,
                "status": self.status,
                "approach_radius": float(self.approach_radius) if self.status == FINITE else self.status,
                "max_closest_approach": float(self.approach_radius),
                "base": dm.complex_to_json(np.asarray(self.base))}

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["family", "k", "r_k", "closest_approach", "argmin_t"])
            for row in self.evidence:
                w.writerow(row)


def _family_status(values, k_radius):
    """Escaping when the tail grows strictly over ESCAPE_RUN steps past the radius."""
    v = np.asarray(values)
    if len(v) > ESCAPE_RUN and np.all(np.diff(v[-ESCAPE_RUN - 1:]) > 0) \
            and v[-1] > max(ESCAPE_RADIUS, k_radius):
        return ESCAPING
    if len(v) > 2 and np.all(np.diff(v[-3:]) > 0) and v[-1] > max(ESCAPE_RADIUS, k_radius):
        return INCONCLUSIVE
    return FINITE


def _combine(pair, mode, families, k_radius, base):
    evidence = [row for rows in families.values() for row in rows]
    statuses = [_family_status([r[3] for r in rows], k_radius) for rows in families.values()]
    radius = max(r[3] for r in evidence)
    status = ESCAPING if ESCAPING in statuses else INCONCLUSIVE if INCONCLUSIVE in statuses else FINITE
    return VisibilityVerdict(tuple(map(tuple, pair)), mode, status, radius, evidence, tuple(base))


def _sequences(dom, p, q, ks, tangential):
    out = {"radial": [(k, radial_sequence(dom, p, k), radial_sequence(dom, q, k)) for k in ks]}
    if tangential and len(metric._blocks(dom)) > 1:
        out["tangential"] = [(k, tangential_sequence(dom, p, k), tangential_sequence(dom, q, k))
                             for k in ks]
    return out


def _check_pair(dom, p, q):
    p, q = dom.check(p), dom.check(q)
    if not (dom.on_boundary(p) and dom.on_boundary(q)):
        raise DomainError("p and q must lie on the boundary")
    if np.allclose(p, q, rtol=0, atol=dom.tol()):
        raise DomainError("p and q must differ")
    return p, q


def strong_visibility_probe(dom: Domain, p, q, K_radius: float = ESCAPE_RADIUS, families: int = 20,
                            budget: int = DEFAULT_BUDGET, base=None, tangential: bool = True):
    """Largest closest approach over several geodesic families joining sequences to p, q.

    ``families`` is the number of sequence indices k = 1..families
    (r_k = 1 - 2^-k) tested for every family.
    """
    p, q = _check_pair(dom, p, q)
    base = dom.center if base is None else dom.check(base)
    ks = range(1, families + 1)
    out = {}
    for seq_name, seq in _sequences(dom, p, q, ks, tangential and dom.is_model).items():
        rows_c, rows_o = [], []
        for k, z, w in seq:
            seg = geo.geodesic_segment(dom, z, w, budget)
            c, t = closest_approach_argmin(seg, base, budget=budget)
            rows_c.append((f"{seq_name}/canonical", k, 1 - 2.0 ** -k, c, t))
            if dom.is_model:
                for d in detour_segments(dom, z, w, "out"):
                    c2, t2 = closest_approach_argmin(d, base)
                    rows_o.append((f"{seq_name}/detour", k, 1 - 2.0 ** -k, c2, t2))
        out[f"{seq_name}/canonical"] = rows_c
        if rows_o:
            out[f"{seq_name}/detour"] = rows_o
    return _combine((p, q), "Strong", out, K_radius, base)


def essential_visibility_probe(dom: Domain, p, q, budget: int = DEFAULT_BUDGET, depth: int = 20,
                               base=None, tangential: bool = True):
    """For each k, the best (closest) geodesic among the candidates the probe can build."""
    p, q = _check_pair(dom, p, q)
    base = dom.center if base is None else dom.check(base)
    out = {}
    for seq_name, seq in _sequences(dom, p, q, range(1, depth + 1), tangential and dom.is_model).items():
        rows = []
        for k, z, w in seq:
            cands = [geo.geodesic_segment(dom, z, w, budget)]
            if dom.is_model:
                cands += detour_segments(dom, z, w, "in") + detour_segments(dom, z, w, "out")
            best = min((closest_approach_argmin(c, base, budget=budget) for c in cands),
                       key=lambda x: x[0])
            rows.append((f"{seq_name}/best", k, 1 - 2.0 ** -k, best[0], best[1]))
        out[f"{seq_name}/best"] = rows
    return _combine((p, q), "Essential", out, ESCAPE_RADIUS, base)


def complex_visibility_probe(dom: Domain, p, q, budget: int = DEFAULT_BUDGET, depth: int = 20,
                             base=None, grid: int = 33):
    """Closest approach of complex geodesics through the endpoint sequences."""
    if not dom.is_model:
        raise NotImplementedError("complex geodesics are constructed on model domains only")
    p, q = _check_pair(dom, p, q)
    base = dom.center if base is None else dom.check(base)
    xs = np.linspace(-1, 1, grid)
    X, Y = np.meshgrid(xs, xs)
    zeta = (X + 1j * Y).ravel()
    zeta = zeta[np.abs(zeta) <= 0.999]
    out = {}
    for seq_name, seq in _sequences(dom, p, q, range(1, depth + 1), True).items():
        rows = []
        for k, z, w in seq:
            cg = geo.complex_geodesic_through(dom, z, w)
            vals = metric.model_distance(dom, cg.phi(zeta), np.broadcast_to(base, (len(zeta), dom.dim)))
            i = int(np.argmin(vals))
            # the geodesic segment lies on the disc, so it is a candidate too
            seg_c, _ = closest_approach_argmin(geo.geodesic_segment(dom, z, w), base)
            rows.append((f"{seq_name}/complex", k, 1 - 2.0 ** -k, float(min(vals[i], seg_c)),
                         float(abs(zeta[i]))))
        out[f"{seq_name}/complex"] = rows
    return _combine((p, q), "Complex", out, ESCAPE_RADIUS, base)


# -- limit sets and the dichotomy ----------------------------------------------------------

@dataclass
class LimitSetEstimate:
    points: np.ndarray  # boundary points (cluster representatives)
    multiplicity: np.ndarray
    source: list
    eps_cluster: float
    h_cluster: float

    def to_json(self):
        return {"points": [dm.complex_to_json(p) for p in self.points],
                "multiplicity": [int(m) for m in self.multiplicity], "source": list(self.source),
                "eps_cluster": self.eps_cluster, "h_cluster": self.h_cluster}


def farthest_point_clusters(pts, h):
    """Greedy farthest-point representatives at resolution h; returns (reps idx, labels)."""
    flat = np.concatenate([pts.real, pts.imag], axis=1)
    chosen = [0]
    dist = np.linalg.norm(flat - flat[0], axis=1)
    label = np.zeros(len(flat), dtype=int)
    while True:
        j = int(np.argmax(dist))
        if dist[j] <= h:
            break
        chosen.append(j)
        dj = np.linalg.norm(flat - flat[j], axis=1)
        closer = dj < dist
        label[closer] = len(chosen) - 1
        dist = np.minimum(dist, dj)
    return np.array(chosen), label


def limit_set_estimate(paths, eps_cluster: float | None = None, h_cluster: float | None = None,
                       samples: int = 2049, names=None) -> LimitSetEstimate:
    """Cluster the near-boundary samples of a family of paths."""
    paths = list(paths)
    if not paths:
        raise ValueError("need at least one path")
    dom = paths[0].dom
    diam = dom.diameter
    eps_cluster = 1e-3 * diam if eps_cluster is None else eps_cluster
    h_cluster = 1e-2 * diam if h_cluster is None else h_cluster
    ts = np.linspace(0.0, 1.0, samples)
    near = []
    for path in paths:
        pts = path.sample(ts) if path.kind == geo.SEGMENT else path.sample(ts * 20.0)
        bd = dm.boundary_distance_many(dom, pts)
        near.append(pts[bd <= eps_cluster])
    near = np.concatenate(near) if near else np.zeros((0, dom.dim), complex)
    source = list(names) if names is not None else [f"path{i}" for i in range(len(paths))]
    if len(near) == 0:
        return LimitSetEstimate(np.zeros((0, dom.dim), complex), np.zeros(0, int), source,
                                eps_cluster, h_cluster)
    idx, label = farthest_point_clusters(near, h_cluster)
    reps = np.array([dm.project_to_boundary(dom, near[i]) for i in idx])
    mult = np.bincount(label, minlength=len(idx))
    return LimitSetEstimate(reps, mult, source, eps_cluster, h_cluster)


CASE1 = "Case1"
CASE2 = "Case2"
VIOLATION = "Violation"


@dataclass(frozen=True)
class PairClass:
    p: tuple
    q: tuple
    verdict: str
    segment: str
    line: dm.LineTest | None

    def to_json(self):
        out = {"p": dm.complex_to_json(np.asarray(self.p)), "q": dm.complex_to_json(np.asarray(self.q)),
               "verdict": self.verdict, "segment": self.segment}
        if self.line is not None:
            out["line"] = {"disjoint": self.line.disjoint, "min_value": self.line.min_value,
                           "certified": self.line.certified,
                           "argmin": dm.complex_to_json(np.asarray(self.line.argmin))}
        return out


def conjecture1_classify(dom: Domain, gamma: LimitSetEstimate, tol_bd: float = DEFAULT.tol_bd):
    """Case1 (open chord inside), Case2 (chord in the boundary, complex line outside) or Violation."""
    pts = np.asarray(gamma.points)
    if len(pts) == 0:
        raise ValueError("the limit set estimate is empty")
    out = []
    for i, j in itertools.combinations(range(len(pts)), 2):
        p, q = pts[i], pts[j]
        seg = dm.segment_location(dom, p, q, tol_bd=tol_bd)
        line = None
        if seg is Segment.INTERIOR:
            verdict = CASE1
        elif seg is Segment.BOUNDARY:
            line = dm.complex_line_disjoint(dom, p, q, tol_bd=tol_bd)
            verdict = CASE2 if line.disjoint else VIOLATION
        else:
            verdict = VIOLATION
        out.append(PairClass(tuple(p), tuple(q), verdict, seg.value, line))
    return out
