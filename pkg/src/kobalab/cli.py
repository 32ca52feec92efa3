"""Command line entry point: one JSON config in, a directory of artifacts out.

    kobalab run --config exp.json --out results/exp
    kobalab distance --config exp.json --out results/exp   # kind-checked alias

Exit codes: 0 on success (including visibility verdicts), 2 when a check
fails or a Violation is found, 1 on errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import domains as dm
from . import dynamics as dy
from . import geodesics as geo
from . import metric
from . import visibility as vis
from .tolerances import DEFAULT, DEFAULT_BUDGET, Tolerances

SCHEMA = "v1"
KINDS = ("distance", "geodesic", "visibility", "limit-set", "conjecture1",
         "iterate", "horosphere", "julia", "dw-verdict")


class ConfigError(ValueError):
    """A malformed config; ``path`` is the JSON path of the offending key."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    domain: dm.Domain
    parameters: dict
    seed: int
    budget: int = DEFAULT_BUDGET
    tolerances: Tolerances = DEFAULT
    raw: dict = field(default_factory=dict, repr=False)


# -- parsing helpers -----------------------------------------------------------------

def _require(obj: dict, key: str, path: str):
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    if key not in obj:
        raise ConfigError(f"{path}.{key}", "missing key")
    return obj[key]


def _number(obj, key, path, default=None, kind=float, positive=False):
    if key not in obj:
        if default is None:
            raise ConfigError(f"{path}.{key}", "missing key")
        return default
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)) or (kind is int and not isinstance(val, int)):
        raise ConfigError(f"{path}.{key}", f"expected {kind.__name__}")
    if positive and not val > 0:
        raise ConfigError(f"{path}.{key}", "must be positive")
    return kind(val)


def _point(obj, key, path, dom, where="interior"):
    """Parse a point and check it lies inside (or on the boundary of) the domain."""
    p = f"{path}.{key}"
    try:
        z = dm.as_point(_require(obj, key, path), dom.dim)
    except (dm.DomainError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(p, str(exc)) from None
    if where == "interior" and not dom.contains(z):
        raise ConfigError(p, "point is not inside the domain")
    if where == "boundary" and not dom.on_boundary(z):
        raise ConfigError(p, "point is not on the boundary")
    return z


def _points(obj, key, path, dom, where="interior"):
    items = _require(obj, key, path)
    if not isinstance(items, list) or not items:
        raise ConfigError(f"{path}.{key}", "expected a non-empty list of points")
    return [_point({str(i): v}, str(i), f"{path}.{key}", dom, where) for i, v in enumerate(items)]


def _choice(obj, key, path, options, default):
    val = obj.get(key, default)
    if val not in options:
        raise ConfigError(f"{path}.{key}", f"expected one of {list(options)}")
    return val


def parse_config(obj) -> ExperimentConfig:
    if not isinstance(obj, dict):
        raise ConfigError("$", "config must be a JSON object")
    if obj.get("schema") != SCHEMA:
        raise ConfigError("$.schema", f"expected {SCHEMA!r}")
    kind = _require(obj, "kind", "$")
    if kind not in KINDS:
        raise ConfigError("$.kind", f"unknown kind {kind!r}")
    seed = _require(obj, "seed", "$")
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        raise ConfigError("$.seed", "expected a 64-bit non-negative integer")
    budget = _number(obj, "budget", "$", DEFAULT_BUDGET, int, positive=True)
    try:
        dom = dm.from_json(_require(obj, "domain", "$"))
    except ConfigError:
        raise
    except (dm.DomainError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError("$.domain", str(exc)) from None
    tols = obj.get("tolerances", {})
    if not isinstance(tols, dict):
        raise ConfigError("$.tolerances", "expected an object")
    for k, v in tols.items():
        if k not in DEFAULT.as_dict():
            raise ConfigError(f"$.tolerances.{k}", "unknown tolerance")
        _number(tols, k, "$.tolerances", kind=float, positive=True)
    params = obj.get("parameters", {})
    if not isinstance(params, dict):
        raise ConfigError("$.parameters", "expected an object")
    return ExperimentConfig(kind, dom, params, seed, budget,
                            DEFAULT.updated(**{k: float(v) for k, v in tols.items()}), obj)


# -- output helpers ------------------------------------------------------------------

def _clean(x):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(x, complex):
        return _clean([x.real, x.imag])
    return x


def _cols(prefix, dim):
    return [f"{p}_{prefix}{j + 1}" for j in range(dim) for p in ("re", "im")]


def _flat(z):
    out = []
    for c in np.atleast_1d(z):
        out += [float(c.real), float(c.imag)]
    return out


def write_table(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
        w.writerow(header)
        w.writerows(rows)


@dataclass
class Outcome:
    result: dict
    tables: dict = field(default_factory=dict)  # file name -> (header, rows)
    failed: bool = False


# -- runners -----------------------------------------------------------------------

def _bracket(args):
    dom, z, w, budget, seed, tol_exact = args
    return metric.kobayashi_distance(dom, z, w, budget=budget, seed=seed, tol_exact=tol_exact)


def run_distance(cfg: ExperimentConfig, jobs: int = 1) -> Outcome:
    P, dom = cfg.parameters, cfg.domain
    path = "$.parameters"
    if "pairs" in P:
        if not isinstance(P["pairs"], list) or not P["pairs"]:
            raise ConfigError(f"{path}.pairs", "expected a non-empty list of [z, w] pairs")
        pairs = []
        for i, pr in enumerate(P["pairs"]):
            if not isinstance(pr, list) or len(pr) != 2:
                raise ConfigError(f"{path}.pairs.{i}", "expected [z, w]")
            pairs.append((_point({"0": pr[0]}, "0", f"{path}.pairs.{i}", dom),
                          _point({"1": pr[1]}, "1", f"{path}.pairs.{i}", dom)))
    else:
        pairs = [(_point(P, "z", path, dom), _point(P, "w", path, dom))]
    args = [(dom, z, w, cfg.budget, cfg.seed, cfg.tolerances.tol_exact) for z, w in pairs]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(jobs) as ex:
            brackets = list(ex.map(_bracket, args))
    else:
        brackets = [_bracket(a) for a in args]
    rows = [[i] + _flat(z) + _flat(w) + [b.lo, b.hi, int(b.exact)]
            for i, ((z, w), b) in enumerate(zip(pairs, brackets))]
    header = ["pair"] + _cols("z", dom.dim) + _cols("w", dom.dim) + ["lo", "hi", "exact"]
    result = {"brackets": [b.to_json() for b in brackets]}
    if len(brackets) == 1:
        result.update(brackets[0].to_json())
    return Outcome(result, {"distances.csv": (header, rows)})


def run_geodesic(cfg: ExperimentConfig, jobs: int = 1) -> Outcome:
    P, dom = cfg.parameters, cfg.domain
    path = "$.parameters"
    samples = _number(P, "samples", path, 65, int, positive=True)
    if "example_r" in P:
        r = _number(P, "example_r", path)
        if not (0 < r < 1 and dom == dm.Polydisc(2)):
            raise ConfigError(f"{path}.example_r", "needs 0 < r < 1 on the bidisc")
        g = geo.bidisc_example_segment(r)
        ts = np.linspace(0, 1, samples)
        info = {"kind": g.kind, "example_r": r}
    elif "p" in P:
        z0 = _point(P, "z0", path, dom)
        p = _point(P, "p", path, dom, where="boundary")
        t_max = _number(P, "t_max", path, 10.0, positive=True)
        g = geo.geodesic_ray(dom, z0, p)
        ts = np.linspace(0, t_max, samples)
        info = {"kind": g.kind, "t_max": t_max}
    else:
        z, w = _point(P, "z", path, dom), _point(P, "w", path, dom)
        g = geo.geodesic_segment(dom, z, w, budget=cfg.budget, seed=cfg.seed)
        ts = np.linspace(0, 1, samples)
        info = {"kind": g.kind}
    header, rows = g.csv_rows(ts)
    if g.kind == geo.SEGMENT:
        info["check_defect"] = geo.check_geodesic(g, budget=cfg.budget)
    info["defect"] = g.defect
    info["start"] = _flat(g(np.array(ts[0])))
    info["end"] = _flat(g(np.array(ts[-1])))
    return Outcome(info, {"path.csv": (header, rows)})


def run_visibility(cfg: ExperimentConfig, jobs: int = 1) -> Outcome:
    P, dom = cfg.parameters, cfg.domain
    path = "$.parameters"
    p = _point(P, "p", path, dom, where="boundary")
    q = _point(P, "q", path, dom, where="boundary")
    mode = _choice(P, "mode", path, ("strong", "essential", "complex"), "strong")
    depth = _number(P, "depth", path, 20, int, positive=True)
    if mode == "strong":
        k_radius = _number(P, "K_radius", path, vis.ESCAPE_RADIUS, positive=True)
        v = vis.strong_visibility_probe(dom, p, q, K_radius=k_radius, families=depth, budget=cfg.budget)
    elif mode == "essential":
        v = vis.essential_visibility_probe(dom, p, q, budget=cfg.budget, depth=depth)
    else:
        v = vis.complex_visibility_probe(dom, p, q, budget=cfg.budget, depth=depth)
    rows = [list(r) for r in v.evidence]
    return Outcome(v.to_json(), {"evidence.csv": (["family", "k", "r_k", "closest_approach", "argmin_t"], rows)})


def _family(cfg):
    P, dom = cfg.parameters, cfg.domain
    path = "$.parameters"
    fam = _choice(P, "family", path, ("bidisc-example", "segments"), "bidisc-example")
    if fam == "bidisc-example":
        if dom != dm.Polydisc(2):
            raise ConfigError(f"{path}.family", "the bidisc example needs Polydisc(2)")
        k_max = _number(P, "k_max", path, 20, int, positive=True)
        ks = range(1, k_max + 1)
        return [geo.bidisc_example_segment(1 - 2.0 ** -k) for k in ks], [f"k={k}" for k in ks]
    items = _require(P, "segments", path)
    if not isinstance(items, list) or not items:
        raise ConfigError(f"{path}.segments", "expected a non-empty list of [z, w] pairs")
    paths = []
    for i, pr in enumerate(items):
        if not isinstance(pr, list) or len(pr) != 2:
            raise ConfigError(f"{path}.segments.{i}", "expected [z, w]")
        z = _point({"0": pr[0]}, "0", f"{path}.segments.{i}", dom)
        w = _point({"1": pr[1]}, "1", f"{path}.segments.{i}", dom)
        paths.append(geo.geodesic_segment(dom, z, w, budget=cfg.budget, seed=cfg.seed))
    return paths, [f"segment {i}" for i in range(len(paths))]


def _limit_set(cfg):
    P = cfg.parameters
    paths, names = _family(cfg)
    eps = P.get("eps_cluster")
    h = P.get("h_cluster")
    for key, val in (("eps_cluster", eps), ("h_cluster", h)):
        if val is not None:
            _number(P, key, "$.parameters", positive=True)
    return vis.limit_set_estimate(paths, eps, h, names=names)


def _limit_table(cfg, est):
    header = _cols("z", cfg.domain.dim) + ["multiplicity"]
    return header, [_flat(p) + [int(m)] for p, m in zip(est.points, est.multiplicity)]


def run_limit_set(cfg: ExperimentConfig, jobs: int = 1) -> Outcome:
    est = _limit_set(cfg)
    return Outcome(est.to_json(), {"limit_set.csv": _limit_table(cfg, est)})


def run_conjecture1(cfg: ExperimentConfig, jobs: int = 1) -> Outcome:
    est = _limit_set(cfg)
    classes = vis.conjecture1_classify(cfg.domain, est, cfg.tolerances.tol_bd)
    counts = {c: sum(1 for x in classes if x.verdict == c) for c in (vis.CASE1, vis.CASE2, vis.VIOLATION)}
    dim = cfg.domain.dim
    rows = [_flat(np.array(c.p)) + _flat(np.array(c.q)) + [c.segment, c.verdict] for c in classes]
    header = _cols("p", dim) + _cols("q", dim) + ["segment", "verdict"]
    result = {"limit_set": est.to_json(), "counts": counts}
    return Outcome(result, {"limit_set.csv": _limit_table(cfg, est), "pairs.csv": (header, rows)},
                   failed=counts[vis.VIOLATION] > 0)


def _map(cfg) -> dy.HolomorphicMap:
    P = cfg.parameters
    obj = _require(P, "map", "$.parameters")
    try:
        expr = dy.map_from_json(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("$.parameters.map", str(exc)) from None
    target = None
    if "target" in P:
        try:
            target = dm.from_json(P["target"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError("$.parameters.target", str(exc)) from None
    try:
        return dy.HolomorphicMap(expr, cfg.domain, target, seed=cfg.seed, tol=cfg.tolerances)
    except (dm.DomainError, ValueError) as exc:
        raise ConfigError("$.parameters.map", str(exc)) from None


def _cluster_table(dim, points, counts=None):
    counts = [1] * len(points) if counts is None else counts
    return _cols("z", dim) + ["count"], [_flat(p) + [int(c)] for p, c in zip(points, counts)]


def run_iterate(cfg: ExperimentConfig, jobs: int = 1) -> Outcome:
    P, dom = cfg.parameters, cfg.domain
    path = "$.parameters"
    F = _map(cfg)
    z0 = _point(P, "z0", path, dom)
    n_max = _number(P, "n_max", path, 100, int, positive=True)
    eps = _number(P, "eps", path, 1e-6, positive=True)
    starts = _points(P, "starts", path, dom) if "starts" in P else [z0]
    orbit = dy.iterate_orbit(F, z0, n_max, eps, cfg.budget)
    ts = dy.target_set_estimate(F, starts, n_max, eps)
    result = {"map": F.to_json(), "orbit": orbit.to_json(), "target_set": ts.to_json()}
    return Outcome(result, {"orbit.csv": orbit.csv_rows(), "target_set.csv": _cluster_table(dom.dim, ts.points, ts.counts)})


def run_horosphere(cfg: ExperimentConfig, jobs: int = 1) -> Outcome:
    P, dom = cfg.parameters, cfg.domain
    path = "$.parameters"
    tail = _number(P, "tail", path, 50, int, positive=True)
    z0 = _point(P, "z0", path, dom)
    if "sequence" in P:
        seq = _points(P, "sequence", path, dom)
        z = _point(P, "z", path, dom)
        R = _number(P, "R", path, 1.0, positive=True)
        try:
            spec = dy.HorosphereSpec(dom, z0, np.array(seq), R)
            est = dy.horosphere_limsup(spec, z, tail, cfg.tolerances, cfg.budget)
        except ValueError as exc:
            raise ConfigError(f"{path}.sequence", str(exc)) from None
        rows = [[i, float(d)] for i, d in enumerate(est.differences)]
        return Outcome({"mode": "limsup", "R": R, "threshold": spec.threshold, **est.to_json()},
                       {"horosphere.csv": (["tail_index", "difference"], rows)})
    F = _map(cfg)
    n_max = _number(P, "n_max", path, 200, int, positive=True)
    rep = dy.horosphere_orbit_invariance_check(F, z0, n_max, tail, cfg.tolerances, cfg.budget)
    rows = [[n + 1, float(e)] for n, e in enumerate(rep.estimates)]
    return Outcome({"mode": "invariance", "map": F.to_json(), **rep.to_json()},
                   {"horosphere.csv": (["n", "estimate"], rows)}, failed=rep.status == dy.FAIL)


def run_julia(cfg: ExperimentConfig, jobs: int = 1) -> Outcome:
    P = cfg.parameters
    path = "$.parameters"
    F = _map(cfg)
    ms = P.get("m", [1, 2, 5])
    ms = [ms] if isinstance(ms, int) else ms
    if not isinstance(ms, list) or not all(isinstance(m, int) and m >= 1 for m in ms):
        raise ConfigError(f"{path}.m", "expected a positive integer or a list of them")
    samples = _number(P, "zeta_samples", path, 33, int, positive=True)
    n_max = _number(P, "n_max", path, 200, int, positive=True)
    try:
        reports = [dy.julia_polydisc_check(F, m, zeta_samples=samples, n_max=n_max, tol=cfg.tolerances)
                   for m in ms]
    except dm.DomainError as exc:
        raise ConfigError("$.domain", str(exc)) from None
    rows = [[r.m, r.status, r.max_excess, r.identity_deviation, r.sigma_deviation,
             r.fixed_point_gap, r.label] for r in reports]
    header = ["m", "status", "max_excess", "identity_deviation", "sigma_deviation",
              "fixed_point_gap", "label"]
    return Outcome({"map": F.to_json(), "reports": [r.to_json() for r in reports]},
                   {"julia.csv": (header, rows)}, failed=any(r.status == dy.FAIL for r in reports))


def run_dw_verdict(cfg: ExperimentConfig, jobs: int = 1) -> Outcome:
    P, dom = cfg.parameters, cfg.domain
    path = "$.parameters"
    F = _map(cfg)
    starts = _points(P, "starts", path, dom)
    n_max = _number(P, "n_max", path, 500, int, positive=True)
    eps = _number(P, "eps", path, 1e-6, positive=True)
    v = dy.denjoy_wolff_verdict(F, starts, n_max, eps)
    result = {"map": F.to_json(), "verdict": v.to_json()}
    tables = {"clusters.csv": _cluster_table(dom.dim, v.clusters)}
    failed = False
    if "xi" in P:
        xi = _point(P, "xi", path, dom, where="boundary")
        tol = _number(P, "containment_tol", path, 1e-4, positive=True)
        ts = dy.target_set_estimate(F, starts, n_max, eps)
        rep = dy.slice_containment_check(ts.points, xi, tol, cfg.tolerances.tol_bd)
        result["target_set"] = ts.to_json()
        result["containment"] = {"xi": _flat(xi), "tol": tol, **rep.to_json()}
        tables["target_set.csv"] = _cluster_table(dom.dim, ts.points, ts.counts)
        failed = rep.status == dy.FAIL
    return Outcome(result, tables, failed)


RUNNERS = {
    "distance": run_distance,
    "geodesic": run_geodesic,
    "visibility": run_visibility,
    "limit-set": run_limit_set,
    "conjecture1": run_conjecture1,
    "iterate": run_iterate,
    "horosphere": run_horosphere,
    "julia": run_julia,
    "dw-verdict": run_dw_verdict,
}


def run(cfg: ExperimentConfig, out_dir, jobs: int = 1) -> Outcome:
    """Run one experiment and write config.json, result.json and its CSV tables."""
    outcome = RUNNERS[cfg.kind](cfg, jobs)
    os.makedirs(out_dir, exist_ok=True)
    meta = {"schema": SCHEMA, "kind": cfg.kind, "seed": cfg.seed, "budget": cfg.budget,
            "tolerances": cfg.tolerances.as_dict(), "domain": cfg.domain.to_json()}
    result = {"meta": meta, "result": outcome.result,
              "status": "FAIL" if outcome.failed else "OK"}
    echo = dict(cfg.raw, seed=cfg.seed, budget=cfg.budget)
    with open(os.path.join(out_dir, "config.json"), "w") as fh:
        json.dump(_clean(echo), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "result.json"), "w") as fh:
        json.dump(_clean(result), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    for name, (header, rows) in outcome.tables.items():
        write_table(os.path.join(out_dir, name), header, _clean(rows))
    return outcome


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kobalab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run",) + KINDS:
        p = sub.add_parser(name, help="run any config" if name == "run" else f"run a {name} config")
        p.add_argument("--config", required=True, help="experiment config (JSON)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--budget", type=int, default=None, help="override the config budget")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for parallel loops")
        p.add_argument("--quiet", action="store_true", help="print nothing on success")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
        if isinstance(raw, dict):
            if args.seed is not None:
                raw["seed"] = args.seed
            if args.budget is not None:
                raw["budget"] = args.budget
        cfg = parse_config(raw)
        if args.command != "run" and cfg.kind != args.command:
            raise ConfigError("$.kind", f"config kind {cfg.kind!r} does not match command {args.command!r}")
        outcome = run(cfg, args.out, args.jobs)
    except ConfigError as exc:
        print(f"config error at {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError, ValueError, NotImplementedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not args.quiet:
        status = "FAIL" if outcome.failed else "OK"
        print(f"{cfg.kind}: {status} -> {args.out}")
    return 2 if outcome.failed else 0


if __name__ == "__main__":
    sys.exit(main())
