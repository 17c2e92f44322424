"""Paired symmetry-aware vs. symmetry-unaware experiments, dimension scaling, and theory checks."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import binomtest

from . import bounds
from .collision import (
    ConvexShape,
    MovingObject,
    check_object_symmetry,
    cube,
    icosahedron,
    joint_group,
    prism,
    pyramid,
    rectangle,
    regular_polygon,
    tetrahedron,
)
from .geometry import ConfigSpace
from .planners import PlannerParams, Problem, build_prm_star, plan, rrt
from .quotient import QuotientSpace, quotient_distances
from .symmetry import (
    make_cyclic_2d,
    make_cyclic_3d,
    make_dihedral_3d,
    make_icosahedral,
    make_octahedral,
    make_tetrahedral,
    verify_group_axioms,
)
from .worldgen import WorldGenParams, gen_problem, gen_world

PLANNER_NAMES = ("rrt", "birrt", "rrt_star", "prm_star_knn", "prm_star_radius")
POLYGONS = {"triangle": 3, "square": 4, "pentagon": 5, "hexagon": 6, "octagon": 8}
SIZE = 0.1
RECT = (0.2, 0.1)
CSV_COLUMNS = ("world_seed", "pair", "arm", "status", "length", "runtime", "samples",
               "collision_checks", "vertices")


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


# ---------------------------------------------------------------------------
# object catalogue
# ---------------------------------------------------------------------------

def make_objects(name: str, dim: int) -> list:
    """Bodies and their symmetry groups for a catalogue name; raises ConfigError."""
    name = name.strip().lower()
    objs = None
    want_dim = 2
    if name in POLYGONS:
        n = POLYGONS[name]
        objs = [MovingObject(regular_polygon(n, SIZE), make_cyclic_2d(n))]
    elif name == "rectangle":
        objs = [MovingObject(rectangle(*RECT), make_cyclic_2d(2))]
    elif name == "asymmetric":
        # scalene triangle: only the identity maps it onto itself
        objs = [MovingObject(ConvexShape(SIZE * np.array([[1.0, 0.0], [-0.6, 0.7], [-0.4, -0.8]])),
                             make_cyclic_2d(1))]
    elif m := re.fullmatch(r"rectangle-stack[(:](\d+)\)?", name):
        k = int(m.group(1))
        if k < 1:
            raise ConfigError("rectangle-stack needs at least one copy")
        objs = [MovingObject(rectangle(*RECT), make_cyclic_2d(2).on_object(0)) for _ in range(k)]
    else:
        want_dim = 3
        if m := re.fullmatch(r"(\d+)-pyramid", name):
            n = int(m.group(1))
            objs = [MovingObject(pyramid(n, SIZE), make_cyclic_3d(n))] if n >= 3 else None
        elif m := re.fullmatch(r"(\d+)-prism", name):
            n = int(m.group(1))
            objs = [MovingObject(prism(n, SIZE), make_dihedral_3d(n))] if n >= 3 else None
        elif name == "tetrahedron":
            objs = [MovingObject(tetrahedron(SIZE), make_tetrahedral())]
        elif name == "cube":
            objs = [MovingObject(cube(SIZE), make_octahedral())]
        elif name == "icosahedron":
            objs = [MovingObject(icosahedron(SIZE), make_icosahedral())]
    if objs is None:
        raise ConfigError(f"unknown object {name!r}")
    if dim != want_dim:
        raise ConfigError(f"object {name!r} lives in {want_dim}D, not {dim}D")
    for o in objs:
        ok, dev = check_object_symmetry(o)
        if not ok or not verify_group_axioms(o.symmetry).ok:
            raise ConfigError(f"object {name!r} is not invariant under its group ({dev:.3g})")
    return objs


# ---------------------------------------------------------------------------
# configuration and report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    dim: int = 2
    object: str = "octagon"
    planner: str = "rrt"
    worlds: int = 10
    pairs: int = 100
    mode: str = "equal"
    seed: int = 0
    max_samples: Optional[int] = None   # overrides the protocol cap (per unaware arm)
    eta: float = 0.2
    resolution: float = 0.01
    max_objects: int = 5                # dimension scaling: m = 1..max_objects
    scaling_samples: int = 40_000
    volume_samples: int = 4000
    out: Optional[str] = None
    format: str = "json"

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ConfigError("dim must be 2 or 3")
        if self.planner not in PLANNER_NAMES:
            raise ConfigError(f"planner must be one of {', '.join(PLANNER_NAMES)}")
        if self.mode not in ("equal", "reduced"):
            raise ConfigError("mode must be 'equal' or 'reduced'")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be 'csv' or 'json'")
        if min(self.worlds, self.pairs, self.max_objects) < 1:
            raise ConfigError("counts must be positive")
        if self.max_samples is not None and self.max_samples < 1:
            raise ConfigError("max_samples must be positive")
        if not self.eta > 0 or not self.resolution > 0:
            raise ConfigError("eta and resolution must be positive")

    def world_params(self, index: int) -> WorldGenParams:
        seed = self.seed * 100_003 + index
        return WorldGenParams(seed=seed) if self.dim == 2 else WorldGenParams.default_3d(seed=seed)


@dataclass
class Report:
    config: dict
    records: list = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"config": self.config, "records": self.records, "aggregates": self.aggregates}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, default=_json_default)

    @classmethod
    def from_json(cls, data: dict) -> "Report":
        return cls(data["config"], data["records"], data["aggregates"])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=_csv_columns(self.records), extrasaction="ignore",
                           lineterminator="\n")
        w.writeheader()
        for r in self.records:
            w.writerow(r)
        return buf.getvalue()

    def write(self, path: str, fmt: str) -> None:
        with open(path, "w") as f:
            f.write(self.to_csv() if fmt == "csv" else self.dumps())


def _csv_columns(records: list) -> tuple:
    # run records share fixed columns; theory-check records carry their own keys
    if records and "arm" not in records[0]:
        return tuple(dict.fromkeys(k for r in records for k in r))
    return CSV_COLUMNS + (("m",) if any("m" in r for r in records) else ())


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(f"not serializable: {type(o)}")


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------

def sign_test(wins: int, n: int) -> float:
    """One-sided p-value for 'aware strictly shorter in more than half the pairs'."""
    if n == 0:
        return 1.0
    return float(binomtest(wins, n, 0.5, alternative="greater").pvalue)


def aggregate(records: list) -> dict:
    by_arm = {}
    for arm in ("aware", "unaware"):
        rs = [r for r in records if r["arm"] == arm]
        ok = [r for r in rs if r["status"] == "success"]
        L = np.array([r["length"] for r in ok])
        T = np.array([r["runtime"] for r in ok])
        by_arm[arm] = {
            "runs": len(rs),
            "success_rate": len(ok) / len(rs) if rs else math.nan,
            "mean_length": float(L.mean()) if len(L) else math.nan,
            "std_length": float(L.std()) if len(L) else math.nan,
            "mean_runtime": float(T.mean()) if len(T) else math.nan,
            "std_runtime": float(T.std()) if len(T) else math.nan,
            "mean_samples": float(np.mean([r["samples"] for r in rs])) if rs else math.nan,
            "mean_collision_checks": float(np.mean([r["collision_checks"] for r in rs])) if rs else math.nan,
        }
    pairs = {}
    for r in records:
        pairs.setdefault((r["world_seed"], r["pair"]), {})[r["arm"]] = r
    both = [p for p in pairs.values()
            if len(p) == 2 and all(x["status"] == "success" for x in p.values())]
    lr = [p["unaware"]["length"] / p["aware"]["length"] for p in both]
    rr = [p["unaware"]["runtime"] / p["aware"]["runtime"] for p in both if p["aware"]["runtime"] > 0]
    wins = sum(p["aware"]["length"] < p["unaware"]["length"] for p in both)
    return {
        "arms": by_arm,
        "pairs_both_succeeded": len(both),
        "length_ratio": float(np.mean(lr)) if lr else math.nan,
        "length_ratio_of_means": (float(np.mean([p["unaware"]["length"] for p in both])
                                  / np.mean([p["aware"]["length"] for p in both])) if both else math.nan),
        "runtime_ratio": float(np.mean(rr)) if rr else math.nan,
        "aware_shorter": int(wins),
        "sign_test_p": sign_test(wins, len(both)),
    }


# ---------------------------------------------------------------------------
# paired runs
# ---------------------------------------------------------------------------

def _seed(*parts) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def _caps(cfg: ExperimentConfig, order: int) -> tuple:
    """(unaware samples, aware samples) for the configured planner and mode."""
    if cfg.planner.startswith("prm_star"):
        base = cfg.max_samples or (3000 if cfg.dim == 2 else 500) * order
        return base, (base if cfg.mode == "equal" else max(1, base // order))
    cap = cfg.max_samples or (1000 if cfg.dim == 2 else 250)
    return cap, cap


def _record(world_seed, pair, arm, res) -> dict:
    return {
        "world_seed": world_seed,
        "pair": pair,
        "arm": arm,
        "status": res.status,
        "length": res.length if res.success else None,
        "runtime": res.wall_time,
        "samples": res.samples,
        "collision_checks": res.collision_checks,
        "vertices": res.vertices,
    }


def _run_world(cfg: ExperimentConfig, w: int) -> list:
    objects = make_objects(cfg.object, cfg.dim)
    wp = cfg.world_params(w)
    world = gen_world(wp)
    aware = QuotientSpace.from_world(world, objects, resolution=cfg.resolution, check_symmetry=False)
    unaware = aware.unaware()
    G = aware.group
    d = aware.space.effective_dim()
    n_u, n_a = _caps(cfg, G.order)
    vol = None
    if cfg.planner in ("rrt_star", "prm_star_radius"):
        vol = bounds.estimate_free_volume(world, objects, G, None, cfg.volume_samples,
                                          np.random.default_rng(_seed(cfg.seed, w, 99))).volume
    problems = []
    for i in range(cfg.pairs):
        try:
            problems.append(gen_problem(world, objects, G, None, np.random.default_rng(_seed(cfg.seed, w, i))))
        except RuntimeError:
            problems.append(None)
    records = []
    if cfg.planner.startswith("prm_star"):
        variant = cfg.planner.rsplit("_", 1)[1]
        arms = []
        for arm, qs, n in (("aware", aware, n_a), ("unaware", unaware, n_u)):
            rho = None
            if variant == "radius":
                order = 1 if (cfg.mode == "equal" or arm == "unaware") else G.order
                rho = bounds.prm_star_rho(bounds.BoundInputs(d=d, order=order, vol_free=vol))
            params = PlannerParams(max_samples=n, eta=cfg.eta, rho_prm=rho, resolution=cfg.resolution,
                                   seed=_seed(cfg.seed, w, 7))
            arms.append((arm, build_prm_star(qs, params, variant)))
        for i, pr in enumerate(problems):
            for arm, planner in arms:
                if pr is None:
                    continue
                res = planner.query(Problem(*pr))
                res.timings["construction"] = planner.build_time
                records.append(_record(wp.seed, i, arm, res))
        for arm, planner in arms:
            for r in records:
                if r["arm"] == arm:
                    r["build_time"] = planner.build_time
        return records
    for i, pr in enumerate(problems):
        if pr is None:
            continue
        problem = Problem(*pr)
        ps = _seed(cfg.seed, w, i, 1)
        rho = {}
        if cfg.planner == "rrt_star":
            # c* over-estimate from an RRT run (unaware in equal mode, per-arm in reduced mode)
            pre = {}
            for arm, qs in (("unaware", unaware), ("aware", aware)):
                if arm == "aware" and cfg.mode == "equal":
                    pre[arm] = pre["unaware"]
                    continue
                pre[arm] = rrt(problem, qs, PlannerParams(max_samples=n_u, eta=cfg.eta,
                                                          resolution=cfg.resolution, seed=ps))
            if not all(p.success for p in pre.values()):
                continue
            for arm in ("aware", "unaware"):
                order = G.order if (cfg.mode == "reduced" and arm == "aware") else 1
                rho[arm] = bounds.rrt_star_rho(bounds.BoundInputs(d=d, order=order, vol_free=vol,
                                                                  c_star=pre[arm].length))
        for arm, qs, n in (("aware", aware, n_a), ("unaware", unaware, n_u)):
            params = PlannerParams(max_samples=n, eta=cfg.eta, rho_rrt=rho.get(arm),
                                   resolution=cfg.resolution, seed=ps)
            records.append(_record(wp.seed, i, arm, plan(cfg.planner, problem, qs, params)))
    return records


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("SYMPLAN_THREADS", "1")))
    except ValueError:
        return 1


def _map_worlds(cfg: ExperimentConfig, fn) -> list:
    n = min(_threads(), cfg.worlds)
    if n <= 1:
        return [fn(cfg, w) for w in range(cfg.worlds)]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, [cfg] * cfg.worlds, range(cfg.worlds)))


def run_experiment(cfg: ExperimentConfig) -> Report:
    """Paired runs on every world and start/goal pair; records sorted by (seed, pair, arm)."""
    make_objects(cfg.object, cfg.dim)
    records = [r for chunk in _map_worlds(cfg, _run_world) for r in chunk]
    records.sort(key=lambda r: (r["world_seed"], r["pair"], r["arm"]))
    return Report(_config_dict(cfg), records, aggregate(records))


def _config_dict(cfg) -> dict:
    return {k: v for k, v in asdict(cfg).items() if k != "out"}


# ---------------------------------------------------------------------------
# dimension scaling
# ---------------------------------------------------------------------------

def time_qdist(m: int, reps: int = 200, batch: int = 256, seed: int = 0) -> float:
    """Seconds per batched quotient-distance call for m rectangles under (C2)^m."""
    objects = make_objects(f"rectangle-stack({m})", 2)
    G = joint_group(objects)
    space = ConfigSpace(2, m, [0, 0], [2, 2])
    rng = np.random.default_rng(seed)
    X, Y = space.sample(rng, batch), space.sample(rng, batch)
    quotient_distances(space, G, X, Y)
    best = math.inf
    for _ in range(5):
        t = time.perf_counter()
        for _ in range(reps):
            quotient_distances(space, G, X, Y)
        best = min(best, (time.perf_counter() - t) / reps)
    return best


def run_dimension_scaling(cfg: ExperimentConfig) -> Report:
    """BiRRT paired runs for m = 1..max_objects copies of a rectangle."""
    all_records = []
    rows = []
    for m in range(1, cfg.max_objects + 1):
        sub = ExperimentConfig(dim=2, object=f"rectangle-stack({m})", planner="birrt", worlds=cfg.worlds,
                               pairs=cfg.pairs, mode="equal", seed=cfg.seed,
                               max_samples=cfg.max_samples or cfg.scaling_samples, eta=cfg.eta,
                               resolution=cfg.resolution)
        rep = run_experiment(sub)
        for r in rep.records:
            r["m"] = m
        all_records.extend(rep.records)
        G = joint_group(make_objects(sub.object, 2))
        rows.append({"m": m, "config_dim": 3 * m, "group_order": G.order,
                     "runtime_ratio": rep.aggregates["runtime_ratio"],
                     "length_ratio": rep.aggregates["length_ratio"],
                     "pairs_both_succeeded": rep.aggregates["pairs_both_succeeded"],
                     "qdist_seconds": time_qdist(m)})
    return Report(_config_dict(cfg), all_records, {"by_m": rows})


# ---------------------------------------------------------------------------
# theory checks
# ---------------------------------------------------------------------------

def shipped_groups() -> dict:
    return {
        "C3": make_cyclic_2d(3), "C4": make_cyclic_2d(4), "C8": make_cyclic_2d(8),
        "C8(3d)": make_cyclic_3d(8), "D6": make_dihedral_3d(6),
        "T": make_tetrahedral(), "O": make_octahedral(), "I": make_icosahedral(),
    }


def verify_theory(cfg: Optional[ExperimentConfig] = None, groups: Optional[dict] = None,
                  mc_samples: int = 200_000) -> Report:
    """Group axioms, orbit separation, ball-probability ratios and bound scalings as pass/fail."""
    cfg = cfg or ExperimentConfig()
    groups = groups if groups is not None else shipped_groups()
    rng = np.random.default_rng(cfg.seed)
    checks = []

    def add(name, ok, **info):
        checks.append({"check": name, "pass": bool(ok), **info})

    for name, G in groups.items():
        rep = verify_group_axioms(G)
        add(f"axioms[{name}]", rep.ok, details=rep.details[:5])
        space = ConfigSpace(G.dim, G.max_object + 1, np.zeros(G.dim), np.zeros(G.dim))
        sep = bounds.min_orbit_separation(G, space, 20, rng)
        lower = 2 * bounds.injectivity_radius_bound(space, G)
        add(f"orbit_separation[{name}]", sep >= lower - 1e-9, separation=sep, bound=lower)
        if rep.ok and G.order <= 24 and len(G.factors) == 1:
            eps = min(0.1, 0.5 * bounds.injectivity_radius_bound(space, G))
            x = space.sample(rng, 1)[0]
            bp = bounds.mc_ball_probability(space, G, space.unpack(x), eps, mc_samples, rng)
            z = bp.z_score(1 / G.order) if bp.n_quotient else math.inf
            add(f"ball_ratio[{name}]", abs(z) <= 4, ratio=bp.ratio, expected=1 / G.order, z=z)
    inp = bounds.BoundInputs(ell=1.0, delta=0.2, eta=0.2, d=3, p=0.01, vol_free=2.5, c_star=1.5)
    for order in (2, 8, 24):
        g = inp.with_order(order)
        r3 = bounds.rrt_failure_log_bound(10_000, g) - bounds.rrt_failure_log_bound(10_000, inp)
        add(f"eq3_scaling[{order}]", math.isclose(r3, -(order - 1) * inp.p * 10_000, rel_tol=1e-12))
        r4 = bounds.prm_expected_samples(g) / bounds.prm_expected_samples(inp)
        add(f"eq4_scaling[{order}]", math.isclose(r4, 1 / order, rel_tol=1e-12))
        r5 = bounds.prm_star_rho(g) / bounds.prm_star_rho(inp)
        add(f"eq5_scaling[{order}]", math.isclose(r5, order ** (-1 / 3), rel_tol=1e-12))
        r6 = bounds.rrt_star_rho(g) / bounds.rrt_star_rho(inp)
        add(f"eq6_scaling[{order}]", math.isclose(r6, order ** (-1 / 4), rel_tol=1e-12))
    ok = all(c["pass"] for c in checks)
    return Report(_config_dict(cfg), checks, {"passed": ok, "n_checks": len(checks),
                                              "n_failed": sum(not c["pass"] for c in checks)})
