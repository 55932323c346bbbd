"""Synthetic benchmark generation and placement metrics (PA, PP, SR)."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InfeasiblePlanSetError, InfeasibleSceneError, PlaceSynthError
from .geometry import Pose, as_points
from .planner import PlannerConfig, plan_placement
from .scene_factory import (EPS_PEN, LabeledSample, ShapeLibrary, assemble, layout_graph, make_sample,
                            refine_poses, sample_shapes)
from .scene_graph import (GraphNode, SceneGraph, SimilarityTable, crossover, make_edge, mutate,
                          select_crossover_edges)
from .scene_model import SceneObject, annotate_region, penetration_depth

log = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1
MAX_RETRIES = 50

SPLITS = {
    "syn_easy": ((5, 8), "sparse"),
    "syn_hard": ((8, 12), "dense"),
}
MARGINS = {"sparse": (0.08, 0.15), "dense": (0.02, 0.05)}


@dataclass
class BenchmarkSpec:
    name: str
    count_range: tuple
    density: str
    n_scenes: int
    seed: int = 0
    n_plans: int = 1

    def __post_init__(self):
        lo, hi = (int(v) for v in self.count_range)
        if lo < 2 or hi < lo:
            raise ValueError("count range must be positive with at least two objects")
        self.count_range = (lo, hi)
        if self.density not in MARGINS:
            raise ValueError(f"density must be one of {sorted(MARGINS)}")
        if self.name in SPLITS and SPLITS[self.name] != (self.count_range, self.density):
            raise ValueError(f"split {self.name} is defined as {SPLITS[self.name]}")

    @classmethod
    def named(cls, name: str, n_scenes: int, seed: int = 0, n_plans: int = 1) -> "BenchmarkSpec":
        counts, density = SPLITS[name]
        return cls(name, counts, density, n_scenes, seed, n_plans)

    def to_dict(self) -> dict:
        return {"name": self.name, "count_range": list(self.count_range), "density": self.density,
                "n_scenes": self.n_scenes, "seed": self.seed, "n_plans": self.n_plans}


# --- benchmark generation ----------------------------------------------------------------

def _prune_leaf(g: SceneGraph, rng: np.random.Generator) -> SceneGraph:
    leaves = [n.id for n in g.nodes if n.id != g.root and not g.children(n.id)]
    drop = leaves[int(rng.integers(len(leaves)))]
    return SceneGraph([n for n in g.nodes if n.id != drop], [e for e in g.edges if e.child != drop],
                      g.root, g.viewer_yaw, g.receptacle_extent, g.source)


def _graft_node(g: SceneGraph, categories: Sequence[str], rng: np.random.Generator) -> SceneGraph:
    parent = g.nodes[int(rng.integers(len(g.nodes)))]
    ang = rng.uniform(-math.pi, math.pi)
    centroid = parent.centroid + 0.1 * np.array([math.cos(ang), math.sin(ang), 0.0])
    node = GraphNode(max(g.ids) + 1, categories[int(rng.integers(len(categories)))], centroid)
    return SceneGraph(g.nodes + [node], g.edges + [make_edge(parent, node, g.viewer_yaw)], g.root,
                      g.viewer_yaw, g.receptacle_extent, g.source)


def _breed(graphs: Sequence[SceneGraph], library: ShapeLibrary, table: Optional[SimilarityTable],
           target: int, rng: np.random.Generator, p_c: float, p_m: float, tau_p: float) -> SceneGraph:
    a, b = (int(v) for v in rng.integers(len(graphs), size=2))
    g = graphs[a]
    pair = select_crossover_edges(graphs[a], graphs[b], rng)
    if pair is not None:
        g = crossover(graphs[a], graphs[b], pair[0], pair[1], p_c, rng.integers(2**32))[0]
    if table is not None:
        g = mutate(g, table, library.categories, tau_p, p_m, rng.integers(2**32))
    cats = library.categories
    while len(g) > target:
        g = _prune_leaf(g, rng)
    while len(g) < target:
        g = _graft_node(g, cats, rng)
    return g


def generate_scene(graphs: Sequence[SceneGraph], library: ShapeLibrary, count: int, density: str,
                   rng: np.random.Generator, table: Optional[SimilarityTable] = None,
                   p_c: float = 0.5, p_m: float = 0.3, tau_p: float = 0.9):
    """Breed a graph with ``count`` nodes, lay it out at the density's margins and refine it."""
    g = _breed(graphs, library, table, count, rng, p_c, p_m, tau_p)
    specs = sample_shapes(g, library, rng.integers(2**32))
    g = layout_graph(g, specs, MARGINS[density], rng)
    scene = assemble(g, specs)
    return refine_poses(scene)[0]


def gen_benchmark(spec: BenchmarkSpec, demo_graphs: Sequence[SceneGraph], library: ShapeLibrary,
                  table: Optional[SimilarityTable] = None, **augment) -> list:
    """``spec.n_scenes`` labeled samples; each scene has a count inside ``spec.count_range``.

    The count includes the object that is dropped for placement.
    """
    if not demo_graphs:
        raise ValueError("benchmark generation needs at least one demonstration graph")
    lo, hi = spec.count_range
    out = []
    for i in range(spec.n_scenes):
        for attempt in range(MAX_RETRIES):
            rng = np.random.default_rng([spec.seed, i, attempt])
            count = int(rng.integers(lo, hi + 1))
            try:
                scene = generate_scene(demo_graphs, library, count, spec.density, rng, table, **augment)
                if not lo <= len(scene.objects) <= hi:
                    continue
                sample = make_sample(scene, spec.n_plans, int(rng.integers(2**31)))
            except (InfeasibleSceneError, PlaceSynthError) as exc:
                log.debug("scene %d attempt %d rejected: %s", i, attempt, exc)
                continue
            sample.name = f"{spec.name}_{i:04d}"
            out.append(sample)
            break
        else:
            raise InfeasibleSceneError(f"could not generate scene {i} of {spec.name} in {MAX_RETRIES} tries")
    return out


# --- metrics ---------------------------------------------------------------------------

def eval_pa(placed: Pose, sample: LabeledSample, subject_extent=None) -> bool:
    """Placed centroid inside the annotated region of the sample's plans (boundary inclusive)."""
    extent = sample.subject_extent if subject_extent is None else subject_extent
    try:
        region = annotate_region(sample.scene, sample.plans, extent)
    except InfeasiblePlanSetError:
        return False
    return region.contains(placed.translation)


def placed_penetration(placed: Pose, sample: LabeledSample, object_points=None) -> float:
    pts = sample.dropped_object.points if object_points is None else as_points(object_points)
    pts = pts - (pts.min(axis=0) + pts.max(axis=0)) / 2
    prism = SceneObject(-1, "placed", pts, placed).prism
    return max((penetration_depth(prism, o.prism) for o in sample.scene.objects), default=0.0)


def eval_pp(placed: Pose, sample: LabeledSample, object_points=None, eps_pen: float = EPS_PEN):
    """(collision-free, penetration): the receptacle is ignored; ``eps_pen`` is inclusive."""
    pen = placed_penetration(placed, sample, object_points)
    return pen <= eps_pen, pen


@dataclass
class CaseResult:
    name: str
    seed: int
    pa: bool
    pp: bool
    penetration: float
    placed: Optional[Pose] = None
    cost: float = float("nan")
    error: str = ""

    @property
    def sr(self) -> bool:
        return self.pa and self.pp

    def to_dict(self) -> dict:
        return {"name": self.name, "seed": self.seed, "pa": self.pa, "pp": self.pp, "sr": self.sr,
                "penetration": self.penetration, "cost": self.cost, "error": self.error,
                "placed": None if self.placed is None else self.placed.to_dict()}


@dataclass
class EvalResult:
    cases: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def _pct(self, key) -> float:
        if not self.cases:
            return 0.0
        return 100.0 * sum(bool(getattr(c, key)) for c in self.cases) / len(self.cases)

    @property
    def pa(self) -> float:
        return self._pct("pa")

    @property
    def pp(self) -> float:
        return self._pct("pp")

    @property
    def sr(self) -> float:
        return self._pct("sr")

    def summary(self) -> dict:
        return {"PA": self.pa, "PP": self.pp, "SR": self.sr, "cases": len(self.cases)}

    def to_dict(self) -> dict:
        return {"schema_version": REPORT_SCHEMA_VERSION, "summary": self.summary(), "meta": self.meta,
                "cases": [c.to_dict() for c in self.cases]}

    def write(self, json_path, csv_path=None) -> None:
        json_path = Path(json_path)
        json_path.write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True), encoding="utf-8")
        csv_path = Path(csv_path) if csv_path else json_path.with_suffix(".csv")
        with csv_path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["name", "seed", "pa", "pp", "sr", "penetration", "cost", "error"])
            for c in self.cases:
                w.writerow([c.name, c.seed, int(c.pa), int(c.pp), int(c.sr), repr(float(c.penetration)),
                            repr(float(c.cost)), c.error])


# --- planners under evaluation ------------------------------------------------------------

class DiffusionPlanner:
    """Top-ranked candidate of :func:`plan_placement`."""

    def __init__(self, config: Optional[PlannerConfig] = None, n_candidates: int = 8):
        self.config = config or PlannerConfig()
        self.n_candidates = n_candidates

    def __call__(self, sample: LabeledSample, seed: int):
        cands = plan_placement(sample.scene, sample.plans, sample.dropped_object.points, self.n_candidates,
                               self.config, seed)
        return cands[0].pose, cands[0].cost


def oracle_planner(sample: LabeledSample, seed: int):
    return sample.gt_pose, 0.0


def fixed_pose_planner(xy) -> Callable:
    """Always places at ``xy`` on the support plane."""
    def plan(sample: LabeledSample, seed: int):
        pts = sample.dropped_object.points
        z = sample.scene.support_height + (pts[:, 2].max() - pts[:, 2].min()) / 2
        return Pose(np.array([xy[0], xy[1], z]), 0.0), 0.0
    return plan


def run_eval(planner: Callable, benchmark: Sequence[LabeledSample], seed: int = 0, meta: Optional[dict] = None,
             workers: int = 1) -> EvalResult:
    """Run ``planner(sample, seed)`` on every case; failures count against every metric."""
    if not benchmark:
        raise ValueError("benchmark is empty")

    def one(i_sample):
        i, s = i_sample
        case_seed = seed + i
        try:
            pose, cost = planner(s, case_seed)
        except Exception as exc:  # a planner crash is a failed case, not a failed run
            log.warning("planner failed on %s: %s", s.name, exc)
            return CaseResult(s.name or str(i), case_seed, False, False, float("nan"), error=repr(exc))
        ok, pen = eval_pp(pose, s)
        return CaseResult(s.name or str(i), case_seed, eval_pa(pose, s), ok, pen, pose, float(cost))

    items = list(enumerate(benchmark))
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as ex:
            cases = list(ex.map(one, items))
    else:
        cases = [one(it) for it in items]
    return EvalResult(cases, dict(meta or {}))
