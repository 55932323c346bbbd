"""placesynth command line: abstract, augment, generate, plan, eval, export-ply."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import data
from .config import RunConfig
from .errors import PlaceSynthError, PreconditionError, SchemaError
from .eval_harness import SPLITS, BenchmarkSpec, DiffusionPlanner, gen_benchmark, oracle_planner, run_eval
from .geometry import PointCloud, build_tsdf, read_ply, save_tsdf, write_ply
from .planner import PlannerConfig, plan_placement
from .scene_factory import LabeledSample, ShapeLibrary, read_corpus, write_corpus
from .scene_graph import SceneGraph, SimilarityTable, augment, graph_from_scene
from .scene_model import load_plans, load_scene

log = logging.getLogger("placesynth")

PLAN_SCHEMA_VERSION = 1


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage errors as JSON like every other failure."""

    def error(self, message):
        _emit_error("UsageError", message)
        sys.exit(2)


def _emit_error(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


def _json_files(directory: Path, pattern: str = "*.json") -> list:
    directory = Path(directory)
    if not directory.is_dir():
        raise PreconditionError(f"{directory} is not a directory")
    return sorted(directory.glob(pattern))


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _similarity(spec: str) -> SimilarityTable:
    if spec in ("embeddings", "groups"):
        return data.load_similarity(spec)
    return SimilarityTable.load(spec)


def _load_graphs(directory) -> list:
    files = _json_files(directory, "*.graph.json") or _json_files(directory)
    graphs = [SceneGraph.load(p) for p in files if p.name != "manifest.json"]
    if not graphs:
        raise PreconditionError(f"no graphs found in {directory}")
    return graphs


# --- commands ------------------------------------------------------------------------

def cmd_abstract(args, cfg: RunConfig) -> dict:
    src = Path(args.scenes) if args.scenes else data.data_path("demos")
    files = _json_files(src)
    if not files:
        raise PreconditionError(f"no scene files in {src}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for p in files:
        g = graph_from_scene(load_scene(p), source=p.stem)
        name = f"{p.stem}.graph.json"
        g.save(out / name)
        written.append(name)
    return {"graphs": written}


def cmd_augment(args, cfg: RunConfig) -> dict:
    aug = cfg.augment
    for key in ("p_c", "p_m", "tau_p"):
        if getattr(args, key) is not None:
            setattr(aug, key, getattr(args, key))
    if args.similarity:
        aug.similarity = args.similarity
    if args.n_out < 0:
        raise PreconditionError("--n-out must be non-negative")
    graphs = _load_graphs(args.graphs)
    library = ShapeLibrary.load(args.library) if args.library else data.load_library()
    out_graphs = augment(graphs, args.n_out, _similarity(aug.similarity), library.categories,
                         aug.p_c, aug.p_m, aug.tau_p, cfg.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = []
    for i, g in enumerate(out_graphs):
        name = f"aug_{i:05d}.graph.json"
        g.save(out / name)
        names.append(name)
    return {"graphs": names}


def _benchmark_spec(args, cfg: RunConfig) -> BenchmarkSpec:
    gen = cfg.generate
    split = args.split or gen.split
    n_scenes = args.n_scenes if args.n_scenes is not None else gen.n_scenes
    n_plans = args.n_plans if args.n_plans is not None else gen.n_plans
    counts = args.count_range or gen.count_range
    density = args.density or gen.density
    if counts is not None or density is not None:
        base = SPLITS.get(split, ((5, 8), "sparse"))
        counts = tuple(counts) if counts is not None else base[0]
        density = density or base[1]
        name = split if split in SPLITS and SPLITS[split] == (counts, density) else "custom"
        return BenchmarkSpec(name, counts, density, n_scenes, cfg.seed, n_plans)
    if split not in SPLITS:
        raise PreconditionError(f"unknown split {split!r}; choose from {sorted(SPLITS)}")
    return BenchmarkSpec.named(split, n_scenes, cfg.seed, n_plans)


def cmd_generate(args, cfg: RunConfig) -> dict:
    spec = _benchmark_spec(args, cfg)
    graphs = _load_graphs(args.graphs) if args.graphs else [graph_from_scene(s, "demo") for s in data.load_demos()]
    lib_path = args.library or cfg.generate.library
    library = ShapeLibrary.load(lib_path) if lib_path else data.load_library()
    aug = cfg.augment
    samples = gen_benchmark(spec, graphs, library, _similarity(aug.similarity),
                            p_c=aug.p_c, p_m=aug.p_m, tau_p=aug.tau_p)
    write_corpus(samples, args.out, {"spec": spec.to_dict(), "config": cfg.to_dict()})
    return {"samples": len(samples), "out": str(args.out)}


def _planner_config(args, cfg: RunConfig) -> PlannerConfig:
    pc = cfg.planner
    if getattr(args, "planner_config", None):
        raw = json.loads(Path(args.planner_config).read_text(encoding="utf-8"))
        if "schema_version" in raw:
            pc = RunConfig.from_dict(raw).planner
        else:
            pc = PlannerConfig.from_dict(raw)
    if getattr(args, "lambda_a", None) is not None:
        pc.guidance.lambda_a = args.lambda_a
    if getattr(args, "lambda_c", None) is not None:
        pc.guidance.lambda_c = args.lambda_c
    return pc


def cmd_plan(args, cfg: RunConfig) -> dict:
    scene = load_scene(args.scene)
    plans = load_plans(args.plans)
    obj = read_ply(args.object)
    pc = _planner_config(args, cfg)
    n = args.candidates if args.candidates is not None else cfg.eval.n_candidates
    cands = plan_placement(scene, plans, obj, n, pc, cfg.seed)
    payload = {"schema_version": PLAN_SCHEMA_VERSION, "seed": cfg.seed, "config": pc.to_dict(),
               "candidates": [c.to_dict() for c in cands]}
    _write_json(Path(args.out), payload)
    return {"candidates": len(cands), "best_cost": cands[0].cost}


def cmd_eval(args, cfg: RunConfig) -> dict:
    bench = read_corpus(args.benchmark)
    if not bench:
        raise PreconditionError(f"benchmark {args.benchmark} is empty")
    pc = _planner_config(args, cfg)
    n = args.candidates if args.candidates is not None else cfg.eval.n_candidates
    planner = oracle_planner if args.planner == "oracle" else DiffusionPlanner(pc, n)
    meta = {"planner": args.planner, "n_candidates": n, "seed": cfg.seed, "benchmark": Path(args.benchmark).name}
    if args.planner != "oracle":
        meta["planner_config"] = pc.to_dict()
    result = run_eval(planner, bench, cfg.seed, meta, workers=_workers(args, cfg))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    result.write(out, args.csv)
    return result.summary()


def cmd_export_ply(args, cfg: RunConfig) -> dict:
    if args.sample:
        sample = LabeledSample.load(args.sample)
        scene = sample.scene
        act = sample.gt_affordance.activations if args.affordance else None
    else:
        if not args.scene:
            raise PreconditionError("export-ply needs --scene or --sample")
        scene = load_scene(args.scene)
        act = None
    write_ply(args.out, PointCloud(scene.cloud().points, act))
    info = {"points": len(scene.cloud().points), "out": str(args.out)}
    if args.tsdf:
        grid = build_tsdf([o.world_points for o in scene.objects], args.voxel_size, args.truncation)
        save_tsdf(grid, args.tsdf)
        info["tsdf"] = str(args.tsdf)
    return info


# --- wiring -----------------------------------------------------------------------------

def _workers(args, cfg: RunConfig) -> int:
    if args.workers is not None:
        return max(1, args.workers)
    if cfg.workers is not None:
        return max(1, int(cfg.workers))
    return os.cpu_count() or 1


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="placesynth", description=__doc__)
    p.add_argument("--config", help="RunConfig JSON (flags override it)")
    p.add_argument("--seed", type=int, help="global seed")
    p.add_argument("--workers", type=int, help="parallel workers (default: all cores)")
    p.add_argument("--verbose", "-v", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("abstract", help="scene JSONs -> scene graphs")
    a.add_argument("--scenes", help="directory of scene JSONs (default: bundled demos)")
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_abstract)

    a = sub.add_parser("augment", help="crossover + mutation over a graph directory")
    a.add_argument("--graphs", required=True)
    a.add_argument("--n-out", type=int, required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--p-c", type=float)
    a.add_argument("--p-m", type=float)
    a.add_argument("--tau-p", type=float)
    a.add_argument("--similarity", help="'embeddings', 'groups' or a table JSON path")
    a.add_argument("--library", help="shape library JSON (default: bundled)")
    a.set_defaults(func=cmd_augment)

    a = sub.add_parser("generate", help="graphs -> labeled sample corpus")
    a.add_argument("--graphs", help="graph directory (default: bundled demos)")
    a.add_argument("--out", required=True)
    a.add_argument("--split", choices=sorted(SPLITS))
    a.add_argument("--n-scenes", type=int)
    a.add_argument("--n-plans", type=int)
    a.add_argument("--count-range", type=int, nargs=2, metavar=("MIN", "MAX"))
    a.add_argument("--density", choices=["sparse", "dense"])
    a.add_argument("--library")
    a.set_defaults(func=cmd_generate)

    a = sub.add_parser("plan", help="plan placements for one scene")
    a.add_argument("--scene", required=True)
    a.add_argument("--plans", required=True)
    a.add_argument("--object", required=True, help="object PLY in its own frame")
    a.add_argument("--candidates", type=int)
    a.add_argument("--lambda-a", type=float)
    a.add_argument("--lambda-c", type=float)
    a.add_argument("--planner-config")
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_plan)

    a = sub.add_parser("eval", help="PA / PP / SR over a corpus")
    a.add_argument("--benchmark", required=True)
    a.add_argument("--planner", choices=["diffusion", "oracle"], default="diffusion")
    a.add_argument("--planner-config")
    a.add_argument("--candidates", type=int)
    a.add_argument("--lambda-a", type=float)
    a.add_argument("--lambda-c", type=float)
    a.add_argument("--out", required=True, help="report JSON; CSV goes next to it unless --csv")
    a.add_argument("--csv")
    a.set_defaults(func=cmd_eval)

    a = sub.add_parser("export-ply", help="scene cloud (and optional TSDF) export")
    a.add_argument("--scene")
    a.add_argument("--sample", help="sample directory; with --affordance writes gt activations")
    a.add_argument("--affordance", action="store_true")
    a.add_argument("--out", required=True)
    a.add_argument("--tsdf", help="also write the TSDF grid (JSON header + .bin)")
    a.add_argument("--voxel-size", type=float, default=0.01)
    a.add_argument("--truncation", type=float, default=0.05)
    a.set_defaults(func=cmd_export_ply)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        if args.seed is not None:
            cfg.seed = args.seed
        info = args.func(args, cfg)
    except (PlaceSynthError, SchemaError, OSError, ValueError, KeyError) as exc:
        _emit_error(type(exc).__name__, str(exc))
        return 1
    print(json.dumps(info, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
