"""Drive the command-line pipeline end to end into one directory."""
import json
from pathlib import Path

from placesynth.cli import main


def run(argv):
    rc = main([str(a) for a in argv])
    if rc != 0:
        raise RuntimeError(f"placesynth {' '.join(map(str, argv))} exited {rc}")


def run_pipeline(root, seed=0, n_aug=12, n_scenes=4, split="syn_easy", candidates=4):
    """abstract -> augment -> generate -> plan -> eval; returns the root path."""
    root = Path(root)
    common = ["--seed", seed, "--workers", 1]
    run(common + ["abstract", "--out", root / "graphs"])
    run(common + ["augment", "--graphs", root / "graphs", "--n-out", n_aug, "--out", root / "aug"])
    run(common + ["generate", "--graphs", root / "aug", "--out", root / "corpus", "--split", split,
                  "--n-scenes", n_scenes])
    manifest = json.loads((root / "corpus" / "manifest.json").read_text())
    first = root / "corpus" / manifest["samples"][0]["name"]
    run(common + ["plan", "--scene", first / "scene.json", "--plans", first / "plans.json",
                  "--object", first / "object.ply", "--candidates", candidates, "--out", root / "plan.json"])
    run(common + ["eval", "--benchmark", root / "corpus", "--candidates", candidates,
                  "--out", root / "report.json"])
    return root


def tree_bytes(root):
    """Relative path -> file bytes for every file under ``root``."""
    root = Path(root)
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}
