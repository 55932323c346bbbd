"""Bundled demonstration scenes, shape library and similarity tables."""
from __future__ import annotations

from importlib import resources
from pathlib import Path


def data_path(name: str = "") -> Path:
    return Path(str(resources.files(__name__))) / name


def demo_paths() -> list:
    return sorted(data_path("demos").glob("*.json"))


def load_library():
    from ..scene_factory import ShapeLibrary
    return ShapeLibrary.load(data_path("library.json"))


def load_similarity(mode: str = "embeddings"):
    from ..scene_graph import SimilarityTable
    name = "similarity.json" if mode == "embeddings" else "similarity_groups.json"
    return SimilarityTable.load(data_path(name))


def load_demos() -> list:
    from ..scene_model import load_scene
    return [load_scene(p) for p in demo_paths()]
