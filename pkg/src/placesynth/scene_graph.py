"""Scene graphs over object centroids and their genetic augmentation.

A graph is a rooted spanning tree: the root is the object nearest the mean
centroid and every other object hangs off its nearest already-connected
neighbor. Crossover swaps the subtrees below category-matched edges between
two graphs; mutation swaps categories for functionally similar ones.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import PreconditionError, SchemaError
from .geometry import robust_centroid
from .scene_model import Relation, Scene, classify_offset

GRAPH_SCHEMA_VERSION = 1
SIMILARITY_SCHEMA_VERSION = 1

DEFAULT_P_CROSS = 0.5
DEFAULT_P_MUTATE = 0.3
DEFAULT_TAU = 0.9

_TIE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class GraphNode:
    id: int
    category: str
    centroid: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.centroid, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(c)):
            raise ValueError(f"node {self.id} has a non-finite centroid")
        object.__setattr__(self, "id", int(self.id))
        object.__setattr__(self, "centroid", c)

    def __eq__(self, other):
        if not isinstance(other, GraphNode):
            return NotImplemented
        return (self.id == other.id and self.category == other.category
                and np.array_equal(self.centroid, other.centroid))

    def __hash__(self):
        return hash((self.id, self.category))


@dataclass(frozen=True, eq=False)
class GraphEdge:
    parent: int
    child: int
    relation: Relation
    offset: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, GraphEdge):
            return NotImplemented
        return (self.parent == other.parent and self.child == other.child
                and self.relation is other.relation and np.array_equal(self.offset, other.offset))

    def __hash__(self):
        return hash((self.parent, self.child))


def make_edge(parent: GraphNode, child: GraphNode, viewer_yaw: float = 0.0) -> GraphEdge:
    offset = child.centroid - parent.centroid
    return GraphEdge(parent.id, child.id, classify_offset(offset, viewer_yaw), offset)


@dataclass(eq=False)
class SceneGraph:
    nodes: list
    edges: list
    root: Optional[int]
    viewer_yaw: float = 0.0
    receptacle_extent: Optional[np.ndarray] = None
    source: str = ""

    def __post_init__(self):
        self.nodes = sorted(self.nodes, key=lambda n: n.id)
        if self.receptacle_extent is not None:
            self.receptacle_extent = np.asarray(self.receptacle_extent, dtype=np.float64)

    def __len__(self):
        return len(self.nodes)

    def node(self, node_id: int) -> GraphNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    @property
    def ids(self) -> list:
        return [n.id for n in self.nodes]

    def children(self, node_id: int) -> list:
        return sorted(e.child for e in self.edges if e.parent == node_id)

    def parent_of(self, node_id: int) -> Optional[int]:
        for e in self.edges:
            if e.child == node_id:
                return e.parent
        return None

    def descendants(self, node_id: int) -> list:
        """Strict descendants in breadth-first order, siblings by id."""
        out, frontier = [], self.children(node_id)
        while frontier:
            out.extend(frontier)
            frontier = [c for n in frontier for c in self.children(n)]
        return out

    def categories(self) -> list:
        return [n.category for n in self.nodes]

    def is_tree(self) -> bool:
        if not self.nodes:
            return not self.edges and self.root is None
        if len(self.edges) != len(self.nodes) - 1 or self.root not in self.ids:
            return False
        ids = set(self.ids)
        if any(e.parent not in ids or e.child not in ids for e in self.edges):
            return False
        seen = {self.root, *self.descendants(self.root)}
        return seen == ids

    def validate(self) -> None:
        if not self.is_tree():
            raise ValueError("scene graph is not a rooted spanning tree")
        for e in self.edges:
            p, c = self.node(e.parent), self.node(e.child)
            if not np.allclose(e.offset, c.centroid - p.centroid, atol=1e-9):
                raise ValueError(f"edge {e.parent}->{e.child} offset disagrees with centroids")
            if e.relation is not classify_offset(e.offset, self.viewer_yaw):
                raise ValueError(f"edge {e.parent}->{e.child} relation disagrees with its offset")

    # --- JSON ---------------------------------------------------------------

    def to_dict(self) -> dict:
        out = {
            "schema_version": GRAPH_SCHEMA_VERSION,
            "root": self.root,
            "viewer_yaw": float(self.viewer_yaw),
            "nodes": [{"id": n.id, "category": n.category, "centroid": [float(v) for v in n.centroid]}
                      for n in self.nodes],
            "edges": [{"parent": e.parent, "child": e.child, "relation": e.relation.value,
                       "offset": [float(v) for v in e.offset]} for e in self.edges],
        }
        if self.receptacle_extent is not None:
            out["receptacle_extent"] = [float(v) for v in self.receptacle_extent]
        if self.source:
            out["source"] = self.source
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SceneGraph":
        if data.get("schema_version") != GRAPH_SCHEMA_VERSION:
            raise SchemaError(f"unsupported graph schema_version {data.get('schema_version')!r}")
        nodes = [GraphNode(n["id"], n["category"], n["centroid"]) for n in data["nodes"]]
        edges = [GraphEdge(int(e["parent"]), int(e["child"]), Relation.parse(e["relation"]),
                           np.asarray(e["offset"], dtype=np.float64)) for e in data["edges"]]
        return cls(nodes, edges, data["root"], float(data.get("viewer_yaw", 0.0)),
                   data.get("receptacle_extent"), data.get("source", ""))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "SceneGraph":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# --- abstraction ---------------------------------------------------------------

def select_root(nodes: Sequence[GraphNode]) -> int:
    """Id of the node nearest the mean centroid; ties go to the lowest id."""
    if not nodes:
        raise ValueError("select_root needs at least one node")
    cents = np.array([n.centroid for n in nodes])
    dist = np.linalg.norm(cents - cents.mean(axis=0), axis=1)
    best = dist.min()
    return min(n.id for n, d in zip(nodes, dist) if d <= best + _TIE_TOL * max(1.0, best))


def build_graph(nodes: Sequence[GraphNode], viewer_yaw: float = 0.0, root: Optional[int] = None,
                **meta) -> SceneGraph:
    """Prim's tree grown from the root.

    Each round attaches the unassigned node nearest the assigned set; ties go
    to the lowest candidate id, then to the lowest attachment id.
    """
    nodes = sorted(nodes, key=lambda n: n.id)
    ids = [n.id for n in nodes]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate node ids")
    if not nodes:
        return SceneGraph([], [], None, viewer_yaw, **meta)
    root = select_root(nodes) if root is None else int(root)
    cents = np.array([n.centroid for n in nodes])
    r = ids.index(root)
    n = len(nodes)
    best = np.linalg.norm(cents - cents[r], axis=1)
    attach = np.full(n, r)
    assigned = np.zeros(n, dtype=bool)
    assigned[r] = True
    edges = []
    for _ in range(n - 1):
        # nodes are sorted by id, so argmin over an exact-min mask gives the lowest id
        cand = np.where(~assigned, best, np.inf)
        u = int(np.flatnonzero(cand == cand.min())[0])
        assigned[u] = True
        edges.append(make_edge(nodes[attach[u]], nodes[u], viewer_yaw))
        d = np.linalg.norm(cents - cents[u], axis=1)
        closer = (d < best) | ((d == best) & (u < attach))
        upd = closer & ~assigned
        best[upd] = d[upd]
        attach[upd] = u
    return SceneGraph(list(nodes), edges, root, viewer_yaw, **meta)


def graph_from_scene(scene: Scene, source: str = "") -> SceneGraph:
    """Abstract a scene: one node per non-receptacle object at its median point."""
    nodes = [GraphNode(o.id, o.category, robust_centroid(o.world_points)) for o in scene.objects]
    return build_graph(nodes, scene.viewer_yaw, receptacle_extent=scene.receptacle.extent, source=source)


# --- similarity -------------------------------------------------------------------

@dataclass(eq=False)
class SimilarityTable:
    """Pairwise function-similarity scores between categories.

    Backed by unit embeddings (cosine), an explicit score matrix, or
    hand-curated groups (1 within a group, 0 across).
    """

    categories: list
    matrix: np.ndarray
    mode: str = "matrix"
    embeddings: Optional[np.ndarray] = None
    groups: Optional[dict] = None

    def __post_init__(self):
        self.categories = list(self.categories)
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        n = len(self.categories)
        if self.matrix.shape != (n, n):
            raise ValueError("similarity matrix shape does not match categories")
        if not np.allclose(self.matrix, self.matrix.T, atol=1e-12):
            raise ValueError("similarity matrix must be symmetric")
        if np.any(np.abs(self.matrix) > 1.0 + 1e-9):
            raise ValueError("similarity scores must lie in [-1, 1]")
        np.fill_diagonal(self.matrix, 1.0)
        self._index = {c: i for i, c in enumerate(self.categories)}

    @classmethod
    def from_embeddings(cls, categories, vectors) -> "SimilarityTable":
        vec = np.asarray(vectors, dtype=np.float64)
        vec = vec / np.linalg.norm(vec, axis=1, keepdims=True)
        mat = np.clip(vec @ vec.T, -1.0, 1.0)
        return cls(categories, (mat + mat.T) / 2, "embeddings", vec)

    @classmethod
    def from_groups(cls, groups: dict) -> "SimilarityTable":
        cats = sorted({c for members in groups.values() for c in members})
        label = {c: g for g, members in groups.items() for c in members}
        mat = np.array([[1.0 if label[a] == label[b] else 0.0 for b in cats] for a in cats])
        return cls(cats, mat, "groups", groups=dict(groups))

    def score(self, a: str, b: str) -> float:
        if a == b:
            return 1.0
        i, j = self._index.get(a), self._index.get(b)
        if i is None or j is None:
            return 0.0
        return float(self.matrix[i, j])

    def to_dict(self) -> dict:
        out = {"schema_version": SIMILARITY_SCHEMA_VERSION, "mode": self.mode, "categories": self.categories}
        if self.mode == "embeddings":
            out["embeddings"] = self.embeddings.tolist()
        elif self.mode == "groups":
            out["groups"] = self.groups
        else:
            out["matrix"] = self.matrix.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SimilarityTable":
        if data.get("schema_version") != SIMILARITY_SCHEMA_VERSION:
            raise SchemaError("unsupported similarity table schema_version")
        mode = data.get("mode", "matrix")
        if mode == "embeddings":
            return cls.from_embeddings(data["categories"], data["embeddings"])
        if mode == "groups":
            return cls.from_groups(data["groups"])
        if mode == "matrix":
            return cls(data["categories"], data["matrix"])
        raise SchemaError(f"unknown similarity mode {mode!r}")

    @classmethod
    def load(cls, path) -> "SimilarityTable":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# --- augmentation -------------------------------------------------------------------

def _graft(g: SceneGraph, at: int, donor: SceneGraph, donor_child: int, moved: list, next_id: int):
    """Copy ``moved`` (descendants of ``donor_child``) under node ``at`` of ``g``.

    Offsets relative to ``donor_child`` are kept; ids are renumbered from
    ``next_id`` in the order of ``moved``.
    """
    anchor = g.node(at).centroid
    origin = donor.node(donor_child).centroid
    remap = {donor_child: at}
    new_nodes = []
    for old in moved:
        remap[old] = next_id
        src = donor.node(old)
        new_nodes.append(GraphNode(next_id, src.category, anchor + (src.centroid - origin)))
        next_id += 1
    return new_nodes, remap


def _swap_side(g: SceneGraph, child: int, donor: SceneGraph, donor_child: int) -> SceneGraph:
    drop = set(g.descendants(child))
    keep_nodes = [n for n in g.nodes if n.id not in drop]
    keep_edges = [e for e in g.edges if e.child not in drop]
    moved = donor.descendants(donor_child)
    next_id = max([n.id for n in keep_nodes] + [-1]) + 1
    new_nodes, remap = _graft(g, child, donor, donor_child, moved, next_id)
    nodes = keep_nodes + new_nodes
    by_id = {n.id: n for n in nodes}
    new_edges = []
    for e in donor.edges:
        if e.child in remap and e.child != donor_child:
            new_edges.append(make_edge(by_id[remap[e.parent]], by_id[remap[e.child]], g.viewer_yaw))
    return SceneGraph(nodes, keep_edges + new_edges, g.root, g.viewer_yaw, g.receptacle_extent, g.source)


def crossover(g1: SceneGraph, g2: SceneGraph, e1: GraphEdge, e2: GraphEdge,
              p_c: float = DEFAULT_P_CROSS, rng_seed=0):
    """Exchange the subtrees hanging below the children of two matched edges.

    Both edges must join the same parent category to the same child category.
    With probability ``p_c`` the strict descendants of each child move to the
    other graph, keeping their offsets relative to the child they hung from.
    """
    p1, c1 = g1.node(e1.parent), g1.node(e1.child)
    p2, c2 = g2.node(e2.parent), g2.node(e2.child)
    if p1.category != p2.category or c1.category != c2.category:
        raise PreconditionError("crossover edges must match categories on both endpoints")
    if g1.parent_of(c1.id) != p1.id or g2.parent_of(c2.id) != p2.id:
        raise PreconditionError("crossover edges must be oriented parent to child")
    rng = np.random.default_rng(rng_seed)
    if not rng.random() < p_c:
        return g1, g2
    return _swap_side(g1, c1.id, g2, c2.id), _swap_side(g2, c2.id, g1, c1.id)


def matching_edge_pairs(g1: SceneGraph, g2: SceneGraph) -> list:
    """Category-matched edge pairs where at least one side has a subtree to move."""
    out = []
    for a in g1.edges:
        ka = (g1.node(a.parent).category, g1.node(a.child).category)
        for b in g2.edges:
            if ka != (g2.node(b.parent).category, g2.node(b.child).category):
                continue
            if g1.children(a.child) or g2.children(b.child):
                out.append((a, b))
    return out


def select_crossover_edges(g1: SceneGraph, g2: SceneGraph, rng: np.random.Generator):
    """Uniform choice among matched edge pairs, or None when there are none."""
    pairs = matching_edge_pairs(g1, g2)
    if not pairs:
        return None
    return pairs[int(rng.integers(len(pairs)))]


def mutate(g: SceneGraph, table: SimilarityTable, library_categories: Sequence[str],
           tau_p: float = DEFAULT_TAU, p_m: float = DEFAULT_P_MUTATE, rng_seed=0) -> SceneGraph:
    """Swap node categories for similar library categories (score above ``tau_p``)."""
    if not 0.0 < tau_p < 1.0:
        raise ValueError("tau_p must lie in (0, 1)")
    rng = np.random.default_rng(rng_seed)
    library = sorted(set(library_categories))
    nodes = []
    for n in g.nodes:
        if rng.random() < p_m:
            options = [c for c in library if c != n.category and table.score(n.category, c) > tau_p]
            if options:
                n = GraphNode(n.id, options[int(rng.integers(len(options)))], n.centroid)
        nodes.append(n)
    return SceneGraph(nodes, list(g.edges), g.root, g.viewer_yaw, g.receptacle_extent, g.source)


def augment(graphs: Sequence[SceneGraph], n_out: int, table: SimilarityTable, library_categories,
            p_c: float = DEFAULT_P_CROSS, p_m: float = DEFAULT_P_MUTATE, tau_p: float = DEFAULT_TAU,
            seed: int = 0) -> list:
    """Produce ``n_out`` graphs by pairing random parents, crossing over, then mutating."""
    if not graphs and n_out > 0:
        raise ValueError("augmentation needs at least one input graph")
    out = []
    for i in range(n_out):
        rng = np.random.default_rng([seed, i])
        a, b = (int(v) for v in rng.integers(len(graphs), size=2))
        g1, g2 = graphs[a], graphs[b]
        pair = select_crossover_edges(g1, g2, rng)
        child = g1
        if pair is not None:
            child = crossover(g1, g2, pair[0], pair[1], p_c, rng.integers(2**32))[0]
        child = mutate(child, table, library_categories, tau_p, p_m, rng.integers(2**32))
        child.source = f"aug-{i:05d}"
        out.append(child)
    return out
