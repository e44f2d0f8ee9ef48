"""Interaction graphs of Pauli Hamiltonians and greedy colorings.

Vertices are term indices ``0..r-1`` in the order the terms appear in the
Hamiltonian.  Two terms are adjacent when their supports overlap.  Colorings
of the squared graph give groups of terms that can be learned from a single
batch of simultaneous measurements.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from typing import Sequence

from .pauli import Hamiltonian

ORDERINGS = ("degree", "index", "smallest-last")


@dataclass(frozen=True)
class InteractionGraph:
    """Undirected simple graph stored as sorted neighbour tuples."""

    adjacency: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        for v, nbrs in enumerate(self.adjacency):
            if v in nbrs:
                raise ValueError(f"self-loop at vertex {v}")
            for u in nbrs:
                if v not in self.adjacency[u]:
                    raise ValueError(f"edge ({v}, {u}) is not symmetric")

    @classmethod
    def from_edges(cls, n_vertices: int, edges) -> "InteractionGraph":
        nbrs: list[set[int]] = [set() for _ in range(n_vertices)]
        for a, b in edges:
            if a != b:
                nbrs[a].add(b)
                nbrs[b].add(a)
        return cls(tuple(tuple(sorted(s)) for s in nbrs))

    @property
    def n_vertices(self) -> int:
        return len(self.adjacency)

    def degree(self, v: int | None = None) -> int:
        """Degree of ``v``; the maximum degree over all vertices when ``v`` is None."""
        if v is not None:
            return len(self.adjacency[v])
        return max((len(a) for a in self.adjacency), default=0)

    def degrees(self) -> list[int]:
        return [len(a) for a in self.adjacency]

    def edges(self) -> list[tuple[int, int]]:
        return [(v, u) for v, nbrs in enumerate(self.adjacency) for u in nbrs if v < u]

    def has_edge(self, a: int, b: int) -> bool:
        return b in self.adjacency[a]

    def to_json(self) -> dict:
        return {"n_vertices": self.n_vertices, "edges": [list(e) for e in self.edges()]}


@dataclass(frozen=True)
class Coloring:
    """Proper vertex coloring; ``partitions[c]`` lists the vertices of color ``c``."""

    color_of: tuple[int, ...]

    @property
    def n_colors(self) -> int:
        return max(self.color_of, default=-1) + 1

    @property
    def partitions(self) -> list[list[int]]:
        parts: list[list[int]] = [[] for _ in range(self.n_colors)]
        for v, c in enumerate(self.color_of):
            parts[c].append(v)
        return parts

    def is_valid(self, g: InteractionGraph) -> bool:
        if len(self.color_of) != g.n_vertices:
            return False
        return all(self.color_of[a] != self.color_of[b] for a, b in g.edges())

    def validate(self, g: InteractionGraph) -> None:
        if len(self.color_of) != g.n_vertices:
            raise ValueError("coloring does not cover the graph's vertices")
        for a, b in g.edges():
            if self.color_of[a] == self.color_of[b]:
                raise ValueError(f"vertices {a} and {b} are adjacent but share color {self.color_of[a]}")

    def to_json(self) -> dict:
        return {str(c): part for c, part in enumerate(self.partitions)}


def build_graph(h: Hamiltonian) -> InteractionGraph:
    ps = h.paulis
    masks = [p.support_mask for p in ps]
    edges = [(i, j) for i in range(len(ps)) for j in range(i) if masks[i] & masks[j]]
    return InteractionGraph.from_edges(len(ps), edges)


def square_graph(g: InteractionGraph) -> InteractionGraph:
    edges = set()
    for v, nbrs in enumerate(g.adjacency):
        for u in nbrs:
            edges.add((v, u))
            for w in g.adjacency[u]:
                if w != v:
                    edges.add((v, w))
    return InteractionGraph.from_edges(g.n_vertices, edges)


def distances_from(g: InteractionGraph, source: int) -> list[float]:
    dist = [float("inf")] * g.n_vertices
    dist[source] = 0
    queue = deque([source])
    while queue:
        v = queue.popleft()
        for u in g.adjacency[v]:
            if dist[u] == float("inf"):
                dist[u] = dist[v] + 1
                queue.append(u)
    return dist


def _smallest_last(g: InteractionGraph) -> list[int]:
    remaining = set(range(g.n_vertices))
    deg = {v: g.degree(v) for v in remaining}
    removed = []
    while remaining:
        v = min(remaining, key=lambda u: (deg[u], u))
        remaining.remove(v)
        removed.append(v)
        for u in g.adjacency[v]:
            if u in remaining:
                deg[u] -= 1
    return removed[::-1]


def vertex_order(g: InteractionGraph, order: str | Sequence[int] = "degree") -> list[int]:
    if not isinstance(order, str):
        seq = list(order)
        if sorted(seq) != list(range(g.n_vertices)):
            raise ValueError("explicit ordering must be a permutation of the vertices")
        return seq
    if order == "degree":
        return sorted(range(g.n_vertices), key=lambda v: (-g.degree(v), v))
    if order == "index":
        return list(range(g.n_vertices))
    if order == "smallest-last":
        return _smallest_last(g)
    raise ValueError(f"unknown ordering {order!r}; expected one of {ORDERINGS}")


def greedy_color(g: InteractionGraph, order: str | Sequence[int] = "degree") -> Coloring:
    """First-fit coloring along ``order``; uses at most ``max degree + 1`` colors."""
    colors = [-1] * g.n_vertices
    for v in vertex_order(g, order):
        taken = {colors[u] for u in g.adjacency[v]}
        c = 0
        while c in taken:
            c += 1
        colors[v] = c
    return Coloring(tuple(colors))


def average_degree(g: InteractionGraph) -> float:
    """Half the mean vertex degree."""
    if g.n_vertices == 0:
        raise ValueError("average degree of an empty graph is undefined")
    return sum(g.degrees()) / (2 * g.n_vertices)


def dump_graph(g: InteractionGraph) -> str:
    return json.dumps(g.to_json(), indent=2)
