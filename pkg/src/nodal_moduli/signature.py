"""Signature graphs of marked nodal surfaces.

Vertices are components (labelled by genus and the indices of the marked
points they carry), edges are nodes. Self-loops are nodes whose two branches
lie on one component. Marks are labelled 1..n and isomorphisms must fix them.
"""

from __future__ import annotations

import itertools
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

log = logging.getLogger(__name__)


class SignatureError(ValueError):
    pass


@dataclass(frozen=True)
class VertexLabel:
    genus: int
    marks: frozenset[int] = frozenset()

    def __post_init__(self):
        if self.genus < 0:
            raise SignatureError(f"negative genus {self.genus}")
        object.__setattr__(self, "marks", frozenset(self.marks))


@dataclass(frozen=True)
class SignatureGraph:
    vertices: tuple[VertexLabel, ...]
    edges: tuple[tuple[int, int], ...] = ()
    n_marks: int | None = None

    def __post_init__(self):
        verts = tuple(v if isinstance(v, VertexLabel) else VertexLabel(*v) for v in self.vertices)
        V = len(verts)
        edges = []
        for e in self.edges:
            i, j = (int(x) for x in e)
            if not (0 <= i < V and 0 <= j < V):
                raise SignatureError(f"edge {e} references a missing vertex")
            edges.append((min(i, j), max(i, j)))
        edges.sort()
        all_marks = [m for v in verts for m in v.marks]
        n = len(all_marks) if self.n_marks is None else self.n_marks
        if len(set(all_marks)) != len(all_marks):
            raise SignatureError("mark sets of different vertices overlap")
        if set(all_marks) != set(range(1, n + 1)):
            raise SignatureError(f"marks {sorted(all_marks)} do not partition 1..{n}")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "edges", tuple(edges))
        object.__setattr__(self, "n_marks", n)

    @classmethod
    def build(cls, vertices: Iterable[tuple[int, Iterable[int]]], edges: Iterable[Sequence[int]] = ()) -> "SignatureGraph":
        """``build([(genus, marks), ...], [(i, j), ...])``."""
        return cls(tuple(VertexLabel(g, frozenset(m)) for g, m in vertices), tuple(tuple(e) for e in edges))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def degree(self, v: int) -> int:
        """Edge endpoints at ``v``; a self-loop counts twice."""
        return sum((i == v) + (j == v) for i, j in self.edges)

    def to_dict(self) -> dict:
        return {
            "vertices": [{"genus": v.genus, "marks": sorted(v.marks)} for v in self.vertices],
            "edges": [[i, j] for i, j in self.edges],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SignatureGraph":
        try:
            verts = tuple(VertexLabel(int(v["genus"]), frozenset(int(m) for m in v.get("marks", ()))) for v in data["vertices"])
            edges = tuple((int(e[0]), int(e[1])) for e in data.get("edges", ()))
        except (KeyError, TypeError, IndexError) as exc:
            raise SignatureError(f"malformed signature JSON: {exc}") from exc
        return cls(verts, edges)


@dataclass(frozen=True)
class IndexReport:
    index: int
    regular_nodal: bool

    @property
    def is_lower_bound(self) -> bool:
        return not self.regular_nodal


def special_point_count(G: SignatureGraph, v: int) -> int:
    if not 0 <= v < G.n_vertices:
        raise SignatureError(f"invalid vertex index {v}")
    return len(G.vertices[v].marks) + G.degree(v)


def _components(G: SignatureGraph) -> int:
    parent = list(range(G.n_vertices))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in G.edges:
        parent[find(i)] = find(j)
    return len({find(x) for x in range(G.n_vertices)})


def betti_numbers(G: SignatureGraph) -> tuple[int, int]:
    b0 = _components(G)
    return b0, G.n_edges - G.n_vertices + b0


def is_connected(G: SignatureGraph) -> bool:
    return G.n_vertices > 0 and _components(G) == 1


def arithmetic_genus(G: SignatureGraph) -> int:
    return betti_numbers(G)[1] + sum(v.genus for v in G.vertices)


def is_stable(G: SignatureGraph) -> bool:
    for v, lab in enumerate(G.vertices):
        k = special_point_count(G, v)
        if lab.genus == 0 and k < 3:
            return False
        if lab.genus == 1 and k < 1:
            return False
    return True


def is_type(G: SignatureGraph, g: int, n: int) -> bool:
    return is_connected(G) and arithmetic_genus(G) == g and G.n_marks == n


# -- canonical form ------------------------------------------------------

def _compress(keys: list) -> list[int]:
    table = {k: i for i, k in enumerate(sorted(set(keys)))}
    return [table[k] for k in keys]


def _refined_classes(G: SignatureGraph) -> list[int]:
    """Isomorphism-invariant vertex colours from colour refinement."""
    V = G.n_vertices
    adj = [Counter() for _ in range(V)]
    for i, j in G.edges:
        adj[i][j] += 1
        if i != j:
            adj[j][i] += 1
    colour = _compress([(lab.genus, tuple(sorted(lab.marks)), G.degree(v), adj[v][v]) for v, lab in enumerate(G.vertices)])
    for _ in range(V):
        new = _compress([
            (colour[v], tuple(sorted((colour[u], m) for u, m in adj[v].items() if u != v)))
            for v in range(V)
        ])
        if len(set(new)) == len(set(colour)):
            break
        colour = new
    return colour


def canonical_form(G: SignatureGraph) -> tuple:
    """A complete invariant: equal iff the graphs are isomorphic (marks fixed)."""
    colour = _refined_classes(G)
    base = [(lab.genus, tuple(sorted(lab.marks))) for lab in G.vertices]
    keys = sorted(set(colour))
    classes = [[v for v in range(G.n_vertices) if colour[v] == k] for k in keys]
    best = None
    for perms in itertools.product(*(itertools.permutations(c) for c in classes)):
        order = [v for p in perms for v in p]
        pos = {v: k for k, v in enumerate(order)}
        enc = (
            tuple(base[v] for v in order),
            tuple(sorted((min(pos[i], pos[j]), max(pos[i], pos[j])) for i, j in G.edges)),
        )
        if best is None or enc < best:
            best = enc
    return (G.n_marks, best)


def signatures_isomorphic(G1: SignatureGraph, G2: SignatureGraph) -> bool:
    if (G1.n_vertices, G1.n_edges, G1.n_marks) != (G2.n_vertices, G2.n_edges, G2.n_marks):
        return False
    return canonical_form(G1) == canonical_form(G2)


# -- enumeration -----------------------------------------------------------

def _in_stable_range(g: int, n: int) -> bool:
    return g >= 0 and n >= 0 and n > 2 - 2 * g


def _genus_vectors(V: int, total: int):
    if V == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _genus_vectors(V - 1, total - first):
            yield (first,) + rest


def _skeletons(g: int, n: int):
    """Connected unmarked (genus, edges) skeletons, one per isomorphism class."""
    max_v = 2 * g - 2 + n
    seen = set()
    for V in range(1, max_v + 1):
        pairs = [(i, j) for i in range(V) for j in range(i, V)]
        for b1 in range(g + 1):
            E = b1 + V - 1
            if E > 3 * g - 3 + n:
                continue
            for edges in itertools.combinations_with_replacement(pairs, E):
                deg = [0] * V
                for i, j in edges:
                    deg[i] += 1
                    deg[j] += 1
                for gv in _genus_vectors(V, g - b1):
                    # each vertex needs marks to reach stability; count the deficit
                    need = sum(max(0, 3 - deg[v]) if gv[v] == 0 else max(0, 1 - deg[v]) if gv[v] == 1 else 0 for v in range(V))
                    if need > n:
                        continue
                    sk = SignatureGraph(tuple(VertexLabel(x) for x in gv), edges, 0)
                    if not is_connected(sk):
                        continue
                    key = canonical_form(sk)
                    if key in seen:
                        continue
                    seen.add(key)
                    yield sk


def enumerate_stable_signatures(g: int, n: int) -> list[SignatureGraph]:
    """All stable signatures of type ``(g, n)`` up to isomorphism.

    Outside the stable range ``n > 2 - 2g`` an empty list is returned and a
    warning is logged.
    """
    if not _in_stable_range(g, n):
        log.warning("no stable signatures of type (%d, %d): need n > 2 - 2g", g, n)
        return []
    out = []
    seen = set()
    for sk in _skeletons(g, n):
        V = sk.n_vertices
        for assign in itertools.product(range(V), repeat=n):
            marks = [set() for _ in range(V)]
            for m, v in enumerate(assign, start=1):
                marks[v].add(m)
            G = SignatureGraph(
                tuple(VertexLabel(lab.genus, frozenset(ms)) for lab, ms in zip(sk.vertices, marks)),
                sk.edges,
                n,
            )
            if not is_stable(G):
                continue
            key = canonical_form(G)
            if key in seen:
                continue
            seen.add(key)
            out.append(G)
    return out


def deformation_dim(g: int, n: int) -> int:
    if not _in_stable_range(g, n):
        raise SignatureError(f"(g, n) = ({g}, {n}) outside the stable range n > 2 - 2g")
    return 3 * g - 3 + n


def fredholm_index(G: SignatureGraph, dim_base: int, regular_nodal: bool = True) -> IndexReport:
    """Index count ``sum_i (3 - 3 g_i) - 3 #edges - n + dim_base``.

    Equals ``3 - 3g - n + dim_base`` for connected ``G``; for a family that is
    not regular nodal the value is only a lower bound.
    """
    if not is_connected(G):
        raise SignatureError("index formula needs a connected signature")
    per_vertex = sum(3 - 3 * v.genus for v in G.vertices) - 3 * G.n_edges - G.n_marks + dim_base
    global_form = 3 - 3 * arithmetic_genus(G) - G.n_marks + dim_base
    assert per_vertex == global_form, (per_vertex, global_form)
    return IndexReport(per_vertex, regular_nodal)
