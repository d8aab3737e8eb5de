"""Conforming triangle meshes with reference-edge encoding.

A mesh is an immutable collection of vertices and ordered vertex triples.
The reference edge of an element ``(v0, v1, v2)`` is, by convention, the
edge ``(v0, v1)``; the apex ``v2`` lies opposite it.  Triples are
counterclockwise.  Each element carries a generation counter ``gen`` (0 on
initial elements, +1 per bisection, +2 for red sons), the id of its ancestor
in the initial mesh, and a flag marking red sons.

All coordinates are expected to be dyadic rationals; midpoints computed
during refinement are exact, so the area identity
``|T| = |ancestor| * 2**(-gen)`` holds exactly and is tested exactly.

Meshes are immutable after construction (the backing arrays are marked
read-only); every operation in this module is read-only and safe for
concurrent readers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from . import _geom

EdgeKey = tuple[int, int]

NOT_ADJACENT = "not_adjacent"
COMPATIBLY_DIVISIBLE = "compatibly_divisible"
INCOMPATIBLE = "incompatible"

#: element count below which validate_mesh runs the exhaustive O(E*V)
#: hanging-node scan by default
_EXHAUSTIVE_LIMIT = 3000


class MeshError(ValueError):
    """Raised when mesh construction or parsing encounters invalid data."""


def edge_key(a: int, b: int) -> EdgeKey:
    """Canonical (sorted) key for the unordered node pair {a, b}."""
    return (a, b) if a < b else (b, a)


class Element(NamedTuple):
    """Read-only view of one element."""

    v: tuple[int, int, int]
    gen: int
    ancestor: int
    red_son: bool

    @property
    def ref_edge(self) -> EdgeKey:
        return edge_key(self.v[0], self.v[1])

    @property
    def edges(self) -> tuple[EdgeKey, EdgeKey, EdgeKey]:
        """Edges in convention order: index 0 is the reference edge."""
        v0, v1, v2 = self.v
        return (edge_key(v0, v1), edge_key(v1, v2), edge_key(v2, v0))


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str
    ids: tuple = ()


@dataclass(frozen=True)
class ConformityReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}


@dataclass(frozen=True)
class StructureFlags:
    """BDD / weak-BDD certificates and isolated-element sets.

    ``isolated`` and ``is_weak_bdd`` use the boundary-exempt reading (only
    elements with an existing reference neighbor can be isolated), under
    which BDD always implies weak BDD.  The literal reading, where a
    boundary reference edge makes the element isolated via N(N(T)) = empty,
    is reported alongside.
    """

    is_bdd: bool
    is_weak_bdd: bool
    isolated: frozenset[int]
    isolated_literal: frozenset[int]
    is_weak_bdd_literal: bool


@dataclass(frozen=True)
class ElementGeometry:
    area: float
    diameter: float
    shape_regularity: float


class Mesh:
    """Immutable conforming triangulation.

    Parameters
    ----------
    vertices : (n, 2) array_like
        Vertex coordinates.
    elements : (m, 3) array_like of int
        Ordered CCW vertex triples; edge (v0, v1) is the reference edge.
    gen, ancestor, red_son : arrays, optional
        Per-element generation, initial-mesh ancestor id, red-son flag.
        Default to an initial mesh (gen 0, ancestor = element id).
    initial : Mesh, optional
        The generation-0 origin of this mesh; omit for initial meshes.
    parent_elems : (m,) array of int, optional
        For refined meshes, the id of each element's father in the mesh
        this one was produced from.
    validate : bool
        Enforce orientation/index/edge-sharing invariants at construction.
    """

    def __init__(self, vertices, elements, gen=None, ancestor=None,
                 red_son=None, initial=None, parent_elems=None,
                 vertex_parents=None, has_red_history=False,
                 has_bisec5_history=False, validate=True):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        self.elements = np.ascontiguousarray(elements, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshError("vertices must be an (n, 2) array")
        if self.elements.ndim != 2 or self.elements.shape[1] != 3:
            raise MeshError("elements must be an (m, 3) array")
        m = self.elements.shape[0]
        self.gen = (np.zeros(m, dtype=np.int64) if gen is None
                    else np.ascontiguousarray(gen, dtype=np.int64))
        self.ancestor = (np.arange(m, dtype=np.int64) if ancestor is None
                         else np.ascontiguousarray(ancestor, dtype=np.int64))
        self.red_son = (np.zeros(m, dtype=bool) if red_son is None
                        else np.ascontiguousarray(red_son, dtype=bool))
        if not (len(self.gen) == len(self.ancestor) == len(self.red_son) == m):
            raise MeshError("per-element arrays must all have length m")
        self.initial = initial
        self.parent_elems = (None if parent_elems is None
                             else np.ascontiguousarray(parent_elems, dtype=np.int64))
        # (a, b) node pair whose midpoint created each vertex; (-1, -1) for
        # vertices that predate any recorded refinement
        if vertex_parents is None:
            self.vertex_parents = np.full((self.vertices.shape[0], 2), -1,
                                          dtype=np.int64)
        else:
            self.vertex_parents = np.ascontiguousarray(vertex_parents,
                                                       dtype=np.int64)
            if self.vertex_parents.shape != (self.vertices.shape[0], 2):
                raise MeshError("vertex_parents must be an (n, 2) array")
        self.has_red_history = bool(has_red_history or self.red_son.any())
        self.has_bisec5_history = bool(has_bisec5_history)

        self.edge_table = build_edge_table(self.elements)

        if validate:
            self._check_basic()

        for arr in (self.vertices, self.elements, self.gen,
                    self.ancestor, self.red_son, self.vertex_parents):
            arr.setflags(write=False)
        if self.parent_elems is not None:
            self.parent_elems.setflags(write=False)

    # -- basic accessors ---------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def is_initial(self) -> bool:
        return self.initial is None and bool((self.gen == 0).all())

    @property
    def initial_mesh(self) -> "Mesh":
        """The generation-0 mesh this one descends from (itself if initial).

        Meshes loaded from files carry no initial-mesh object; operations
        that need initial geometry must be given one explicitly.
        """
        if self.initial is not None:
            return self.initial
        if self.is_initial:
            return self
        raise MeshError("initial mesh unknown for this (loaded) refined mesh")

    def element(self, t: int) -> Element:
        if not 0 <= t < self.n_elements:
            raise ValueError(f"element id {t} out of range")
        return Element(tuple(int(v) for v in self.elements[t]),
                       int(self.gen[t]), int(self.ancestor[t]),
                       bool(self.red_son[t]))

    def edges_of(self, t: int) -> tuple[EdgeKey, EdgeKey, EdgeKey]:
        v0, v1, v2 = (int(v) for v in self.elements[t])
        return (edge_key(v0, v1), edge_key(v1, v2), edge_key(v2, v0))

    def ref_edge(self, t: int) -> EdgeKey:
        v0, v1 = int(self.elements[t, 0]), int(self.elements[t, 1])
        return edge_key(v0, v1)

    def coords(self, t: int):
        """The three vertex coordinate pairs of element t (convention order)."""
        v = self.elements[t]
        return (tuple(self.vertices[v[0]]), tuple(self.vertices[v[1]]),
                tuple(self.vertices[v[2]]))

    def point(self, node: int) -> tuple[float, float]:
        return (float(self.vertices[node, 0]), float(self.vertices[node, 1]))

    def area(self, t: int) -> float:
        return _geom.signed_area(*self.coords(t))

    def areas(self) -> np.ndarray:
        return _geom.signed_areas(self.vertices, self.elements)

    def boundary_edges(self) -> list[EdgeKey]:
        return [e for e, inc in self.edge_table.items() if len(inc) == 1]

    def total_area(self) -> float:
        return float(self.areas().sum())

    def __repr__(self):
        return (f"Mesh({self.n_vertices} vertices, {self.n_elements} elements, "
                f"max gen {int(self.gen.max(initial=0))})")

    # -- internal ----------------------------------------------------------

    def _check_basic(self):
        m = self.n_elements
        if m == 0:
            raise MeshError("mesh has no elements")
        if self.elements.min() < 0 or self.elements.max() >= self.n_vertices:
            raise MeshError("element vertex index out of range")
        areas = self.areas()
        bad = np.nonzero(areas <= 0.0)[0]
        if bad.size:
            raise MeshError(f"element {int(bad[0])} is not CCW "
                            f"(signed area {areas[bad[0]]:g})")
        if self.gen.min() < 0:
            raise MeshError("negative generation")
        if self.ancestor.min() < 0:
            raise MeshError("negative ancestor id")
        if self.initial is not None:
            n_init = self.initial.n_elements
        elif (self.gen == 0).all():
            n_init = m
        else:
            n_init = None  # loaded refined mesh: initial count unknown
        if n_init is not None and self.ancestor.max() >= n_init:
            raise MeshError("ancestor id out of range of the initial mesh")
        for e, inc in self.edge_table.items():
            if len(inc) > 2:
                raise MeshError(f"edge {e} shared by {len(inc)} elements")


def build_edge_table(elements: np.ndarray) -> dict[EdgeKey, tuple[int, ...]]:
    """Map each unordered edge to the ids of its 1-2 incident elements."""
    table: dict[EdgeKey, list[int]] = {}
    for t in range(elements.shape[0]):
        v0, v1, v2 = (int(v) for v in elements[t])
        for e in (edge_key(v0, v1), edge_key(v1, v2), edge_key(v2, v0)):
            table.setdefault(e, []).append(t)
    return {e: tuple(inc) for e, inc in table.items()}


def incidence_pairs(mesh: Mesh) -> list[tuple[int, EdgeKey]]:
    """All (element, edge) pairs; exactly 3 per element."""
    pairs = []
    for t in range(mesh.n_elements):
        for e in mesh.edges_of(t):
            pairs.append((t, e))
    return pairs


# -- structural operations --------------------------------------------------


def validate_mesh(mesh: Mesh, exhaustive: bool | None = None) -> ConformityReport:
    """Diagnostic conformity check; returns violations, never raises.

    Hanging nodes are detected by the exact midpoint test on every edge
    (complete for meshes produced by bisection/red refinement) and, for
    meshes below ``_EXHAUSTIVE_LIMIT`` elements or with ``exhaustive=True``,
    additionally by a full vertex-against-edge betweenness scan.
    """
    violations: list[Violation] = []
    nv, ne = mesh.n_vertices, mesh.n_elements

    # duplicate vertices (exact coordinate equality)
    seen: dict[tuple[float, float], int] = {}
    for i in range(nv):
        p = (float(mesh.vertices[i, 0]), float(mesh.vertices[i, 1]))
        if not (math.isfinite(p[0]) and math.isfinite(p[1])):
            violations.append(Violation("bad_coordinate",
                                        f"vertex {i} has non-finite coordinates",
                                        (i,)))
        if p in seen:
            violations.append(Violation("duplicate_vertex",
                                        f"vertices {seen[p]} and {i} coincide at {p}",
                                        (seen[p], i)))
        else:
            seen[p] = i

    bad_index = (mesh.elements.min() < 0 or mesh.elements.max() >= nv)
    if bad_index:
        violations.append(Violation("bad_index", "element vertex index out of range"))
        return ConformityReport(violations)

    areas = mesh.areas()
    for t in np.nonzero(areas <= 0.0)[0]:
        violations.append(Violation("inverted_element",
                                    f"element {int(t)} has signed area {areas[t]:g}",
                                    (int(t),)))

    rebuilt = build_edge_table(mesh.elements)
    if rebuilt != mesh.edge_table:
        violations.append(Violation("edge_table_mismatch",
                                    "stored edge table differs from rebuild"))
    for e, inc in rebuilt.items():
        if len(inc) > 2:
            violations.append(Violation("overshared_edge",
                                        f"edge {e} shared by elements {inc}",
                                        tuple(inc)))

    used = np.zeros(nv, dtype=bool)
    used[mesh.elements.ravel()] = True
    for i in np.nonzero(~used)[0]:
        violations.append(Violation("orphan_vertex",
                                    f"vertex {int(i)} belongs to no element",
                                    (int(i),)))

    # hanging nodes: midpoint of an existing edge present as a vertex
    coord_to_node = seen
    for (a, b), inc in rebuilt.items():
        mid = _geom.midpoint(mesh.point(a), mesh.point(b))
        j = coord_to_node.get(mid)
        if j is not None and j not in (a, b):
            violations.append(Violation(
                "hanging_node",
                f"vertex {j} splits edge {(a, b)} of elements {inc}",
                (j, a, b)))

    if exhaustive is None:
        exhaustive = ne < _EXHAUSTIVE_LIMIT
    if exhaustive:
        reported = {v.ids for v in violations if v.kind == "hanging_node"}
        for (a, b), inc in rebuilt.items():
            pa, pb = mesh.point(a), mesh.point(b)
            for j in range(nv):
                if j in (a, b):
                    continue
                if _geom.point_strictly_inside_segment(mesh.point(j), pa, pb):
                    ids = (j, a, b)
                    if ids not in reported:
                        reported.add(ids)
                        violations.append(Violation(
                            "hanging_node",
                            f"vertex {j} lies inside edge {(a, b)} of elements {inc}",
                            ids))

    return ConformityReport(violations)


def reference_neighbor(mesh: Mesh, t: int) -> int | None:
    """The element sharing t's reference edge, or None on the boundary."""
    if not 0 <= t < mesh.n_elements:
        raise ValueError(f"element id {t} out of range")
    inc = mesh.edge_table[mesh.ref_edge(t)]
    for other in inc:
        if other != t:
            return other
    return None


def classify_pair(mesh: Mesh, t1: int, t2: int) -> str:
    """Classify two distinct elements by their shared-edge relation.

    ``compatibly_divisible`` iff the shared edge is the reference edge of
    both or of neither; ``incompatible`` iff of exactly one;
    ``not_adjacent`` iff no shared edge.
    """
    if t1 == t2:
        raise ValueError("classify_pair requires two distinct elements")
    for t in (t1, t2):
        if not 0 <= t < mesh.n_elements:
            raise ValueError(f"element id {t} out of range")
    shared = set(mesh.edges_of(t1)) & set(mesh.edges_of(t2))
    if not shared:
        return NOT_ADJACENT
    e = shared.pop()
    on_ref = (mesh.ref_edge(t1) == e) + (mesh.ref_edge(t2) == e)
    return COMPATIBLY_DIVISIBLE if on_ref in (0, 2) else INCOMPATIBLE


def structure_flags(mesh: Mesh) -> StructureFlags:
    """BDD and weak-BDD certificates plus isolated-element sets."""
    is_bdd = True
    for e, inc in mesh.edge_table.items():
        if len(inc) == 2 and classify_pair(mesh, inc[0], inc[1]) == INCOMPATIBLE:
            is_bdd = False
            break

    isolated = set()
    isolated_literal = set()
    for t in range(mesh.n_elements):
        n1 = reference_neighbor(mesh, t)
        if n1 is None:
            isolated_literal.add(t)  # N(N(T)) = N(empty) = empty != T
            continue
        if reference_neighbor(mesh, n1) != t:
            isolated.add(t)
            isolated_literal.add(t)

    def weak(iso: set[int]) -> bool:
        for e, inc in mesh.edge_table.items():
            if len(inc) == 2 and inc[0] in iso and inc[1] in iso:
                return False
        return True

    return StructureFlags(is_bdd=is_bdd,
                          is_weak_bdd=weak(isolated),
                          isolated=frozenset(isolated),
                          isolated_literal=frozenset(isolated_literal),
                          is_weak_bdd_literal=weak(isolated_literal))


def geometry(mesh: Mesh, t: int) -> ElementGeometry:
    """Area, diameter (longest edge) and shape regularity of element t."""
    if not 0 <= t < mesh.n_elements:
        raise ValueError(f"element id {t} out of range")
    p0, p1, p2 = mesh.coords(t)
    area = _geom.signed_area(p0, p1, p2)
    diam = _geom.diameter(p0, p1, p2)
    return ElementGeometry(area=area, diameter=diam,
                           shape_regularity=diam * diam / area)


def restrict(mesh: Mesh, initial_subset: Iterable[int]) -> Mesh:
    """Sub-mesh of all elements whose ancestor lies in the given subset.

    Vertices are renumbered densely; generations and reference edges are
    preserved; ancestor ids are remapped into the restricted initial mesh.
    """
    subset = sorted(set(int(i) for i in initial_subset))
    if not subset:
        raise ValueError("initial_subset must be nonempty")
    init = mesh.initial_mesh
    if subset[0] < 0 or subset[-1] >= init.n_elements:
        raise ValueError("initial_subset contains out-of-range element ids")

    ancestor_pos = {a: i for i, a in enumerate(subset)}
    keep = [t for t in range(mesh.n_elements)
            if int(mesh.ancestor[t]) in ancestor_pos]

    def extract(src: Mesh, elems: list[int], new_ancestor, new_initial):
        node_ids = sorted({int(v) for t in elems for v in src.elements[t]})
        remap = {old: new for new, old in enumerate(node_ids)}
        verts = src.vertices[node_ids]
        tris = np.array([[remap[int(v)] for v in src.elements[t]] for t in elems],
                        dtype=np.int64)
        vparents = np.full((len(node_ids), 2), -1, dtype=np.int64)
        for new, old in enumerate(node_ids):
            a, b = (int(p) for p in src.vertex_parents[old])
            if a in remap and b in remap:
                vparents[new] = (remap[a], remap[b])
        return Mesh(verts, tris,
                    gen=src.gen[elems],
                    ancestor=new_ancestor,
                    red_son=src.red_son[elems],
                    initial=new_initial,
                    vertex_parents=vparents,
                    has_red_history=src.has_red_history,
                    has_bisec5_history=src.has_bisec5_history)

    if mesh.initial is None:
        return extract(mesh, subset, np.arange(len(subset), dtype=np.int64), None)

    sub_initial = restrict(init, subset)
    new_anc = np.array([ancestor_pos[int(mesh.ancestor[t])] for t in keep],
                       dtype=np.int64)
    return extract(mesh, keep, new_anc, sub_initial)


# -- builders ----------------------------------------------------------------


def square2() -> Mesh:
    """Unit square split along the (0,0)-(1,1) diagonal into 2 triangles.

    The diagonal is the reference edge of both elements, so the mesh has
    the BDD property.
    """
    vertices = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    elements = [(2, 0, 1), (0, 2, 3)]
    return Mesh(vertices, elements)


def lshape6() -> Mesh:
    """L-shape (-1,1)^2 minus [0,1)x(-1,0], 6 triangles, 8 vertices.

    Each quadrant square is split by the diagonal through the reentrant
    corner (0,0); all diagonals are reference edges, so the mesh is BDD.
    """
    vertices = [(-1.0, -1.0), (0.0, -1.0), (0.0, 0.0), (1.0, 0.0),
                (1.0, 1.0), (0.0, 1.0), (-1.0, 1.0), (-1.0, 0.0)]
    elements = [(0, 2, 7), (2, 0, 1), (2, 6, 7), (6, 2, 5), (2, 4, 5), (4, 2, 3)]
    return Mesh(vertices, elements)


def canonical_form(mesh: Mesh):
    """Renumbering-invariant description: sorted (coords triple, gen, red) list.

    Two meshes describing the same triangulation with the same reference
    edges compare equal under this form regardless of vertex/element ids.
    The reference edge is implied by the triple's rotation; CCW triples that
    differ only by which vertex is listed first denote different reference
    edges and are deliberately kept distinct.
    """
    items = []
    for t in range(mesh.n_elements):
        p0, p1, p2 = mesh.coords(t)
        items.append((p0, p1, p2, int(mesh.gen[t]), bool(mesh.red_son[t])))
    return sorted(items)


def same_mesh(a: Mesh, b: Mesh) -> bool:
    """True iff the meshes are identical up to renumbering."""
    return canonical_form(a) == canonical_form(b)
