"""Closure fixpoints and element splitting for the four refinement dialects.

The dialects are

* ``refineNVB``     -- marked elements seed their reference edges; fully
  marked elements are refined by three bisections,
* ``refineNVB3``    -- arbitrary marked-edge seeds, bisections only,
* ``refineNVBred``  -- fully marked elements may be red-refined,
* ``refine``        -- fully marked elements may use bisec(3), red, or
  bisec(5).

A closure pass extends the marked-edge set to the unique minimal fixpoint
with the property that whenever any edge of an element is marked, so is
its reference edge.  The splitter then refines every element according to
its marked edges in a single sweep; by the closure property the resulting
partition is conforming.

Son ordering and generation bookkeeping (T = (v0, v1, v2), reference edge
(v0, v1), m = midpoint(v0, v1)): bisecting T yields (v2, v0, m) and
(v1, v2, m), both at gen+1, with reference edges opposite the new vertex.
Deeper patterns iterate this rule; red refinement splits T via the three
edge midpoints into four similar sons at gen+2, the two sons not meeting
(v0, v1) in more than one point being flagged as red sons.

Everything here is a pure function from immutable meshes to new meshes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import _geom
from .mesh import EdgeKey, Mesh, edge_key, reference_neighbor

PATTERN_NONE = "none"
BISEC1 = "bisec1"
BISEC2_LEFT = "bisec2_left"
BISEC2_RIGHT = "bisec2_right"
BISEC3 = "bisec3"
BISEC5 = "bisec5"
RED = "red"

FULL_PATTERNS = (BISEC3, RED, BISEC5)

DIALECTS = ("refineNVB", "refineNVB3", "refineNVBred", "refine")


class UnsupportedRefinementError(ValueError):
    """Raised for operations outside a dialect's or overlay's scope."""


@dataclass(frozen=True)
class MarkingInput:
    """Marked elements plus, for the modified dialects, marked edges.

    Every marked edge must lie in at least one marked element.
    """

    elements: frozenset[int]
    edges: frozenset[EdgeKey] = frozenset()

    @staticmethod
    def of(elements: Iterable[int], edges: Iterable[EdgeKey] = ()) -> "MarkingInput":
        return MarkingInput(frozenset(int(t) for t in elements),
                            frozenset(edges))

    @staticmethod
    def all_edges(mesh: Mesh, elements: Iterable[int]) -> "MarkingInput":
        """Mark the given elements with all three of their edges."""
        elems = frozenset(int(t) for t in elements)
        edges = frozenset(e for t in elems for e in mesh.edges_of(t))
        return MarkingInput(elems, edges)


@dataclass(frozen=True)
class PatternPolicy:
    """Chooses among bisec(3) / red / bisec(5) for fully marked elements."""

    name: str
    rule: Callable[[int, bool], str]

    def choose(self, elem: int, is_marked: bool) -> str:
        pattern = self.rule(elem, is_marked)
        if pattern not in FULL_PATTERNS:
            raise ValueError(f"policy {self.name!r} returned {pattern!r}")
        return pattern

    @staticmethod
    def always_bisec3() -> "PatternPolicy":
        return PatternPolicy("always_bisec3", lambda t, m: BISEC3)

    @staticmethod
    def always_red() -> "PatternPolicy":
        return PatternPolicy("always_red", lambda t, m: RED)

    @staticmethod
    def interior_node() -> "PatternPolicy":
        """bisec(5) on marked elements, bisec(3) on closure fill-ins."""
        return PatternPolicy("interior_node",
                             lambda t, m: BISEC5 if m else BISEC3)

    @staticmethod
    def custom(fn: Callable[[int, bool], str], name: str = "custom") -> "PatternPolicy":
        return PatternPolicy(name, fn)


@dataclass(frozen=True)
class RefinementPlan:
    """Closure fixpoint output: the marked-edge set and per-element patterns."""

    closed_edges: frozenset[EdgeKey]
    pattern: tuple[str, ...]
    iterations: int
    marked_elements: frozenset[int]
    seed_edges: frozenset[EdgeKey]
    mode: str

    def refined_elements(self) -> frozenset[int]:
        return frozenset(t for t, p in enumerate(self.pattern)
                         if p != PATTERN_NONE)


@dataclass(frozen=True)
class StepRecord:
    """One refinement step of a trace."""

    step: int
    n_marked: int
    n_marked_edges: int
    closure_iterations: int
    n_refined: int
    n_elements: int


def trace_to_csv(records: Iterable[StepRecord]) -> str:
    lines = ["step,marked,marked_edges,closure_iters,refined,elements"]
    for r in records:
        lines.append(f"{r.step},{r.n_marked},{r.n_marked_edges},"
                     f"{r.closure_iterations},{r.n_refined},{r.n_elements}")
    return "\n".join(lines) + "\n"


# -- closure ------------------------------------------------------------------


def close_marks(mesh: Mesh, marking: MarkingInput, mode: str = "mnvb") -> RefinementPlan:
    """Extend the marked-edge seed to the minimal conforming fixpoint.

    In ``nvb`` mode the seed is the set of reference edges of the marked
    elements and ``marking.edges`` is ignored; in ``mnvb`` mode the seed is
    ``marking.edges``.  The returned plan assigns ``bisec3`` to fully
    marked elements as a placeholder for the pattern policy.
    """
    if mode not in ("nvb", "mnvb"):
        raise ValueError(f"unknown closure mode {mode!r}")
    for t in marking.elements:
        if not 0 <= t < mesh.n_elements:
            raise ValueError(f"marked element {t} out of range")

    if mode == "nvb":
        seed = frozenset(mesh.ref_edge(t) for t in marking.elements)
    else:
        for e in marking.edges:
            if e not in mesh.edge_table:
                raise ValueError(f"marked edge {e} is not an edge of the mesh")
            if not any(t in marking.elements for t in mesh.edge_table[e]):
                raise ValueError(f"marked edge {e} lies in no marked element")
        seed = frozenset(marking.edges)

    marked: set[EdgeKey] = set(seed)
    frontier = list(seed)
    iterations = 0
    while frontier:
        new_refs: set[EdgeKey] = set()
        for e in frontier:
            for t in mesh.edge_table[e]:
                ref = mesh.ref_edge(t)
                if ref not in marked:
                    new_refs.add(ref)
        if not new_refs:
            break
        marked |= new_refs
        frontier = sorted(new_refs)
        iterations += 1

    patterns = []
    for t in range(mesh.n_elements):
        edges = mesh.edges_of(t)
        inside = [e in marked for e in edges]
        count = sum(inside)
        if count == 0:
            patterns.append(PATTERN_NONE)
        elif count == 1:
            assert inside[0], "closure fixpoint violated: marked edge without ref"
            patterns.append(BISEC1)
        elif count == 2:
            assert inside[0]
            patterns.append(BISEC2_LEFT if inside[1] else BISEC2_RIGHT)
        else:
            patterns.append(BISEC3)

    return RefinementPlan(closed_edges=frozenset(marked),
                          pattern=tuple(patterns),
                          iterations=iterations,
                          marked_elements=frozenset(marking.elements),
                          seed_edges=seed,
                          mode=mode)


def brute_force_closure(mesh: Mesh, seed: frozenset[EdgeKey]) -> frozenset[EdgeKey]:
    """Smallest superset of the seed closed under the reference-edge rule,
    found by exhaustive subset enumeration.  Test oracle; exponential in
    the number of edges."""
    all_edges = sorted(mesh.edge_table)
    free = [e for e in all_edges if e not in seed]
    if len(free) > 20:
        raise ValueError("brute_force_closure is only for tiny meshes")

    def closed(edges: frozenset[EdgeKey]) -> bool:
        for t in range(mesh.n_elements):
            es = mesh.edges_of(t)
            if any(e in edges for e in es) and es[0] not in edges:
                return False
        return True

    best = None
    for bits in range(1 << len(free)):
        cand = set(seed)
        for i, e in enumerate(free):
            if bits >> i & 1:
                cand.add(e)
        if closed(frozenset(cand)):
            if best is None or len(cand) < len(best):
                best = frozenset(cand)
    assert best is not None  # the full edge set is always closed
    return best


# -- splitting ----------------------------------------------------------------


def split(mesh: Mesh, plan: RefinementPlan, policy: PatternPolicy | None = None) -> Mesh:
    """Refine every element according to the plan; returns a new mesh.

    Fully marked elements get their final pattern from the policy
    (default: three bisections).  Every closed edge is halved; the only
    other new nodes are bisec(5) interior nodes.
    """
    if len(plan.pattern) != mesh.n_elements:
        raise ValueError("plan does not match mesh (element count differs)")
    for e in plan.closed_edges:
        if e not in mesh.edge_table:
            raise ValueError(f"plan edge {e} is not an edge of the mesh")
    if not plan.closed_edges:
        return mesh

    if policy is None:
        policy = PatternPolicy.always_bisec3()
    patterns = list(plan.pattern)
    for t, p in enumerate(patterns):
        if p in FULL_PATTERNS:
            patterns[t] = policy.choose(t, t in plan.marked_elements)

    n_old = mesh.n_vertices
    new_coords: list[tuple[float, float]] = []
    new_parents: list[tuple[int, int]] = []
    midpoint_of: dict[EdgeKey, int] = {}

    def midpoint(a: int, b: int) -> int:
        key = edge_key(a, b)
        node = midpoint_of.get(key)
        if node is None:
            node = n_old + len(new_coords)
            midpoint_of[key] = node
            pa = (mesh.vertices[a, 0], mesh.vertices[a, 1]) if a < n_old \
                else new_coords[a - n_old]
            pb = (mesh.vertices[b, 0], mesh.vertices[b, 1]) if b < n_old \
                else new_coords[b - n_old]
            new_coords.append(_geom.midpoint(pa, pb))
            new_parents.append(key)
        return node

    tris: list[tuple[int, int, int]] = []
    gens: list[int] = []
    ancs: list[int] = []
    reds: list[bool] = []
    parents: list[int] = []
    any_red = False
    any_b5 = False

    def emit(t, triple, gen, red=False):
        tris.append(triple)
        gens.append(gen)
        ancs.append(int(mesh.ancestor[t]))
        reds.append(red)
        parents.append(t)

    for t in range(mesh.n_elements):
        p = patterns[t]
        v0, v1, v2 = (int(v) for v in mesh.elements[t])
        g = int(mesh.gen[t])
        if p == PATTERN_NONE:
            emit(t, (v0, v1, v2), g, bool(mesh.red_son[t]))
            continue
        m01 = midpoint(v0, v1)
        if p == BISEC1:
            emit(t, (v2, v0, m01), g + 1)
            emit(t, (v1, v2, m01), g + 1)
        elif p == BISEC2_LEFT:
            m12 = midpoint(v1, v2)
            emit(t, (v2, v0, m01), g + 1)
            emit(t, (m01, v1, m12), g + 2)
            emit(t, (v2, m01, m12), g + 2)
        elif p == BISEC2_RIGHT:
            m20 = midpoint(v2, v0)
            emit(t, (m01, v2, m20), g + 2)
            emit(t, (v0, m01, m20), g + 2)
            emit(t, (v1, v2, m01), g + 1)
        elif p == BISEC3:
            m12 = midpoint(v1, v2)
            m20 = midpoint(v2, v0)
            emit(t, (m01, v2, m20), g + 2)
            emit(t, (v0, m01, m20), g + 2)
            emit(t, (m01, v1, m12), g + 2)
            emit(t, (v2, m01, m12), g + 2)
        elif p == BISEC5:
            any_b5 = True
            m12 = midpoint(v1, v2)
            m20 = midpoint(v2, v0)
            mi = midpoint(m01, v2)  # interior node of T
            emit(t, (m20, m01, mi), g + 3)
            emit(t, (v2, m20, mi), g + 3)
            emit(t, (v0, m01, m20), g + 2)
            emit(t, (m01, v1, m12), g + 2)
            emit(t, (m12, v2, mi), g + 3)
            emit(t, (m01, m12, mi), g + 3)
        elif p == RED:
            any_red = True
            m12 = midpoint(v1, v2)
            m20 = midpoint(v2, v0)
            emit(t, (v0, m01, m20), g + 2)
            emit(t, (m01, v1, m12), g + 2)
            emit(t, (m20, m12, v2), g + 2, red=True)
            emit(t, (m12, m20, m01), g + 2, red=True)
        else:
            raise ValueError(f"unknown pattern {p!r}")

    verts = (np.vstack([mesh.vertices, np.array(new_coords, dtype=np.float64)])
             if new_coords else mesh.vertices.copy())
    vparents = (np.vstack([mesh.vertex_parents,
                           np.array(new_parents, dtype=np.int64)])
                if new_parents else mesh.vertex_parents.copy())
    root = mesh if mesh.initial is None and mesh.is_initial else mesh.initial
    return Mesh(verts, np.array(tris, dtype=np.int64),
                gen=gens, ancestor=ancs, red_son=reds,
                initial=root, parent_elems=parents, vertex_parents=vparents,
                has_red_history=mesh.has_red_history or any_red,
                has_bisec5_history=mesh.has_bisec5_history or any_b5)


def refine_step(mesh: Mesh, marking: MarkingInput, dialect: str,
                policy: PatternPolicy | None = None) -> tuple[Mesh, frozenset[int]]:
    """One step of the chosen dialect: closure, policy override, split.

    Returns the refined mesh and the set of refined element ids
    (elements of the input mesh that were split).
    """
    new, refined, _ = step_with_plan(mesh, marking, dialect, policy)
    return new, refined


def step_with_plan(mesh: Mesh, marking: MarkingInput, dialect: str,
                   policy: PatternPolicy | None = None
                   ) -> tuple[Mesh, frozenset[int], RefinementPlan]:
    """refine_step variant that also hands back the closure plan."""
    if dialect not in DIALECTS:
        raise ValueError(f"unknown dialect {dialect!r}; one of {DIALECTS}")
    if dialect in ("refineNVB", "refineNVB3"):
        if policy is not None and policy.name != "always_bisec3":
            raise ValueError(f"{dialect} admits only three-bisection refinement")
        policy = PatternPolicy.always_bisec3()
    mode = "nvb" if dialect == "refineNVB" else "mnvb"
    plan = close_marks(mesh, marking, mode=mode)
    if dialect == "refineNVBred" and policy is not None:
        guarded = policy

        def no_bisec5(t, m, _inner=guarded):
            p = _inner.choose(t, m)
            if p == BISEC5:
                raise UnsupportedRefinementError(
                    "refineNVBred forbids bisec(5) refinement")
            return p

        policy = PatternPolicy.custom(no_bisec5, name=guarded.name)
    refined = plan.refined_elements()
    return split(mesh, plan, policy), refined, plan


def chain(mesh: Mesh, t: int) -> list[int]:
    """Sequence of distinct elements bisected when only t is marked.

    Follows reference neighbors until the boundary or an element already
    in the sequence is reached.
    """
    if not 0 <= t < mesh.n_elements:
        raise ValueError(f"element id {t} out of range")
    out = [t]
    seen = {t}
    cur = t
    while True:
        nxt = reference_neighbor(mesh, cur)
        if nxt is None or nxt in seen:
            return out
        out.append(nxt)
        seen.add(nxt)
        cur = nxt


def uniform(mesh: Mesh, kind: str) -> Mesh:
    """Uniform refinement: 'bisec1' marks everything under refineNVB,
    'bisec3' halves every edge (4 sons per element, no spillover)."""
    everything = range(mesh.n_elements)
    if kind == "bisec1":
        new, _ = refine_step(mesh, MarkingInput.of(everything), "refineNVB")
        return new
    if kind == "bisec3":
        marking = MarkingInput.all_edges(mesh, everything)
        plan = close_marks(mesh, marking, mode="mnvb")
        return split(mesh, plan, PatternPolicy.always_bisec3())
    raise ValueError(f"unknown uniform kind {kind!r}")


# -- bisection forest and overlay ---------------------------------------------

Triple = tuple[tuple[float, float], tuple[float, float], tuple[float, float]]


@dataclass
class TreeNode:
    """Node of a bisection tree: ordered coordinate triple plus level."""

    triple: Triple
    gen: int
    sons: tuple["TreeNode", "TreeNode"] | None = None

    @property
    def is_leaf(self) -> bool:
        return self.sons is None


def _bisect_triple(tri: Triple) -> tuple[Triple, Triple]:
    p0, p1, p2 = tri
    m = _geom.midpoint(p0, p1)
    return (p2, p0, m), (p1, p2, m)


@dataclass
class BisectionForest:
    """Per initial element, the binary tree of bisections leading to a mesh.

    Reconstructed structurally: a tree node is a leaf iff its coordinate
    triple appears in the refined mesh.  Exact dyadic midpoint arithmetic
    makes the coordinate matching exact.
    """

    initial: Mesh
    roots: list[TreeNode] = field(default_factory=list)

    @staticmethod
    def from_mesh(mesh: Mesh, initial: Mesh | None = None) -> "BisectionForest":
        if mesh.has_red_history or mesh.has_bisec5_history:
            raise UnsupportedRefinementError(
                "bisection forest requires a pure-bisection refinement")
        root_mesh = initial if initial is not None else mesh.initial_mesh
        targets: list[dict[Triple, int]] = [dict() for _ in range(root_mesh.n_elements)]
        for t in range(mesh.n_elements):
            targets[int(mesh.ancestor[t])][mesh.coords(t)] = int(mesh.gen[t])
        max_gen = int(mesh.gen.max())
        forest = BisectionForest(initial=root_mesh)
        for i in range(root_mesh.n_elements):
            if not targets[i]:
                raise UnsupportedRefinementError(
                    f"initial element {i} has no descendant in the mesh")

            def grow(tri: Triple, g: int, leaves=targets[i]) -> TreeNode:
                got = leaves.get(tri)
                if got is not None:
                    if got != g:
                        raise UnsupportedRefinementError(
                            f"generation mismatch at {tri}: {got} != {g}")
                    return TreeNode(tri, g)
                if g > max_gen:
                    raise UnsupportedRefinementError(
                        "mesh is not a bisection refinement of the initial mesh")
                left, right = _bisect_triple(tri)
                return TreeNode(tri, g, (grow(left, g + 1), grow(right, g + 1)))

            forest.roots.append(grow(root_mesh.coords(i), int(root_mesh.gen[i])))
        return forest

    def leaf_count(self) -> int:
        def count(node: TreeNode) -> int:
            if node.is_leaf:
                return 1
            return count(node.sons[0]) + count(node.sons[1])

        return sum(count(r) for r in self.roots)


def overlay(a: Mesh, b: Mesh) -> Mesh:
    """Coarsest common refinement of two pure-NVB meshes over one initial mesh.

    Per initial element the union of the two bisection trees is taken; the
    element count satisfies #overlay <= #a + #b - #initial.
    """
    for m in (a, b):
        if m.has_red_history or m.has_bisec5_history:
            raise UnsupportedRefinementError(
                "overlay is defined for pure-bisection meshes only")
    ra, rb = a.initial_mesh, b.initial_mesh
    if ra is not rb:
        same = (np.array_equal(ra.vertices, rb.vertices)
                and np.array_equal(ra.elements, rb.elements))
        if not same:
            raise ValueError("overlay requires refinements of the same initial mesh")

    leaves_a: list[set[Triple]] = [set() for _ in range(ra.n_elements)]
    leaves_b: list[set[Triple]] = [set() for _ in range(ra.n_elements)]
    for t in range(a.n_elements):
        leaves_a[int(a.ancestor[t])].add(a.coords(t))
    for t in range(b.n_elements):
        leaves_b[int(b.ancestor[t])].add(b.coords(t))
    depth_cap = int(max(a.gen.max(), b.gen.max()))

    node_id: dict[tuple[float, float], int] = {}
    coords: list[tuple[float, float]] = []

    def nid(p: tuple[float, float]) -> int:
        i = node_id.get(p)
        if i is None:
            i = len(coords)
            node_id[p] = i
            coords.append(p)
        return i

    tris: list[tuple[int, int, int]] = []
    gens: list[int] = []
    ancs: list[int] = []

    for i in range(ra.n_elements):
        la, lb = leaves_a[i], leaves_b[i]
        stack = [(ra.coords(i), int(ra.gen[i]), True, True)]
        while stack:
            tri, g, in_a, in_b = stack.pop()
            leaf_a = in_a and tri in la
            leaf_b = in_b and tri in lb
            interior_a = in_a and not leaf_a
            interior_b = in_b and not leaf_b
            if interior_a or interior_b:
                if g >= depth_cap:
                    raise ValueError(
                        "overlay descent exceeded the maximum generation; "
                        "inputs are not refinements of the given initial mesh")
                left, right = _bisect_triple(tri)
                stack.append((right, g + 1, interior_a, interior_b))
                stack.append((left, g + 1, interior_a, interior_b))
            else:
                tris.append((nid(tri[0]), nid(tri[1]), nid(tri[2])))
                gens.append(g)
                ancs.append(i)

    return Mesh(np.array(coords, dtype=np.float64),
                np.array(tris, dtype=np.int64),
                gen=gens, ancestor=ancs,
                initial=ra)
