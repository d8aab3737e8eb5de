"""Mesh data model: conformity, neighbors, structure flags, restriction."""

from __future__ import annotations

import itertools
import math

import pytest

from conftest import (crisscross, single_triangle, small_mesh_corpus,
                      square2_boundary_refs, square2_incompatible)
from nvbmesh import _geom
from nvbmesh.mesh import (COMPATIBLY_DIVISIBLE, INCOMPATIBLE, NOT_ADJACENT,
                          Mesh, MeshError, build_edge_table, classify_pair,
                          edge_key, geometry, incidence_pairs, lshape6,
                          reference_neighbor, restrict, same_mesh, square2,
                          structure_flags, validate_mesh)
from nvbmesh.refine import MarkingInput, refine_step, uniform


def test_valid_square_reports_clean(sq):
    assert validate_mesh(sq).ok


def test_cw_triple_reports_orientation_violation():
    mesh = Mesh([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)],
                [(2, 0, 1), (2, 0, 3)],  # second triple is CW
                validate=False)
    report = validate_mesh(mesh)
    assert "inverted_element" in report.kinds()
    assert not report.ok


def _tri_intersection_violations(mesh):
    """Oracle: pairwise closed-triangle intersections must be empty, a
    common vertex, or a common full edge of both."""
    bad = []
    for t1, t2 in itertools.combinations(range(mesh.n_elements), 2):
        shared_nodes = set(int(v) for v in mesh.elements[t1]) & \
            set(int(v) for v in mesh.elements[t2])
        if len(shared_nodes) >= 2:
            continue  # common edge (over-sharing is caught separately)
        # no shared edge: any vertex of one strictly inside an edge of the
        # other witnesses a non-conforming contact
        for a, b in ((t1, t2), (t2, t1)):
            tri = mesh.coords(b)
            edges = [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])]
            for v in mesh.elements[a]:
                p = mesh.point(int(v))
                if any(_geom.point_strictly_inside_segment(p, e0, e1)
                       for e0, e1 in edges):
                    bad.append((t1, t2))
    return bad


def test_hanging_node_detected_and_matches_pairwise_oracle():
    # one long edge abuts two half-edges of the upper triangles
    vertices = [(0.0, 0.0), (2.0, 0.0), (1.0, 0.0), (1.0, 1.0), (1.0, -1.0)]
    mesh = Mesh(vertices, [(0, 2, 3), (2, 1, 3), (1, 0, 4)], validate=False)
    report = validate_mesh(mesh)
    assert "hanging_node" in report.kinds()
    assert _tri_intersection_violations(mesh), "oracle must also flag it"


def test_duplicate_vertex_detected():
    mesh = Mesh([(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 0.0)],
                [(0, 1, 2), (0, 3, 2)], validate=False)
    assert "duplicate_vertex" in validate_mesh(mesh).kinds()


def test_reference_neighbor_mutual_on_bdd_square(sq):
    assert reference_neighbor(sq, 0) == 1
    assert reference_neighbor(sq, 1) == 0


def test_reference_neighbor_single_triangle_boundary():
    assert reference_neighbor(single_triangle(), 0) is None


def test_reference_neighbor_lshape_boundary_legs(lshape):
    # oracle: boundary edges are exactly the edge-table entries of length 1
    boundary = {e for e, inc in lshape.edge_table.items() if len(inc) == 1}
    for t in range(lshape.n_elements):
        expected = None if lshape.ref_edge(t) in boundary else \
            next(i for i in lshape.edge_table[lshape.ref_edge(t)] if i != t)
        assert reference_neighbor(lshape, t) == expected


def test_reference_neighbor_bad_id(sq):
    with pytest.raises(ValueError):
        reference_neighbor(sq, 5)


def test_classify_pair_cases(sq):
    assert classify_pair(sq, 0, 1) == COMPATIBLY_DIVISIBLE
    inc = square2_incompatible()
    assert classify_pair(inc, 0, 1) == INCOMPATIBLE
    cc = crisscross()
    assert classify_pair(cc, 0, 2) == NOT_ADJACENT


def test_classify_pair_symmetric():
    for mesh in small_mesh_corpus().values():
        for t1, t2 in itertools.combinations(range(mesh.n_elements), 2):
            assert classify_pair(mesh, t1, t2) == classify_pair(mesh, t2, t1)


def test_structure_flags_bdd_square(sq):
    flags = structure_flags(sq)
    assert flags.is_bdd and flags.is_weak_bdd
    assert not flags.isolated


def test_structure_flags_incompatible_square():
    flags = structure_flags(square2_incompatible())
    assert not flags.is_bdd


def test_bdd_implies_weak_bdd_on_corpus():
    # exhaustive pair enumeration on every corpus mesh
    for name, mesh in small_mesh_corpus().items():
        flags = structure_flags(mesh)
        if flags.is_bdd:
            assert flags.is_weak_bdd, name


def test_boundary_reference_edges_literal_reading():
    # both reference edges on the boundary: literally isolated, and the two
    # elements share the diagonal, so the literal weak-BDD reading fails
    # while the boundary-exempt primary reading holds
    mesh = square2_boundary_refs()
    flags = structure_flags(mesh)
    assert flags.is_bdd
    assert flags.is_weak_bdd
    assert flags.isolated_literal == frozenset({0, 1})
    assert not flags.is_weak_bdd_literal


def test_geometry_right_triangle():
    g = geometry(single_triangle(), 0)
    assert g.area == 0.5
    assert g.diameter == math.sqrt(2.0)
    assert g.shape_regularity == g.diameter ** 2 / 0.5


def test_bisection_halves_area(sq):
    fine, _ = refine_step(sq, MarkingInput.of([0]), "refineNVB")
    for t in range(fine.n_elements):
        parent = int(fine.parent_elems[t])
        if int(fine.gen[t]) == 1:
            assert fine.area(t) == sq.area(parent) / 2.0


def test_uniform_bisec3_son_areas(sq):
    fine = uniform(sq, "bisec3")
    assert fine.n_elements == 8
    # oracle: shoelace per son
    for t in range(fine.n_elements):
        p0, p1, p2 = fine.coords(t)
        shoelace = 0.5 * abs(
            p0[0] * (p1[1] - p2[1]) + p1[0] * (p2[1] - p0[1])
            + p2[0] * (p0[1] - p1[1]))
        assert fine.area(t) == shoelace == 0.125


def test_restrict_identity(sq):
    sub = restrict(sq, [0, 1])
    assert same_mesh(sub, sq)


def test_restrict_after_refinement(sq):
    marking = MarkingInput.all_edges(sq, [0])
    fine, _ = refine_step(sq, marking, "refineNVB3")
    sub = restrict(fine, [1])
    # oracle: independent recomputation by ancestor filtering
    expected = sorted(fine.coords(t) for t in range(fine.n_elements)
                      if int(fine.ancestor[t]) == 1)
    got = sorted(sub.coords(t) for t in range(sub.n_elements))
    assert got == expected
    assert validate_mesh(sub).ok
    assert (sub.gen >= 0).all()


def test_restrict_is_conforming_on_random_runs(rng):
    from conftest import random_trace

    meshes, _ = random_trace(lshape6(), seed=7, steps=4, dialect="refineNVB")
    fine = meshes[-1]
    sub = restrict(fine, [0, 1, 2])
    assert validate_mesh(sub).ok
    # generations and areas carried over exactly
    assert sub.total_area() == sum(
        fine.area(t) for t in range(fine.n_elements)
        if int(fine.ancestor[t]) in (0, 1, 2))


def test_restrict_empty_subset_rejected(sq):
    with pytest.raises(ValueError):
        restrict(sq, [])


def test_total_area_preserved_and_area_generation_exact():
    from conftest import random_trace

    for dialect, policy_name in (("refineNVB", None), ("refine", "interior")):
        from nvbmesh.refine import PatternPolicy

        policy = PatternPolicy.interior_node() if policy_name else None
        meshes, _ = random_trace(square2(), seed=3, steps=5, dialect=dialect,
                                 policy=policy)
        initial = meshes[0]
        anc_areas = initial.areas()
        for mesh in meshes:
            assert abs(mesh.total_area() - 1.0) < 1e-12
            for t in range(mesh.n_elements):
                expect = anc_areas[int(mesh.ancestor[t])] * 2.0 ** (-int(mesh.gen[t]))
                assert mesh.area(t) == expect


def test_edge_table_rebuild_identical():
    for mesh in small_mesh_corpus().values():
        assert build_edge_table(mesh.elements) == mesh.edge_table


def test_incidence_pair_count():
    for mesh in small_mesh_corpus().values():
        assert len(incidence_pairs(mesh)) == 3 * mesh.n_elements


def test_mesh_is_immutable(sq):
    with pytest.raises(ValueError):
        sq.vertices[0, 0] = 5.0
    with pytest.raises(ValueError):
        sq.elements[0, 0] = 2


def test_construction_rejects_cw():
    with pytest.raises(MeshError):
        Mesh([(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)], [(0, 2, 1)])


def test_construction_rejects_overshared_edge():
    with pytest.raises(MeshError):
        Mesh([(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (0.5, 1.0), (-0.5, 1.0)],
             [(0, 1, 2), (0, 1, 3), (0, 1, 4)], validate=True)


def test_lshape_builder(lshape):
    assert lshape.n_vertices == 8
    assert lshape.n_elements == 6
    assert lshape.total_area() == 3.0
    assert validate_mesh(lshape).ok
    assert structure_flags(lshape).is_bdd


def test_edge_key_canonical():
    assert edge_key(3, 1) == edge_key(1, 3) == (1, 3)
