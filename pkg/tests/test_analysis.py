"""Structural verifiers: level laws, neighbor rules, ledgers, scalar bound."""

from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import random_trace
from nvbmesh.analysis import (closure_accounting, max_equal_gen_chain,
                              reciprocal_sum_bound, verify_chain_bounds,
                              verify_levels, verify_neighbor_rules)
from nvbmesh.mesh import Mesh, lshape6, reference_neighbor, square2
from nvbmesh.refine import MarkingInput, StepRecord, refine_step, uniform
from nvbmesh.marking import RunConfig, run_refinement


def test_uniform_refinement_has_zero_jump(sq):
    fine = uniform(uniform(sq, "bisec3"), "bisec3")
    report = verify_levels(fine, sq)
    assert report.ok
    assert report.max_level_jump == 0


def test_corner_marking_respects_jump_two(sq):
    mesh = sq
    for _ in range(10):
        marked = [t for t in range(mesh.n_elements)
                  if any(p == (0.0, 0.0) for p in mesh.coords(t))]
        mesh, _ = refine_step(mesh, MarkingInput.of(marked), "refineNVB")
        report = verify_levels(mesh, sq)
        assert report.ok
        assert report.max_level_jump <= 2


def test_bdd_initial_with_nvb_respects_jump_one(sq):
    meshes, _ = random_trace(sq, seed=4, steps=8, dialect="refineNVB")
    for mesh in meshes:
        report = verify_levels(mesh, sq, nvb_dialect=True)
        assert report.ok
        assert report.max_level_jump <= 1


def test_non_bdd_initial_notes_misuse():
    from conftest import square2_incompatible

    initial = square2_incompatible()
    meshes, _ = random_trace(initial, seed=1, steps=3, dialect="refineNVB")
    report = verify_levels(meshes[-1], initial, nvb_dialect=True)
    assert report.notes  # misuse note, not a failure
    assert report.ok


def test_area_generation_identity_detects_tampering(sq):
    fine = uniform(sq, "bisec3")
    gens = fine.gen.copy()
    gens[3] += 1
    bad = Mesh(fine.vertices.copy(), fine.elements.copy(), gen=gens,
               ancestor=fine.ancestor.copy(), initial=sq)
    report = verify_levels(bad, sq)
    assert not report.ok
    failed = {c.name for c in report.failed()}
    assert "area_generation_identity" in failed


def test_neighbor_rules_vacuous_on_fresh_bdd(sq):
    report = verify_neighbor_rules(sq, sq)
    assert report.ok


def test_neighbor_rules_hold_on_randomized_nvb_runs():
    # 100 seeds, 8 steps each, one random element marked per step
    for seed in range(100):
        initial = lshape6() if seed % 2 else square2()
        rng = np.random.default_rng(seed)
        mesh = initial
        for _ in range(8):
            t = int(rng.integers(mesh.n_elements))
            mesh, _ = refine_step(mesh, MarkingInput.of([t]), "refineNVB")
        report = verify_neighbor_rules(mesh, initial)
        assert report.ok, (seed, report.failed())


def test_neighbor_rules_report_corrupted_generation(sq):
    fine = uniform(uniform(sq, "bisec3"), "bisec1")
    victim = None
    for t in range(fine.n_elements):
        if reference_neighbor(fine, t) is not None:
            victim = reference_neighbor(fine, t)
            break
    gens = fine.gen.copy()
    gens[victim] += 3
    bad = Mesh(fine.vertices.copy(), fine.elements.copy(), gen=gens,
               ancestor=fine.ancestor.copy(), initial=sq)
    report = verify_neighbor_rules(bad, sq)
    assert not report.ok
    assert any(c.witnesses for c in report.failed())


def test_chain_bounds_single_bisection_distance_zero(sq):
    report = verify_chain_bounds([sq], [MarkingInput.of([0])])
    assert report.ok
    # sons touch the marked element
    assert report.max_dist_scaled == 0.0


def test_chain_bounds_overshoot_at_most_two_and_attained():
    # with BDD initial meshes single-marking chains stay compatibly
    # divisible and only +1 creations occur; random reference edges
    # realize the sharp +2 case
    from nvbmesh.marking import assign_reference_edges

    worst = 0
    for seed in range(12):
        base = square2() if seed % 2 else lshape6()
        initial = assign_reference_edges(base, "random", seed=seed)
        meshes, markings = random_trace(initial, seed=seed, steps=5,
                                        dialect="refineNVB", fraction=0.2)
        report = verify_chain_bounds(meshes[:-1], markings)
        assert report.ok, seed
        assert report.max_gen_overshoot <= 2
        worst = max(worst, report.max_gen_overshoot)
    assert worst == 2  # the bound is sharp: +2 creations do occur


def test_scaled_creation_distance_does_not_diverge():
    # the recorded max of dist * 2^(gen/2) from a 20-step corner run
    config = RunConfig(initial="lshape6", dialect="refineNVB",
                       strategy="corner", steps=20)
    result = run_refinement(config)
    report = verify_chain_bounds(result.meshes[:-1], result.markings)
    assert report.ok
    # two windows of the run: the later one must not blow past the earlier
    early = verify_chain_bounds(result.meshes[:10], result.markings[:10])
    assert report.max_dist_scaled <= max(1.0, 4.0 * max(early.max_dist_scaled,
                                                        1e-9))


def test_equal_gen_chain_length_is_reported(sq):
    assert max_equal_gen_chain(sq) == 2


# -- closure accounting ----------------------------------------------------------


def test_uniform_runs_have_rho_at_most_four(lshape):
    config = RunConfig(initial="lshape6", strategy="all", dialect="refineNVB3",
                       steps=4)
    result = run_refinement(config)
    ledger = closure_accounting(result.records, lshape.n_elements)
    assert ledger.sum_bound_ok
    assert ledger.max_rho <= 4.0


def test_sum_bound_on_every_random_trace():
    for seed in range(10):
        config = RunConfig(initial="square2", strategy="random",
                           fraction=0.3, dialect="refineNVB", steps=6,
                           seed=seed)
        result = run_refinement(config)
        ledger = closure_accounting(result.records, 2)
        assert ledger.sum_bound_ok, seed
        for row in ledger.rows:
            if row.rho is not None:
                assert row.rho >= 1.0


def test_rho_undefined_until_marks_accumulate():
    ledger = closure_accounting(
        [StepRecord(step=1, n_marked=0, n_marked_edges=0,
                    closure_iterations=0, n_refined=0, n_elements=6)], 6)
    assert ledger.rows[0].rho is None


def test_corner_run_rho_stays_single_digit():
    config = RunConfig(initial="lshape6", dialect="refineNVB",
                       strategy="corner", steps=25)
    result = run_refinement(config)
    ledger = closure_accounting(result.records, 6)
    assert ledger.sum_bound_ok
    assert ledger.max_rho < 10.0


def test_ledger_csv_shape():
    config = RunConfig(initial="square2", strategy="all", steps=2)
    result = run_refinement(config)
    ledger = closure_accounting(result.records, 2)
    lines = ledger.to_csv().strip().splitlines()
    assert lines[0] == "step,marked,elements,cum_marked,rho"
    assert len(lines) == 3


# -- scalar reciprocal-sum bound --------------------------------------------------


def test_reciprocal_sum_all_ones():
    res = reciprocal_sum_bound(1.0, 1.0, 1.0)
    assert res.lhs == 6.0
    assert res.bound == 6.0
    assert res.holds


def test_reciprocal_sum_sharp_at_a_equals_m():
    big_m = math.pi
    res = reciprocal_sum_bound(big_m, 1.0, big_m)
    assert abs(res.lhs - res.bound) <= 1e-12
    assert res.holds


def test_reciprocal_sum_rejects_out_of_range():
    with pytest.raises(ValueError):
        reciprocal_sum_bound(3.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        reciprocal_sum_bound(2.0, 2.0, 2.0)  # a*b = 4 > M
    with pytest.raises(ValueError):
        reciprocal_sum_bound(1.0, 1.0, 0.5)  # M < 1


def test_reciprocal_sum_grid_no_violations():
    rng = np.random.default_rng(0)
    count = 0
    while count < 10_000:
        big_m = float(rng.uniform(1.0, math.pi))
        a = float(rng.uniform(1.0 / big_m, big_m))
        b = float(rng.uniform(1.0 / big_m, big_m))
        if not (1.0 / big_m <= a * b <= big_m):
            continue
        res = reciprocal_sum_bound(a, b, big_m)
        assert res.holds, (a, b, big_m)
        count += 1
