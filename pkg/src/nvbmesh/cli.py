"""Command-line front end.

Subcommands: generate, refine, analyze, stability, corr-check.  Exit codes
follow the CI contract: 0 on success, 2 on usage/IO/parse errors, 3 when a
structural invariant is violated.  All runs are deterministic for a fixed
argument list; repeated invocations produce byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, correspondence, marking, meshio, stability
from .mesh import Mesh, MeshError, structure_flags, validate_mesh
from .refine import MarkingInput, PatternPolicy, UnsupportedRefinementError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VIOLATION = 3


def _common(parser: argparse.ArgumentParser):
    parser.add_argument("--seed", type=int, default=0, help="run seed")
    parser.add_argument("--out", type=str, default=".",
                        help="output file or directory")
    parser.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="preferred report format where applicable")


def _parse_point(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected 'x,y'")
    return (float(parts[0]), float(parts[1]))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nvbmesh",
        description="newest-vertex-bisection mesh refinement toolbox")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a built-in or re-labeled mesh")
    g.add_argument("spec", help="square2 | lshape6 | path to .nvbm")
    g.add_argument("--ref-edges", choices=marking.REF_EDGE_POLICIES,
                   default="as-given")
    _common(g)

    r = sub.add_parser("refine", help="run a refinement sequence")
    r.add_argument("spec", help="square2 | lshape6 | path to .nvbm")
    r.add_argument("--ref-edges", choices=marking.REF_EDGE_POLICIES,
                   default="as-given")
    r.add_argument("--dialect", choices=("refineNVB", "refineNVB3",
                                         "refineNVBred", "refine"),
                   default="refineNVB")
    r.add_argument("--policy", choices=marking.POLICY_NAMES, default="bisec3")
    r.add_argument("--strategy", choices=marking.STRATEGIES, default="all")
    r.add_argument("--fraction", type=float, default=0.25)
    r.add_argument("--corner", type=_parse_point, default=(0.0, 0.0))
    r.add_argument("--radius", type=float, default=0.0)
    r.add_argument("--theta", type=float, default=0.5)
    r.add_argument("--alpha", type=float, default=1.0)
    r.add_argument("--steps", type=int, default=5)
    _common(r)

    a = sub.add_parser("analyze", help="verify structural invariants of mesh files")
    a.add_argument("files", nargs="+", help="initial mesh first, then refinements")
    a.add_argument("--trace", type=str, default=None,
                   help="trace.csv from a refine run, for the closure ledger")
    a.add_argument("--nvb", action="store_true",
                   help="meshes come from refineNVB: check neighbor rules "
                        "and the sharper BDD level-jump bound")
    a.add_argument("--rho-bound", type=float, default=None)
    _common(a)

    s = sub.add_parser("stability", help="nodal weights and projection stability")
    s.add_argument("spec", help="square2 | lshape6 | path to .nvbm")
    s.add_argument("--levels", type=int, default=2,
                   help="uniform refinements defining the fine space")
    s.add_argument("--skip-measure", action="store_true",
                   help="only check the per-element weight conditions")
    s.add_argument("--debug-tamper", type=str, default=None,
                   metavar="NODE:DELTA",
                   help="debug: shift one weight exponent before checking")
    _common(s)

    c = sub.add_parser("corr-check",
                       help="build and verify a red/bisec3 correspondence")
    c.add_argument("--initial", default="square2")
    c.add_argument("--steps", type=int, default=5)
    c.add_argument("--policy", choices=("red", "mixed"), default="red")
    c.add_argument("--fraction", type=float, default=0.3)
    _common(c)

    return parser


def _load_spec(spec: str, ref_edges: str = "as-given", seed: int = 0) -> Mesh:
    config = marking.RunConfig(initial=spec, ref_edges=ref_edges, seed=seed)
    return marking.build_initial(config)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_generate(args) -> int:
    mesh = _load_spec(args.spec, args.ref_edges, args.seed)
    out = Path(args.out)
    if out.is_dir():
        out = out / f"{Path(args.spec).stem}.nvbm"
    meshio.write_mesh(mesh, out)
    print(f"wrote {out}: {mesh.n_vertices} vertices, {mesh.n_elements} elements")
    return EXIT_OK


def cmd_refine(args) -> int:
    config = marking.RunConfig(
        initial=args.spec, ref_edges=args.ref_edges, dialect=args.dialect,
        policy=args.policy, strategy=args.strategy, fraction=args.fraction,
        corner=tuple(args.corner), radius=args.radius, theta=args.theta,
        alpha=args.alpha, steps=args.steps, seed=args.seed)
    result = marking.run_refinement(config)
    out = _outdir(args)
    for i, mesh in enumerate(result.meshes):
        meshio.write_mesh(mesh, out / f"step_{i:03d}.nvbm")
    ledger = analysis.closure_accounting(result.records,
                                         result.initial.n_elements)
    lines = ["step,marked,elements,closure_iters,rho"]
    for rec, row in zip(result.records, ledger.rows):
        rho = "" if row.rho is None else repr(row.rho)
        lines.append(f"{rec.step},{rec.n_marked},{rec.n_elements},"
                     f"{rec.closure_iterations},{rho}")
    (out / "trace.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote {len(result.meshes)} meshes and trace.csv to {out} "
          f"(final: {result.final.n_elements} elements)")
    return EXIT_OK


def cmd_analyze(args) -> int:
    meshes = [meshio.read_mesh(f) for f in args.files]
    initial = meshes[0]
    out = _outdir(args)
    ok = True
    reports = []
    for path, mesh in zip(args.files, meshes):
        conf = validate_mesh(mesh)
        level = analysis.verify_levels(mesh, initial, nvb_dialect=args.nvb)
        entry = {"file": str(path), "conforming": conf.ok,
                 "conformity_violations": [v.detail for v in conf.violations],
                 **level.to_dict()}
        if args.nvb:
            entry["neighbor_rules"] = analysis.verify_neighbor_rules(
                mesh, initial).to_dict()
            if not entry["neighbor_rules"]["ok"]:
                ok = False
        reports.append(entry)
        if not conf.ok or not level.ok:
            ok = False
    summary = {
        "ok": ok,
        "initial_bdd": structure_flags(initial).is_bdd,
        "max_level_jump": max(r["max_level_jump"] for r in reports),
        "meshes": reports,
    }

    if args.trace:
        records = _read_trace(Path(args.trace))
        ledger = analysis.closure_accounting(records, initial.n_elements,
                                             rho_bound=args.rho_bound)
        (out / "ledger.csv").write_text(ledger.to_csv())
        summary["closure_sum_bound_ok"] = ledger.sum_bound_ok
        summary["max_rho"] = ledger.max_rho
        if not ledger.sum_bound_ok or not ledger.rho_bound_ok:
            ok = False
            summary["ok"] = False

    (out / "analysis.json").write_text(json.dumps(summary, indent=1) + "\n")
    if args.format == "csv":
        lines = ["file,conforming,ok,max_level_jump"]
        for r in reports:
            lines.append(f"{r['file']},{int(r['conforming'])},{int(r['ok'])},"
                         f"{r['max_level_jump']}")
        (out / "analysis.csv").write_text("\n".join(lines) + "\n")
    print(f"analyzed {len(meshes)} meshes: "
          f"{'all invariants hold' if ok else 'VIOLATIONS FOUND'} "
          f"(max level jump {summary['max_level_jump']})")
    return EXIT_OK if ok else EXIT_VIOLATION


def _read_trace(path: Path):
    from .refine import StepRecord

    records = []
    lines = path.read_text().strip().splitlines()
    for line in lines[1:]:
        parts = line.split(",")
        records.append(StepRecord(step=int(parts[0]), n_marked=int(parts[1]),
                                  n_marked_edges=0,
                                  closure_iterations=int(parts[3]),
                                  n_refined=int(parts[1]),
                                  n_elements=int(parts[2])))
    return records


def cmd_stability(args) -> int:
    coarse = _load_spec(args.spec, seed=args.seed)
    if not stability.is_element_connected(coarse):
        print("error: mesh is not connected", file=sys.stderr)
        return EXIT_USAGE
    out = _outdir(args)

    weights = stability.compute_weights(coarse)
    if args.debug_tamper:
        node, delta = (int(x) for x in args.debug_tamper.split(":"))
        exps = weights.exponents.copy()
        exps[node] += delta
        weights = stability.NodeWeights(exponents=exps)

    report = stability.check_conditions(coarse, weights)
    if not args.skip_measure:
        from .refine import uniform

        fine = coarse
        for _ in range(max(0, args.levels)):
            fine = uniform(fine, "bisec1")
        report.measured_h1_constant = stability.measure_h1_stability(coarse, fine)

    (out / "weights.csv").write_text(stability.weights_to_csv(coarse, weights))
    (out / "stability.json").write_text(
        json.dumps(report.to_dict(), indent=1) + "\n")
    if args.format == "csv":
        lines = ["elem,exponent_spread,ratio,s_sum,lam_min,passes"]
        for cond in report.elements:
            lines.append(f"{cond.elem},{cond.exponent_spread},{cond.ratio!r},"
                         f"{cond.s_sum!r},{cond.lam_min_closed!r},"
                         f"{int(cond.passes)}")
        (out / "conditions.csv").write_text("\n".join(lines) + "\n")
    status = "pass" if report.all_pass else "FAIL"
    measured = report.measured_h1_constant
    print(f"stability {status}: max ratio {report.max_ratio:g}, "
          f"max S {report.max_s_sum:g}, min lambda {report.min_lam:g}"
          + (f", measured H1 constant {measured:.6g}" if measured else ""))
    return EXIT_OK if report.all_pass else EXIT_VIOLATION


def cmd_corr_check(args) -> int:
    initial = _load_spec(args.initial, seed=args.seed)
    policy = (PatternPolicy.always_red() if args.policy == "red"
              else PatternPolicy.custom(
                  lambda t, m: "red" if t % 2 == 0 else "bisec3", name="mixed"))
    rng = np.random.default_rng(args.seed)
    mesh = initial
    markings: list[MarkingInput] = []
    from .refine import refine_step

    for _ in range(args.steps):
        draws = rng.random(mesh.n_elements)
        marked = [t for t in range(mesh.n_elements) if draws[t] < args.fraction]
        if not marked:
            marked = [int(rng.integers(mesh.n_elements))]
        markings.append(MarkingInput.all_edges(mesh, marked))
        mesh, _ = refine_step(mesh, markings[-1], "refineNVBred", policy)

    seq = correspondence.corresponding_sequence(initial, markings, policy)
    ok = True
    rows = []
    for i, corr in enumerate(seq.maps):
        rep = correspondence.verify_corr(corr)
        spread = max((len(corr.image_elements(t))
                      for t in range(corr.left.n_elements)), default=1)
        rows.append({"step": i, "elements": corr.left.n_elements,
                     "tilde_elements": corr.right.n_elements,
                     "verified": rep.ok, "max_image_spread": spread,
                     "violations": [list(map(str, v)) for v in rep.violations]})
        ok = ok and rep.ok and corr.left.n_elements == corr.right.n_elements
    for i, m in enumerate(markings):
        if len(seq.tilde_markings[i].elements) > 2 * len(m.elements):
            ok = False
            rows[i + 1]["marked_inflation_ok"] = False

    out = _outdir(args)
    (out / "corr_check.json").write_text(json.dumps(
        {"ok": ok, "steps": rows}, indent=1) + "\n")
    (out / "corr_map_final.json").write_text(seq.maps[-1].to_json() + "\n")
    print(f"corr-check over {args.steps} steps: {'ok' if ok else 'FAILED'} "
          f"(final {seq.red[-1].n_elements} elements)")
    return EXIT_OK if ok else EXIT_VIOLATION


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    handlers = {
        "generate": cmd_generate,
        "refine": cmd_refine,
        "analyze": cmd_analyze,
        "stability": cmd_stability,
        "corr-check": cmd_corr_check,
    }
    try:
        return handlers[args.command](args)
    except correspondence.CorrespondenceError as exc:
        print(f"correspondence violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except stability.NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except (MeshError, FileNotFoundError, OSError, ValueError,
            UnsupportedRefinementError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
