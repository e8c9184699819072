"""Batch front end: ``reflectlab {run,list,solve,chain-check,lookup,verify-involutions}``.

A run config is YAML::

    seed: 42                  # optional, --seed overrides
    include_presets: [ids] | all
    experiments:
      - id: my_experiment
        kind: harmonic_function_reflection
        anchor: "..."         # optional, defaults per kind
        exploratory: false    # optional
        expect: pass          # pass | fail | not_applicable (negative controls)
        params: {...}         # validated against the kind's schema

Outputs under ``--out`` (or ``$REFLECTLAB_OUT``): ``summary.csv``,
``reports.json`` and plot-ready tables in ``data/``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np
import yaml

from . import chains, harness, registry, solver
from .errors import ConfigParseError, ExperimentError, HypothesisViolated, ReflectLabError
from .expr import Expression, evaluate_on_points
from .geometry import ModelSpace, make_space
from .involutions import (
    make_conjugation,
    make_negation,
    make_reflection,
    make_sigma_q,
    make_tau_q,
    verify_involution,
)
from .report import FAIL, NOT_APPLICABLE, PASS, SKIPPED, VerificationReport

SUMMARY_COLUMNS = ("id", "kind", "paper_anchor", "hypothesis_status", "max_residual", "tolerance",
                   "status", "runtime_ms")
DEFAULT_SEED = 42
EXPECTATIONS = (PASS, FAIL, NOT_APPLICABLE)


# ---------------------------------------------------------------------------
# parameter parsing


def parse_space(spec) -> ModelSpace:
    """``"chyp_ball"``, ``"chyp_ball:2"`` or ``{kind, n, branch}``."""
    if isinstance(spec, str):
        kind, _, n = spec.partition(":")
        return make_space(kind, int(n) if n else 1)
    if isinstance(spec, dict):
        return make_space(spec["kind"], int(spec.get("n", 1)), spec.get("branch"))
    raise ConfigParseError(f"cannot parse space {spec!r}")


def parse_involution(spec, space: Optional[ModelSpace] = None):
    kind = spec if isinstance(spec, str) else spec.get("type")
    opts = {} if isinstance(spec, str) else spec
    if kind == "conjugation":
        return make_conjugation(space)
    if kind == "reflection":
        return make_reflection(space, opts.get("axes", [1]))
    if kind == "negation":
        return make_negation(space)
    if kind == "sigma_q":
        return make_sigma_q(int(opts["n"]), int(opts["q"]))
    if kind == "tau_q":
        return make_tau_q(int(opts["n"]), int(opts["q"]), int(opts.get("branch", 1)))
    raise ConfigParseError(f"unknown involution type {kind!r}")


def parse_grid(spec: dict, source: ModelSpace) -> solver.GridDomain:
    return solver.make_grid(
        source,
        spec.get("bounds", [[-1, 1]] * source.real_dim),
        spec.get("resolution", 21),
        shape=spec.get("shape", "box"),
        radius=spec.get("radius"),
        half=spec.get("half"),
        hypersurface=spec.get("hypersurface"),
    )


def parse_coefficients(values) -> list:
    return [complex(str(v).replace(" ", "")) if isinstance(v, str) else v for v in values]


def closed_form_map(expr, target: ModelSpace) -> Callable:
    """Closed-form map from expression text in the chart variables."""
    exprs = expr if isinstance(expr, list) else [expr]
    compiled = [Expression(str(e)) for e in exprs]

    def f(points):
        pts = np.asarray(points, dtype=float)
        flat = pts.reshape(-1, pts.shape[-1])
        vals = evaluate_on_points(compiled, flat, target.real_dim, target.is_complex)
        return vals.reshape(pts.shape[:-1] + (target.real_dim,))

    return f


def _solve_opts(params: dict, tol_override: Optional[float]) -> solver.SolveOptions:
    tol = tol_override if tol_override is not None else params.get("tol")
    return solver.SolveOptions(tol=tol, max_iters=int(params.get("max_iters", 200_000)))


# ---------------------------------------------------------------------------
# experiment kinds


def _run_harmonic_function(p, rng, tol):
    return harness.verify_harmonic_function_reflection(
        parse_space(p["space"]), p["boundary"], _solve_opts(p, tol),
        resolution=int(p.get("resolution", 41)), tolerance=float(p.get("tolerance", 1e-9)),
    )


def _run_reflection_identity(p, rng, tol):
    source = parse_space(p["source"])
    target = parse_space(p["target"])
    s1 = parse_involution(p["sigma1"], source)
    s2 = parse_involution(p["sigma2"], target)
    if "map" in p:
        h = closed_form_map(p["map"], target)
        seed = int(rng.integers(2**31))
        exp = harness.ReflectionExperiment(s1, s2, h, float(p.get("tolerance", 1e-12)),
                                           samples=int(p.get("samples", 500)), seed=seed)
        return harness.verify_reflection_identity(exp)
    opts = _solve_opts(p, tol)
    dom = parse_grid(p["grid"], source)
    h = solver.solve_dirichlet(dom, target, p["boundary"], opts)
    solver_tol = opts.resolved_tol(target)
    tolerance = float(p.get("tolerance", 10 * solver_tol))
    exp = harness.ReflectionExperiment(s1, s2, h, tolerance, hypothesis_tol=tolerance)
    rep = harness.verify_reflection_identity(exp)
    rep.add("solver_residual", [h.info["residual"]], solver_tol)
    rep.tables["history"] = solver.history_rows(h)
    return rep.finalize()


def _run_schwarz(p, rng, tol):
    return harness.schwarz_refinement_study(
        p.get("exact", "exp(x)*sin(y)"), tuple(p.get("resolutions", (21, 41, 81))),
        p.get("shape", "disk"), float(p.get("radius", 0.9)), min_order=float(p.get("min_order", 1.9)),
    )


def _run_unique_continuation(p, rng, tol):
    source = parse_space(p["source"])
    target = parse_space(p["target"])
    dom = parse_grid(p["grid"], source)
    seeds = tuple(p.get("seeds", (0, int(rng.integers(1, 2**31)))))
    return harness.unique_continuation_experiment(
        dom, target, p["boundary"], seeds, p.get("boundary_other"), _solve_opts(p, tol),
        field_tol=float(p.get("field_tol", 1e-6)), ratio=float(p.get("ratio", 1e3)),
    )


def _run_meromorphic(p, rng, tol):
    return harness.meromorphic_reflection_check(
        parse_coefficients(p["numerator"]), parse_coefficients(p.get("denominator", [1])),
        int(p.get("samples", 500)), rng,
    )


def _run_minimal_surface(p, rng, tol):
    kind = p.get("surface", "helicoid")
    if kind == "helicoid":
        surface = harness.helicoid(float(p.get("c", 1.0)), float(p.get("perturbation", 0.0)))
    elif kind == "plane":
        surface = harness.plane_through_axis(float(p.get("angle", 0.3)))
    else:
        raise ConfigParseError(f"unknown surface {kind!r}")
    return harness.minimal_surface_reflection_check(
        surface, samples=int(p.get("samples", 1000)), rng=rng,
        use_closed_form=not bool(p.get("search", False)),
    )


def _run_recursive(p, rng, tol):
    chain = chains.build_chain(p["family"], int(p["n"]), p.get("q"), int(p.get("branch", 1)))
    target = parse_space(p["target"])
    s2 = parse_involution(p.get("sigma2", "conjugation"), target)
    f = closed_form_map(p["map"], target)
    try:
        return harness.verify_recursive_reflection(chain, f, s2, int(p.get("samples", 200)), rng)
    except HypothesisViolated as exc:
        rep = VerificationReport("", kind="recursive_reflection")
        b1 = chain.real_form.midpoint_projection(chain.sample(chain.n, 50, rng))
        fb = f(b1)
        rep.hypothesis("f(B1) in B2", False)
        rep.add("hyp:f(B1)_in_B2", np.max(np.abs(s2.apply(fb) - fb), axis=-1), 1e-10)
        rep.notes.append(str(exc))
        return rep.finalize()


def _run_chain_check(p, rng, tol):
    chain = chains.build_chain(p["family"], int(p["n"]), p.get("q"), int(p.get("branch", 1)))
    trials = int(p.get("trials", 100))
    gtol = float(tol if tol is not None else p.get("tolerance", 1e-6))
    rows = chains.chain_rows(chain, trials, rng, gtol)
    rep = VerificationReport("", kind="chain_check")
    for row in rows:
        if row["status"] == SKIPPED:
            continue
        rep.add(f"L{row['level']}:{row['check']}", [row["residual"]], row["tolerance"])
    rep.tables["levels"] = rows
    if chain.family not in chains.METRIC_FAMILIES:
        rep.notes.append("totally-geodesic check skipped by design: no metric implemented")
    if p.get("negative_control"):
        drift = control_plane_drift(rng)
        rep.tables["control"] = [{"control_plane_drift": float(np.max(drift))}]
        rep.add("control:not_detected", [float(np.max(drift) <= 1e-3)], 0.5)
    return rep.finalize()


def control_plane_drift(rng) -> np.ndarray:
    """Drift off the real 2-plane spanned by ``Re z1`` and ``Re z2`` through a
    point of the 2-ball; the plane is not J-invariant, so it is not totally
    geodesic and the drift must be visible."""
    ball = make_space("chyp_ball", 2)
    return chains.affine_plane_drift(ball, [0.3, 0.1, 0.2, 0.0],
                                     [[1, 0, 0, 0], [0, 0, 1, 0]], trials=20, rng=rng)


def _run_lookup(p, rng, tol):
    rep = VerificationReport("", kind="lookup")
    rows = registry.lookup_real_forms(p["domain_type"], **p.get("params", {}))
    if "expect_count" in p:
        rep.add("row_count_mismatch", [abs(len(rows) - int(p["expect_count"]))], 0.5)
    if "expect_symbols" in p:
        got = [s for r in rows for s in getattr(r, "real_form_symbols", (getattr(r, "real_form", ""),))]
        missing = [s for s in p["expect_symbols"] if s not in got]
        rep.add("missing_symbols", [float(len(missing))], 0.5)
    rep.tables["rows"] = [r.__dict__ if not hasattr(r, "real_form_symbols")
                          else {**r.__dict__, "real_form_symbols": " | ".join(r.real_form_symbols)}
                          for r in rows]
    return rep.finalize()


def _run_verify_involution(p, rng, tol):
    space = parse_space(p["space"]) if "space" in p else None
    inv = parse_involution(p["involution"], space)
    return verify_involution(inv, int(p.get("samples", 200)), rng=rng)


def _run_tension_refinement(p, rng, tol):
    source = parse_space(p.get("source", "euclidean_c:1"))
    target = parse_space(p["target"])
    f = closed_form_map(p["map"], target)
    maps = []
    for n in p.get("resolutions", (21, 41, 81)):
        dom = parse_grid({**p.get("grid", {}), "resolution": n}, source)
        maps.append(solver.DiscreteMap(dom, target, f(dom.coords)))
    hs, errs = solver.tension_refinement(maps)
    rep = VerificationReport("", kind="tension_refinement")
    rep.tables["refinement"] = [{"h": h, "tension": e} for h, e in zip(hs, errs)]
    floor = float(p.get("exact_floor", 1e-10))
    if max(errs) <= floor:
        rep.notes.append("stencil-exact: residual at rounding level on every grid")
        rep.add("tension", errs, floor)
    else:
        order = solver.observed_order(hs, errs)
        rep.tables["orders"] = [{"quantity": "tension", "order": order}]
        rep.add("order_deficit", [max(0.0, float(p.get("min_order", 1.9)) - order)], 1e-12)
    return rep.finalize()


def _run_solve(p, rng, tol):
    source = parse_space(p["source"])
    target = parse_space(p["target"])
    dom = parse_grid(p["grid"], source)
    opts = _solve_opts(p, tol)
    if p.get("method") == "laplace_beltrami":
        h = solver.laplace_beltrami_solve(dom, p["boundary"], opts)
    else:
        h = solver.solve_dirichlet(dom, target, p["boundary"], opts)
    rep = VerificationReport("", kind="solve")
    rep.add("tension", [solver.tension(h).max_norm], h.info["tol"])
    rep.tables["history"] = solver.history_rows(h)
    if "exact" in p:
        truth = solver.boundary_values(dom, h.target, p["exact"])
        rep.add("exact_error", np.max(np.abs(h.values - truth), axis=-1), float(p.get("exact_tol", 1e-8)))
    rep.maps = {"map": solver.map_to_text(h)}
    return rep.finalize()


KINDS: dict[str, tuple[Callable, str, set, set]] = {
    # kind: (runner, default anchor, required params, optional params)
    "harmonic_function_reflection": (_run_harmonic_function, "Theorem 5.1", {"space", "boundary"},
                                     {"resolution", "tolerance", "tol", "max_iters"}),
    "reflection_identity": (_run_reflection_identity, "Theorem 4.1",
                            {"source", "target", "sigma1", "sigma2"},
                            {"map", "grid", "boundary", "tolerance", "tol", "max_iters", "samples"}),
    "schwarz_extension": (_run_schwarz, "Theorem 4.1", set(),
                          {"exact", "resolutions", "shape", "radius", "min_order"}),
    "unique_continuation": (_run_unique_continuation, "Theorem 2.3",
                            {"source", "target", "grid", "boundary"},
                            {"seeds", "boundary_other", "tol", "max_iters", "field_tol", "ratio"}),
    "meromorphic_reflection": (_run_meromorphic, "Theorem 6.3 (meromorphic)", {"numerator"},
                               {"denominator", "samples"}),
    "minimal_surface_reflection": (_run_minimal_surface, "Theorem 3.1", set(),
                                   {"surface", "c", "perturbation", "angle", "samples", "search"}),
    "recursive_reflection": (_run_recursive, "Theorem 6.2", {"family", "n", "target", "map"},
                             {"q", "branch", "sigma2", "samples"}),
    "chain_check": (_run_chain_check, "Proposition 6.1", {"family", "n"},
                    {"q", "branch", "trials", "tolerance", "negative_control"}),
    "lookup": (_run_lookup, "Appendix Table B", {"domain_type"},
               {"params", "expect_count", "expect_symbols"}),
    "verify_involution": (_run_verify_involution, "Proposition 6.1", {"involution"},
                          {"space", "samples"}),
    "tension_refinement": (_run_tension_refinement, "Lemma 6.1", {"map", "target"},
                           {"source", "grid", "resolutions", "min_order", "exact_floor"}),
    "solve": (_run_solve, "harmonic map energy", {"source", "target", "grid", "boundary"},
              {"tol", "max_iters", "method", "exact", "exact_tol"}),
}
EXPERIMENT_KEYS = {"id", "kind", "anchor", "exploratory", "expect", "params", "description"}


# ---------------------------------------------------------------------------
# config handling


def load_presets() -> list[dict]:
    text = resources.files("reflectlab").joinpath("data/presets.yaml").read_text("utf-8")
    return yaml.safe_load(text)["presets"]


def validate_experiment(exp: Any, where: str) -> dict:
    if not isinstance(exp, dict):
        raise ConfigParseError(f"{where}: experiment must be a mapping")
    unknown = set(exp) - EXPERIMENT_KEYS
    if unknown:
        raise ConfigParseError(f"{where}: unknown key(s) {sorted(unknown)}")
    for key in ("id", "kind"):
        if key not in exp:
            raise ConfigParseError(f"{where}: missing key '{key}'")
    kind = exp["kind"]
    if kind not in KINDS:
        raise ConfigParseError(f"{where}: unknown kind '{kind}' (key 'kind'); expected one of {sorted(KINDS)}")
    params = exp.get("params") or {}
    if not isinstance(params, dict):
        raise ConfigParseError(f"{where}: 'params' must be a mapping")
    _, anchor, required, optional = KINDS[kind]
    missing = required - set(params)
    if missing:
        raise ConfigParseError(f"{where}: kind {kind} missing param(s) {sorted(missing)}")
    extra = set(params) - required - optional
    if extra:
        raise ConfigParseError(f"{where}: kind {kind} does not accept param(s) {sorted(extra)}")
    expect = exp.get("expect", PASS)
    if expect not in EXPECTATIONS:
        raise ConfigParseError(f"{where}: 'expect' must be one of {EXPECTATIONS}")
    return {
        "id": str(exp["id"]),
        "kind": kind,
        "anchor": str(exp.get("anchor", anchor)),
        "exploratory": bool(exp.get("exploratory", False)),
        "expect": expect,
        "params": params,
        "description": str(exp.get("description", "")),
    }


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigParseError(f"{path}: not valid YAML ({exc})") from None
    except OSError as exc:
        raise ConfigParseError(f"{path}: {exc.strerror}") from None
    return parse_config(raw, str(path))


def parse_config(raw: Any, where: str = "config") -> dict:
    raw = {} if raw is None else raw
    if not isinstance(raw, dict):
        raise ConfigParseError(f"{where}: top level must be a mapping")
    unknown = set(raw) - {"seed", "experiments", "include_presets"}
    if unknown:
        raise ConfigParseError(f"{where}: unknown top-level key(s) {sorted(unknown)}")
    experiments = []
    include = raw.get("include_presets")
    if include:
        presets = load_presets()
        if include == "all":
            experiments.extend(presets)
        else:
            by_id = {p["id"]: p for p in presets}
            for pid in include:
                if pid not in by_id:
                    raise ConfigParseError(f"{where}: unknown preset '{pid}' in include_presets")
                experiments.append(by_id[pid])
    body = raw.get("experiments") or []
    if not isinstance(body, list):
        raise ConfigParseError(f"{where}: 'experiments' must be a list")
    experiments.extend(body)
    parsed = [validate_experiment(e, f"{where}: experiments[{i}]") for i, e in enumerate(experiments)]
    ids = [e["id"] for e in parsed]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise ConfigParseError(f"{where}: duplicate experiment id(s) {dupes}")
    return {"seed": raw.get("seed"), "experiments": parsed}


# ---------------------------------------------------------------------------
# running


def experiment_rng(seed: int, exp_id: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(exp_id.encode())]))


def run_experiment(exp: dict, seed: int, tol: Optional[float] = None, timing: bool = True) -> dict:
    """Run one validated experiment; never raises (errors become status 'error')."""
    runner = KINDS[exp["kind"]][0]
    start = time.perf_counter()
    maps: dict = {}
    try:
        rep = runner(exp["params"], experiment_rng(seed, exp["id"]), tol)
        maps = getattr(rep, "maps", {})
        out = rep.to_dict()
        out["hypothesis_summary"] = rep.hypothesis_summary
        out["max_residual"] = rep.max_residual
        out["tolerance"] = rep.tolerance
    except (ReflectLabError, ValueError, ArithmeticError, KeyError, TypeError) as exc:
        out = {"status": "error", "error": f"{type(exc).__name__}: {exc}", "hypotheses": {},
               "residuals": {}, "notes": [], "tables": {}, "hypothesis_summary": "none",
               "max_residual": float("nan"), "tolerance": float("nan")}
    out.update({
        "id": exp["id"],
        "kind": exp["kind"],
        "anchor": exp["anchor"],
        "exploratory": exp["exploratory"] or out.get("exploratory", False),
        "expect": exp["expect"],
        "runtime_ms": int(round(1000 * (time.perf_counter() - start))) if timing else 0,
        "maps": maps,
    })
    return out


def _job(args):
    return run_experiment(*args)


def met_expectation(rec: dict) -> bool:
    """A control must reach its expected status, and a failing control must
    miss its tolerance by at least a factor 100."""
    if rec["status"] != rec["expect"]:
        return False
    if rec["expect"] in (FAIL, NOT_APPLICABLE):
        return bool(rec["max_residual"] >= 100 * rec["tolerance"])
    return True


def summary_text(records: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    for r in records:
        writer.writerow([r["id"], r["kind"], r["anchor"], r["hypothesis_summary"],
                         repr(float(r["max_residual"])), repr(float(r["tolerance"])), r["status"],
                         r["runtime_ms"]])
    return buf.getvalue()


def _write_table(path: Path, rows: list[dict]) -> None:
    if not rows:
        return
    cols = list(rows[0])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def write_outputs(out_dir: Path, records: list[dict], seed: int, config_path: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "summary.csv").write_text(summary_text(records), encoding="utf-8")
    data = out_dir / "data"
    data.mkdir(exist_ok=True)
    docs = []
    for rec in records:
        for name, rows in rec.get("tables", {}).items():
            _write_table(data / f"{rec['id']}__{name}.csv", rows)
        for name, text in rec.get("maps", {}).items():
            (data / f"{rec['id']}__{name}.csv").write_text(text, encoding="utf-8")
        docs.append({k: v for k, v in rec.items() if k not in ("maps", "tables")})
    header = {"seed": seed, "config": config_path, "experiments": docs}
    (out_dir / "reports.json").write_text(
        json.dumps(header, indent=2, sort_keys=True, default=str), encoding="utf-8")


def execute(config: dict, seed: int, parallel: int = 1, tol: Optional[float] = None,
            timing: bool = True) -> list[dict]:
    jobs = [(exp, seed, tol, timing) for exp in config["experiments"]]
    if parallel <= 1 or len(jobs) <= 1:
        return [_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=parallel) as pool:
        return list(pool.map(_job, jobs))


def resolve_out(arg: Optional[str]) -> Path:
    env = os.environ.get("REFLECTLAB_OUT")
    return Path(env or arg or "reflectlab_out")


# ---------------------------------------------------------------------------
# subcommands


def cmd_run(args) -> int:
    if args.config:
        config = load_config(args.config)
        cfg_name = args.config
    else:
        config = parse_config({"include_presets": args.preset or "all"}, "presets")
        cfg_name = "presets"
    seed = args.seed if args.seed is not None else (config["seed"] if config["seed"] is not None
                                                     else DEFAULT_SEED)
    records = execute(config, seed, args.parallel, args.tol, timing=not args.no_timing)
    out = resolve_out(args.out)
    write_outputs(out, records, seed, cfg_name)
    failures = [r for r in records if not r["exploratory"] and not met_expectation(r)]
    for r in records:
        flag = "ok " if met_expectation(r) else ("exp" if r["exploratory"] else "BAD")
        print(f"[{flag}] {r['id']:<36} {r['status']:<15} expect={r['expect']:<15} "
              f"max={float(r['max_residual']):.3g} tol={float(r['tolerance']):.3g}")
    print(f"{len(records) - len(failures)}/{len(records)} as expected; outputs in {out}")
    if failures:
        raise ExperimentError(f"{len(failures)} experiment(s) did not meet expectations: "
                              + ", ".join(r["id"] for r in failures))
    return 0


def list_experiments() -> list[dict]:
    rows = []
    for p in load_presets():
        exp = validate_experiment(p, f"preset {p.get('id')}")
        family = exp["params"].get("family", "")
        rows.append({"id": exp["id"], "kind": exp["kind"], "paper_anchor": exp["anchor"],
                     "family": family, "expect": exp["expect"], "description": exp["description"]})
    return rows


def cmd_list(args) -> int:
    rows = list_experiments()
    writer = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return 0


def cmd_solve(args) -> int:
    config = load_config(args.config)
    solves = [e for e in config["experiments"] if e["kind"] == "solve"]
    if not solves:
        raise ConfigParseError(f"{args.config}: no experiments of kind 'solve'")
    out = resolve_out(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = args.seed if args.seed is not None else DEFAULT_SEED
    bad = 0
    for exp in solves:
        rec = run_experiment(exp, seed, args.tol)
        if rec["status"] == "error":
            print(f"{exp['id']}: {rec['error']}", file=sys.stderr)
            bad += 1
            continue
        (out / f"{exp['id']}.map.csv").write_text(rec["maps"]["map"], encoding="utf-8")
        _write_table(out / f"{exp['id']}.history.csv", rec["tables"]["history"])
        print(f"{exp['id']}: {rec['status']} residual={rec['residuals']['tension']['max']:.3g} "
              f"-> {out / (exp['id'] + '.map.csv')}")
        bad += rec["status"] != PASS
    return 1 if bad else 0


def cmd_chain_check(args) -> int:
    chain = chains.build_chain(args.family, args.n, args.q, args.branch)
    rng = np.random.default_rng(args.seed if args.seed is not None else DEFAULT_SEED)
    rows = chains.chain_rows(chain, args.trials, rng, args.tol if args.tol is not None else 1e-6)
    writer = csv.DictWriter(sys.stdout, fieldnames=["level", "check", "residual", "tolerance", "status"],
                            lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return 0 if all(r["status"] in (PASS, SKIPPED) for r in rows) else 1


def cmd_lookup(args) -> int:
    params = {k: getattr(args, k) for k in ("p", "q", "n", "k", "row", "family")
              if getattr(args, k) is not None}
    for row in registry.lookup_real_forms(args.domain_type, **params):
        print(json.dumps(row.__dict__, ensure_ascii=False))
    return 0


def cmd_verify_involutions(args) -> int:
    rng = np.random.default_rng(args.seed if args.seed is not None else DEFAULT_SEED)
    bad = 0
    for n in range(2, args.n_max + 1):
        invs = [make_sigma_q(n, q) for q in range(0, n // 2 + 1)]
        invs += [make_tau_q(n, q, b) for q in range(1, n + 1) for b in (1, 2)]
        for inv in invs:
            rep = verify_involution(inv, args.samples, rng=rng)
            print(rep.summary_line())
            bad += not rep.passed
    return 1 if bad else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="reflectlab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=False):
        p.add_argument("--config", required=config_required)
        p.add_argument("--out")
        p.add_argument("--seed", type=int)
        p.add_argument("--parallel", type=int, default=os.cpu_count() or 1)
        p.add_argument("--tol", type=float)

    p = sub.add_parser("run", help="run a config (or the built-in presets)")
    common(p)
    p.add_argument("--preset", action="append", help="preset id to run (repeatable) when no --config")
    p.add_argument("--no-timing", action="store_true", help="write runtime_ms = 0 for byte-stable summaries")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("list", help="list built-in presets")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("solve", help="run the 'solve' experiments of a config and write map files")
    common(p, config_required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("chain-check", help="per-level checks of a recursive chain")
    p.add_argument("--family", required=True, choices=chains.FAMILIES)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--q", type=int)
    p.add_argument("--branch", type=int, default=1)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--tol", type=float)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_chain_check)

    p = sub.add_parser("lookup", help="look up real forms")
    p.add_argument("domain_type", choices=registry.DOMAIN_TYPES + (registry.RECURSIVE,))
    for k in ("p", "q", "n", "k", "row"):
        p.add_argument(f"--{k}", type=int)
    p.add_argument("--family")
    p.set_defaults(func=cmd_lookup)

    p = sub.add_parser("verify-involutions", help="identity checks for sigma_q and tau_q")
    p.add_argument("--n-max", type=int, default=8)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_verify_involutions)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigParseError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ExperimentError as exc:
        print(f"experiment error: {exc}", file=sys.stderr)
        return 1
    except ReflectLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
