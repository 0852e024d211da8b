"""Command line harness: validated JSON configs in, hashed artifacts out.

Subcommands: grid, eig, torsion, two-ball, minimize, classify, lieb, audit.
Every run writes its artifacts plus a manifest (config echo, versions, wall
time, seed list, per-file sha256) into the output directory.  Identical
configs produce byte-identical artifact files.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import audit as audit_mod
from . import concentration as cc
from . import shapeopt
from .errors import FracshapeError, ParameterError
from .forms import assemble_stiffness
from .grid import (DomainMask, build_grid, full_mask, grid_to_json,
                   mask_from_indices, mask_to_json)
from .serialize import write_csv, write_json, write_manifest
from .solvers import eigenpairs, restrict, solve_torsion

GENERATORS = {
    "translating-bump": cc.translating_bump_sequence,
    "flattening-bump": cc.flattening_bump_sequence,
    "separating-pair": cc.separating_pair_sequence,
}

_SCHEMAS = {
    "grid": {"required": {"grid"}, "optional": set()},
    "eig": {"required": {"grid", "s", "mask", "k"}, "optional": {"seeds"}},
    "torsion": {"required": {"grid", "s", "mask"}, "optional": {"seeds"}},
    "two-ball": {"required": {"grid", "s", "total_volume_cells", "distances_cells"},
                 "optional": set()},
    "minimize": {"required": {"grid", "s", "functional", "volume_cells",
                              "iterations", "seeds"},
                 "optional": {"schedule"}},
    "classify": {"required": {"generator", "seeds"},
                 "optional": {"length", "epsilon_fraction"}},
    "lieb": {"required": {"grid", "s", "trials", "seeds"},
             "optional": {"mask_cells_min", "mask_cells_max"}},
    "audit": {"required": set(),
              "optional": {"grid", "s", "seeds", "checks"}},
}


def _fail(field: str, message: str):
    raise ParameterError(f"config field {field!r}: {message}")


def validate_config(kind: str, config: dict) -> dict:
    """Schema check: required keys present, unknown keys rejected, values
    within the preconditions of the operation being driven."""
    schema = _SCHEMAS[kind]
    keys = set(config)
    missing = schema["required"] - keys
    if missing:
        _fail(sorted(missing)[0], "missing")
    unknown = keys - schema["required"] - schema["optional"]
    if unknown:
        _fail(sorted(unknown)[0], "unknown key")
    if "grid" in config:
        g = config["grid"]
        for f in ("dim", "half_width", "resolution"):
            if f not in g:
                _fail(f"grid.{f}", "missing")
        build_grid(g["dim"], g["half_width"], g["resolution"])
    if "s" in config and not (isinstance(config["s"], (int, float))
                              and 0 < config["s"] < 1):
        _fail("s", f"must lie in (0, 1), got {config['s']}")
    if "seeds" in config:
        seeds = config["seeds"]
        if (not isinstance(seeds, list) or not seeds
                or not all(isinstance(x, int) for x in seeds)):
            _fail("seeds", "must be a nonempty list of integers")
    if "functional" in config:
        f = config["functional"]
        for fld in ("name", "k", "combiner"):
            if fld not in f:
                _fail(f"functional.{fld}", "missing")
        shapeopt.make_functional(f["name"], f["k"], f["combiner"])
    if "generator" in config and config["generator"] not in GENERATORS:
        _fail("generator", f"must be one of {sorted(GENERATORS)}")
    if "iterations" in config and not (isinstance(config["iterations"], int)
                                       and config["iterations"] >= 1):
        _fail("iterations", "must be an integer >= 1")
    if "checks" in config:
        bad = set(config["checks"]) - set(audit_mod.check_names())
        if bad:
            _fail("checks", f"unknown check {sorted(bad)[0]!r}")
    return config


def _build_mask(grid, spec) -> DomainMask:
    if spec == "full":
        return full_mask(grid)
    if isinstance(spec, dict) and spec.get("type") == "ball":
        return shapeopt.ball_mask(grid, spec["center"],
                                  spec["volume_cells"] * grid.cell_volume)
    if isinstance(spec, dict) and spec.get("type") == "indices":
        return mask_from_indices(grid, spec["indices"])
    _fail("mask", "must be 'full', a ball spec, or an index list")


# --- subcommand runners --------------------------------------------------------

def _run_grid(config, out):
    grid = build_grid(**config["grid"])
    write_json(out / "grid.json", grid_to_json(grid))
    rows = [(i,) + tuple(c) for i, c in enumerate(grid.cell_centers)]
    header = ["cell_index"] + [f"x{a}" for a in range(grid.dim)]
    write_csv(out / "centers.csv", header, rows)
    return [out / "grid.json", out / "centers.csv"], []


def _run_eig(config, out, seed_override):
    grid = build_grid(**config["grid"])
    base = assemble_stiffness(grid, config["s"])
    mask = _build_mask(grid, config["mask"])
    spec = eigenpairs(restrict(base, mask), config["k"])
    write_json(out / "spectrum.json", {
        "eigenvalues": spec.eigenvalues, "residuals": spec.residuals,
        "mask": mask_to_json(mask),
    })
    files = [out / "spectrum.json"]
    for j, ef in enumerate(spec.eigenfunctions, start=1):
        path = out / f"eigenfunction_{j}.csv"
        write_csv(path, ["cell_index", "value"], list(enumerate(ef.values)))
        files.append(path)
    return files, []


def _run_torsion(config, out, seed_override):
    grid = build_grid(**config["grid"])
    base = assemble_stiffness(grid, config["s"])
    mask = _build_mask(grid, config["mask"])
    tor = solve_torsion(restrict(base, mask))
    write_json(out / "torsion.json", {"residual": tor.residual,
                                      "mask": mask_to_json(mask)})
    write_csv(out / "torsion.csv", ["cell_index", "value"],
              list(enumerate(tor.values.values)))
    return [out / "torsion.json", out / "torsion.csv"], []


def _run_two_ball(config, out):
    grid = build_grid(**config["grid"])
    h = grid.h
    rows = shapeopt.two_ball_experiment(
        grid, config["s"], config["total_volume_cells"] * grid.cell_volume,
        [d * h for d in config["distances_cells"]])
    header = ["d", "lambda1_union", "lambda2_union", "lambda1_half_ball", "gap"]
    write_csv(out / "table.csv", header, [[r[k] for k in header] for r in rows])
    return [out / "table.csv"], []


def _run_minimize(config, out, seeds):
    grid = build_grid(**config["grid"])
    base = assemble_stiffness(grid, config["s"])
    f = config["functional"]
    spec = shapeopt.make_functional(f["name"], f["k"], f["combiner"])
    sched = shapeopt.AnnealingSchedule(**config.get("schedule", {}))
    files = []
    for seed in seeds:
        traj = shapeopt.minimize_shape(
            spec, base, config["volume_cells"] * grid.cell_volume,
            config["iterations"], seed, sched)
        lines = [json.dumps({"value": v, "cells": mask_to_json(m)["cells"]},
                            sort_keys=True)
                 for m, v in zip(traj.masks, traj.values)]
        path = out / f"trajectory_seed{seed}.jsonl"
        path.write_text("\n".join(lines) + "\n", newline="\n")
        files.append(path)
        report = shapeopt.detect_dichotomy(traj, base)
        write_json(out / f"summary_seed{seed}.json", {
            "final_value": traj.values[-1],
            "final_mask": mask_to_json(traj.masks[-1]),
            "verdict": report.verdict,
            "separations": report.separations,
            "component_volumes": report.component_volumes,
        })
        files.append(out / f"summary_seed{seed}.json")
    return files, seeds


def _run_classify(config, out, seeds):
    gen = GENERATORS[config["generator"]]
    length = config.get("length", 10)
    frac = config.get("epsilon_fraction", 0.2)
    files = []
    for seed in seeds:
        seq = gen(seed, length)
        rep = cc.classify(seq, frac * seq.mass_limit)
        write_json(out / f"report_seed{seed}.json", {
            "verdict": rep.verdict,
            "alpha": rep.alpha,
            "centers": rep.centers,
            "mass_limit": seq.mass_limit,
            "evidence": rep.evidence,
            "thresholds": rep.thresholds,
        })
        files.append(out / f"report_seed{seed}.json")
    return files, seeds


def _run_lieb(config, out, seeds):
    grid = build_grid(**config["grid"])
    base = assemble_stiffness(grid, config["s"])
    lo = config.get("mask_cells_min", 4)
    hi = config.get("mask_cells_max", 16)
    window = max(hi + 1, grid.n_cells // 3)
    rows = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        for trial in range(config["trials"]):
            na, nb = rng.integers(lo, hi + 1, 2)
            # bounded extent keeps in-box overlapping shifts available
            sa, sb = rng.integers(0, grid.n_cells - window, 2)
            a = mask_from_indices(grid, sa + rng.choice(window, na, replace=False))
            b = mask_from_indices(grid, sb + rng.choice(window, nb, replace=False))
            res = cc.lieb_translation_search(base, a, b)
            rows.append([seed, trial, int(res.z[0]), res.lambda1_intersection,
                         res.bound, int(res.satisfied)])
    write_csv(out / "results.csv",
              ["seed", "trial", "z0", "lambda1_intersection", "bound", "satisfied"],
              rows)
    write_json(out / "summary.json", {
        "trials": len(rows),
        "satisfied": int(sum(r[5] for r in rows)),
    })
    return [out / "results.csv", out / "summary.json"], seeds


def _run_audit(config, out, seeds):
    g = config.get("grid", {"dim": 1, "half_width": 4.0, "resolution": 64})
    base = assemble_stiffness(build_grid(**g), config.get("s", 0.5))
    results = []
    for seed in seeds:
        for r in audit_mod.bounds_audit(base, seed, config.get("checks")):
            results.append([seed, r.name, int(r.passed), r.worst_slack])
    write_csv(out / "audit.csv", ["seed", "check", "passed", "worst_slack"],
              results)
    all_passed = all(r[2] for r in results)
    write_json(out / "summary.json", {"all_passed": all_passed,
                                      "n_checks": len(results)})
    if not all_passed:
        failed = sorted({r[1] for r in results if not r[2]})
        raise FracshapeError(f"audit failed: {', '.join(failed)}")
    return [out / "audit.csv", out / "summary.json"], seeds


def run_experiment(kind: str, config: dict, out_dir, seed_override=None) -> dict:
    """Validate, dispatch, and write artifacts plus the manifest."""
    config = validate_config(kind, config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = [seed_override] if seed_override is not None else \
        config.get("seeds", [0])
    start = time.perf_counter()
    if kind == "grid":
        files, used = _run_grid(config, out)
    elif kind == "eig":
        files, used = _run_eig(config, out, seed_override)
    elif kind == "torsion":
        files, used = _run_torsion(config, out, seed_override)
    elif kind == "two-ball":
        files, used = _run_two_ball(config, out)
    elif kind == "minimize":
        files, used = _run_minimize(config, out, seeds)
    elif kind == "classify":
        files, used = _run_classify(config, out, seeds)
    elif kind == "lieb":
        files, used = _run_lieb(config, out, seeds)
    else:
        files, used = _run_audit(config, out, seeds)
    wall = time.perf_counter() - start
    manifest = write_manifest(out, config, used or seeds, wall, files)
    return {"manifest": manifest, "files": files}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fracshape",
        description="spectral shape optimization lab for the fractional "
                    "Dirichlet Laplacian",
    )
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in _SCHEMAS:
        p = sub.add_parser(kind if kind != "audit" else "audit")
        p.add_argument("--config", required=(kind != "audit"))
        p.add_argument("--out", required=False, default=None)
        p.add_argument("--seed", type=int, default=None)
        if kind == "audit":
            p.add_argument("--list-checks", action="store_true")
    args = parser.parse_args(argv)
    if args.kind == "audit" and getattr(args, "list_checks", False):
        for name in audit_mod.check_names():
            print(name)
        return 0
    try:
        if args.config:
            config = json.loads(Path(args.config).read_text())
        else:
            config = {}
        if args.out is None:
            raise ParameterError("config field 'out': --out directory required")
        bundle = run_experiment(args.kind, config, args.out, args.seed)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FracshapeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    for f in bundle["files"]:
        print(f)
    print(bundle["manifest"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
