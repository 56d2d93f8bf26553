"""Command-line front end.

Every subcommand reads optional JSON configuration (``--config``), lets
explicit flags override it, and either prints the resolved plan
(``--dry-run``) or runs and writes CSV/JSON/SVG artifacts to ``--out-dir``.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from . import decomposition as dec
from . import directions as dirs
from . import normlab as nl
from . import operators as ops_mod
from . import symbols as sym
from . import weights as wts
from .grid import Field, make_grid, read_field, write_field

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "gen": {"kind": "carbery", "n": 3, "range": "0..2", "L": 1, "depth": 4, "N": 8,
            "lam": 0.5, "alphas": [1.0, 2.0], "out": "directions.json"},
    "dissect": {"input": None, "out": "cells.csv"},
    "apply": {"input": None, "op": "hilbert", "directions": None, "omega": None,
              "convention": "indicator", "out": "applied.lacf"},
    "verify": {"grid": 16, "cells": 20, "directions": 200, "samples": 10000},
    "norm": {"directions": None, "kind": "lacunary2d", "N": 8, "grid": 64,
             "convention": "indicator", "iters": 40, "restarts": 3, "out": "norm.csv"},
    "growth": {"kind": "lacunary2d", "Ns": [2, 4, 8, 16], "grid": 64,
               "convention": "indicator", "iters": 40, "restarts": 3, "out": "growth.csv"},
    "cex": {"d": 2, "Ns": [4, 8, 16], "grid": 128, "iters": 40, "restarts": 3,
            "out": "cex.csv"},
    "weights": {"family": None, "weights": [{"kind": "power", "params": {"a": a}}
                                            for a in (0, 1, 2)],
                "directions": None, "kind": "lacunary2d", "N": 4, "grid": 32,
                "K": 20, "rdf_samples": 5, "stride": 2, "out": "weights.csv"},
}
# Hard cap on grid points for any single run.
MAX_POINTS = 2**24


def _parse_range(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    try:
        a, b = str(text).split("..")
        return list(range(int(a), int(b) + 1))
    except ValueError as exc:
        raise ConfigError(f"range must look like 'a..b', got {text!r}") from exc


def _int_list(text):
    if text is None or isinstance(text, list):
        return text
    return [int(v) for v in str(text).split(",") if v]


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _grid(cfg, dim):
    side = int(cfg["grid"])
    if side < 2 or side & (side - 1):
        raise ConfigError("grid side must be a power of two >= 2")
    if side**dim > MAX_POINTS:
        raise nl.BudgetExceeded(f"{side}^{dim} grid exceeds {MAX_POINTS} points")
    return make_grid(dim, side)


def _generated(cfg, N=None):
    kind = cfg["kind"]
    N = int(cfg.get("N", 8) if N is None else N)
    if kind == "lacunary2d":
        # first N slopes 2^-k
        return dirs.lacunary2d(1, N)
    if kind == "uniform":
        return dirs.uniform_set(N)
    if kind == "carbery":
        return dirs.carbery_set(int(cfg["n"]), _parse_range(cfg["range"]))
    if kind == "nsw":
        return dirs.nsw_set(float(cfg["lam"]), cfg["alphas"], N)
    raise ConfigError(f"unknown direction-set kind {kind!r}")


def _direction_source(cfg, N=None):
    if cfg.get("directions"):
        return dirs.read_direction_set(cfg["directions"])
    return _generated(cfg, N)


# --- subcommands -----------------------------------------------------------

def cmd_gen(cfg, out: Path, seed: int):
    kind = cfg["kind"]
    if kind == "lacunary2d":
        dset = dirs.lacunary2d(int(cfg["L"]), int(cfg["depth"]))
    else:
        dset = _generated(cfg)
    path = out / cfg["out"]
    dirs.write_direction_set(path, dset)
    print(f"wrote {len(dset)} directions to {path}")
    return EXIT_OK


def cmd_dissect(cfg, out: Path, seed: int):
    if not cfg["input"]:
        raise ConfigError("dissect needs an input direction-set JSON")
    dset = dirs.read_direction_set(cfg["input"])
    path = out / cfg["out"]
    dirs.write_cell_table(path, dset)
    print(f"wrote cell table for {len(dset)} directions to {path}")
    return EXIT_OK


def cmd_apply(cfg, out: Path, seed: int):
    if not cfg["input"]:
        raise ConfigError("apply needs an input field file")
    f = read_field(cfg["input"])
    op = cfg["op"]
    if op == "hilbert":
        if cfg["omega"] is None:
            raise ConfigError("op 'hilbert' needs omega")
        g = ops_mod.hilbert_dir(f, dirs.unit(cfg["omega"]), cfg["convention"])
    elif op in ("maxhilbert", "maxavg"):
        dset = dirs.read_direction_set(cfg["directions"]) if cfg["directions"] else None
        if dset is None:
            raise ConfigError(f"op {op!r} needs a direction-set file")
        g = (ops_mod.maximal_hilbert(f, dset, cfg["convention"]) if op == "maxhilbert"
             else ops_mod.maximal_set(f, dset))
    elif op == "strong":
        g = ops_mod.strong_maximal(f)
    else:
        raise ConfigError(f"unknown op {op!r}")
    path = out / cfg["out"]
    write_field(path, g)
    print(f"wrote {path}")
    return EXIT_OK


def _random_cell(rng, n):
    return {s: int(rng.integers(-3, 4)) for s in dirs.pairs(n)}


def run_identity_suite(side: int = 16, cells: int = 20, directions: int = 200,
                       samples: int = 10000, seed: int = 0):
    """Symbol identities and wedge covering; returns a list of ``(name, value, tol, ok)``."""
    rng = np.random.default_rng(seed)
    g3 = make_grid(3, side)
    rows = []
    res = max(dec.inclusion_exclusion_residual(_random_cell(rng, 3), g3) for _ in range(cells))
    rows.append(("inclusion_exclusion", res, 1e-12, res < 1e-12))
    x = rng.uniform(-3, 3, samples)
    for n in (2, 3, 4):
        lhs = 1 - sym.phi_plus(x, n) * sym.phi_minus(x, n)
        rhs = (1 - sym.phi_plus(x, n)) + (1 - sym.phi_minus(x, n))
        r = float(np.max(np.abs(lhs - rhs)))
        rows.append((f"cutoff_product_n{n}", r, 1e-15, r <= 1e-15))
    r = rng.uniform(1e-3, 1e3, samples)
    part = sum(sym.lp_p(r * 2.0**-t) for t in range(-20, 30))
    err = float(np.max(np.abs(part - 1)))
    rows.append(("lp_partition", err, 1e-12, err < 1e-12))
    viol = 0
    for _ in range(directions):
        om = np.abs(rng.normal(size=3)) + 1e-3
        om /= np.linalg.norm(om)
        viol += int(dec.check_inclusion(om, None, g3).sum())
    rows.append(("wedge_inclusion_violations", float(viol), 0.0, viol == 0))
    return rows


def cmd_verify(cfg, out: Path, seed: int):
    rows = run_identity_suite(int(cfg["grid"]), int(cfg["cells"]),
                              int(cfg["directions"]), int(cfg["samples"]), seed)
    _write_csv(out / "verify.csv", ["check", "value", "tolerance", "pass"], rows)
    for name, v, tol, ok in rows:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {v:.3g} (tol {tol:g})")
    return EXIT_OK if all(r[3] for r in rows) else EXIT_FAIL


def cmd_norm(cfg, out: Path, seed: int):
    dset = _direction_source(cfg)
    grid = _grid(cfg, dset.dims)
    rep = nl.estimate_maximal_norm(nl.hilbert_family(dset, cfg["convention"]), grid,
                                   iters=int(cfg["iters"]), restarts=int(cfg["restarts"]),
                                   seed=seed, subset=dset)
    _write_csv(out / cfg["out"], ["N", "grid", "estimate", "iterations", "restarts", "seed"],
               [(len(dset), grid.side, rep.estimate, rep.iterations, rep.restarts, seed)])
    print(f"estimate {rep.estimate:.6f} over {len(dset)} directions")
    return EXIT_OK


def cmd_growth(cfg, out: Path, seed: int):
    Ns = _int_list(cfg["Ns"])
    grid = _grid(cfg, 2)
    table = nl.growth_experiment(lambda N: _direction_source(cfg, N), Ns, grid,
                                 cfg["convention"], int(cfg["iters"]), int(cfg["restarts"]),
                                 seed)
    nl.write_growth_csv(out / cfg["out"], table)
    nl.plot_growth_svg(out / (Path(cfg["out"]).stem + ".svg"), table)
    for n, e, _ in table.rows():
        print(f"N={n}: {e:.6f}")
    return EXIT_OK


def cmd_cex(cfg, out: Path, seed: int):
    d = int(cfg["d"])
    grid = _grid(cfg, 2)
    rows, prev = [], ()
    for N in _int_list(cfg["Ns"]):
        dset, cells, _ = nl.counterexample_build(d, N)
        val, rep = nl.model_outer_norm(d, N, grid, int(cfg["iters"]), int(cfg["restarts"]),
                                       seed, warm_start=prev, return_report=True)
        prev = (rep.witness,)
        rows.append((N, len(dset), len(set(cells)), val, val / np.log(N) ** (d / 2)))
        print(f"N={N}: {val:.6f}")
    _write_csv(out / cfg["out"], ["N", "directions", "cells", "estimate",
                                  "estimate_over_logN_d2"], rows)
    return EXIT_OK


def cmd_weights(cfg, out: Path, seed: int):
    dset = _direction_source(cfg)
    grid = _grid(cfg, dset.dims)
    fam = wts.SegmentFamily.build(grid, dset, stride=int(cfg["stride"]))
    ws = (wts.load_weight_family(cfg["family"], grid) if cfg["family"]
          else [wts.weight_from_spec(grid, s) for s in cfg["weights"]])
    rows = []
    for i, w in enumerate(ws):
        est, ap = wts.weighted_norm_probe(dset, 2, w, fam, seed=seed)
        rows.append((i, "probe", ap, est))
    bound = wts.maximal_norm_upper_bound(grid, dset)
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(int(cfg["rdf_samples"])):
        g = rng.random(grid.shape)
        res = wts.rubio_de_francia(Field(grid, g), dset, bound, int(cfg["K"]))
        E = res.majorant.values.real
        M = ops_mod.maximal_set(res.majorant, dset).values.real
        worst = max(worst, float(np.max(M - 2 * bound * E - res.tail)))
    rows.append((-1, "rdf_worst_margin", bound, worst))
    _write_csv(out / cfg["out"], ["weight", "kind", "A2_or_bound", "value"], rows)
    for r in rows:
        print(*r)
    return EXIT_OK if worst <= 1e-9 * bound else EXIT_FAIL


COMMANDS = {"gen": cmd_gen, "dissect": cmd_dissect, "apply": cmd_apply,
            "verify": cmd_verify, "norm": cmd_norm, "growth": cmd_growth,
            "cex": cmd_cex, "weights": cmd_weights}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with subcommand options")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--grid", type=int, default=None, help="grid side (power of two)")
    common.add_argument("--threads", type=int, default=None)
    common.add_argument("--out-dir", default=None)
    common.add_argument("--dry-run", action="store_true")

    p = argparse.ArgumentParser(prog="lacuna", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("gen", parents=[common], help="direction sets to JSON")
    s.add_argument("--kind", choices=["carbery", "nsw", "lacunary2d", "uniform"])
    s.add_argument("--n", type=int)
    s.add_argument("--range")
    s.add_argument("--L", type=int)
    s.add_argument("--depth", type=int)
    s.add_argument("--N", type=int)
    s.add_argument("--lam", type=float)
    s.add_argument("--out")
    s = sub.add_parser("dissect", parents=[common], help="sector/cell table to CSV")
    s.add_argument("--input")
    s.add_argument("--out")
    s = sub.add_parser("apply", parents=[common], help="operator on a field file")
    s.add_argument("--input")
    s.add_argument("--op", choices=["hilbert", "maxhilbert", "maxavg", "strong"])
    s.add_argument("--omega", type=lambda t: [float(v) for v in t.split(",")])
    s.add_argument("--directions")
    s.add_argument("--convention", choices=["indicator", "sign"])
    s.add_argument("--out")
    sub.add_parser("verify", parents=[common], help="identity suites")
    for name, hlp in (("norm", "single norm estimate"), ("growth", "growth table and SVG"),
                      ("cex", "counterexample experiment"), ("weights", "A_p and RdF probes")):
        s = sub.add_parser(name, parents=[common], help=hlp)
        if name in ("norm", "growth", "weights"):
            s.add_argument("--kind", choices=["carbery", "nsw", "lacunary2d", "uniform"])
            s.add_argument("--directions")
        if name in ("norm", "weights"):
            s.add_argument("--N", type=int)
        if name in ("growth", "cex"):
            s.add_argument("--Ns", type=_int_list)
        if name == "cex":
            s.add_argument("--d", type=int)
        if name == "weights":
            s.add_argument("--family")
        s.add_argument("--out")
    return p


def resolve(args) -> dict:
    cfg = dict(DEFAULTS[args.command])
    if args.config:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config must be a JSON object")
        extra = set(loaded) - set(cfg) - {"seed", "threads", "out_dir"}
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        cfg.update(loaded)
    skip = {"command", "config", "dry_run", "seed", "threads", "out_dir"}
    for k, v in vars(args).items():
        if k not in skip and v is not None:
            cfg[k] = v
    cfg["seed"] = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    cfg["out_dir"] = args.out_dir or cfg.get("out_dir", ".")
    env = os.environ.get("LACUNA_THREADS")
    try:
        threads = int(env) if env else (args.threads or int(cfg.get("threads", 1)))
    except ValueError as exc:
        raise ConfigError(f"bad thread count {env!r}") from exc
    if threads < 1:
        raise ConfigError("thread count must be positive")
    cfg["threads"] = threads
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        if args.dry_run:
            print(json.dumps({"command": args.command, **cfg}, indent=1, sort_keys=True,
                             default=str))
            return EXIT_OK
        out = Path(cfg["out_dir"])
        out.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        with sfft.set_workers(cfg["threads"]):
            code = COMMANDS[args.command](cfg, out, cfg["seed"])
        print(f"{args.command} finished in {time.perf_counter() - t0:.2f} s", file=sys.stderr)
        return code
    except nl.BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConfigError, KeyError, TypeError, ValueError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
