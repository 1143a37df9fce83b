"""Command-line entry point: ``amput <command> [options]``.

Exit codes: 0 success, 2 invalid parameters or configuration, 3 solver
non-convergence, 4 input/output failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path
from typing import Optional

import numpy as np

from . import asymptotics, balayage, io, lattice
from .canonical import CanonicalParams, MarketParams, from_market
from .exceptions import AmputError, InvalidParamsError, NoConvergenceError
from .obstacle import GridSpec, extract_boundary, solve

log = logging.getLogger("amput")

EXIT_OK, EXIT_INVALID, EXIT_NOCONV, EXIT_IO = 0, 2, 3, 4

DEFAULTS = {
    "rho": None, "theta": 1.0, "r": None, "sigma": None,
    "h": 2.5e-3, "dt": 5e-4, "tmax": 8.0, "method": "bs", "extraction": "vertex",
    "output_dir": ".", "format": "csv",
    "boundary": None, "metadata": None, "report": None,
    "s": ["2", "4", "9", "16", "4+2j"],
    "steps": 4000, "T": 3.0, "delta": 0.05, "t_points": [0.5, 1.0, 2.0],
    "sweep": None,
}


class ConfigError(InvalidParamsError):
    pass


def _add_common(sp, market=True, grid=True):
    sp.add_argument("--config", help="flat JSON file with option values (flags win)")
    sp.add_argument("--rho", type=float)
    sp.add_argument("--theta", type=float)
    if market:
        sp.add_argument("--r", type=float, help="interest rate (alternative to --rho)")
        sp.add_argument("--sigma", type=float, help="volatility (alternative to --rho)")
    if grid:
        sp.add_argument("--h", type=float, help="space step")
        sp.add_argument("--dt", type=float, help="time step")
        sp.add_argument("--tmax", type=float, help="final canonical time")
        sp.add_argument("--method", choices=["bs", "psor"])
        sp.add_argument("--extraction", choices=["vertex", "sqrt"])
    sp.add_argument("-o", "--output-dir", dest="output_dir")
    sp.add_argument("--format", choices=["csv", "json"])


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="amput", description="American put free boundary toolkit")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="mode", required=True)

    sp = sub.add_parser("solve", help="solve the obstacle problem and write the boundary")
    _add_common(sp)
    sp.add_argument("--sweep", help="comma-separated sweep such as rho=0,0.25,0.5")

    sp = sub.add_parser("balayage", help="balayage residuals for a boundary CSV")
    _add_common(sp, grid=False)
    sp.add_argument("--boundary", help="boundary CSV (default: OUTPUT_DIR/boundary.csv)")
    sp.add_argument("--metadata", help="solution metadata JSON (default: next to the boundary)")
    sp.add_argument("--s", nargs="+", help="Laplace points, complex literals allowed (4+2j)")

    sp = sub.add_parser("asymptotics", help="asymptotic constants for a boundary CSV")
    _add_common(sp, grid=False)
    sp.add_argument("--boundary")
    sp.add_argument("--metadata")

    sp = sub.add_parser("lattice", help="binomial-tree boundary and price")
    _add_common(sp, grid=False)
    sp.add_argument("--steps", type=int)
    sp.add_argument("--T", type=float, help="maturity")
    sp.add_argument("--boundary", help="optional obstacle boundary CSV to compare against")
    sp.add_argument("--metadata")

    sp = sub.add_parser("perturb", help="small-theta perturbation check")
    _add_common(sp, market=False)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--t-points", dest="t_points", type=float, nargs="+")

    sp = sub.add_parser("transform", help="print (alpha, rho) for market parameters")
    sp.add_argument("--config")
    sp.add_argument("--r", type=float)
    sp.add_argument("--sigma", type=float)

    sp = sub.add_parser("plotdata", help="plot-ready table from a boundary CSV and a report")
    _add_common(sp, grid=False)
    sp.add_argument("--boundary")
    sp.add_argument("--metadata")
    sp.add_argument("--report", help="asymptotics report JSON (default: OUTPUT_DIR/report.json)")
    return ap


def resolve(ns: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags, in increasing priority."""
    cfg = dict(DEFAULTS)
    path = getattr(ns, "config", None)
    if path:
        try:
            doc = json.loads(Path(path).read_text())
        except OSError:
            raise
        except ValueError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a flat JSON object")
        params = doc.pop("params", None)
        if isinstance(params, dict):
            doc.update(params)
        grid = doc.pop("grid", None)
        if isinstance(grid, dict):
            doc.update(grid)
        doc.pop("mode", None)
        unknown = set(doc) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(doc)
    for k, v in vars(ns).items():
        if k in cfg and v is not None:
            cfg[k] = v
    cfg["mode"] = ns.mode
    return cfg


def canonical_from(cfg: dict) -> CanonicalParams:
    if cfg.get("rho") is not None:
        if cfg.get("r") is not None or cfg.get("sigma") is not None:
            raise ConfigError("give either --rho or --r/--sigma, not both")
        return CanonicalParams(rho=float(cfg["rho"]), theta=float(cfg["theta"]))
    if cfg.get("r") is not None and cfg.get("sigma") is not None:
        q = from_market(MarketParams(float(cfg["r"]), float(cfg["sigma"])))
        return CanonicalParams(rho=q.rho, theta=float(cfg["theta"]), alpha=q.alpha)
    raise ConfigError("parameters missing: need --rho (and --theta) or --r and --sigma")


def market_from(cfg: dict) -> MarketParams:
    if cfg.get("r") is None or cfg.get("sigma") is None:
        raise ConfigError("need --r and --sigma")
    return MarketParams(float(cfg["r"]), float(cfg["sigma"]))


def _outdir(cfg) -> Path:
    d = Path(cfg["output_dir"])
    d.mkdir(parents=True, exist_ok=True)
    return d


def _params_doc(p: CanonicalParams) -> dict:
    return {"rho": p.rho, "theta": p.theta, "alpha": p.alpha}


def _run_solve(p: CanonicalParams, cfg: dict, outdir: Path) -> dict:
    grid = GridSpec.build(p, h=float(cfg["h"]), dt=float(cfg["dt"]), t_max=float(cfg["tmax"]))
    sol = solve(p, grid, method=cfg["method"])
    curve = extract_boundary(sol, method=cfg["extraction"])
    io.write_boundary_csv(outdir / "boundary.csv", curve)
    meta = {
        "params": _params_doc(p), "mu": p.mu, "eta": p.eta,
        "grid": asdict(grid), "h": grid.h, "dt": grid.dt,
        "stats": asdict(sol.stats), "mu_offset": curve.mu_offset, "extraction": cfg["extraction"],
    }
    io.write_json(outdir / "solution.json", meta)
    return meta


def _sweep_worker(args):
    p, cfg, outdir = args
    return _run_solve(p, cfg, Path(outdir))


def cmd_solve(cfg: dict) -> int:
    outdir = _outdir(cfg)
    if not cfg.get("sweep"):
        meta = _run_solve(canonical_from(cfg), cfg, outdir)
        log.info("wrote %s (mu=%.10g)", outdir / "boundary.csv", meta["mu"])
        return EXIT_OK
    key, _, values = str(cfg["sweep"]).partition("=")
    key = key.strip()
    if key not in ("rho", "theta") or not values:
        raise ConfigError("sweep must look like rho=v1,v2,... or theta=v1,v2,...")
    try:
        vals = [float(v) for v in values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad sweep values: {values}") from exc
    jobs = []
    for v in vals:
        c = dict(cfg, **{key: v})
        p = canonical_from(c)
        d = outdir / f"{key}_{v:g}"
        d.mkdir(parents=True, exist_ok=True)
        jobs.append((p, c, str(d)))
    workers = max(1, min(len(jobs), int(os.environ.get("AMPUT_THREADS", os.cpu_count() or 1))))
    if workers == 1:
        for j in jobs:
            _sweep_worker(j)
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            list(ex.map(_sweep_worker, jobs))
    return EXIT_OK


def _load_curve(cfg: dict):
    outdir = Path(cfg["output_dir"])
    bpath = Path(cfg["boundary"]) if cfg.get("boundary") else outdir / "boundary.csv"
    mpath = Path(cfg["metadata"]) if cfg.get("metadata") else bpath.with_name("solution.json")
    if not bpath.exists():
        raise FileNotFoundError(f"boundary file not found: {bpath}")
    if cfg.get("rho") is not None or cfg.get("r") is not None:
        p = canonical_from(cfg)
    elif mpath.exists():
        d = io.read_json(mpath)["params"]
        p = CanonicalParams(rho=d["rho"], theta=d["theta"], alpha=d.get("alpha"))
    else:
        raise ConfigError("no parameters: pass --rho/--theta or provide solution metadata")
    return io.read_boundary_csv(bpath, p), p


def cmd_balayage(cfg: dict) -> int:
    curve, p = _load_curve(cfg)
    try:
        svals = [complex(str(v).replace(" ", "")) for v in cfg["s"]]
    except ValueError as exc:
        raise ConfigError(f"bad Laplace point: {exc}") from exc
    rows = balayage.residual_table(curve, svals, p)
    outdir = _outdir(cfg)
    if cfg["format"] == "json":
        io.write_json(outdir / "residuals.json", {"rows": [r.row() for r in rows]})
    else:
        io.write_residual_csv(outdir / "residuals.csv", rows)
    return EXIT_OK


def cmd_asymptotics(cfg: dict) -> int:
    curve, p = _load_curve(cfg)
    rep = asymptotics.asymptotic_report(curve, p)
    doc = rep.as_dict()
    io.write_json(_outdir(cfg) / "report.json", doc)
    print(json.dumps(io._clean(doc)))
    return EXIT_OK


def cmd_lattice(cfg: dict) -> int:
    m = market_from(cfg)
    spec = lattice.LatticeSpec(steps=int(cfg["steps"]), T=float(cfg["T"]), market=m)
    lb = lattice.extract_lattice_boundary(spec)
    canon = lattice.lattice_boundary_to_canonical(lb, m)
    outdir = _outdir(cfg)
    io.write_lattice_csv(outdir / "lattice_boundary.csv", lb, canon.phi)
    summary = {"steps": spec.steps, "T": spec.T, "r": m.r, "sigma": m.sigma,
               "price_at_root": lb.price_at_root,
               "european_price": lattice.price_european_put(spec)}
    if cfg.get("boundary"):
        curve, _ = _load_curve(cfg)
        x_pde = np.interp(canon.t, curve.t, curve.phi)
        io.write_table(outdir / "comparison.csv", ("t", "x_lattice", "x_obstacle", "diff"),
                       zip(canon.t, canon.phi, x_pde, canon.phi - x_pde))
        summary["max_abs_diff"] = float(np.max(np.abs(canon.phi - x_pde)))
    io.write_json(outdir / "lattice.json", summary)
    return EXIT_OK


def cmd_perturb(cfg: dict) -> int:
    rho = float(cfg["rho"]) if cfg.get("rho") is not None else 0.0
    chk = asymptotics.first_theta_derivative_check(
        rho=rho, delta=float(cfg["delta"]), t_points=tuple(cfg["t_points"]),
        h=float(cfg["h"]), dt=float(cfg["dt"]),
    )
    io.write_json(_outdir(cfg) / "perturb.json", asdict(chk))
    return EXIT_OK


def cmd_transform(cfg: dict) -> int:
    q = from_market(market_from(cfg))
    # 15 decimals: the inputs themselves carry no more, and sqrt(2)**2 != 2 in binary
    print(json.dumps({"alpha": round(q.alpha, 15) + 0.0, "rho": round(q.rho, 15) + 0.0}))
    return EXIT_OK


def cmd_plotdata(cfg: dict) -> int:
    curve, p = _load_curve(cfg)
    rpath = Path(cfg["report"]) if cfg.get("report") else Path(cfg["output_dir"]) / "report.json"
    rep = io.read_json(rpath)
    beta = rep.get("beta1") or 0.0
    t = curve.t
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        lower = np.where(t > 0.0, asymptotics.lemma_lower_bound(np.where(t > 0, t, 1.0), p), -np.inf)
        expansion = np.where(t > 0.0, p.mu - beta * np.where(t > 0, t, 1.0) ** -1.5 * np.exp(-t), -np.inf)
    if p.theta == 0.0:
        lower = np.zeros_like(t)
        expansion = np.zeros_like(t)
    io.write_table(_outdir(cfg) / "plotdata.csv", io.PLOT_COLUMNS,
                   zip(t, curve.phi, np.full_like(t, p.mu), lower, expansion))
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve, "balayage": cmd_balayage, "asymptotics": cmd_asymptotics,
    "lattice": cmd_lattice, "perturb": cmd_perturb, "transform": cmd_transform,
    "plotdata": cmd_plotdata,
}


def run(argv: Optional[list] = None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = resolve(ns)
        return COMMANDS[ns.mode](cfg)
    except NoConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (AmputError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
