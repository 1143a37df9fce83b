"""CSV and JSON persistence for boundaries, residual tables and reports.

Numbers are written with 17 significant digits so that a round trip
reproduces every double exactly.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .canonical import CanonicalParams
from .lattice import LatticeBoundary
from .obstacle import BoundaryCurve

BOUNDARY_COLUMNS = ("t", "phi", "varphi", "dphi")
LATTICE_COLUMNS = ("t", "s_star", "x_canonical")
RESIDUAL_COLUMNS = ("re_s", "im_s", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "abs_err", "rel_err", "tail_estimate")
PLOT_COLUMNS = ("t", "phi", "mu_line", "lemma_lower_bound", "expansion_n0")
REPORT_KEYS = ("mu", "eta", "moment_v1", "B1", "lambda0", "beta1", "beta1_intro", "beta1_parts", "tail_fit", "consistency")


def fmt(v) -> str:
    return format(float(v), ".17g")


def write_table(path, columns: Sequence[str], rows: Iterable[Sequence[float]]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(v) for v in r])


def read_table(path) -> dict:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
    if data.size == 0:
        data = np.zeros((0, len(header)))
    return {name: data[:, i] for i, name in enumerate(header)}


def write_boundary_csv(path, curve: BoundaryCurve) -> None:
    write_table(path, BOUNDARY_COLUMNS, zip(curve.t, curve.phi, curve.varphi, curve.dphi))


def read_boundary_csv(path, params: CanonicalParams) -> BoundaryCurve:
    """Rebuild a curve; stored columns are used as they are, not recomputed."""
    cols = read_table(path)
    missing = [c for c in BOUNDARY_COLUMNS if c not in cols]
    if missing:
        raise ValueError(f"boundary CSV lacks columns {missing}")
    return BoundaryCurve(t=cols["t"], phi=cols["phi"], varphi=cols["varphi"], dphi=cols["dphi"], params=params)


def write_lattice_csv(path, lb: LatticeBoundary, x_canonical) -> None:
    write_table(path, LATTICE_COLUMNS, zip(lb.t, lb.s_star, x_canonical))


def write_residual_csv(path, residuals) -> None:
    write_table(path, RESIDUAL_COLUMNS, ([r.row()[c] for c in RESIDUAL_COLUMNS] for r in residuals))


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def write_json(path, doc: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(doc), indent=2, sort_keys=False) + "\n")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())
