"""Experiment driver producing the per-grid matvec/tolerance tables."""
from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .cgc import CgcConfig, cgc_multigrid
from .exceptions import ConfigError
from .krylov import phi_rt_solve
from .oracle import REFERENCE_MAX_DIM, reference_solution, relative_error
from .problems import build_hierarchy, heat1d, heat3d
from .transfer import METHODS, RESTRICTIONS

FIXED_COLUMNS = ["method", "levels", "error", "estimate", "wall_seconds"]
GRID_LABELS = ["h", "2h", "4h", "8h", "16h", "32h"]


@dataclass
class ExperimentConfig:
    problem: str
    extents: List[int]
    T: Optional[float] = None
    rel_tol: Optional[float] = None
    levels: List[int] = field(default_factory=lambda: [2])
    transfer_method: str = "cubic-spline"
    restriction: str = "interpolation"
    krylov_max_dim: int = 30
    reference_max_dim: int = REFERENCE_MAX_DIM
    seed: int = 0
    output_dir: str = "results"
    name: Optional[str] = None

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "problem" not in data or "extents" not in data:
            raise ConfigError("config needs 'problem' and 'extents'")
        data = dict(data)
        if isinstance(data.get("levels"), int):
            data["levels"] = [data["levels"]]
        if isinstance(data["extents"], int):
            data["extents"] = [data["extents"]]
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def validate(self):
        if self.problem == "heat1d":
            if len(self.extents) != 1:
                raise ConfigError("heat1d takes one extent")
        elif self.problem == "heat3d":
            if len(self.extents) != 3:
                raise ConfigError("heat3d takes three extents")
        else:
            raise ConfigError(f"unknown problem {self.problem!r}")
        if any(not isinstance(n, int) or n < 4 or n % 2 for n in self.extents):
            raise ConfigError(f"extents must be even integers >= 4, got {self.extents}")
        if not self.levels or any(not isinstance(l, int) or l < 1 for l in self.levels):
            raise ConfigError("levels must be positive integers")
        div = 2 ** (max(self.levels) - 1)
        if any(n % div for n in self.extents):
            raise ConfigError(f"extents {self.extents} not divisible by {div}")
        if self.T is not None and not self.T > 0:
            raise ConfigError("T must be positive")
        if self.rel_tol is not None and not self.rel_tol > 0:
            raise ConfigError("rel_tol must be positive")
        if self.transfer_method not in METHODS:
            raise ConfigError(f"transfer_method must be one of {METHODS}")
        if self.restriction not in RESTRICTIONS:
            raise ConfigError(f"restriction must be one of {RESTRICTIONS}")
        if self.krylov_max_dim < 1 or self.reference_max_dim < 1:
            raise ConfigError("Krylov dimensions must be positive")

    def make_problem(self):
        p = heat1d(*self.extents) if self.problem == "heat1d" else heat3d(*self.extents)
        if self.T is not None:
            p.T = float(self.T)
        if self.rel_tol is not None:
            p.rel_tol = float(self.rel_tol)
        return p

    @property
    def stem(self) -> str:
        if self.name:
            return self.name
        ext = "x".join(str(n) for n in self.extents)
        return f"{self.problem}_{ext}_T{self.T if self.T is not None else 'default'}"


def run_rows(cfg: ExperimentConfig) -> List[dict]:
    """Run the one-grid baseline and every configured CGC variant."""
    p = cfg.make_problem()
    y_ref = reference_solution(p, max_dim=cfg.reference_max_dim)
    p.operator.reset_and_read_matvec_count()
    rows = []

    t0 = time.perf_counter()
    base = phi_rt_solve(p.operator, p.v, p.g, p.T, p.rel_tol, cfg.krylov_max_dim)
    rows.append({
        "method": "1 grid", "levels": 1, "error": relative_error(base.y, y_ref), "estimate": None,
        "wall_seconds": time.perf_counter() - t0, "matvecs": [base.matvecs], "tols": [p.rel_tol],
    })

    depth = max(cfg.levels)
    if depth > 1:
        h = build_hierarchy(p, depth, cfg.transfer_method, cfg.restriction)
        for levels in cfg.levels:
            if levels == 1:
                continue
            ccfg = CgcConfig(p.rel_tol, levels, cfg.krylov_max_dim)
            t0 = time.perf_counter()
            y, rep = cgc_multigrid(h, p.v, p.g, p.T, ccfg)
            wall = time.perf_counter() - t0
            rows.append({
                "method": f"{levels} grid", "levels": levels, "error": relative_error(y, y_ref),
                "estimate": rep.total_estimate / float(np.linalg.norm(y)),
                "wall_seconds": wall, "matvecs": rep.matvecs, "tols": rep.tolerances,
            })
    return rows


def _fmt(x) -> str:
    return "" if x is None else f"{x:.6e}"


def csv_header(n_levels: int) -> List[str]:
    cols = list(FIXED_COLUMNS)
    for j in range(1, n_levels + 1):
        cols += [f"matvecs_l{j}", f"tol_l{j}"]
    return cols


def rows_to_records(rows: Sequence[dict], n_levels: int) -> List[List[str]]:
    out = []
    for r in rows:
        rec = [r["method"], str(r["levels"]), _fmt(r["error"]), _fmt(r["estimate"]), _fmt(r["wall_seconds"])]
        for j in range(n_levels):
            if j < len(r["matvecs"]):
                rec += [str(r["matvecs"][j]), _fmt(r["tols"][j])]
            else:
                rec += ["", ""]
        out.append(rec)
    return out


def write_csv(path, rows: Sequence[dict]) -> None:
    n = max(len(r["matvecs"]) for r in rows)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(csv_header(n))
        w.writerows(rows_to_records(rows, n))


def read_csv(path) -> List[dict]:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            matvecs, tols = [], []
            j = 1
            while f"matvecs_l{j}" in rec and rec[f"matvecs_l{j}"]:
                matvecs.append(int(rec[f"matvecs_l{j}"]))
                tol = rec[f"tol_l{j}"]
                tols.append(float(tol) if tol else None)
                j += 1
            rows.append({
                "method": rec["method"], "levels": int(rec["levels"]),
                "error": float(rec["error"]) if rec["error"] else None,
                "estimate": float(rec["estimate"]) if rec["estimate"] else None,
                "wall_seconds": float(rec["wall_seconds"]) if rec["wall_seconds"] else None,
                "matvecs": matvecs, "tols": tols,
            })
    return rows


def markdown_table(rows: Sequence[dict], title: Optional[str] = None) -> str:
    n = max(len(r["matvecs"]) for r in rows)
    head = ["method", "error (estimate)", "wall, s"] + [f"{GRID_LABELS[j]} matvecs (tol)" for j in range(n)]
    lines = []
    if title:
        lines += [f"### {title}", ""]
    lines.append("| " + " | ".join(head) + " |")
    lines.append("|" + "---|" * len(head))
    for r in rows:
        err = f"{r['error']:.2e}" if r["error"] is not None else ""
        if r["estimate"] is not None:
            err += f" ({r['estimate']:.1e})"
        cells = [r["method"], err, f"{r['wall_seconds']:.2f}" if r["wall_seconds"] is not None else ""]
        for j in range(n):
            if j < len(r["matvecs"]):
                tol = r["tols"][j]
                cells.append(f"{r['matvecs'][j]} ({tol:.2e})" if tol is not None else str(r["matvecs"][j]))
            else:
                cells.append("")
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run ``cfg`` and write ``<stem>.csv``, ``<stem>.md`` and the config echo."""
    rows = run_rows(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{cfg.stem}.csv"
    md_path = out / f"{cfg.stem}.md"
    write_csv(csv_path, rows)
    md_path.write_text(markdown_table(rows, title=cfg.stem))
    (out / f"{cfg.stem}.config.json").write_text(json.dumps(asdict(cfg), indent=2) + "\n")
    return {"rows": rows, "csv": csv_path, "markdown": md_path}
