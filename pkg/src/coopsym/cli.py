"""Experiment runner.

    coopsym run <config.json> [--out DIR] [--workers N] [--override k=v ...]
    coopsym diff <dirA> <dirB> [--tol REL]
    coopsym catalog

A config is one JSON document (no includes, so its hash identifies the run):

    {
      "name": "power33_disk",
      "problem": {"name": "power", "p": 3.0, "q": 3.0},
      "domain": {"kind": "disk", "r_inner": 0.0, "r_outer": 1.0},
      "grid": {"nr": 64, "ntheta": 128},
      "guesses": [{"kind": "from_radial_profile", "pattern": "positive",
                   "amplitude": 1.0, "label": "positive"}],
      "pipeline": {"spectral": true, "coupling": true, "reflection": true,
                   "symmetry": true, "rotating_plane": true, "plots": false},
      "tolerances": {},
      "seed": 20260810
    }

Every guess runs solve -> spectral -> coupling -> reflection -> symmetry and
writes its artifacts under its own directory; summary.json aggregates the
verdicts.  Exit status: 0 ok, 1 pipeline error, 2 counterexample alarm
(a hypothesis-satisfying solution failed the symmetry conclusion), 64 bad
config.  Solver non-convergence is recorded per guess and does not abort
the run.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import coupling as coupling_mod
from . import problems as problems_mod
from . import reflection as reflection_mod
from . import snapshots
from . import spectral as spectral_mod
from . import symmetry as symmetry_mod
from .grid import Direction, Domain, Grid, build_grid, cap_mask, reflect_map
from .solver import (NewtonOptions, Solution, SolverError, initial_guess,
                     newton_solve, radial_shoot)

EXIT_OK = 0
EXIT_PIPELINE_ERROR = 1
EXIT_ALARM = 2
EXIT_CONFIG = 64

DEFAULT_PIPELINE = {"spectral": True, "coupling": True, "reflection": True,
                    "symmetry": True, "rotating_plane": True, "plots": False}

DEFAULT_TOLERANCES = {
    "newton_tol": 1e-10,
    "rad_tol": 1e-6,
    "mono_tol": 1e-6,
    "axis_tol": 1e-8,
    "strict_tol": 1e-7,
    "pos_tol": 1e-8,
    "quad_nodes": 8,
}


class ConfigError(Exception):
    pass


@dataclass
class ExperimentConfig:
    name: str
    problem: dict
    domain: dict
    grid: dict
    guesses: list
    pipeline: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    seed: int = 0
    raw: dict = field(default_factory=dict, repr=False)

    @staticmethod
    def from_dict(doc: dict) -> "ExperimentConfig":
        try:
            cfg = ExperimentConfig(
                name=str(doc["name"]),
                problem=dict(doc["problem"]),
                domain=dict(doc["domain"]),
                grid=dict(doc["grid"]),
                guesses=list(doc["guesses"]),
                pipeline={**DEFAULT_PIPELINE, **doc.get("pipeline", {})},
                tolerances={**DEFAULT_TOLERANCES, **doc.get("tolerances", {})},
                seed=int(doc.get("seed", 0)),
                raw=doc,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad config: {exc}") from exc
        unknown = set(cfg.pipeline) - set(DEFAULT_PIPELINE)
        if unknown:
            raise ConfigError(f"unknown pipeline toggles: {sorted(unknown)}")
        if cfg.pipeline["symmetry"] and not (cfg.pipeline["spectral"] and cfg.pipeline["coupling"]):
            raise ConfigError("symmetry stage needs spectral and coupling enabled")
        pname = cfg.problem.get("name")
        if pname not in problems_mod.catalog_names():
            raise ConfigError(f"unknown problem {pname!r}")
        for g in cfg.guesses:
            if "label" not in g or "kind" not in g:
                raise ConfigError(f"guess needs 'label' and 'kind': {g}")
        labels = [g["label"] for g in cfg.guesses]
        if len(set(labels)) != len(labels):
            raise ConfigError("guess labels must be unique")
        return cfg

    def build_problem(self):
        params = {k: v for k, v in self.problem.items() if k != "name"}
        return problems_mod.make_problem(self.problem["name"], **params)

    def build_grid(self) -> Grid:
        dom_spec = dict(self.domain)
        kind = dom_spec.get("kind", "disk")
        if kind == "disk":
            dom = Domain.disk(float(dom_spec.get("r_outer", 1.0)))
        else:
            dom = Domain.annulus(float(dom_spec["r_inner"]), float(dom_spec["r_outer"]))
        return build_grid(dom, int(self.grid["nr"]), int(self.grid["ntheta"]))

    def hash(self) -> str:
        return snapshots.config_hash(self.raw)


def load_config(path: str, overrides: list[str] | None = None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for ov in overrides or []:
        if "=" not in ov:
            raise ConfigError(f"override must look like key.path=value, got {ov!r}")
        key, _, val = ov.partition("=")
        try:
            parsed = json.loads(val)
        except json.JSONDecodeError:
            parsed = val
        node = doc
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = parsed
    return ExperimentConfig.from_dict(doc)


def _build_initial(cfg: ExperimentConfig, problem, grid, guess: dict):
    kind = guess["kind"]
    amplitude = float(guess.get("amplitude", 1.0))
    if kind == "from_radial_profile":
        profile = radial_shoot(problem, grid.domain,
                               sign_pattern=guess.get("pattern", "positive"))
        return initial_guess(grid, kind, amplitude, m=problem.m, profile=profile)
    return initial_guess(grid, kind, amplitude, m=problem.m,
                         seed=cfg.seed + int(guess.get("seed_offset", 0)))


def _choose_rotation_base(solution: Solution) -> Direction:
    """Direction whose cap difference is most uniformly positive."""
    grid = solution.grid
    u = solution.field.node_view()
    best_k, best_val = 0, -np.inf
    for k in range(grid.ntheta):
        e = Direction(k, grid.ntheta)
        w = u - u[:, reflect_map(grid, e)]
        val = float(w[:, cap_mask(grid, e)].min())
        if val > best_val:
            best_k, best_val = k, val
    return Direction(best_k, grid.ntheta)


def run_guess(cfg: ExperimentConfig, problem, grid, guess: dict,
              out_dir: Path, scan_workers: int) -> dict:
    """Full pipeline for one guess; returns its summary entry."""
    label = guess["label"]
    tols = cfg.tolerances
    entry = {"label": label, "converged": False, "error": None}
    guess_dir = out_dir / f"guess_{label}"
    guess_dir.mkdir(parents=True, exist_ok=True)

    try:
        init = _build_initial(cfg, problem, grid, guess)
        opts = NewtonOptions(tol=float(tols["newton_tol"]))
        solution = newton_solve(problem, grid, init, opts, guess_label=label)
    except SolverError as exc:
        entry["error"] = f"{type(exc).__name__}: {exc}"
        snapshots.write_json(guess_dir / "solution.json",
                             {"error": entry["error"], "guess_label": label})
        return entry

    entry.update(converged=True,
                 residual_inf=solution.residual_inf,
                 newton_iters=solution.newton_iters,
                 diverged_to_zero=solution.diverged_to_zero,
                 max_norm=solution.field.max_norm())
    snapshots.write_json(guess_dir / "solution.json",
                         snapshots.solution_to_dict(solution))

    spec_report = None
    coup_report = None

    if cfg.pipeline["spectral"]:
        spec_report = spectral_mod.spectral_report(solution)
        snapshots.write_json(guess_dir / "spectral.json", spec_report.to_json_dict())
        for idx, fld in enumerate(spec_report.eigenfields[:4]):
            snapshots.write_json(
                guess_dir / f"eigenfield_{idx:02d}.json",
                snapshots.field_to_dict(fld, {"field_role": "eigenfield",
                                              "index": idx,
                                              "eigenvalue": float(spec_report.eigenvalues[idx])}))
        entry["morse_index"] = spec_report.morse_index
        entry["morse_inconclusive"] = spec_report.inconclusive
        entry["principal_eigenvalue"] = spec_report.principal_eigenvalue

    if cfg.pipeline["coupling"]:
        coup_report = coupling_mod.check_coupling(solution)
        doc = coup_report.to_json_dict()
        if problem.m >= 2:
            idres = coupling_mod.identity_residual(solution)
            doc["identity_residuals"] = idres.to_json_dict()
            entry["identity_residuals"] = idres.to_json_dict()
        snapshots.write_json(guess_dir / "coupling.json", doc)
        entry["fully_coupled"] = coup_report.fully_coupled

    if cfg.pipeline["reflection"]:
        scan = reflection_mod.direction_scan(solution,
                                             quad_nodes=int(tols["quad_nodes"]),
                                             workers=scan_workers)
        snapshots.write_json(guess_dir / "direction_scan.json", scan.to_json_dict())
        (guess_dir / "direction_scan.csv").write_text(scan.to_csv())
        entry["direction_scan"] = {
            "verdict": ("exists_nonnegative_direction"
                        if scan.exists_nonnegative_direction else "all_negative"),
            "max_lambda1_endpoint": scan.max_lambda1_endpoint(),
            "best_angle": scan.best_direction_angle,
            "worst_form_secant": max(abs(r.form_secant) for r in scan.rows),
            "worst_difference_residual": max(r.difference_residual for r in scan.rows),
            "worst_comparison_violation": max(r.comparison_violation for r in scan.rows),
        }

    if cfg.pipeline["rotating_plane"]:
        base = _choose_rotation_base(solution)
        rot = reflection_mod.rotating_plane_scan(solution, base,
                                                 pos_tol_rel=float(tols["pos_tol"]))
        snapshots.write_json(guess_dir / "rotating_plane.json", rot.to_json_dict())
        (guess_dir / "rotating_plane.csv").write_text(rot.to_csv())
        entry["rotating_plane"] = {"verdict": rot.verdict, "theta0": rot.theta0,
                                   "symmetric_at_theta0": rot.symmetric_at_theta0,
                                   "principal_at_theta0": rot.principal_at_theta0}

    if cfg.pipeline["symmetry"]:
        sym = symmetry_mod.classify(solution, spec_report, coup_report,
                                    rad_tol=float(tols["rad_tol"]),
                                    mono_tol=float(tols["mono_tol"]),
                                    axis_tol=float(tols["axis_tol"]),
                                    strict_tol=float(tols["strict_tol"]))
        snapshots.write_json(guess_dir / "symmetry.json", sym.to_json_dict())
        entry["symmetry"] = sym.to_json_dict()

    if cfg.pipeline["plots"]:
        from . import plots  # matplotlib import deferred to first use
        plots.solution_svg(solution, str(guess_dir / "solution.svg"))

    return entry


def run(cfg: ExperimentConfig, out_dir: str | Path, workers: int | None = None) -> int:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    nworkers = reflection_mod.scan_workers(workers)
    cfg_doc = dict(cfg.raw)
    snapshots.write_json(out / "config.json", cfg_doc)

    problem = cfg.build_problem()
    grid = cfg.build_grid()

    entries = []
    status = EXIT_OK
    parallel_guesses = nworkers > 1 and len(cfg.guesses) > 1
    per_guess_workers = 1 if parallel_guesses else nworkers
    try:
        if parallel_guesses:
            with concurrent.futures.ThreadPoolExecutor(max_workers=nworkers) as pool:
                entries = list(pool.map(
                    lambda g: run_guess(cfg, problem, grid, g, out, per_guess_workers),
                    cfg.guesses))
        else:
            for g in cfg.guesses:
                entries.append(run_guess(cfg, problem, grid, g, out, per_guess_workers))
    except Exception as exc:  # pipeline failure beyond per-guess solver errors
        snapshots.write_json(out / "summary.json", {
            "config_name": cfg.name, "config_hash": cfg.hash(),
            "pipeline_error": f"{type(exc).__name__}: {exc}",
        })
        return EXIT_PIPELINE_ERROR

    alarms = sum(1 for e in entries
                 if e.get("symmetry", {}).get("counterexample_alarm", False))
    nonradial_ok = [
        e["label"] for e in entries
        if e.get("symmetry") and not e["symmetry"]["counterexample_alarm"]
        and e["symmetry"]["classification"].startswith("foliated")
        and all(e["symmetry"]["hypothesis_ledger"].values())
    ]
    summary = {
        "config_name": cfg.name,
        "config_hash": cfg.hash(),
        "tolerances": cfg.tolerances,
        "seed": cfg.seed,
        "problem": problem.to_json_dict(),
        "grid": grid.to_json_dict(),
        "guesses": entries,
        "counterexample_alarms": alarms,
        "nonradial_hypothesis_satisfying": nonradial_ok,
        "nonradial_hypothesis_satisfying_absent": len(nonradial_ok) == 0,
    }
    snapshots.write_json(out / "summary.json", summary)
    if alarms:
        status = EXIT_ALARM
    return status


# ---------------------------------------------------------------------------
# diff


def _walk_diff(path: str, a, b, tol: float, lines: list[str]):
    if isinstance(a, dict) and isinstance(b, dict):
        for key in sorted(set(a) | set(b)):
            if key not in a:
                lines.append(f"{path}.{key}: missing in A")
            elif key not in b:
                lines.append(f"{path}.{key}: missing in B")
            else:
                _walk_diff(f"{path}.{key}", a[key], b[key], tol, lines)
    elif isinstance(a, list) and isinstance(b, list):
        if len(a) != len(b):
            lines.append(f"{path}: length {len(a)} vs {len(b)}")
        for i, (x, y) in enumerate(zip(a, b)):
            _walk_diff(f"{path}[{i}]", x, y, tol, lines)
    elif isinstance(a, bool) or isinstance(b, bool):
        if a != b:
            lines.append(f"{path}: {a} vs {b}")
    elif isinstance(a, (int, float)) and isinstance(b, (int, float)):
        scale = max(1.0, abs(a), abs(b))
        if abs(a - b) > tol * scale:
            lines.append(f"{path}: {a!r} vs {b!r} (delta {a - b:.6g})")
    elif a != b:
        lines.append(f"{path}: {a!r} vs {b!r}")


def report_diff(dir_a: str | Path, dir_b: str | Path, tol: float = 0.0) -> list[str]:
    """Field-level diff of two run summaries with numeric tolerance."""
    pa, pb = Path(dir_a) / "summary.json", Path(dir_b) / "summary.json"
    for p in (pa, pb):
        if not p.exists():
            raise FileNotFoundError(f"missing artifact {p}")
    a = snapshots.read_json(pa)
    b = snapshots.read_json(pb)
    lines: list[str] = []
    _walk_diff("summary", a, b, tol, lines)
    return lines


# ---------------------------------------------------------------------------
# catalog


def shipped_configs() -> dict[str, dict]:
    out = {}
    root = resources.files("coopsym").joinpath("configs")
    for item in sorted(root.iterdir(), key=lambda p: p.name):
        if item.name.endswith(".json"):
            out[item.name[:-5]] = json.loads(item.read_text())
    return out


def catalog_text() -> str:
    lines = ["problems:"]
    for name in problems_mod.catalog_names():
        lines.append(f"  {name}")
    lines.append("configs:")
    for name, doc in shipped_configs().items():
        prob = doc.get("problem", {})
        lines.append(f"  {name}: problem={prob.get('name')} grid={doc.get('grid')}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# entry point


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="coopsym", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help="artifact directory")
    p_run.add_argument("--workers", type=int, default=None,
                       help="worker count (default: COOPSYM_WORKERS or 1)")
    p_run.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE", help="dotted-path config override")

    p_diff = sub.add_parser("diff", help="diff two run directories")
    p_diff.add_argument("dir_a")
    p_diff.add_argument("dir_b")
    p_diff.add_argument("--tol", type=float, default=0.0)

    sub.add_parser("catalog", help="list problems and shipped configs")

    args = parser.parse_args(argv)
    if args.command == "run":
        try:
            cfg = load_config(args.config, args.override)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        out = args.out or os.path.join("runs", cfg.name)
        status = run(cfg, out, args.workers)
        print(f"run {cfg.name}: exit {status}, artifacts in {out}")
        return status
    if args.command == "diff":
        try:
            lines = report_diff(args.dir_a, args.dir_b, args.tol)
        except FileNotFoundError as exc:
            print(str(exc), file=sys.stderr)
            return EXIT_PIPELINE_ERROR
        for line in lines:
            print(line)
        return EXIT_OK
    if args.command == "catalog":
        print(catalog_text(), end="")
        return EXIT_OK
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
