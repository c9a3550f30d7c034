"""
Command-line front end.

Subcommands: ``solve``, ``field-map``, ``verify``, ``limit-study`` and
``oracle-compare``. Exit codes: 0 success, 1 verification failed,
2 configuration or input error, 3 solver failure or dense cap exceeded.
"""
from __future__ import annotations

import argparse
import csv
import datetime
import json
import os
import platform
import sys
import time
from dataclasses import replace

import numpy as np
import scipy

from . import __version__
from .config import OUT_ENV, RunConfig, load_config, parse_config
from .exceptions import (ConfigurationError, DenseCapError, InteriorPointError, SolverError, ValidationError)
from .lssolver import assemble_wave_operator
from .model import DrudeLorentz
from .observables import CSV_FORMAT, efield_mode_map, free_field_coefficients, spectral_report
from .operator import OperatorHandle
from .spectral import build_grids
from .verify import BatteryConfig, check_dense_oracle, run_battery, verdict_json

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


def _fmt(x) -> str:
    return CSV_FORMAT % x


class _Run:
    """Output directory, timings and the manifest for one invocation."""

    def __init__(self, command: str, cfg: RunConfig, out_flag: str | None, workers: int | None):
        self.command = command
        self.cfg = cfg
        self.out = out_flag or os.environ.get(OUT_ENV) or cfg["output"]["directory"]
        os.makedirs(self.out, exist_ok=True)
        self.workers = cfg.workers(workers)
        self.timings = {}
        self.outputs = []
        self._t = time.perf_counter()

    def lap(self, name: str) -> None:
        now = time.perf_counter()
        self.timings[name] = round(now - self._t, 6)
        self._t = now

    def path(self, name: str) -> str:
        self.outputs.append(name)
        return os.path.join(self.out, name)

    @property
    def header(self) -> str:
        return f"config_hash={self.cfg.hash} command={self.command}"

    def write_csv(self, name: str, columns, rows) -> None:
        with open(self.path(name), "w", newline="") as fh:
            fh.write(f"# {self.header}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])

    def write_json(self, name: str, payload) -> None:
        with open(self.path(name), "w") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2)
            fh.write("\n")

    def manifest(self, extra=None) -> None:
        payload = {
            "command": self.command,
            "config_hash": self.cfg.hash,
            "config": json.loads(self.cfg.canonical()),
            "config_source": self.cfg.source,
            "seed": self.cfg.seed,
            "workers": self.workers,
            "timings_s": self.timings,
            "outputs": sorted(self.outputs),
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "versions": {"plasmonls": __version__, "python": platform.python_version(), "numpy": np.__version__,
                         "scipy": scipy.__version__},
        }
        if extra:
            payload.update(extra)
        with open(os.path.join(self.out, "manifest.json"), "w") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2)
            fh.write("\n")


def read_points(path: str) -> np.ndarray:
    """Read an ``x,y,z`` CSV (header required, ``#`` comments allowed)."""
    try:
        with open(path) as fh:
            lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    except OSError as exc:
        raise ConfigurationError(f"cannot read points file {path}: {exc}") from exc
    if not lines:
        raise ConfigurationError(f"points file {path} is empty")
    reader = csv.reader(lines)
    header = [h.strip().lower() for h in next(reader)]
    if header != ["x", "y", "z"]:
        raise ConfigurationError(f"points file {path} must start with the header x,y,z (got {','.join(header)})")
    pts = []
    for lineno, row in enumerate(reader, start=1):
        try:
            p = [float(v) for v in row]
        except ValueError as exc:
            raise ConfigurationError(f"points file row {lineno}: {exc}") from exc
        if len(p) != 3:
            raise ConfigurationError(f"points file row {lineno} has {len(p)} values, expected 3")
        pts.append(p)
    if not pts:
        raise ConfigurationError(f"points file {path} has no rows")
    return np.array(pts)


def _default_points(model) -> np.ndarray:
    return model.centers.max(axis=0) + np.array([[1.0, 0.5, 0.25]])


def _study_points(cfg: RunConfig, points_path, model) -> np.ndarray:
    if points_path:
        return read_points(points_path)
    if cfg["study"]["points"]:
        return np.array(cfg["study"]["points"])
    return _default_points(model)


def _solve(cfg: RunConfig, run: _Run, model=None, coupling_scale=None):
    model = model if model is not None else cfg.medium()
    grid = build_grids(cfg.grid(), model)
    s = cfg["solver"]
    op = OperatorHandle(model, grid, dense_cap=s["dense_cap"]).scaled(
        s["coupling_scale"] if coupling_scale is None else coupling_scale)
    W = assemble_wave_operator(op, cfg.regularization(), workers=run.workers, method=s["method"])
    return op, W


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve(cfg: RunConfig, args) -> int:
    run = _Run("solve", cfg, args.out, args.workers)
    op, W = _solve(cfg, run)
    run.lap("solve")
    g = op.grid
    rep = spectral_report(g, W)
    norms = np.linalg.norm(W.matrix, axis=0)
    labels = [f"{ik}:{it}:{ie}:{sg:+d}:{pa}" for ik, it, ie, sg, pa in map(g.field_indices, range(g.n_field))]
    labels += [f"{inu}:{vox}:{j}" for inu, vox, j in map(g.medium_indices, range(g.n_medium))]
    fam = ["e"] * g.n_field + ["m"] * g.n_medium
    run.write_csv("modes.csv", ["mode", "family", "label", "frequency", "norm", "residual", "shell_residual"],
                  ((a, fam[a], labels[a], float(W.frequencies[a]), float(norms[a]), float(W.residuals[a]),
                    float(W.shell_residuals[a])) for a in range(g.size)))
    M = W.matrix
    run.write_csv("blocks.csv", ["mode", "component", "re", "im"],
                  ((a, i, float(M[i, a].real), float(M[i, a].imag)) for a in range(g.size) for i in range(g.size)))
    run.write_json("report.json", {"wave_operator": W.report(), "spectral": rep.to_dict(),
                                   "grid": json.loads(g.to_json())})
    run.lap("write")
    run.manifest({"size": int(g.size)})
    print(f"solved {g.size} labels; unitarity defect {W.unitarity_defect:.3e}, "
          f"max residual {rep.max_residual:.3e} -> {run.out}")
    return EXIT_OK


def cmd_field_map(cfg: RunConfig, args) -> int:
    if not args.points:
        raise ConfigurationError("field-map needs --points FILE (CSV with header x,y,z)")
    pts = read_points(args.points)
    model = cfg.medium()
    inside = np.flatnonzero(model.locate(pts) >= 0)
    if inside.size:
        rows = ", ".join(str(i + 1) for i in inside)
        raise InteriorPointError(f"points inside the medium at data rows {rows}", inside.tolist())
    run = _Run("field-map", cfg, args.out, args.workers)
    op, W = _solve(cfg, run, model)
    run.lap("solve")
    fm = efield_mode_map(op, W, pts)
    fm.to_csv(run.path("field_map.csv"), run.header)
    side = fm.sidecar()
    side["config_hash"] = cfg.hash
    run.write_json("field_map.json", side)
    norms = fm.family_norms()
    run.write_csv("field_map_summary.csv", ["point", "x", "y", "z", "e_norm", "m_norm"],
                  ((p, *map(float, pt), float(norms["e"][p]), float(norms["m"][p])) for p, pt in enumerate(pts)))
    run.lap("write")
    run.manifest({"n_points": int(len(pts))})
    print(f"field map at {len(pts)} points over {op.size} modes -> {run.out}")
    return EXIT_OK


def battery_config(cfg: RunConfig, workers: int) -> BatteryConfig:
    v = cfg["verify"]
    kwargs = {}
    if v["checks"]:
        kwargs["checks"] = tuple(v["checks"])
    bulk = DrudeLorentz.drude(v["bulk_plasma_freq"], v["bulk_damping"])
    return BatteryConfig(cfg.medium(), cfg.grid(), cfg.dense_grid(), weak_scale=v["weak_scale"],
                         dense_scale=v["dense_scale"], order_scales=tuple(v["order_scales"]),
                         refinement_levels=v["refinement_levels"], unitarity_tol=v["unitarity_tol"], seed=cfg.seed,
                         n_pairs=v["n_pairs"], bulk_dielectric=bulk, bulk_sides=tuple(v["bulk_sides"] or ()),
                         workers=workers, **kwargs)


def cmd_verify(cfg: RunConfig, args) -> int:
    run = _Run("verify", cfg, args.out, args.workers)
    try:
        bc = battery_config(cfg, run.workers)
        results = run_battery(bc)
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ConfigurationError(str(exc)) from exc
    run.lap("battery")
    text = verdict_json(results)
    with open(run.path("verdict.json"), "w") as fh:
        fh.write(text)
    ok = all(r.passed for r in results.values())
    run.manifest({"all_pass": ok})
    for name, r in sorted(results.items()):
        print(f"{'PASS' if r.passed else 'FAIL'} {name}")
    return EXIT_OK if ok else EXIT_VERIFY


def _slope(xs, ys) -> float:
    pairs = [(x, y) for x, y in zip(xs, ys) if x > 0 and y > 0]
    if len(pairs) < 2:
        return float("nan")
    return float(np.polyfit(np.log([p[0] for p in pairs]), np.log([p[1] for p in pairs]), 1)[0])


def cmd_limit_study(cfg: RunConfig, args) -> int:
    st = cfg["study"]
    scales = list(st["scales"])
    if len(scales) < 3:
        raise ConfigurationError(f"limit-study needs at least 3 scales, got {len(scales)}")
    run = _Run("limit-study", cfg, args.out, args.workers)
    base_model = cfg.medium()
    pts = _study_points(cfg, args.points, base_model)
    rows = []
    for s in scales:
        if st["kind"] == "coupling":
            model, cs = base_model, cfg["solver"]["coupling_scale"] * s
        else:
            if s <= 0:
                raise ConfigurationError("volume scales must be positive")
            model, cs = replace(base_model, h=base_model.h * s), None
        op, W = _solve(cfg, run, model, cs)
        fm = efield_mode_map(op, W, pts)
        g = op.grid
        free = free_field_coefficients(g, fm.points, model.constants)
        m_norm = float(np.sqrt(np.einsum("b,pbi->", g.medium_weight, np.abs(fm.coeff_m) ** 2)))
        e_dev = float(np.sqrt(np.einsum("a,pai->", g.field_weight, np.abs(fm.coeff_e - free) ** 2)))
        rows.append([float(s), float(model.volume), m_norm, e_dev])
        run.lap(f"scale={s:g}")
    m_slope = _slope([r[0] for r in rows], [r[2] for r in rows])
    e_slope = _slope([r[0] for r in rows], [r[3] for r in rows])
    run.write_csv("limit_study.csv", ["scale", "volume", "m_family_norm", "e_minus_free_norm", "m_slope", "e_slope"],
                  (r + [m_slope, e_slope] for r in rows))
    run.manifest({"kind": st["kind"], "slopes": {"m_family": m_slope, "e_minus_free": e_slope}})
    print(f"limit study ({st['kind']}) over {len(scales)} scales: m slope {m_slope:.4f}, e slope {e_slope:.4f}")
    return EXIT_OK


def cmd_oracle_compare(cfg: RunConfig, args) -> int:
    run = _Run("oracle-compare", cfg, args.out, args.workers)
    res = check_dense_oracle(cfg.medium(), cfg.dense_grid(), cfg["verify"]["dense_scale"],
                             dense_cap=cfg["solver"]["dense_cap"], seed=cfg.seed)
    run.lap("oracle")
    run.write_json("oracle.json", res.to_dict())
    run.manifest({"passed": res.passed})
    print(f"{'PASS' if res.passed else 'FAIL'} dense_oracle")
    return EXIT_OK if res.passed else EXIT_VERIFY


COMMANDS = {"solve": cmd_solve, "field-map": cmd_field_map, "verify": cmd_verify, "limit-study": cmd_limit_study,
            "oracle-compare": cmd_oracle_compare}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run configuration (defaults apply when omitted)")
    common.add_argument("--out", help=f"output directory (overrides ${OUT_ENV} and [output] directory)")
    common.add_argument("--workers", type=int, help="worker threads (0 = all cores)")
    common.add_argument("--points", help="CSV of evaluation points with header x,y,z")
    parser = argparse.ArgumentParser(prog="plasmonls", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config) if args.config else parse_config("")
        return COMMANDS[args.command](cfg, args)
    except InteriorPointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DenseCapError, SolverError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigurationError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
