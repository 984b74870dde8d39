"""Command-line front end: factorize, sweep, curve, verify, catalog."""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .catalog import (
    MODEL_BUILDERS,
    RationalMatrixOmega,
    compose_monodromy,
    load_model_json,
    model_identity,
)
from .engine import (
    DEFAULT_D_TOL,
    factorise,
    grid_delta_2x2,
    toeplitz_kernel_dim,
)
from .errors import NoCurveFound, WhergoError
from .geometry import classify_curve, extract_4d, extract_5d, trace_curve
from .spectral import SpectralPoint, build_partition

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NONCANONICAL = 3


@dataclass
class RunConfig:
    """Execution settings; every CLI flag overrides its config-file field."""

    model: str = "kerr"
    model_json: str | None = None
    params: dict = field(default_factory=lambda: {"m": 2.0, "a": 1.0})
    branches: list | None = None
    grid: dict = field(default_factory=lambda: {"rho": [0.05, 4.0, 40],
                                                "v": [-4.0, 4.0, 40]})
    tol: float | None = None
    out: str | None = None
    fmt: str = "csv"
    jobs: int = 1
    step: float = 0.01

    def d_tol(self) -> float:
        if self.tol is not None:
            return self.tol
        env = os.environ.get("WH_ERGO_TOL")
        if env:
            return float(env)
        return DEFAULT_D_TOL

    def validate(self):
        for key in ("rho", "v"):
            lo, hi, n = self.grid[key]
            if n < 2:
                raise ValueError(f"grid resolution for {key} must be >= 2")
            if key == "rho" and lo <= 0:
                raise ValueError("rho range must be strictly positive")
            if hi <= lo:
                raise ValueError(f"empty {key} range")
        if self.tol is not None and self.tol <= 0:
            raise ValueError("tolerance must be positive")


def build_model(cfg: RunConfig) -> RationalMatrixOmega:
    if cfg.model_json:
        return load_model_json(cfg.model_json)
    if cfg.model == "identity":
        return model_identity(2)
    if cfg.model not in MODEL_BUILDERS:
        raise ValueError(f"unknown model {cfg.model!r}; see `whergo catalog`")
    return MODEL_BUILDERS[cfg.model](cfg.params.get("m", 2.0), cfg.params.get("a", 1.0))


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_text(path, text: str):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _metric_payload(model, M) -> dict:
    if model.n == 2:
        s = extract_4d(M)
        return {"Delta": s.Delta, "Btilde": s.Btilde, "g_tt": s.g_tt}
    s = extract_5d(M)
    return {"Sigma1": s.Sigma1, "Sigma2": s.Sigma2, "Sigma3": s.Sigma3,
            "chi1": s.chi1, "chi2": s.chi2, "chi3": s.chi3, "g_tt": s.g_tt}


def cmd_factorize(cfg: RunConfig, rho: float, v: float) -> int:
    model = build_model(cfg)
    out = factorise(model, rho, v, cfg.branches, d_tol=cfg.d_tol())
    payload = {
        "schema_version": SCHEMA_VERSION,
        "model": model.model_id,
        "params": model.params,
        "branches": list(cfg.branches or model.default_branches),
        "rho": rho,
        "v": v,
        "status": out.status.value,
        "D": [out.D_value.real, out.D_value.imag],
        "D_normalised": abs(out.D_value) / out.D_scale,
        "kernel_dim": out.kernel_dim,
    }
    if out.canonical:
        payload["M_limit"] = [[out.M_limit[i, j].real for j in range(model.n)]
                              for i in range(model.n)]
        try:
            payload["metric"] = _metric_payload(model, out.M_limit)
        except WhergoError as exc:
            payload["metric"] = {"error": str(exc)}
        r = out.residual_report
        payload["residuals"] = {
            "factorisation": r.factorisation,
            "x_at_zero": r.x_at_zero,
            "pole_cancellation": r.pole_cancellation,
        }
    _write_text(cfg.out, json.dumps(payload, indent=2) + "\n")
    return EXIT_OK if out.canonical else EXIT_NONCANONICAL


def _sweep_rows(cfg: RunConfig, model: RationalMatrixOmega):
    lo_r, hi_r, n_r = cfg.grid["rho"]
    lo_v, hi_v, n_v = cfg.grid["v"]
    rho_vals = np.linspace(lo_r, hi_r, int(n_r))
    v_vals = np.linspace(lo_v, hi_v, int(n_v))
    tol = cfg.d_tol()
    rows = []
    if model.n == 2:
        R, V = np.meshgrid(rho_vals, v_vals, indexing="ij")
        delta, _, dhat = grid_delta_2x2(model, R, V, cfg.branches)
        for i in range(int(n_r)):
            for j in range(int(n_v)):
                dn = dhat[i, j]
                degenerate = abs(dn) < tol
                if degenerate:
                    pt = SpectralPoint(R[i, j], V[i, j])
                    part = build_partition(pt, model.omega_poles,
                                           cfg.branches or model.default_branches)
                    mono = compose_monodromy(model, pt, check=False)
                    kdim = toeplitz_kernel_dim(mono, part, rel_tol=max(1e-9, tol))
                    gtt = ""
                else:
                    kdim = 0
                    gtt = _fmt(-delta[i, j].real)
                rows.append((R[i, j], V[i, j], dn.real, dn.imag, kdim, gtt))
        return rows
    points = [(r, v) for r in rho_vals for v in v_vals]
    results = _map_points(cfg, points)
    for (r, v), res in zip(points, results):
        rows.append((r, v, *res))
    return rows


def _point_job(args):
    cfg_doc, rho, v = args
    cfg = RunConfig(**cfg_doc)
    model = _worker_model(cfg)
    out = factorise(model, rho, v, cfg.branches, d_tol=cfg.d_tol())
    dn = out.D_value / out.D_scale
    if out.canonical:
        try:
            gtt = _fmt(_metric_payload(model, out.M_limit)["g_tt"])
        except WhergoError:
            gtt = ""
        return (dn.real, dn.imag, 0, gtt)
    return (dn.real, dn.imag, out.kernel_dim, "")


_WORKER_MODELS: dict = {}


def _worker_model(cfg: RunConfig) -> RationalMatrixOmega:
    key = (cfg.model, cfg.model_json, tuple(sorted(cfg.params.items())))
    if key not in _WORKER_MODELS:
        _WORKER_MODELS[key] = build_model(cfg)
    return _WORKER_MODELS[key]


def _map_points(cfg: RunConfig, points):
    cfg_doc = {k: getattr(cfg, k) for k in RunConfig.__dataclass_fields__}
    args = [(cfg_doc, r, v) for r, v in points]
    if cfg.jobs and cfg.jobs > 1:
        import multiprocessing as mp

        with mp.Pool(cfg.jobs) as pool:
            return pool.map(_point_job, args)
    return [_point_job(a) for a in args]


def cmd_sweep(cfg: RunConfig) -> int:
    cfg.validate()
    model = build_model(cfg)
    rows = _sweep_rows(cfg, model)
    if cfg.fmt == "json":
        doc = {"schema_version": SCHEMA_VERSION, "model": model.model_id,
               "params": model.params,
               "columns": ["rho", "v", "re_D", "im_D", "kernel_dim", "g_tt"],
               "rows": [[r[0], r[1], r[2], r[3], r[4], (None if r[5] == "" else float(r[5]))]
                        for r in rows]}
        _write_text(cfg.out, json.dumps(doc, indent=2) + "\n")
        return EXIT_OK
    lines = [f"# whergo sweep schema_version={SCHEMA_VERSION}",
             f"# model={model.model_id} params={json.dumps(model.params, sort_keys=True)}",
             f"# branches={','.join(cfg.branches or model.default_branches)}",
             "rho,v,re_D,im_D,kernel_dim,g_tt"]
    for r in rows:
        lines.append(f"{_fmt(r[0])},{_fmt(r[1])},{_fmt(r[2])},{_fmt(r[3])},{r[4]},{r[5]}")
    _write_text(cfg.out, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_curve(cfg: RunConfig) -> int:
    cfg.validate()
    model = build_model(cfg)
    lo_r, hi_r, n_r = cfg.grid["rho"]
    lo_v, hi_v, n_v = cfg.grid["v"]
    try:
        poly = trace_curve(model, cfg.branches, box=(lo_r, hi_r, lo_v, hi_v),
                           grid=(int(n_r), int(n_v)), step=cfg.step)
    except NoCurveFound as exc:
        print(f"no curve: {exc}", file=sys.stderr)
        return EXIT_NONCANONICAL
    poly = classify_curve(model, poly, cfg.branches)
    lines = [f"# whergo curve schema_version={SCHEMA_VERSION}",
             f"# model={model.model_id} params={json.dumps(model.params, sort_keys=True)}",
             f"# branches={','.join(cfg.branches or model.default_branches)}",
             f"# tag={poly.tag}",
             "rho,v,absD"]
    for (r, v), res in zip(poly.samples, poly.residuals):
        lines.append(f"{_fmt(r)},{_fmt(v)},{_fmt(res)}")
    _write_text(cfg.out, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_catalog(cfg: RunConfig) -> int:
    entries = [
        ("kerr", "2x2 non-extremal Kerr; params m > a >= 0"),
        ("mp5d", "3x3 Myers-Perry (one angular momentum); 2m - a^2 > 0;"
                 " failure curve = ergosurface"),
        ("mvc5d", "3x3 Myers-Perry variant; 2m - a^2 > 0;"
                  " failure curve is not the ergosurface"),
        ("identity", "2x2 identity (trivial factorisation)"),
    ]
    for name, desc in entries:
        print(f"{name:10s} {desc}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, suites=None) -> int:
    from .verify import run_suites

    if cfg.model_json:
        build_model(cfg)  # surfaces InvariantViolation/SchemaError as exit 1
    results = run_suites(suites)
    width = max(len(r.name) for r in results)
    failed = False
    for r in results:
        status = "pass" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  {status}  max_residual={r.residual:.3e}  tol={r.tol:.1e}")
        failed = failed or not r.passed
    if cfg.out:
        doc = {"schema_version": SCHEMA_VERSION,
               "suites": [{"name": r.name, "passed": r.passed,
                           "max_residual": r.residual, "tol": r.tol} for r in results]}
        with open(cfg.out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
    return EXIT_ERROR if failed else EXIT_OK


def _parse_grid(text: str) -> dict:
    try:
        part_r, part_v = text.split(",")
        lo_r, hi_r, n_r = part_r.split(":")
        lo_v, hi_v, n_v = part_v.split(":")
        return {"rho": [float(lo_r), float(hi_r), int(n_r)],
                "v": [float(lo_v), float(hi_v), int(n_v)]}
    except ValueError as exc:
        raise ValueError(f"bad --grid spec {text!r}; expected rmin:rmax:n,vmin:vmax:n") from exc


def _load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="whergo",
                                description="Canonical factorisation of rational "
                                            "monodromy matrices and failure-curve tools")
    p.add_argument("--version", action="version", version=f"whergo {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file; flags override its fields")
        sp.add_argument("--model", help="catalog model id (kerr, mp5d, mvc5d, identity)")
        sp.add_argument("--model-json", help="path to a JSON model file")
        sp.add_argument("--m", type=float, help="mass parameter")
        sp.add_argument("--a", type=float, help="rotation parameter")
        sp.add_argument("--branches", help="comma-separated pair branches, e.g. minus,minus")
        sp.add_argument("--tol", type=float, help="on-curve |D| tolerance "
                                                  "(default WH_ERGO_TOL or 1e-9)")
        sp.add_argument("--out", help="output file (default stdout)")
        sp.add_argument("--format", dest="fmt", choices=("csv", "json"))
        sp.add_argument("--jobs", type=int, help="worker processes for sweeps")

    sp = sub.add_parser("factorize", help="factorise at one Weyl point")
    common(sp)
    sp.add_argument("--rho", type=float, required=True)
    sp.add_argument("--v", type=float, required=True)

    sp = sub.add_parser("sweep", help="D/kernel/g_tt over a Weyl grid (CSV)")
    common(sp)
    sp.add_argument("--grid", help="rmin:rmax:n,vmin:vmax:n")

    sp = sub.add_parser("curve", help="trace the D = 0 locus (CSV polyline)")
    common(sp)
    sp.add_argument("--grid", help="scan grid rmin:rmax:n,vmin:vmax:n")
    sp.add_argument("--step", type=float, help="maximum polyline spacing")

    sp = sub.add_parser("verify", help="run the invariant/oracle suites")
    common(sp)
    sp.add_argument("--suite", action="append", help="run a single named suite")

    sp = sub.add_parser("catalog", help="list built-in models")
    common(sp)
    return p


def _config_from_args(args) -> RunConfig:
    doc = {}
    if getattr(args, "config", None):
        doc = _load_config(args.config)
        unknown = set(doc) - set(RunConfig.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
    cfg = RunConfig(**doc)
    if getattr(args, "model", None):
        cfg.model = args.model
    if getattr(args, "model_json", None):
        cfg.model_json = args.model_json
    if getattr(args, "m", None) is not None:
        cfg.params["m"] = args.m
    if getattr(args, "a", None) is not None:
        cfg.params["a"] = args.a
    if getattr(args, "branches", None):
        cfg.branches = args.branches.split(",")
    if getattr(args, "tol", None) is not None:
        cfg.tol = args.tol
    if getattr(args, "out", None):
        cfg.out = args.out
    if getattr(args, "fmt", None):
        cfg.fmt = args.fmt
    if getattr(args, "jobs", None) is not None:
        cfg.jobs = args.jobs
    if getattr(args, "grid", None):
        cfg.grid = _parse_grid(args.grid)
    if getattr(args, "step", None) is not None:
        cfg.step = args.step
    return cfg


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        if args.command == "factorize":
            return cmd_factorize(cfg, args.rho, args.v)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        if args.command == "curve":
            return cmd_curve(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, getattr(args, "suite", None))
        if args.command == "catalog":
            return cmd_catalog(cfg)
        raise ValueError(f"unknown command {args.command}")
    except WhergoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
