"""Command-line front end.

Usage: ``mchwave [options] COMMAND`` with COMMAND one of wave, functionals,
spectrum, vk, evolve, sweep, verify-all. Option values come from the
command line, then a JSON config file (``--config``), then defaults.

Exit codes: 0 success, 2 usage or validation error, 3 numerical failure,
4 acceptance failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from . import evolution as ev
from .errors import MchError, ParameterError
from .functionals import SWEEP_HEADER, functional_report, sweep_row
from .spectral import assemble_hessian, lowest_eigenpairs, spectral_report, vk_inner_product
from .verify import report_dict, run_checks
from .wave_profile import (admissible_window, construct_profile, profile_residuals,
                           validate_parameters)

COMMANDS = ("wave", "functionals", "spectrum", "vk", "evolve", "sweep", "verify-all")
OUTPUT_ROOT_ENV = "MCHWAVE_OUTPUT_ROOT"
SWEEP_MARGIN = 0.02

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_ACCEPTANCE = 0, 2, 3, 4

_num = {"type": "number"}
_opt_num = {"type": ["number", "null"]}
CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "mchwave run configuration",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "c": {"type": "number", "exclusiveMinimum": 0},
        "k": _opt_num,
        "k_min": _opt_num,
        "k_max": _opt_num,
        "k_count": {"type": "integer", "minimum": 1},
        "dx": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "L": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "dk": {"type": "number", "exclusiveMinimum": 0},
        "N": {"type": "integer", "minimum": 8},
        "L_dom": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "dt_max": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "cfl": {"type": "number", "exclusiveMinimum": 0},
        "t_end": {"type": "number", "exclusiveMinimum": 0},
        "sample_interval": {"type": "number", "exclusiveMinimum": 0},
        "perturbation": {"enum": ["none", *ev.PERTURBATIONS]},
        "eps": {"type": "number", "minimum": 0},
        "seed": {"type": "integer"},
        "jobs": {"type": "integer", "minimum": 1},
        "skip_evolution": {"type": "boolean"},
        "out": {"type": ["string", "null"]},
    },
}


@dataclass
class RunConfig:
    command: str | None = None
    c: float = 1.0
    k: float | None = None
    k_min: float | None = None
    k_max: float | None = None
    k_count: int = 21
    dx: float | None = None
    L: float | None = None
    dk: float = 1e-4
    N: int = 4096
    L_dom: float | None = None
    dt_max: float | None = None
    cfl: float = 0.5
    t_end: float = 10.0
    sample_interval: float = 0.5
    perturbation: str = "none"
    eps: float = 0.0
    seed: int = 0
    jobs: int = 1
    skip_evolution: bool = False
    out: str | None = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def k_values(self) -> list[float]:
        return [float(x) for x in np.linspace(self.k_min, self.k_max, self.k_count)]


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mchwave",
        description="Solitary waves of the modified Camassa-Holm equation on a "
                    "nonzero background.")
    p.add_argument("command", nargs="?", choices=COMMANDS)
    p.add_argument("--config", help="JSON config file (flat keys, see README)")
    p.add_argument("--c", type=float, help="wave speed (default 1)")
    p.add_argument("--k", type=float, help="background level")
    p.add_argument("--k-min", type=float, dest="k_min")
    p.add_argument("--k-max", type=float, dest="k_max")
    p.add_argument("--k-count", type=int, dest="k_count")
    p.add_argument("--dx", type=float, help="profile grid spacing")
    p.add_argument("--L", type=float, help="profile half-length")
    p.add_argument("--dk", type=float, help="step for k finite differences")
    p.add_argument("--N", type=int, help="periodic grid size (power of two)")
    p.add_argument("--L-dom", type=float, dest="L_dom", help="periodic domain length")
    p.add_argument("--dt-max", type=float, dest="dt_max", help="time-step cap")
    p.add_argument("--cfl", type=float)
    p.add_argument("--t-end", type=float, dest="t_end")
    p.add_argument("--sample-interval", type=float, dest="sample_interval")
    p.add_argument("--perturbation", choices=["none", *ev.PERTURBATIONS])
    p.add_argument("--eps", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, help="worker processes for sweep")
    p.add_argument("--skip-evolution", action="store_true", default=None,
                   dest="skip_evolution", help="verify-all without evolution checks")
    p.add_argument("--out", help=f"output directory (default under ${OUTPUT_ROOT_ENV})")
    p.add_argument("--overwrite", action="store_true",
                   help="allow writing into a non-empty output directory")
    return p


def parse_config(argv=None) -> tuple[RunConfig, bool]:
    """Merge flags over config-file values over defaults and validate.

    Returns the config and the overwrite flag. Raises :class:`UsageError`
    for malformed input and :class:`ParameterError` for inadmissible (c, k).
    """
    args = build_parser().parse_args(argv)
    values = {}
    if args.config:
        try:
            with open(args.config) as fh:
                values = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {args.config}: {exc}") from exc
        try:
            jsonschema.validate(values, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(x) for x in exc.absolute_path) or "(top level)"
            raise UsageError(f"config file field {where}: {exc.message}") from exc
    for f in dataclasses.fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    cfg = RunConfig(**values)
    _validate(cfg)
    return cfg, args.overwrite


def _validate(cfg: RunConfig) -> None:
    if not cfg.c > 0:
        raise ParameterError(f"field c: wave speed must be positive, got {cfg.c}")
    for name in ("dx", "L", "L_dom", "dt_max"):
        v = getattr(cfg, name)
        if v is not None and not v > 0:
            raise UsageError(f"field {name} must be positive, got {v}")
    if cfg.N < 8 or cfg.N & (cfg.N - 1):
        raise UsageError(f"field N must be a power of two >= 8, got {cfg.N}")
    if cfg.command == "sweep":
        lo, hi = admissible_window(cfg.c)
        margin = SWEEP_MARGIN * math.sqrt(cfg.c)
        if cfg.k_min is None:
            cfg.k_min = lo + margin
        if cfg.k_max is None:
            cfg.k_max = hi - margin
        if cfg.k_count < 1 or cfg.k_min > cfg.k_max:
            raise UsageError(f"empty k range: k_min={cfg.k_min}, k_max={cfg.k_max}, "
                             f"k_count={cfg.k_count}")
        if cfg.k_count > 1 and cfg.k_min == cfg.k_max:
            raise UsageError("k_min equals k_max with k_count > 1")
        for kk in cfg.k_values():
            try:
                validate_parameters(cfg.c, kk)
            except ParameterError as exc:
                raise ParameterError(f"field k-range: {exc}") from exc
    elif cfg.k is not None:
        try:
            validate_parameters(cfg.c, cfg.k)
        except ParameterError as exc:
            raise ParameterError(f"field k: {exc}") from exc
    if cfg.command is None:
        raise UsageError("no command given; choose one of " + ", ".join(COMMANDS))
    if cfg.command != "sweep" and cfg.k is None:
        raise UsageError("field k is required for command " + cfg.command)
    if cfg.eps < 0:
        raise UsageError("field eps must be nonnegative")


def _output_dir(cfg: RunConfig, overwrite: bool) -> Path:
    if cfg.out:
        out = Path(cfg.out)
    else:
        root = Path(os.environ.get(OUTPUT_ROOT_ENV, "mchwave_runs"))
        tag = f"{cfg.command}_c{cfg.c:g}" + ("" if cfg.command == "sweep" else f"_k{cfg.k:g}")
        out = root / tag
    if out.exists() and any(out.iterdir()) and not overwrite:
        raise UsageError(f"output directory {out} is not empty; pass --overwrite to reuse it")
    return out


class _Writer:
    """Collects output files and writes them with a manifest."""

    def __init__(self, root: Path):
        self.root = root
        self.files: dict[str, bytes] = {}

    def text(self, name, s):
        self.files[name] = s.encode()

    def json(self, name, obj):
        self.text(name, json.dumps(obj, indent=2, default=_jsonable) + "\n")

    def finish(self, cfg: RunConfig):
        self.json("resolved_config.json", cfg.to_dict())
        self.root.mkdir(parents=True, exist_ok=True)
        rows = []
        for name, data in self.files.items():
            (self.root / name).write_bytes(data)
            rows.append((name, len(data), hashlib.sha256(data).hexdigest()))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["file", "bytes", "sha256"])
        w.writerows(rows)
        (self.root / "manifest.csv").write_text(buf.getvalue())


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def _clean(obj):
    """Replace non-finite floats by None so the JSON is standard."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _profile(cfg, k=None):
    params = validate_parameters(cfg.c, cfg.k if k is None else k)
    return construct_profile(params, dx=cfg.dx, L=cfg.L)


def cmd_wave(cfg, out):
    prof = _profile(cfg)
    buf = io.StringIO()
    prof.to_csv(buf)
    out.text("profile.csv", buf.getvalue())
    res = profile_residuals(prof)
    out.json("wave.json", _clean({"parameters": prof.params.to_dict(),
                                  "dx": prof.dx, "L": prof.L, "n_grid": len(prof.xi),
                                  "tail_error": prof.tail_error,
                                  "max_phi": float(np.max(prof.phi)),
                                  "max_mu": float(np.max(prof.mu)),
                                  "residuals": dataclasses.asdict(res),
                                  "seed": cfg.seed}))
    return EXIT_OK


def cmd_functionals(cfg, out):
    rep = functional_report(_profile(cfg))
    out.json("functionals.json", _clean({**rep.to_dict(), "seed": cfg.seed}))
    out.text("functionals.csv", SWEEP_HEADER + "\n" + sweep_row(rep) + "\n")
    return EXIT_OK


def cmd_spectrum(cfg, out):
    prof = _profile(cfg)
    rep = spectral_report(prof, with_vk=True, dk=cfg.dk)
    op = assemble_hessian(prof)
    n_below = len(rep.eigenvalues)
    extra = lowest_eigenpairs(op, min(n_below + 5, op.size)).values
    lines = ["index,eigenvalue,below_edge"]
    lines += [f"{i},{v:.17g},{str(bool(v < prof.params.ess_edge)).lower()}"
              for i, v in enumerate(extra)]
    out.text("eigenvalues.csv", "\n".join(lines) + "\n")
    out.json("spectral_report.json", _clean({**rep.to_dict(), "seed": cfg.seed}))
    return EXIT_OK


def cmd_vk(cfg, out):
    prof = _profile(cfg)
    vk = vk_inner_product(prof, dk=cfg.dk)
    rel = abs(vk.vk_value - vk.vk_crosscheck) / abs(vk.vk_crosscheck)
    out.json("vk.json", _clean({**dataclasses.asdict(vk), "c": cfg.c, "k": cfg.k,
                                "relative_difference": rel, "seed": cfg.seed}))
    return EXIT_OK


def cmd_evolve(cfg, out):
    params = validate_parameters(cfg.c, cfg.k)
    wave = ev.wrapped_wave(params, N=cfg.N, L_dom=cfg.L_dom)
    m0 = wave.field
    if cfg.perturbation != "none":
        m0 = ev.make_perturbation(wave, cfg.perturbation, cfg.eps, seed=cfg.seed)
    conf = ev.EvolutionConfig(t_end=cfg.t_end, sample_interval=cfg.sample_interval,
                              cfl=cfg.cfl,
                              dt_max=np.inf if cfg.dt_max is None else cfg.dt_max)
    traj = ev.evolve(m0, conf, reference=wave.field)
    buf = io.StringIO()
    traj.to_csv(buf)
    out.text("trajectory.csv", buf.getvalue())
    buf = io.StringIO()
    traj.terminal_to_csv(buf)
    out.text("terminal_state.csv", buf.getvalue())
    out.json("evolution.json", _clean({**traj.summary(), "wrap_error": wave.wrap_error,
                                       "L_dom": m0.L_dom, "N": m0.N,
                                       "perturbation": cfg.perturbation, "eps": cfg.eps,
                                       "seed": cfg.seed}))
    return EXIT_OK


SWEEP_COLUMNS = ["c", "k", "Q_quad", "Q_closed", "dQdk", "vk_value", "vk_crosscheck",
                 "lambda1", "lambda2", "negative_count", "zero_count", "el_residual",
                 "error"]


def sweep_member(c, k, dx, L, dk):
    """One sweep row as a dict; failures are recorded, not raised."""
    row = dict.fromkeys(SWEEP_COLUMNS, "")
    row.update(c=c, k=k)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            prof = construct_profile(validate_parameters(c, k), dx=dx, L=L)
            fr = functional_report(prof)
            rep = spectral_report(prof, with_vk=True, dk=dk)
        w = rep.eigenvalues
        row.update(Q_quad=fr.Q_quad, Q_closed=fr.Q_closed, dQdk=fr.dQdk_closed,
                   vk_value=rep.vk_value, vk_crosscheck=rep.vk_crosscheck,
                   lambda1=w[0] if w else float("nan"),
                   lambda2=w[1] if len(w) > 1 else float("nan"),
                   negative_count=rep.negative_count, zero_count=rep.zero_count,
                   el_residual=fr.el_residual_sup)
    except MchError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def cmd_sweep(cfg, out):
    ks = cfg.k_values()
    args = [(cfg.c, k, cfg.dx, cfg.L, cfg.dk) for k in ks]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            rows = list(pool.map(sweep_member, *zip(*args)))
    else:
        rows = [sweep_member(*a) for a in args]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[col]) for col in SWEEP_COLUMNS])
    out.text("sweep.csv", buf.getvalue())
    failed = [r for r in rows if r["error"]]
    good = [r for r in rows if not r["error"]]
    verdict = {
        "rows": len(rows),
        "failed_rows": len(failed),
        "all_dQdk_negative": all(r["dQdk"] < 0 for r in good),
        "all_vk_negative": all(r["vk_value"] < 0 for r in good),
        "all_negative_count_one": all(r["negative_count"] == 1 for r in good),
        "seed": cfg.seed,
    }
    verdict["passed"] = (not failed and verdict["all_dQdk_negative"]
                         and verdict["all_vk_negative"] and verdict["all_negative_count_one"])
    out.json("sweep_summary.json", verdict)
    if failed:
        return EXIT_NUMERICAL
    return EXIT_OK if verdict["passed"] else EXIT_ACCEPTANCE


def cmd_verify_all(cfg, out):
    checks, msgs = run_checks(cfg.c, cfg.k, dx=cfg.dx, L=cfg.L,
                              evolution=not cfg.skip_evolution, N=cfg.N,
                              L_dom=cfg.L_dom, dk=cfg.dk)
    rep = report_dict(cfg.c, cfg.k, checks, msgs)
    rep["seed"] = cfg.seed
    out.json("verify.json", _clean(rep))
    for ch in checks:
        print(ch.line())
    for m in msgs:
        print("warning:", m)
    return EXIT_OK if rep["passed"] else EXIT_ACCEPTANCE


HANDLERS = {"wave": cmd_wave, "functionals": cmd_functionals, "spectrum": cmd_spectrum,
            "vk": cmd_vk, "evolve": cmd_evolve, "sweep": cmd_sweep,
            "verify-all": cmd_verify_all}


def main(argv=None) -> int:
    try:
        cfg, overwrite = parse_config(argv)
        outdir = _output_dir(cfg, overwrite)
    except SystemExit as exc:          # argparse usage errors
        return int(exc.code or 0) and EXIT_USAGE
    except (UsageError, ParameterError) as exc:
        print(f"mchwave: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    writer = _Writer(outdir)
    try:
        code = HANDLERS[cfg.command](cfg, writer)
    except MchError as exc:
        print(f"mchwave: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        writer.json("failure.json", {"error": type(exc).__name__, "message": str(exc),
                                     "seed": cfg.seed})
        writer.finish(cfg)
        return EXIT_NUMERICAL
    writer.finish(cfg)
    print(f"wrote {outdir}")
    return code


if __name__ == "__main__":
    sys.exit(main())
