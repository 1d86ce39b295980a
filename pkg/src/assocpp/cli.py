"""Command-line entry point: ``assocpp <command> --config cfg.json --out dir``.

Exit codes: 0 pass, 1 checks ran but failed, 2 validation, 3 numeric,
4 resource, 5 non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import platform
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np
import pydantic

from . import clt_harness as clt
from .config import MODELS, PropsConfig, config_hash
from .errors import AssocPPError
from .estimator import k_theoretical, two_step
from .kernels import CorrelationFamily, KernelSpec
from .mixing import mixing_report
from .props import moment_mc, split_gap_suite, trace_lower_suite
from .sampler import PointPattern, _jsonable, sample_dpp
from .streams import stream, stream_id
from .window import Window

EXIT_FAIL = 1
EXIT_VALIDATION = 2


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True, default=str) + "\n")


def _write_curves(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


# -- commands ------------------------------------------------------------------------


def cmd_simulate(cfg, out: Path, threads: int):
    spec = cfg.kernel.build()
    window = cfg.window.build()
    seed = cfg.mc.master_seed
    summary = {"replicates": []}
    for i in range(cfg.mc.replicates):
        pat = sample_dpp(spec, window, stream(seed, "simulate", i), cfg.truncation, cfg.margin,
                         stream_id(seed, "simulate", i))
        name = "pattern.csv" if cfg.mc.replicates == 1 else f"pattern_{i}.csv"
        pat.write(out / name, spec)
        summary["replicates"].append({"file": name, "n": pat.n, **pat.meta})
    summary["n"] = summary["replicates"][0]["n"]
    return summary, True


def cmd_mixing(cfg, out: Path, threads: int):
    spec = cfg.kernel.build()
    reps = cfg.mc.replicates if cfg.mc else 0
    seed = cfg.mc.master_seed if cfg.mc else None
    rep = mixing_report(spec, cfg.r_grid, cfg.p, cfg.q, cfg.grid_n, reps if reps > 1 else 0, seed)
    header, rows = rep.rows()
    _write_curves(out / "curves.csv", header, rows)
    ok = all(
        (np.isnan(lo) or lo <= e * 1.05) and e <= up * 1.05
        for lo, e, up in zip(rep.lower_vals, rep.empirical_vals, rep.upper_pq)
    )
    return {"report": rep.to_dict(), "sandwich_holds": ok}, ok


def cmd_clt(cfg, out: Path, threads: int):
    spec = cfg.kernel.build()
    stats = [s.build() for s in cfg.statistics]
    exp = clt.CltExperiment(spec, stats[0], clt.square_windows(cfg.window_sides, spec.dim),
                            cfg.mc.replicates, cfg.mc.master_seed, margin=cfg.margin)
    conditions = clt.check_conditions(exp)
    result = clt.run_clt(exp, stats, workers=threads)
    clt.write_replicates_csv(out / "curves.csv", result, stats)
    windows = []
    for entry in result["windows"]:
        windows.append({
            "volume": entry["volume"],
            "window": entry["window"],
            "stats": {k: {kk: vv for kk, vv in v.items() if kk != "qq"} for k, v in entry["stats"].items()},
        })
    growth = None
    if len(exp.windows) >= 3:
        growth = clt.variance_growth(exp, result["values"])
    last = result["windows"][-1]["stats"]
    ok = all(v["pass"] for v in last.values())
    return {"conditions": conditions, "windows": windows, "variance_growth": growth,
            "acceptance_grade": exp.acceptance_grade, "pass": ok}, ok


def cmd_estimate(cfg, out: Path, threads: int):
    window = cfg.window.build() if cfg.window else None
    pattern = PointPattern.read(cfg.pattern, window)
    z = cfg.covariate.build(pattern.window.dim)
    fit = cfg.fit.build()
    res = two_step(pattern, z, fit, cfg.beta0)
    names = res.diagnostics["psi_names"]
    fam = CorrelationFamily(fit.family, {**fit.fixed, **dict(zip(names, res.psi_hat))}, pattern.window.dim)
    t = res.diagnostics["t"]
    _write_curves(out / "curves.csv", ["t", "k_hat", "k_fitted"],
                  zip(t, res.diagnostics["k_hat"], k_theoretical(fam, t)))
    return res.to_dict(), res.converged


def cmd_props(cfg: PropsConfig, out: Path, threads: int):
    seed = cfg.mc.master_seed
    sizes = (cfg.min_size, cfg.max_size)
    gap = split_gap_suite(stream(seed, "props", "split_gap"), cfg.instances, sizes, cfg.tolerance)
    trace = trace_lower_suite(stream(seed, "props", "trace_lower"), cfg.instances, sizes, cfg.tolerance)
    moment = moment_mc(KernelSpec.gaussian(0.3, 1.0), Window.cube(1.0), 1,
                       max(cfg.mc.replicates, 500), seed)
    ok = gap["pass"] and trace["pass"] and moment["pass"]
    return {"det_split_gap": gap, "det_trace_lower": trace, "exp_moment_bound": moment, "pass": ok}, ok


COMMANDS = {
    "simulate": cmd_simulate,
    "mixing-bounds": cmd_mixing,
    "clt": cmd_clt,
    "estimate": cmd_estimate,
    "props": cmd_props,
}


# -- plumbing ------------------------------------------------------------------------


def _versions():
    out = {"python": platform.python_version()}
    for pkg in ("numpy", "scipy", "pydantic", "artifact"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def load_config(command: str, path: str | None, seed: int | None):
    raw = json.loads(Path(path).read_text()) if path else {}
    if path is None and command != "props":
        raise AssocPPError("--config is required for this command")
    if "command" in raw and raw["command"] != command:
        raise AssocPPError(f"config is for {raw['command']!r}, not {command!r}")
    if seed is not None:
        raw.setdefault("mc", {})
        raw["mc"] = {**raw["mc"], "master_seed": seed}
    return raw, MODELS[command].model_validate(raw)


def run(command: str, config_path: str | None, out: str, seed: int | None = None,
        threads: int = 1) -> int:
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    try:
        raw, cfg = load_config(command, config_path, seed)
    except pydantic.ValidationError as exc:
        errors = [{"field": ".".join(str(p) for p in e["loc"]), "message": e["msg"]} for e in exc.errors()]
        print(json.dumps({"error": "validation", "errors": errors}), file=sys.stderr)
        return EXIT_VALIDATION
    except (json.JSONDecodeError, OSError) as exc:
        print(json.dumps({"error": "validation", "message": str(exc)}), file=sys.stderr)
        return EXIT_VALIDATION
    except AssocPPError as exc:
        print(json.dumps({"error": "validation", "message": str(exc)}), file=sys.stderr)
        return EXIT_VALIDATION
    try:
        summary, ok = COMMANDS[command](cfg, out_dir, threads)
    except AssocPPError as exc:
        print(json.dumps(exc.to_dict(), default=str), file=sys.stderr)
        return exc.exit_code
    _write_json(out_dir / "summary.json", summary)
    canonical = cfg.model_dump(mode="json")
    manifest = {
        "command": command,
        "config": canonical,
        "config_hash": config_hash(canonical),
        "master_seed": getattr(getattr(cfg, "mc", None), "master_seed", None),
        "versions": _versions(),
        "threads": threads,
        "wall_time_s": time.perf_counter() - start,
        "artifacts": {
            p.name: _sha256(p) for p in sorted(out_dir.iterdir())
            if p.is_file() and p.name != "manifest.json"
        },
    }
    _write_json(out_dir / "manifest.json", manifest)
    return 0 if ok else EXIT_FAIL


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="assocpp", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="experiment config (JSON)")
    parser.add_argument("--seed", type=int, help="master seed, overrides the config")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        parser.error("--seed must be an unsigned 64-bit integer")
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    return run(args.command, args.config, args.out, args.seed, args.threads)


if __name__ == "__main__":
    sys.exit(main())
