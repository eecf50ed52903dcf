"""Command-line entry point.

Every JSON report has the envelope
``{format_version, command, config, status, exit_code, error, result}``.
``config`` holds every resolved option and the system itself, so
``lnecert <command> --config report.json`` re-runs it exactly.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import corpus
from .certify import (
    DEFAULT_BUDGET, EXIT_CODES, MARGIN_TOL, certify_smooth, conic_at_infinity_verdict,
    gradient_bound_constant, icis_local_verdict, link_smoothness, transversality_at_infinity,
)
from .collar import CollarError, build_collar, phi0_probe
from .formats import (
    FORMAT_VERSION, cloud_to_csv, cloud_to_json, dumps, load_points, points_to_csv,
    system_from_json, system_to_json, validate,
)
from .geomaps import MAPS, GeometryError
from .metrics import lne_scan
from .polyring import PolyError
from .sampler import Ball, Box, SamplingWarning, sample_region, sample_shell

EXIT_CONFIG = 64
EXIT_NUMERIC = 2
WORKERS_ENV = "LNECERT_WORKERS"
CHECKS = ("smooth", "link", "gradient-bound", "transversality", "conic-at-infinity", "icis")


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            w = int(env)
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
        if w < 1:
            raise ConfigError(f"{WORKERS_ENV} must be >= 1")
        return w
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def _floats(text: str) -> list[float]:
    try:
        vals = [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}")
    return vals


def resolve_system(source) -> dict:
    """``corpus:<name>``, a JSON file path, or an inline system dict -> system JSON."""
    if isinstance(source, dict):
        d = source
    elif isinstance(source, str) and source.startswith("corpus:"):
        try:
            d = system_to_json(corpus.get(source.split(":", 1)[1]))
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from None
    elif isinstance(source, str):
        try:
            d = json.loads(Path(source).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read system file: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"system file is not JSON: {exc}") from None
    else:
        raise ConfigError("a system is required (--system PATH or corpus:NAME)")
    try:
        validate(d, "system")
        system = system_from_json(d)
    except PolyError as exc:
        raise ConfigError(str(exc)) from None
    except Exception as exc:  # jsonschema.ValidationError
        raise ConfigError(f"malformed system: {getattr(exc, 'message', exc)}") from None
    return system_to_json(system)


def _region(spec: str | None):
    """``ball:R``, ``ball:R:inner``, or ``box:lo1,lo2,...:hi1,hi2,...``."""
    if spec is None:
        return None
    kind, _, rest = spec.partition(":")
    parts = rest.split(":") if rest else []
    if kind == "ball" and len(parts) in (1, 2):
        r = _floats(parts[0])[0]
        inner = _floats(parts[1])[0] if len(parts) == 2 else 0.0
        if not r > 0 or not 0 <= inner < r:
            raise ConfigError(f"bad ball region {spec!r}")
        return Ball(r, inner=inner)
    if kind == "box" and len(parts) == 2:
        lo, hi = _floats(parts[0]), _floats(parts[1])
        if len(lo) != len(hi) or any(a >= b for a, b in zip(lo, hi)):
            raise ConfigError(f"bad box region {spec!r}")
        return Box(lo, hi)
    raise ConfigError(f"region must be ball:R[:inner] or box:lo,..:hi,.., got {spec!r}")


# -- commands ------------------------------------------------------------------
# Each takes (config, system, workers) and returns (status, exit_code, result).

def _cmd_certify(cfg, system, workers):
    check = cfg["check"]
    kw = {"margin_tol": cfg["margin_tol"]}
    budget, seed = cfg["budget"], cfg["seed"]
    if check == "smooth":
        cert = certify_smooth(system, _region(cfg["region"]), budget, seed, **kw)
    elif check == "link":
        cert = link_smoothness(system, budget, seed, **kw)
    elif check == "gradient-bound":
        if system.p != 1:
            raise ConfigError("gradient-bound takes a single polynomial")
        cert = gradient_bound_constant(system.polys[0], budget, seed, **kw)
    elif check == "transversality":
        cert = transversality_at_infinity(system, budget, seed, **kw)
    elif check == "conic-at-infinity":
        cert = conic_at_infinity_verdict(system, budget, seed, probe_radius=cfg["probe_radius"], **kw)
    else:
        cert = icis_local_verdict(system, tuple(cfg["probe_radii"]), budget, seed, **kw)
    return cert.status, cert.exit_code, cert.to_dict()


def _cmd_sample(cfg, system, workers):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SamplingWarning)
        if cfg["shell"] is not None:
            cloud = sample_shell(system, cfg["shell"], cfg["count"], cfg["seed"],
                                 center=cfg["center"], workers=workers)
        else:
            region = _region(cfg["region"] or "ball:1")
            cloud = sample_region(system, region, cfg["count"], cfg["seed"],
                                  oversample=cfg["oversample"], workers=workers)
    partial = any(issubclass(w.category, SamplingWarning) for w in caught)
    status = "partial" if partial else "ok"
    return status, EXIT_NUMERIC if partial else 0, cloud


def _cmd_lne(cfg, system, workers):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SamplingWarning)
        rep = lne_scan(system, cfg["radii"], cfg["count"], cfg["seed"], center=cfg["center"],
                       apex=cfg["apex"], pair_budget=cfg["pair_budget"],
                       oversample=cfg["oversample"], workers=workers)
    if any(r["ratio_sup"] is None for r in rep["scan"]):
        return "partial", EXIT_NUMERIC, rep
    return rep["classification"]["trend"], 0, rep


def _cmd_collar(cfg, system, workers):
    center = cfg["center"] if cfg["center"] is not None else [0.0] * system.realified().n
    flow = build_collar(system, center, cfg["r0"], cfg["count"], cfg["seed"])
    radii = None if cfg["radii"] is None else [r for r in cfg["radii"] if r <= flow.chart.collar_radius]
    rep = phi0_probe(flow, radii, workers=workers)
    rep["center"] = list(center)
    return "ok", 0, rep


def _cmd_maps(cfg, system, workers):
    pts = load_points(cfg["input"])
    out = MAPS[cfg["apply"]](pts)
    return "ok", 0, {"map": cfg["apply"], "n_points": int(len(out)), "points": out}


COMMANDS = {"certify": _cmd_certify, "sample": _cmd_sample, "lne": _cmd_lne,
            "collar": _cmd_collar, "maps": _cmd_maps}
NEEDS_SYSTEM = {"certify", "sample", "lne", "collar"}


def run_config(cfg: dict, workers: int = 1) -> dict:
    """Execute one resolved config; numerical failures give a partial report."""
    command = cfg["command"]
    system = system_from_json(cfg["system"]) if command in NEEDS_SYSTEM else None
    report = {"format_version": FORMAT_VERSION, "command": command, "config": cfg, "error": None}
    try:
        status, code, result = COMMANDS[command](cfg, system, workers)
    except ConfigError:
        raise
    except (CollarError, GeometryError, np.linalg.LinAlgError, FloatingPointError,
            ArithmeticError, RuntimeError) as exc:
        status, code, result = "error", EXIT_NUMERIC, None
        report["error"] = f"{type(exc).__name__}: {exc}"
    except (PolyError, ValueError, OSError) as exc:
        raise ConfigError(str(exc)) from None
    report.update(status=status, exit_code=code, result=result)
    return report


# -- argument parsing ------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lnecert", description="Conic-point certificates and LNE probes.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, system=True):
        if system:
            sp.add_argument("--system", help="system JSON file or corpus:NAME")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--workers", type=int, default=None,
                        help=f"worker threads (default: ${WORKERS_ENV} or all cores)")
        sp.add_argument("--config", help="re-run the config embedded in a report")
        return sp

    c = common(sub.add_parser("certify", help="run a certificate check"))
    c.add_argument("--check", choices=CHECKS, default="conic-at-infinity")
    c.add_argument("--region", help="ball:R[:inner] or box:lo,..:hi,.. (smooth check)")
    c.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    c.add_argument("--margin-tol", type=float, default=MARGIN_TOL)
    c.add_argument("--probe-radius", type=float, default=8.0)
    c.add_argument("--probe-radii", default="0.5,0.25,0.125")

    s = common(sub.add_parser("sample", help="sample points on the variety"))
    s.add_argument("--count", type=int, default=200)
    s.add_argument("--shell", type=float, help="sample on the sphere of this radius")
    s.add_argument("--region", help="ball:R[:inner] or box:lo,..:hi,.. (default ball:1)")
    s.add_argument("--center", help="sphere center, comma-separated")
    s.add_argument("--oversample", type=int, default=1)
    s.add_argument("--format", choices=("json", "csv"), default="json")

    l_ = common(sub.add_parser("lne", help="inner/outer distance ratio scan"))
    l_.add_argument("--radii", default="4,8,16")
    l_.add_argument("--count", type=int, default=2000)
    l_.add_argument("--center")
    l_.add_argument("--apex", help="declared conic point added to every cloud")
    l_.add_argument("--pair-budget", type=int, default=20000)
    l_.add_argument("--oversample", type=int, default=16)
    l_.add_argument("--csv", help="also write (R, ratio) rows to this file")

    k = common(sub.add_parser("collar", help="collar flow and cone-model distortion"))
    k.add_argument("--center", help="conic point (default: origin)")
    k.add_argument("--r0", type=float, default=0.5)
    k.add_argument("--count", type=int, default=16)
    k.add_argument("--radii", help="probe radii (default: fractions of r0)")

    m = common(sub.add_parser("maps", help="apply an explicit map to a point cloud"), system=False)
    m.add_argument("--apply", choices=sorted(MAPS), required=False)
    m.add_argument("--in", dest="input")
    m.add_argument("--format", choices=("json", "csv"), default="json")

    d = sub.add_parser("demo", help="run the built-in corpus end to end")
    d.add_argument("--out-dir", default="lnecert-demo")
    d.add_argument("--count", type=int, default=2000)
    d.add_argument("--workers", type=int, default=None)
    d.add_argument("--seed", type=int, default=0)
    return p


def _opt_floats(v):
    return None if v is None else _floats(v)


def config_from_args(a) -> dict:
    cfg = {"command": a.command, "seed": a.seed}
    if a.command in NEEDS_SYSTEM:
        cfg["system_source"] = a.system
        cfg["system"] = resolve_system(a.system)
    if a.command == "certify":
        cfg.update(check=a.check, region=a.region, budget=a.budget, margin_tol=a.margin_tol,
                   probe_radius=a.probe_radius, probe_radii=_floats(a.probe_radii))
        if a.check == "smooth":
            _region(a.region)
    elif a.command == "sample":
        if a.count < 1:
            raise ConfigError("--count must be positive")
        cfg.update(count=a.count, shell=a.shell, region=a.region, center=_opt_floats(a.center),
                   oversample=a.oversample, format=a.format)
        _region(a.region)
    elif a.command == "lne":
        radii = _floats(a.radii)
        if any(r <= 0 for r in radii) or any(b <= q for q, b in zip(radii, radii[1:])):
            raise ConfigError("--radii must be positive and increasing")
        cfg.update(radii=radii, count=a.count, center=_opt_floats(a.center),
                   apex=_opt_floats(a.apex), pair_budget=a.pair_budget, oversample=a.oversample)
    elif a.command == "collar":
        if not a.r0 > 0:
            raise ConfigError("--r0 must be positive")
        cfg.update(center=_opt_floats(a.center), r0=a.r0, count=a.count,
                   radii=_opt_floats(a.radii))
    elif a.command == "maps":
        if not a.apply or not a.input:
            raise ConfigError("maps needs --apply NAME and --in FILE")
        cfg.update({"apply": a.apply, "input": a.input, "format": a.format})
    return cfg


def _config_from_report(path: str, command: str) -> dict:
    try:
        rep = json.loads(Path(path).read_text())
        cfg = rep["config"]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot read config from {path}: {exc}") from None
    if cfg.get("command") != command:
        raise ConfigError(f"config is for {cfg.get('command')!r}, not {command!r}")
    if command in NEEDS_SYSTEM:
        cfg["system"] = resolve_system(cfg.get("system"))
    return cfg


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _render(report: dict) -> str:
    """Serialize a report; sample clouds and maps may be written as CSV."""
    cfg = report["config"]
    res = report["result"]
    if report["command"] == "sample" and res is not None:
        cloud = res
        report = dict(report, result=cloud_to_json(cloud))
        validate(report, "sample")
        if cfg.get("format") == "csv":
            return cloud_to_csv(cloud)
    if report["command"] == "maps" and res is not None and cfg.get("format") == "csv":
        return points_to_csv(res["points"])
    validate(report, report["command"])
    return dumps(report)


# -- demo --------------------------------------------------------------------------

DEMO_ITEMS = [
    # name, command, config overrides, expected status
    ("parabola", "lne", {"system": "corpus:parabola", "radii": [4.0, 8.0, 16.0]}, "divergent"),
    ("circle", "certify", {"system": "corpus:circle", "check": "smooth", "region": "ball:2"}, "pass"),
    ("cone", "collar", {"system": "corpus:cone", "r0": 1.0}, "ok"),
    ("quadric-at-infinity", "certify", {"system": "corpus:quadric", "check": "conic-at-infinity"}, "pass"),
    ("icis-quadric", "certify", {"system": "corpus:icis_quadric", "check": "icis"}, "pass"),
]


def _demo_config(command: str, over: dict, seed: int, count: int) -> dict:
    base = {
        "certify": dict(check="conic-at-infinity", region=None, budget=DEFAULT_BUDGET,
                        margin_tol=MARGIN_TOL, probe_radius=8.0, probe_radii=[0.5, 0.25, 0.125]),
        "lne": dict(count=count, center=None, apex=None, pair_budget=20000, oversample=16),
        "collar": dict(center=None, r0=0.5, count=16, radii=None),
    }[command]
    cfg = {"command": command, "seed": seed, **base, **over}
    cfg["system_source"] = cfg["system"]
    cfg["system"] = resolve_system(cfg["system"])
    return cfg


def run_demo(out_dir: str, count: int = 2000, seed: int = 0, workers: int = 1) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    items = []
    for name, command, over, expected in DEMO_ITEMS:
        report = run_config(_demo_config(command, over, seed, count), workers)
        text = _render(report)
        fname = f"{name}.json"
        (out / fname).write_text(text)
        items.append({"name": name, "command": command, "expected": expected,
                      "observed": report["status"], "ok": report["status"] == expected,
                      "report_file": fname, "sha256": hashlib.sha256(text.encode()).hexdigest()})
    ok = all(i["ok"] for i in items)
    summary = {"format_version": FORMAT_VERSION, "command": "demo",
               "config": {"command": "demo", "seed": seed, "count": count},
               "status": "ok" if ok else "mismatch", "exit_code": 0 if ok else 1,
               "error": None, "result": {"items": items}}
    validate(summary, "demo")
    (out / "summary.json").write_text(dumps(summary))
    return summary


def main(argv=None) -> int:
    try:
        a = _build_parser().parse_args(argv)
        workers = a.workers if a.workers is not None else default_workers()
        if workers < 1:
            raise ConfigError("--workers must be >= 1")
        if a.command == "demo":
            summary = run_demo(a.out_dir, a.count, a.seed, workers)
            sys.stdout.write(dumps(summary))
            return summary["exit_code"]
        cfg = _config_from_report(a.config, a.command) if a.config else config_from_args(a)
        report = run_config(cfg, workers)
        _emit(_render(report), a.out)
        if a.command == "lne" and getattr(a, "csv", None) and report["result"]:
            rows = "R,ratio_sup\n" + "".join(f"{r['R']!r},{r['ratio_sup']!r}\n"
                                            for r in report["result"]["scan"])
            Path(a.csv).write_text(rows)
        if report["error"]:
            print(f"lnecert: {report['error']}", file=sys.stderr)
        return report["exit_code"]
    except ConfigError as exc:
        print(f"lnecert: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())


__all__ = ["main", "run_config", "run_demo", "resolve_system", "EXIT_CONFIG", "EXIT_NUMERIC",
           "WORKERS_ENV", "EXIT_CODES"]
