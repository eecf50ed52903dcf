"""JSON / CSV serialisation for polynomials, systems, clouds and reports."""
from __future__ import annotations

import csv
import hashlib
import io
import json
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .polyring import COMPLEX, REAL, GaussRat, Poly, PolyError, PolySystem

FORMAT_VERSION = 1


def _frac_str(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


def _parse_frac(s) -> Fraction:
    if isinstance(s, (int,)):
        return Fraction(s)
    if isinstance(s, str):
        return Fraction(s.strip())
    raise PolyError(f"rational must be a 'p/q' string, got {s!r}")


def poly_to_json(f: Poly) -> dict:
    terms = []
    for e, c in f.terms:
        if isinstance(c, GaussRat):
            terms.append({"exp": list(e), "re": _frac_str(c.re), "im": _frac_str(c.im)})
        else:
            terms.append({"exp": list(e), "re": _frac_str(c), "im": "0/1"})
    return {"n": f.n, "field": f.field, "terms": terms}


def poly_from_json(d: dict) -> Poly:
    try:
        n = int(d["n"])
        field = d.get("field", REAL)
        terms = []
        for t in d["terms"]:
            re = _parse_frac(t.get("re", "0"))
            im = _parse_frac(t.get("im", "0"))
            if field == REAL:
                if im != 0:
                    raise PolyError("nonzero imaginary part in a real polynomial")
                terms.append((tuple(t["exp"]), re))
            else:
                terms.append((tuple(t["exp"]), GaussRat(re, im)))
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        raise PolyError(f"malformed polynomial JSON: {exc}") from exc
    return Poly(terms, n, field)


def system_to_json(s: PolySystem) -> dict:
    return {"format_version": FORMAT_VERSION, "polys": [poly_to_json(p) for p in s.polys],
            "degrees": list(s.degrees)}


def system_from_json(d: dict) -> PolySystem:
    if "polys" not in d:
        if "terms" in d:
            return PolySystem([poly_from_json(d)])
        raise PolyError("system JSON needs a 'polys' list")
    polys = [poly_from_json(p) for p in d["polys"]]
    system = PolySystem(polys, sort=False)
    if "degrees" in d and list(d["degrees"]) != list(system.degrees):
        raise PolyError(f"declared degrees {d['degrees']} do not match {list(system.degrees)}")
    return system


def system_hash(s: PolySystem) -> str:
    blob = json.dumps(system_to_json(s), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def load_system(path: str | Path) -> PolySystem:
    return system_from_json(json.loads(Path(path).read_text()))


# -- clouds ----------------------------------------------------------------

def cloud_to_json(cloud) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "header": dict(cloud.header),
        "points": cloud.points.tolist(),
        "residuals": cloud.residuals.tolist(),
        "shell": cloud.shell,
        "seed": cloud.seed,
    }


def cloud_from_json(d: dict):
    from .sampler import PointCloud

    pts = np.asarray(d["points"], dtype=float)
    res = np.asarray(d.get("residuals", np.zeros(len(pts))), dtype=float)
    return PointCloud(pts.reshape(len(pts), -1), res, d.get("shell"), d.get("seed"),
                      d.get("header", {}))


def cloud_to_csv(cloud) -> str:
    buf = io.StringIO()
    for k, v in sorted(cloud.header.items()):
        buf.write(f"# {k}={json.dumps(v)}\n")
    w = csv.writer(buf, lineterminator="\n")
    for p in cloud.points:
        w.writerow([repr(float(v)) for v in p])
    return buf.getvalue()


def read_points_csv(text: str) -> np.ndarray:
    rows = [r for r in csv.reader(line for line in text.splitlines()
                                  if line.strip() and not line.startswith("#"))]
    return np.asarray([[float(v) for v in r] for r in rows], dtype=float)


def load_points(path: str | Path) -> np.ndarray:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        d = json.loads(text)
        return np.asarray(d["points"] if isinstance(d, dict) else d, dtype=float)
    return read_points_csv(text)


def points_to_csv(points: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for p in np.atleast_2d(points):
        w.writerow([repr(float(v)) for v in p])
    return buf.getvalue()


# -- reports ------------------------------------------------------------------

def to_jsonable(obj: Any):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Fraction):
        return _frac_str(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return None if np.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def load_schema(name: str) -> dict:
    text = resources.files("lnecert").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def validate(report: dict, name: str) -> None:
    import jsonschema

    jsonschema.validate(json.loads(json.dumps(to_jsonable(report))), load_schema(name))


__all__ = [
    "FORMAT_VERSION", "poly_to_json", "poly_from_json", "system_to_json", "system_from_json",
    "system_hash", "load_system", "cloud_to_json", "cloud_from_json", "cloud_to_csv",
    "read_points_csv", "load_points", "points_to_csv", "dumps", "to_jsonable", "load_schema",
    "validate", "COMPLEX",
]
