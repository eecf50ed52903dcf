"""Named example systems used by the demo, the tests and ``corpus:<name>`` on the CLI."""
from __future__ import annotations

from .polyring import COMPLEX, Poly, PolySystem

_XY = ["x", "y"]
_XYZ = ["x", "y", "z"]

# name -> (polynomials, variables, field, short description)
_TABLE = {
    "parabola": (["y - x^2"], _XY, None, "plane parabola y = x^2 (not LNE at infinity)"),
    "circle": (["x^2 + y^2 - 1"], _XY, None, "unit circle"),
    "cone": (["x^2 + y^2 - z^2"], _XYZ, None, "two-nappe right circular cone"),
    "quadric": (["x^2 + y^2 - z^2 - 1"], _XYZ, None, "one-sheet hyperboloid, conic at infinity"),
    "paraboloid": (["z - x^2 - y^2"], _XYZ, None, "paraboloid, not transverse at infinity"),
    "sphere": (["x^2 + y^2 + z^2 - 1"], _XYZ, None, "unit sphere, empty at infinity"),
    "umbrella": (["x^2 - z*y^2"], _XYZ, None, "Whitney umbrella, singular along the z-axis"),
    "perturbed_cone": (["x^2 + y^2 - z^2 + z^4"], _XYZ, None, "cone with a quartic perturbation"),
    "complex_parabola": (["y - x^2"], _XY, COMPLEX, "complex parabola in C^2"),
    "icis_quadric": (["x^2 + y^2 + z^2"], _XYZ, COMPLEX, "complex quadric cone germ in C^3"),
    "cusp": (["y^2 - x^3"], _XY, COMPLEX, "complex cusp germ"),
}


def names() -> list[str]:
    return sorted(_TABLE)


def describe(name: str) -> str:
    return _TABLE[name][3]


def get(name: str) -> PolySystem:
    try:
        polys, variables, field, _ = _TABLE[name]
    except KeyError:
        raise KeyError(f"unknown corpus system {name!r}; known: {', '.join(names())}") from None
    return PolySystem([Poly.parse(p, variables, field) for p in polys], sort=False)
