"""Exact sparse multivariate polynomials over Q and Q(i).

Coefficients are :class:`fractions.Fraction` for real polynomials and
:class:`GaussRat` (a pair of fractions) for complex ones. Terms are stored
in graded-lexicographic order so that serialisation and hashing are
deterministic. A compiled floating-point path (:class:`NumericSystem`) is
provided for the numerical kernels.
"""
from __future__ import annotations

import ast
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import total_ordering
from typing import Iterable, Mapping, Sequence

import numpy as np

REAL = "real"
COMPLEX = "complex"


class PolyError(ValueError):
    pass


@total_ordering
class _Infinity:
    """Signed infinity marker. Compares with ints, refuses arithmetic."""

    __slots__ = ("sign",)

    def __init__(self, sign: int):
        self.sign = sign

    def __eq__(self, other):
        return isinstance(other, _Infinity) and other.sign == self.sign

    def __lt__(self, other):
        if isinstance(other, _Infinity):
            return self.sign < other.sign
        return self.sign < 0

    def __hash__(self):
        return hash(("inf", self.sign))

    def __repr__(self):
        return "-inf" if self.sign < 0 else "inf"


# degree of the zero polynomial
NEG_INF = _Infinity(-1)
# multiplicity at the origin of the zero polynomial
INFINITE_MULTIPLICITY = _Infinity(1)


@dataclass(frozen=True)
class GaussRat:
    """Gaussian rational re + i*im with exact parts."""

    re: Fraction
    im: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "re", Fraction(self.re))
        object.__setattr__(self, "im", Fraction(self.im))

    def __add__(self, other):
        other = _as_gauss(other)
        return GaussRat(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __neg__(self):
        return GaussRat(-self.re, -self.im)

    def __sub__(self, other):
        return self + (-_as_gauss(other))

    def __rsub__(self, other):
        return _as_gauss(other) - self

    def __mul__(self, other):
        other = _as_gauss(other)
        return GaussRat(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, (int, Fraction, GaussRat)):
            other = _as_gauss(other)
            return self.re == other.re and self.im == other.im
        return NotImplemented

    def __hash__(self):
        if self.im == 0:
            return hash(self.re)
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        return f"({self.re}{'+' if self.im >= 0 else '-'}{abs(self.im)}i)"


def _as_gauss(c) -> GaussRat:
    if isinstance(c, GaussRat):
        return c
    if isinstance(c, complex):
        return GaussRat(Fraction(c.real), Fraction(c.imag))
    return GaussRat(Fraction(c), Fraction(0))


def _coerce(c, field: str):
    if field == REAL:
        if isinstance(c, GaussRat):
            if c.im != 0:
                raise PolyError("complex coefficient in a real polynomial")
            return c.re
        if isinstance(c, complex):
            raise PolyError("complex coefficient in a real polynomial")
        return Fraction(c)
    return _as_gauss(c)


def grlex_key(exp: tuple[int, ...]):
    return (sum(exp), exp)


class Poly:
    """Immutable sparse polynomial in ``n`` variables.

    ``Poly({(2, 0): 1, (0, 1): -1}, n=2)`` is ``x0**2 - x1``.
    """

    __slots__ = ("n", "field", "_terms", "_hash")

    def __init__(self, terms: Mapping[tuple[int, ...], object] | Iterable = (), n: int = 1,
                 field: str = REAL):
        if field not in (REAL, COMPLEX):
            raise PolyError(f"unknown field {field!r}")
        if n < 1:
            raise PolyError("ambient dimension must be >= 1")
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[tuple[int, ...], object] = {}
        for exp, c in items:
            exp = tuple(int(e) for e in exp)
            if len(exp) != n:
                raise PolyError(f"exponent {exp} has length {len(exp)}, expected {n}")
            if any(e < 0 for e in exp):
                raise PolyError(f"negative exponent in {exp}")
            c = _coerce(c, field)
            acc[exp] = acc[exp] + c if exp in acc else c
        ordered = sorted(((e, c) for e, c in acc.items() if c != 0),
                         key=lambda t: grlex_key(t[0]), reverse=True)
        self.n = n
        self.field = field
        self._terms = tuple(ordered)
        self._hash = None

    # -- constructors -------------------------------------------------
    @classmethod
    def constant(cls, c, n: int, field: str = REAL) -> "Poly":
        return cls({(0,) * n: c}, n, field)

    @classmethod
    def variable(cls, i: int, n: int, field: str = REAL) -> "Poly":
        exp = [0] * n
        exp[i] = 1
        return cls({tuple(exp): 1}, n, field)

    @classmethod
    def parse(cls, text: str, variables: Sequence[str], field: str | None = None) -> "Poly":
        """Parse an expression such as ``"y - x^2"`` over the given variable names.

        ``I`` (or a Python ``j`` literal) denotes the imaginary unit and forces
        the complex field.
        """
        tree = ast.parse(text.replace("^", "**"), mode="eval")
        names = {v: i for i, v in enumerate(variables)}
        n = len(variables)
        uses_i = "I" in {nd.id for nd in ast.walk(tree) if isinstance(nd, ast.Name)} or any(
            isinstance(nd, ast.Constant) and isinstance(nd.value, complex) for nd in ast.walk(tree))
        fld = field or (COMPLEX if uses_i else REAL)
        if uses_i and fld == REAL:
            raise PolyError("imaginary unit in a real polynomial")

        def walk(node) -> Poly:
            if isinstance(node, ast.Expression):
                return walk(node.body)
            if isinstance(node, ast.Constant):
                v = node.value
                if isinstance(v, complex):
                    return cls.constant(GaussRat(Fraction(v.real), Fraction(v.imag)), n, fld)
                if isinstance(v, (int, float)) and not isinstance(v, bool):
                    return cls.constant(Fraction(str(v)) if isinstance(v, float) else v, n, fld)
                raise PolyError(f"unsupported literal {v!r}")
            if isinstance(node, ast.Name):
                if node.id == "I":
                    return cls.constant(GaussRat(0, 1), n, fld)
                if node.id not in names:
                    raise PolyError(f"unknown variable {node.id!r}")
                return cls.variable(names[node.id], n, fld)
            if isinstance(node, ast.UnaryOp):
                if isinstance(node.op, ast.USub):
                    return -walk(node.operand)
                if isinstance(node.op, ast.UAdd):
                    return walk(node.operand)
            if isinstance(node, ast.BinOp):
                if isinstance(node.op, ast.Pow):
                    if not (isinstance(node.right, ast.Constant) and isinstance(node.right.value, int)):
                        raise PolyError("exponents must be non-negative integer literals")
                    return walk(node.left) ** node.right.value
                a, b = walk(node.left), walk(node.right)
                if isinstance(node.op, ast.Add):
                    return a + b
                if isinstance(node.op, ast.Sub):
                    return a - b
                if isinstance(node.op, ast.Mult):
                    return a * b
                if isinstance(node.op, ast.Div):
                    if b.degree() != 0:
                        raise PolyError("division only by constants")
                    inv = b.coefficient((0,) * n)
                    inv = Fraction(1) / inv if fld == REAL else _gauss_inv(inv)
                    return a * cls.constant(inv, n, fld)
            raise PolyError(f"unsupported syntax: {ast.dump(node)}")

        return walk(tree)

    # -- basic accessors ---------------------------------------------
    @property
    def terms(self) -> tuple:
        return self._terms

    def coefficient(self, exp: tuple[int, ...]):
        for e, c in self._terms:
            if e == tuple(exp):
                return c
        return _coerce(0, self.field)

    def is_zero(self) -> bool:
        return not self._terms

    def degree(self):
        if not self._terms:
            return NEG_INF
        return max(sum(e) for e, _ in self._terms)

    def is_homogeneous(self) -> bool:
        return len({sum(e) for e, _ in self._terms}) <= 1

    def _like(self, terms) -> "Poly":
        return Poly(terms, self.n, self.field)

    def _check(self, other: "Poly"):
        if other.n != self.n:
            raise PolyError(f"ambient dimension mismatch: {self.n} vs {other.n}")

    def _promote(self, other):
        if not isinstance(other, Poly):
            fld = COMPLEX if isinstance(other, (GaussRat, complex)) else self.field
            other = Poly.constant(other, self.n, fld)
        self._check(other)
        fld = COMPLEX if COMPLEX in (self.field, other.field) else REAL
        a = self if self.field == fld else self.as_complex()
        b = other if other.field == fld else other.as_complex()
        return a, b, fld

    def as_complex(self) -> "Poly":
        if self.field == COMPLEX:
            return self
        return Poly(((e, GaussRat(c)) for e, c in self._terms), self.n, COMPLEX)

    # -- arithmetic ---------------------------------------------------
    def __add__(self, other):
        a, b, fld = self._promote(other)
        return Poly(list(a._terms) + list(b._terms), self.n, fld)

    __radd__ = __add__

    def __neg__(self):
        return self._like((e, -c) for e, c in self._terms)

    def __sub__(self, other):
        a, b, fld = self._promote(other)
        return Poly(list(a._terms) + [(e, -c) for e, c in b._terms], self.n, fld)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        a, b, fld = self._promote(other)
        acc: dict = {}
        for e1, c1 in a._terms:
            for e2, c2 in b._terms:
                e = tuple(i + j for i, j in zip(e1, e2))
                acc[e] = acc[e] + c1 * c2 if e in acc else c1 * c2
        return Poly(acc, self.n, fld)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise PolyError("power must be a non-negative integer")
        out = Poly.constant(1, self.n, self.field)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __eq__(self, other):
        if isinstance(other, Poly):
            if self.n != other.n:
                return False
            a, b, _ = self._promote(other)
            return a._terms == b._terms
        if isinstance(other, (int, Fraction, GaussRat)):
            return self == Poly.constant(other, self.n, self.field)
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.n, self._terms))
        return self._hash

    def __repr__(self):
        return f"Poly({self.to_str()!r}, n={self.n}, field={self.field!r})"

    def to_str(self, variables: Sequence[str] | None = None) -> str:
        if not self._terms:
            return "0"
        names = variables or [f"x{i}" for i in range(self.n)]
        parts = []
        for e, c in self._terms:
            mono = "*".join(f"{names[i]}^{k}" if k > 1 else names[i]
                            for i, k in enumerate(e) if k)
            cs = f"({c.re}+{c.im}*I)" if isinstance(c, GaussRat) else f"({c})"
            parts.append(f"{cs}*{mono}" if mono else cs)
        return " + ".join(parts)

    # -- graded structure ----------------------------------------------
    def homogeneous_component(self, k: int) -> "Poly":
        return self._like((e, c) for e, c in self._terms if sum(e) == k)

    def evaluate(self, point: Sequence):
        """Exact evaluation at a point with rational (or Gaussian rational) entries."""
        if len(point) != self.n:
            raise PolyError("point has wrong dimension")
        total = _coerce(0, self.field)
        for e, c in self._terms:
            term = c
            for xi, k in zip(point, e):
                if k:
                    term = term * (xi ** k if not isinstance(xi, GaussRat) else _gpow(xi, k))
            total = total + term
        return total

    def substitute_last(self, value) -> "Poly":
        """Set the last variable to ``value``; returns a polynomial in n-1 variables."""
        if self.n < 2:
            raise PolyError("need at least two variables")
        acc: dict = {}
        for e, c in self._terms:
            v = c * (value ** e[-1] if not isinstance(value, GaussRat) else _gpow(value, e[-1]))
            acc[e[:-1]] = acc[e[:-1]] + v if e[:-1] in acc else v
        return Poly(acc, self.n - 1, self.field)

    def derivative(self, i: int) -> "Poly":
        acc = {}
        for e, c in self._terms:
            if e[i]:
                ne = list(e)
                ne[i] -= 1
                acc[tuple(ne)] = c * e[i]
        return self._like(acc)

    def compose_linear(self, matrix: Sequence[Sequence]) -> "Poly":
        """Return ``f(M y)`` for an exact n x n matrix ``M``."""
        n = self.n
        lin = [Poly({tuple(1 if k == j else 0 for k in range(n)): matrix[i][j] for j in range(n)}, n,
                    self.field) for i in range(n)]
        out = Poly((), n, self.field)
        cache: dict = {}
        for e, c in self._terms:
            term = Poly.constant(c, n, self.field)
            for i, k in enumerate(e):
                if k:
                    if (i, k) not in cache:
                        cache[(i, k)] = lin[i] ** k
                    term = term * cache[(i, k)]
            out = out + term
        return out

    def to_numeric(self) -> "NumericPoly":
        return NumericPoly(self)


def _gpow(z: GaussRat, k: int) -> GaussRat:
    out = GaussRat(1)
    for _ in range(k):
        out = out * z
    return out


def _gauss_inv(z) -> GaussRat:
    z = _as_gauss(z)
    d = z.re * z.re + z.im * z.im
    if d == 0:
        raise PolyError("division by zero")
    return GaussRat(z.re / d, -z.im / d)


# -- graded operations --------------------------------------------------

def homogeneous_decompose(f: Poly) -> list[Poly]:
    """Components ``[f_0, ..., f_d]``; component k is homogeneous of degree k.

    The zero polynomial gives an empty list.
    """
    if f.is_zero():
        return []
    return [f.homogeneous_component(k) for k in range(f.degree() + 1)]


def initial_form(f: Poly) -> Poly:
    """Top-degree homogeneous component."""
    if f.is_zero():
        raise PolyError("no initial form: zero polynomial")
    return f.homogeneous_component(f.degree())


def initial_form_at_origin(f: Poly):
    """Return ``(multiplicity, lowest-degree component)`` at the origin.

    For the zero polynomial the multiplicity is :data:`INFINITE_MULTIPLICITY`
    and the form is zero.
    """
    if f.is_zero():
        return INFINITE_MULTIPLICITY, f
    m = min(sum(e) for e, _ in f.terms)
    return m, f.homogeneous_component(m)


def homogenize(f: Poly) -> Poly:
    """``sum_k z^k f_{d-k}`` in n+1 variables, the new variable last."""
    if f.is_zero():
        raise PolyError("cannot homogenize the zero polynomial")
    d = f.degree()
    return Poly(((e + (d - sum(e),), c) for e, c in f.terms), f.n + 1, f.field)


def dehomogenize(F: Poly) -> Poly:
    """Set the last variable to 1."""
    return F.substitute_last(1)


def gradient(f: Poly) -> list[Poly]:
    return [f.derivative(i) for i in range(f.n)]


def euler_residual(f: Poly, x: Sequence):
    """``Df(x).x - d f(x)`` for homogeneous f.

    Exact when ``x`` has rational entries, floating otherwise.
    """
    if not f.is_homogeneous():
        raise PolyError("Euler identity needs a homogeneous polynomial")
    if f.is_zero():
        return 0
    d = f.degree()
    if all(isinstance(v, (int, Fraction, GaussRat)) for v in x):
        grads = gradient(f)
        return sum((g.evaluate(x) * xi for g, xi in zip(grads, x)), _coerce(0, f.field)) - d * f.evaluate(x)
    num = f.to_numeric()
    xa = np.asarray(x, dtype=complex if f.field == COMPLEX else float)
    return complex(num.grad(xa) @ xa - d * num(xa)) if f.field == COMPLEX else float(
        num.grad(xa) @ xa - d * num(xa))


def dim_homogeneous(d: int, n: int) -> int:
    """Dimension of the space of degree-d forms in n variables."""
    if d < 0 or n < 1:
        raise PolyError("need d >= 0 and n >= 1")
    return math.comb(d + n - 1, n - 1)


def realify(f: Poly) -> "PolySystem":
    """Split a complex polynomial into (Re f, Im f) in 2n real variables.

    Variable ``z_j`` becomes ``x_j + i y_j`` with real coordinates ordered
    ``(x_1, y_1, ..., x_n, y_n)``.
    """
    if f.field != COMPLEX:
        raise PolyError("already real")
    n = f.n
    m = 2 * n
    subs = []
    for j in range(n):
        ex = [0] * m
        ey = [0] * m
        ex[2 * j] = 1
        ey[2 * j + 1] = 1
        subs.append(Poly({tuple(ex): 1, tuple(ey): GaussRat(0, 1)}, m, COMPLEX))
    out = Poly((), m, COMPLEX)
    cache: dict = {}
    for e, c in f.terms:
        term = Poly.constant(c, m, COMPLEX)
        for j, k in enumerate(e):
            if k:
                if (j, k) not in cache:
                    cache[(j, k)] = subs[j] ** k
                term = term * cache[(j, k)]
        out = out + term
    re = Poly(((e, c.re) for e, c in out.terms), m, REAL)
    im = Poly(((e, c.im) for e, c in out.terms), m, REAL)
    return PolySystem([re, im], sort=False)


# -- systems --------------------------------------------------------------

class PolySystem:
    """A tuple of polynomials with its degree tuple.

    By default the polynomials are reordered so that degrees are
    non-increasing; pass ``sort=False`` to keep the given order (realified
    systems keep (Re, Im) pairing). Zero polynomials are rejected.
    """

    def __init__(self, polys: Sequence[Poly], sort: bool = True):
        polys = list(polys)
        if not polys:
            raise PolyError("empty system")
        n = polys[0].n
        fields = {p.field for p in polys}
        for p in polys:
            if p.n != n:
                raise PolyError("polynomials live in different ambient dimensions")
            if p.is_zero():
                raise PolyError("zero polynomial in system")
        if len(fields) > 1:
            polys = [p.as_complex() for p in polys]
        if sort:
            polys = sorted(polys, key=lambda p: p.degree(), reverse=True)
        self.polys = tuple(polys)
        self.n = n
        self.field = polys[0].field

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(p.degree() for p in self.polys)

    @property
    def p(self) -> int:
        return len(self.polys)

    def __len__(self):
        return len(self.polys)

    def __iter__(self):
        return iter(self.polys)

    def __getitem__(self, i):
        return self.polys[i]

    def __eq__(self, other):
        return isinstance(other, PolySystem) and self.polys == other.polys

    def __hash__(self):
        return hash(self.polys)

    def __repr__(self):
        return f"PolySystem({[p.to_str() for p in self.polys]}, n={self.n})"

    def is_homogeneous(self) -> bool:
        return all(p.is_homogeneous() for p in self.polys)

    def realified(self) -> "PolySystem":
        """Real system: itself if real, else (Re f_1, Im f_1, ...)."""
        if self.field == REAL:
            return self
        out = []
        for p in self.polys:
            out.extend(realify(p).polys)
        # realification may leave an identically zero imaginary part
        out = [q for q in out if not q.is_zero()]
        return PolySystem(out, sort=False)

    def initial_forms(self) -> "PolySystem":
        return PolySystem([initial_form(p) for p in self.polys], sort=False)

    def initial_forms_at_origin(self) -> "PolySystem":
        forms = []
        for p in self.polys:
            _, g = initial_form_at_origin(p)
            forms.append(g)
        return PolySystem(forms, sort=False)

    def homogenized(self) -> "PolySystem":
        return PolySystem([homogenize(p) for p in self.polys], sort=False)

    def with_sphere(self, radius: float = 1.0, center=None) -> "PolySystem":
        """Append ``|x - center|^2 - radius^2`` (exact when inputs are rational)."""
        n = self.n
        r2 = Fraction(radius) ** 2
        c = [Fraction(0)] * n if center is None else [Fraction(v) for v in center]
        sph = Poly.constant(-r2, n, self.field)
        for i in range(n):
            sph = sph + (Poly.variable(i, n, self.field) - c[i]) ** 2
        return PolySystem(list(self.polys) + [sph], sort=False)

    def numeric(self) -> "NumericSystem":
        return NumericSystem(self)


# -- floating-point evaluation ------------------------------------------

class NumericPoly:
    """Vectorised floating evaluation of a :class:`Poly` and its gradient."""

    def __init__(self, f: Poly):
        self.n = f.n
        self.complex = f.field == COMPLEX
        dtype = complex if self.complex else float
        if f.terms:
            self.exps = np.array([e for e, _ in f.terms], dtype=np.int64)
            self.coefs = np.array([complex(c) if self.complex else float(c) for _, c in f.terms],
                                  dtype=dtype)
        else:
            self.exps = np.zeros((0, f.n), dtype=np.int64)
            self.coefs = np.zeros(0, dtype=dtype)
        self._grad = None
        self._poly = f

    def monomials(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X)
        return np.prod(X[..., None, :] ** self.exps, axis=-1)

    def __call__(self, X):
        return self.monomials(X) @ self.coefs

    def grad(self, X):
        if self._grad is None:
            self._grad = [NumericPoly(g) for g in gradient(self._poly)]
        return np.stack([g(X) for g in self._grad], axis=-1)


class NumericSystem:
    """Floating evaluation of a real system: values, Jacobian, Hessian tensor."""

    def __init__(self, system: PolySystem):
        if system.field != REAL:
            raise PolyError("numeric kernels need a real system; realify first")
        self.system = system
        self.n = system.n
        self.p = system.p
        # stack all monomials of f and its first/second derivatives
        self._f = [NumericPoly(f) for f in system.polys]
        self._df = [[NumericPoly(f.derivative(i)) for i in range(self.n)] for f in system.polys]
        self._d2 = None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.stack([f(x) for f in self._f], axis=-1)

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        return np.stack([np.stack([d(x) for d in row], axis=-1) for row in self._df], axis=-2)

    def hessians(self, x: np.ndarray) -> np.ndarray:
        """Array of shape (..., p, n, n)."""
        if self._d2 is None:
            self._d2 = [[[NumericPoly(f.derivative(i).derivative(j)) for j in range(self.n)]
                         for i in range(self.n)] for f in self.system.polys]
        return np.stack([np.stack([np.stack([h(x) for h in row], axis=-1) for row in mat], axis=-2)
                         for mat in self._d2], axis=-3)

    def residual(self, x: np.ndarray) -> np.ndarray:
        """max_i |f_i(x)| along the last axis."""
        return np.max(np.abs(self(x)), axis=-1)
