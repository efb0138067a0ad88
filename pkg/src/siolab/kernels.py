"""Odd singular kernels, vector fields for generalized double layers, and
homogeneous polynomial utilities (parsing, Laplacian, harmonic decomposition)."""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Mapping

import numpy as np

from .clifford import embed_arrays, gproduct_arrays, sign_matrix
from .quadrature import ToleranceError, gauss_legendre


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere in R^n."""
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


# polynomials

_VARS = {"x": 0, "y": 1, "z": 2}
_TOKEN = re.compile(r"\s*(?:(\d+(?:\.\d*)?(?:[eE][-+]?\d+)?|\.\d+)|(x\d+|[xyz])|(\^|\*\*)|([-+*/()]))")


class PolynomialError(ValueError):
    pass


def _monomials(n: int, degree: int) -> list[tuple[int, ...]]:
    return [e for e in itertools.product(range(degree + 1), repeat=n) if sum(e) == degree][::-1]


@dataclass(frozen=True)
class Polynomial:
    """Real polynomial in n variables as an exponent-tuple -> coefficient map."""

    n: int
    terms: Mapping[tuple[int, ...], float] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for e, c in self.terms.items():
            e = tuple(int(k) for k in e)
            if len(e) != self.n or min(e, default=0) < 0:
                raise PolynomialError(f"bad exponent {e} for n={self.n}")
            if c != 0:
                clean[e] = clean.get(e, 0.0) + float(c)
        object.__setattr__(self, "terms", {e: c for e, c in sorted(clean.items()) if c != 0})

    @classmethod
    def parse(cls, text: str, n: int) -> "Polynomial":
        """Parse sums of monomials such as ``"x^3 - 3*x*y^2"`` or ``"1/2*x1*x2"``.

        Variables are x, y, z or x1..xn; coefficients may be rationals.
        """
        return _Parser(text, n).parse()

    @classmethod
    def variable(cls, j: int, n: int) -> "Polynomial":
        e = [0] * n
        e[j] = 1
        return cls(n, {tuple(e): 1.0})

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def is_homogeneous(self) -> bool:
        return len({sum(e) for e in self.terms}) <= 1

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        for e, c in self.terms.items():
            term = np.full(x.shape[:-1], c)
            for j, k in enumerate(e):
                if k:
                    term = term * x[..., j] ** k
            out = out + term
        return out

    def derivative(self, j: int) -> "Polynomial":
        terms = {}
        for e, c in self.terms.items():
            if e[j]:
                d = list(e)
                d[j] -= 1
                terms[tuple(d)] = terms.get(tuple(d), 0.0) + c * e[j]
        return Polynomial(self.n, terms)

    def gradient(self, x) -> np.ndarray:
        return np.stack([self.derivative(j)(x) for j in range(self.n)], axis=-1)

    def laplacian(self) -> "Polynomial":
        out = Polynomial(self.n)
        for j in range(self.n):
            out = out + self.derivative(j).derivative(j)
        return out

    def __add__(self, other: "Polynomial") -> "Polynomial":
        terms = dict(self.terms)
        for e, c in other.terms.items():
            terms[e] = terms.get(e, 0.0) + c
        return Polynomial(self.n, terms)

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.n, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __mul__(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            terms: dict = {}
            for (e1, c1), (e2, c2) in itertools.product(self.terms.items(), other.terms.items()):
                e = tuple(a + b for a, b in zip(e1, e2))
                terms[e] = terms.get(e, 0.0) + c1 * c2
            return Polynomial(self.n, terms)
        return Polynomial(self.n, {e: c * float(other) for e, c in self.terms.items()})

    __rmul__ = __mul__

    def times_norm_squared(self, power: int = 1) -> "Polynomial":
        r2 = Polynomial(self.n, {tuple(2 * (i == j) for i in range(self.n)): 1.0 for j in range(self.n)})
        out = self
        for _ in range(power):
            out = out * r2
        return out

    def coefficient_vector(self, degree: int) -> np.ndarray:
        return np.array([self.terms.get(e, 0.0) for e in _monomials(self.n, degree)])

    @classmethod
    def from_vector(cls, n: int, degree: int, vec) -> "Polynomial":
        return cls(n, dict(zip(_monomials(n, degree), map(float, vec))))

    def max_abs_coefficient(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def __str__(self) -> str:
        names = ["x", "y", "z"] if self.n <= 3 else [f"x{j + 1}" for j in range(self.n)]
        parts = []
        for e, c in self.terms.items():
            mono = "*".join(f"{names[j]}^{k}" if k > 1 else names[j] for j, k in enumerate(e) if k)
            coef = repr(c) if mono == "" else ("" if c == 1 else "-" if c == -1 else f"{c!r}*")
            parts.append(coef + mono)
        return " + ".join(parts).replace("+ -", "- ") or "0"


class _Parser:
    def __init__(self, text: str, n: int):
        self.n = n
        self.tokens = []
        pos = 0
        text = text.strip()
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                raise PolynomialError(f"unexpected character at {pos} in {text!r}")
            num, var, pw, op = m.groups()
            if num is not None:
                self.tokens.append(("num", Fraction(num)))
            elif var is not None:
                self.tokens.append(("var", var))
            elif pw is not None:
                self.tokens.append(("op", "^"))
            else:
                self.tokens.append(("op", op))
            pos = m.end()
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None)

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def parse(self) -> Polynomial:
        if not self.tokens:
            raise PolynomialError("empty polynomial")
        terms: dict = {}
        sign = 1
        first = True
        while self.i < len(self.tokens):
            kind, val = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                sign = -1 if val == "-" else 1
            elif not first:
                raise PolynomialError(f"expected + or - near token {self.i}")
            coef, expo = self.term()
            terms[expo] = terms.get(expo, Fraction(0)) + sign * coef
            sign = 1
            first = False
        return Polynomial(self.n, {e: float(c) for e, c in terms.items()})

    def term(self):
        coef = Fraction(1)
        expo = [0] * self.n
        seen = False
        while True:
            kind, val = self.peek()
            if kind == "num":
                self.take()
                value = val
                if self.peek() == ("op", "/"):
                    self.take()
                    k2, v2 = self.take()
                    if k2 != "num" or v2 == 0:
                        raise PolynomialError("division needs a nonzero number")
                    value = value / v2
                coef *= value ** self.power()
            elif kind == "var":
                self.take()
                j = _VARS.get(val) if val in _VARS else int(val[1:]) - 1
                if not 0 <= j < self.n:
                    raise PolynomialError(f"variable {val} out of range for n={self.n}")
                expo[j] += self.power()
            else:
                break
            seen = True
            if self.peek() == ("op", "*"):
                self.take()
                continue
            kind, _ = self.peek()
            if kind not in ("num", "var"):
                break
        if not seen:
            raise PolynomialError("empty term")
        return coef, tuple(expo)

    def power(self) -> int:
        if self.peek() == ("op", "^"):
            self.take()
            kind, val = self.take()
            if kind != "num" or val.denominator != 1 or val < 0:
                raise PolynomialError("exponents must be nonnegative integers")
            return int(val)
        return 1


@lru_cache(maxsize=None)
def _laplace_of_r2_times(n: int, degree: int) -> np.ndarray:
    """Matrix of Q -> Laplacian(|x|^2 Q) on homogeneous polynomials of the given degree."""
    basis = _monomials(n, degree)
    cols = []
    for e in basis:
        q = Polynomial(n, {e: 1.0})
        cols.append(q.times_norm_squared().laplacian().coefficient_vector(degree))
    mat = np.array(cols).T
    mat.setflags(write=False)
    return mat


def harmonic_decompose(P: Polynomial, rtol: float = 1e-12) -> list[Polynomial]:
    """Harmonic homogeneous P_j with P = sum_j |x|^(2j) P_j."""
    if not P.is_homogeneous():
        raise PolynomialError("harmonic decomposition needs a homogeneous polynomial")
    parts = []
    R = P
    deg = P.degree
    while True:
        if deg < 2:
            parts.append(R)
            return parts
        rhs = R.laplacian().coefficient_vector(deg - 2)
        mat = _laplace_of_r2_times(P.n, deg - 2)
        q, *_ = np.linalg.lstsq(mat, rhs, rcond=None)
        resid = float(np.linalg.norm(mat @ q - rhs))
        if resid > rtol * max(1.0, float(np.linalg.norm(rhs))):
            raise ArithmeticError(f"harmonic projection solve residual {resid:.3e}")
        Q = Polynomial.from_vector(P.n, deg - 2, q)
        parts.append(R - Q.times_norm_squared())
        R = Q
        deg -= 2


# sphere quadrature


def sphere_rule(n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on S^(n-1): trapezoid (n=2) or Gauss-Legendre x trapezoid (n=3)."""
    if n == 2:
        t = 2 * math.pi * np.arange(m) / m
        return np.stack([np.cos(t), np.sin(t)], -1), np.full(m, 2 * math.pi / m)
    if n == 3:
        x, w = gauss_legendre(m)
        phi = 2 * math.pi * np.arange(2 * m) / (2 * m)
        ct = np.repeat(x, 2 * m)
        st = np.sqrt(1 - ct * ct)
        ph = np.tile(phi, m)
        pts = np.stack([st * np.cos(ph), st * np.sin(ph), ct], -1)
        return pts, np.repeat(w, 2 * m) * (math.pi / m)
    raise ValueError("sphere quadrature implemented for n in {2, 3}")


def sphere_lp_norm(P: Polynomial, p: float = 2.0, m: int = 64) -> float:
    pts, w = sphere_rule(P.n, m)
    return float(np.sum(w * np.abs(P(pts)) ** p) ** (1 / p))


# kernels


@dataclass(frozen=True)
class PolyKernel:
    """K(x) = P(x) / |x|^(n-1+ell) with P odd and homogeneous of degree ell."""

    P: Polynomial

    def __post_init__(self):
        if not self.P.is_homogeneous() or self.P.degree % 2 == 0 or not self.P.terms:
            raise PolynomialError("kernel polynomial must be nonzero, homogeneous and of odd degree")
        if any(sum(e) % 2 == 0 for e in self.P.terms):
            raise PolynomialError("kernel polynomial must be odd")

    @classmethod
    def riesz(cls, j: int, n: int) -> "PolyKernel":
        """x_j / (varpi_{n-1} |x|^n), j 1-based."""
        if not 1 <= j <= n:
            raise ValueError("riesz index out of range")
        return cls(Polynomial.variable(j - 1, n) * (1 / sphere_area(n)))

    @property
    def n(self) -> int:
        return self.P.n

    @property
    def ell(self) -> int:
        return self.P.degree

    @property
    def power(self) -> int:
        return self.n - 1 + self.ell

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        r2 = np.sum(z * z, axis=-1)
        return self.P(z) / r2 ** (self.power / 2)

    def gradient(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        r2 = np.sum(z * z, axis=-1)[..., None]
        p = self.power
        return self.P.gradient(z) / r2 ** (p / 2) - p * self.P(z)[..., None] * z / r2 ** (p / 2 + 1)


def kernel_bound(kernel: PolyKernel, m: int = 128) -> tuple[float, float]:
    """(sup |K| + sup |grad K| on the unit sphere, ||P||_{L^1(sphere)})."""
    pts, _ = sphere_rule(kernel.n, m)
    sup = float(np.max(np.abs(kernel(pts))) + np.max(np.linalg.norm(kernel.gradient(pts), axis=-1)))
    return sup, sphere_lp_norm(kernel.P, 1.0, m)


@dataclass(frozen=True, eq=False)
class DoubleLayerField:
    """Odd vector field k = (k_1..k_n), homogeneous of degree 1-n.

    ``values(z)`` returns shape (..., n) for real or complex fields and
    (..., n, 2**n) for Clifford-valued ones; ``jacobian(z)`` adds a trailing
    derivative axis after the component axis.
    """

    name: str
    n: int
    value_kind: str
    values: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    divergence_free: bool = True

    def pair(self, nu: np.ndarray, z: np.ndarray) -> np.ndarray:
        """<nu, k(z)> = sum_j nu_j k_j(z), broadcast over leading axes."""
        k = self.values(z)
        if self.value_kind == "clifford":
            return np.einsum("...j,...jb->...b", nu, k)
        return np.einsum("...j,...j->...", nu, k)

    def scaled(self, c: float) -> "DoubleLayerField":
        return DoubleLayerField(
            f"{c}*{self.name}", self.n, self.value_kind, lambda z: c * self.values(z), lambda z: c * self.jacobian(z), self.divergence_free
        )


def _radial_parts(z: np.ndarray):
    z = np.asarray(z, dtype=float)
    n = z.shape[-1]
    r2 = np.sum(z * z, axis=-1)[..., None]
    v = z / r2 ** (n / 2)
    eye = np.eye(n)
    jac = eye / r2[..., None] ** (n / 2) - n * z[..., :, None] * z[..., None, :] / r2[..., None] ** (n / 2 + 1)
    return v, jac


def harmonic_double_layer(n: int) -> DoubleLayerField:
    """k(x) = x / (varpi_{n-1} |x|^n), the classical double layer (theta = 1)."""
    c = 1 / sphere_area(n)
    return DoubleLayerField(
        "harmonic",
        n,
        "real",
        lambda z: c * _radial_parts(z)[0],
        lambda z: c * _radial_parts(z)[1],
    )


def riesz_field(n: int) -> list[PolyKernel]:
    """The n Riesz kernels x_j / (varpi_{n-1} |x|^n)."""
    if n < 2:
        raise ValueError("riesz kernels need n >= 2")
    return [PolyKernel.riesz(j, n) for j in range(1, n + 1)]


def _clifford_right_unit(n: int) -> np.ndarray:
    """M[j] maps a vector x (embedded) to the coefficients of x * e_j: (n, n, 2^n)."""
    size = 1 << n
    S = sign_matrix(n)
    M = np.zeros((n, n, size))
    for j in range(n):
        for i in range(n):
            a, b = 1 << i, 1 << j
            M[j, i, a ^ b] = S[a, b]
    return M


def cauchy_clifford_field(n: int) -> DoubleLayerField:
    """k_j(x) = (x / (varpi_{n-1}|x|^n)) * e_j, Clifford valued (theta = -1)."""
    if n < 2:
        raise ValueError("Cauchy-Clifford field needs n >= 2")
    c = 1 / sphere_area(n)
    M = _clifford_right_unit(n)

    def values(z):
        v, _ = _radial_parts(z)
        return c * np.einsum("...i,jib->...jb", v, M)

    def jacobian(z):
        _, jac = _radial_parts(z)
        return c * np.einsum("...im,jib->...jmb", jac, M)

    return DoubleLayerField("cauchy_clifford", n, "clifford", values, jacobian)


def planar_cauchy_field() -> DoubleLayerField:
    """k(z) = -(1/2pi) (1/z, i/z) with z = x + iy (theta = -1)."""

    def values(z):
        w = np.asarray(z, dtype=float)
        zc = w[..., 0] + 1j * w[..., 1]
        return (-1 / (2 * math.pi)) * np.stack([1 / zc, 1j / zc], -1)

    def jacobian(z):
        w = np.asarray(z, dtype=float)
        zc = w[..., 0] + 1j * w[..., 1]
        d = -1 / zc**2
        row1 = np.stack([d, 1j * d], -1)
        return (-1 / (2 * math.pi)) * np.stack([row1, 1j * row1], -2)

    return DoubleLayerField("planar_cauchy", 2, "complex", values, jacobian)


def angular_double_layer(h: Polynomial) -> DoubleLayerField:
    """k(x) = x h(x) / |x|^n with h = Q/|x|^deg(Q), Q even and homogeneous.

    Any such field is odd, of degree 1-n and divergence free, since
    x . grad h = 0 for degree-zero h; theta is the spherical integral of Q.
    """
    if not h.is_homogeneous() or h.degree % 2:
        raise PolynomialError("angular factor must be even and homogeneous")
    n, q = h.n, h.degree

    def ang(z):
        z = np.asarray(z, dtype=float)
        r2 = np.sum(z * z, axis=-1)
        val = h(z) / r2 ** (q / 2)
        grad = h.gradient(z) / r2[..., None] ** (q / 2) - q * h(z)[..., None] * z / r2[..., None] ** (q / 2 + 1)
        return val, grad

    def values(z):
        v, _ = _radial_parts(z)
        a, _ = ang(z)
        return v * a[..., None]

    def jacobian(z):
        v, jac = _radial_parts(z)
        a, ga = ang(z)
        return jac * a[..., None, None] + v[..., :, None] * ga[..., None, :]

    return DoubleLayerField(f"angular[{h}]", n, "real", values, jacobian)


def field_from_harmonic_part(Pj: Polynomial) -> DoubleLayerField:
    """Divergence-free double layer field with angular factor Pj^2 (theta = ||Pj||^2)."""
    return angular_double_layer(Pj * Pj)


def theta(fld: DoubleLayerField, m: int = 64, tol: float = 1e-12) -> np.ndarray | complex | float:
    """Spherical mean int_{S^{n-1}} <x, k(x)>, checked against a doubled resolution."""

    def at(res):
        pts, w = sphere_rule(fld.n, res)
        vals = fld.pair(pts, pts)
        return np.tensordot(w, vals, axes=(0, 0))

    coarse, fine = at(m), at(2 * m)
    if np.max(np.abs(fine - coarse)) > tol * max(1.0, float(np.max(np.abs(fine)))):
        raise ToleranceError("theta quadrature not resolved; increase m")
    if np.ndim(fine) == 0:
        return complex(fine) if np.iscomplexobj(fine) else float(fine)
    return fine


def divergence_fd(fld: DoubleLayerField, points: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference divergence sum_j d_j k_j at the given points."""
    points = np.asarray(points, dtype=float)
    total = 0
    for j in range(fld.n):
        e = np.zeros(fld.n)
        e[j] = h
        diff = fld.values(points + e) - fld.values(points - e)
        total = total + (diff[..., j, :] if fld.value_kind == "clifford" else diff[..., j]) / (2 * h)
    return total


def laplace_fundamental(z: np.ndarray) -> np.ndarray:
    """E(z): ln|z|/(2 pi) in the plane, |z|^(2-n)/(varpi (2-n)) for n >= 3."""
    z = np.asarray(z, dtype=float)
    n = z.shape[-1]
    r = np.linalg.norm(z, axis=-1)
    if n == 2:
        return np.log(r) / (2 * math.pi)
    return r ** (2 - n) / (sphere_area(n) * (2 - n))


def laplace_fundamental_gradient(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    n = z.shape[-1]
    return z / (sphere_area(n) * np.sum(z * z, axis=-1)[..., None] ** (n / 2))


def clifford_kernel_product(z: np.ndarray, nu: np.ndarray, f: np.ndarray) -> np.ndarray:
    """(z / (varpi |z|^n)) * nu * f for vectors z, nu and Clifford arrays f."""
    n = z.shape[-1]
    v, _ = _radial_parts(z)
    kn = gproduct_arrays(embed_arrays(v / sphere_area(n)), embed_arrays(nu), n)
    return gproduct_arrays(kn, f, n)
