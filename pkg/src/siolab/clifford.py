"""Clifford algebra Cl_n with generators satisfying e_j*e_j = -1.

Blades are indexed by bitmasks: bit ``j-1`` set means ``e_j`` is a factor, and
factors are always stored in increasing order. ``Multivector`` is an immutable
value type; batched helpers (``gproduct_arrays`` and friends) act on raw
coefficient arrays whose last axis has length ``2**n`` and are what the
operator code uses in its inner loops.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

MAX_DIM = 8
_TABLE_MAX_DIM = 6


def set_bit_indices(mask: int) -> Iterator[int]:
    """Indices of set bits of ``mask`` in ascending order."""
    k = 0
    while mask:
        if mask & 1:
            yield k
        mask >>= 1
        k += 1


def grade(mask: int) -> int:
    return bin(mask).count("1")


def blade_sign(a: int, b: int) -> int:
    """Sign of e_A * e_B relative to e_{A xor B}.

    Reordering e_A e_B into increasing order needs one transposition for each
    pair (i in A, j in B) with i > j; each shared generator then contracts to -1.
    """
    parity = grade(a & b)
    a >>= 1
    while a:
        parity += grade(a & b)
        a >>= 1
    return -1 if parity % 2 else 1


def _reorder_parity(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    swaps = np.zeros(np.broadcast(a, b).shape, dtype=np.int64)
    a = a >> 1
    while np.any(a):
        swaps += _popcount(a & b)
        a = a >> 1
    return swaps & 1


def _popcount(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    count = np.zeros_like(x)
    while np.any(x):
        count += x & 1
        x = x >> 1
    return count


def _sign_matrix_uncached(n: int) -> np.ndarray:
    idx = np.arange(1 << n, dtype=np.int64)
    a, b = np.meshgrid(idx, idx, indexing="ij")
    parity = _reorder_parity(a, b) + _popcount(a & b)
    return np.where(parity % 2 == 1, -1.0, 1.0)


@lru_cache(maxsize=None)
def _sign_matrix_cached(n: int) -> np.ndarray:
    table = _sign_matrix_uncached(n)
    table.setflags(write=False)
    return table


def sign_matrix(n: int) -> np.ndarray:
    """S[a, b] = sign of e_a * e_b; cached only for small n."""
    _check_dim(n)
    if n <= _TABLE_MAX_DIM:
        return _sign_matrix_cached(n)
    return _sign_matrix_uncached(n)


def conjugation_signs(n: int) -> np.ndarray:
    """Sign of bar(e_I) relative to e_I: (-1)^l times the reversal sign."""
    ell = _popcount(np.arange(1 << n))
    exponent = ell + ell * (ell - 1) // 2
    return np.where(exponent % 2 == 1, -1.0, 1.0)


def _check_dim(n: int) -> None:
    if not 1 <= n <= MAX_DIM:
        raise ValueError(f"Clifford dimension must be in 1..{MAX_DIM}, got {n}")


def gproduct_arrays(u: np.ndarray, v: np.ndarray, n: int) -> np.ndarray:
    """Geometric product of coefficient arrays broadcast over leading axes."""
    u = np.asarray(u)
    v = np.asarray(v)
    size = 1 << n
    if u.shape[-1] != size or v.shape[-1] != size:
        raise ValueError("coefficient arrays must have last axis 2**n")
    signs = sign_matrix(n)
    dtype = np.result_type(u, v, np.float64)
    out = np.zeros(np.broadcast_shapes(u.shape, v.shape), dtype=dtype)
    idx = np.arange(size)
    for a in range(size):
        ua = u[..., a : a + 1]
        if not np.any(ua):
            continue
        out[..., a ^ idx] += signs[a] * ua * v
    return out


def conjugate_arrays(u: np.ndarray, n: int) -> np.ndarray:
    return np.asarray(u) * conjugation_signs(n)


def embed_arrays(x: np.ndarray) -> np.ndarray:
    """Vectors of shape (..., n) to coefficient arrays of shape (..., 2**n)."""
    x = np.asarray(x)
    n = x.shape[-1]
    _check_dim(n)
    out = np.zeros(x.shape[:-1] + (1 << n,), dtype=np.result_type(x, np.float64))
    for j in range(n):
        out[..., 1 << j] = x[..., j]
    return out


def vector_part_arrays(u: np.ndarray, n: int) -> np.ndarray:
    u = np.asarray(u)
    return np.stack([u[..., 1 << j] for j in range(n)], axis=-1)


def scalar_arrays(c: np.ndarray, n: int) -> np.ndarray:
    c = np.asarray(c)
    out = np.zeros(c.shape + (1 << n,), dtype=np.result_type(c, np.float64))
    out[..., 0] = c
    return out


def blade_name(mask: int) -> str:
    if mask == 0:
        return "1"
    return "^".join(f"e{j + 1}" for j in set_bit_indices(mask))


class Multivector:
    """Element of Cl_n stored as 2**n blade coefficients."""

    __slots__ = ("n", "coeffs")

    def __init__(self, n: int, coeffs: Sequence[float] | np.ndarray):
        _check_dim(n)
        arr = np.array(coeffs, dtype=np.float64)
        if arr.shape != (1 << n,):
            raise ValueError(f"expected {1 << n} coefficients, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "coeffs", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Multivector is immutable")

    @classmethod
    def zero(cls, n: int) -> "Multivector":
        return cls(n, np.zeros(1 << n))

    @classmethod
    def scalar(cls, c: float, n: int) -> "Multivector":
        coeffs = np.zeros(1 << n)
        coeffs[0] = c
        return cls(n, coeffs)

    @classmethod
    def blade(cls, mask: int, n: int, c: float = 1.0) -> "Multivector":
        coeffs = np.zeros(1 << n)
        coeffs[mask] = c
        return cls(n, coeffs)

    @classmethod
    def basis(cls, j: int, n: int) -> "Multivector":
        """The generator e_j, 1-based."""
        if not 1 <= j <= n:
            raise ValueError(f"generator index {j} out of range for n={n}")
        return cls.blade(1 << (j - 1), n)

    def _same_dim(self, other: "Multivector") -> None:
        if self.n != other.n:
            raise ValueError(f"dimension mismatch: Cl_{self.n} vs Cl_{other.n}")

    def __add__(self, other):
        if isinstance(other, Multivector):
            self._same_dim(other)
            return Multivector(self.n, self.coeffs + other.coeffs)
        return self + Multivector.scalar(float(other), self.n)

    __radd__ = __add__

    def __neg__(self):
        return Multivector(self.n, -self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Multivector):
            return gproduct(self, other)
        return Multivector(self.n, self.coeffs * float(other))

    def __rmul__(self, other):
        return Multivector(self.n, self.coeffs * float(other))

    def __truediv__(self, c: float):
        return Multivector(self.n, self.coeffs / float(c))

    def __eq__(self, other):
        if not isinstance(other, Multivector):
            return NotImplemented
        return self.n == other.n and bool(np.array_equal(self.coeffs, other.coeffs))

    def __hash__(self):
        return hash((self.n, self.coeffs.tobytes()))

    def __getitem__(self, mask: int) -> float:
        return float(self.coeffs[mask])

    def allclose(self, other: "Multivector", atol: float = 1e-12) -> bool:
        self._same_dim(other)
        return bool(np.allclose(self.coeffs, other.coeffs, rtol=0.0, atol=atol))

    @property
    def scalar_part(self) -> float:
        return float(self.coeffs[0])

    @property
    def vector_part(self) -> np.ndarray:
        return vector_part_arrays(self.coeffs, self.n)

    def __repr__(self):
        terms = [
            f"{c:+.6g}*{blade_name(mask)}" if mask else f"{c:+.6g}"
            for mask, c in enumerate(self.coeffs)
            if c != 0.0
        ]
        return f"Multivector(n={self.n}: {' '.join(terms) or '0'})"


def gproduct(u: Multivector, v: Multivector) -> Multivector:
    u._same_dim(v)
    return Multivector(u.n, gproduct_arrays(u.coeffs, v.coeffs, u.n))


def conjugate(u: Multivector) -> Multivector:
    return Multivector(u.n, conjugate_arrays(u.coeffs, u.n))


def norm(u: Multivector) -> float:
    return float(np.linalg.norm(u.coeffs))


def embed(x: Sequence[float] | np.ndarray) -> Multivector:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("embed expects a single vector")
    return Multivector(x.shape[0], embed_arrays(x))
