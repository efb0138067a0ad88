"""Generalized Hoelder seminorms of sampled fields and strict-inclusion fixtures."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from .geometry import BoundaryMesh
from .growth import GrowthFunction, extend

ALL_PAIRS_LIMIT = 4096


@dataclass(frozen=True, eq=False)
class BoundaryField:
    """Samples f(y_i) at mesh nodes; shape (N,) or (N, m) (Clifford: m = 2**n)."""

    mesh: BoundaryMesh
    values: np.ndarray
    clifford: bool = False

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.shape[0] != self.mesh.N:
            raise ValueError(f"field has {vals.shape[0]} samples for a mesh of {self.mesh.N} nodes")
        if self.clifford and (vals.ndim != 2 or vals.shape[1] != 1 << self.mesh.dim):
            raise ValueError("Clifford fields need shape (N, 2**n)")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, mesh: BoundaryMesh, fn: Callable[[np.ndarray], np.ndarray], clifford: bool = False) -> "BoundaryField":
        return cls(mesh, np.asarray(fn(mesh.nodes)), clifford)

    def magnitude(self) -> np.ndarray:
        return _magnitude(self.values)

    def __add__(self, other: "BoundaryField") -> "BoundaryField":
        return BoundaryField(self.mesh, self.values + other.values, self.clifford)

    def __mul__(self, c) -> "BoundaryField":
        if isinstance(c, BoundaryField):
            if self.clifford or c.clifford:
                raise TypeError("use the Clifford product for multivector fields")
            return BoundaryField(self.mesh, self.values * c.values)
        return BoundaryField(self.mesh, self.values * c, self.clifford)

    __rmul__ = __mul__


def _magnitude(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v)
    if v.ndim <= 1:
        return np.abs(v)
    return np.sqrt(np.sum(np.abs(v) ** 2, axis=tuple(range(1, v.ndim))))


@dataclass(frozen=True)
class PairPolicy:
    """All pairs up to ``all_pairs_limit`` points; above it, every dyadic
    distance annulus is enumerated or sampled up to ``annulus_cap`` pairs and
    all nearest-neighbour pairs are added."""

    all_pairs_limit: int = ALL_PAIRS_LIMIT
    annulus_cap: int = 100_000
    seed: int = 0

    def describe(self, n_points: int) -> str:
        if n_points <= self.all_pairs_limit:
            return f"all {n_points * (n_points - 1) // 2} pairs"
        return f"dyadic annuli, cap {self.annulus_cap} per annulus, plus nearest neighbours (seed {self.seed})"


@dataclass(frozen=True)
class HolderReport:
    seminorm: float
    sup_norm: float
    norm: float
    argmax_pair: tuple[int, int] | None
    pair_budget: str

    def to_dict(self) -> dict:
        return {
            "seminorm": self.seminorm,
            "sup_norm": self.sup_norm,
            "norm": self.norm,
            "argmax_pair": list(self.argmax_pair) if self.argmax_pair else None,
            "pair_budget": self.pair_budget,
        }


def _all_pair_blocks(points: np.ndarray, block: int = 512):
    n = len(points)
    for lo in range(0, n, block):
        i = np.arange(lo, min(lo + block, n))
        d = np.linalg.norm(points[i, None, :] - points[None, :, :], axis=-1)
        yield i, d


def sampled_pairs(points: np.ndarray, policy: PairPolicy = PairPolicy()) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs (i < j) following the dyadic sampling policy."""
    rng = np.random.default_rng(policy.seed)
    tree = cKDTree(points)
    n = len(points)
    _, nn = tree.query(points, k=2)
    chunks = [np.sort(np.stack([np.arange(n), nn[:, 1]], -1), axis=1)]
    dmin = float(np.min(np.linalg.norm(points - points[nn[:, 1]], axis=-1)))
    span = np.ptp(points, axis=0)
    dmax = float(np.linalg.norm(span))
    k_lo = math.floor(math.log2(max(dmin, 1e-300)))
    k_hi = math.ceil(math.log2(dmax)) + 1
    # annulus populations estimated from a uniform pair sample
    probe_i = rng.integers(0, n, size=200_000)
    probe_j = rng.integers(0, n, size=200_000)
    probe_d = np.linalg.norm(points[probe_i] - points[probe_j], axis=-1)
    for k in range(k_lo, k_hi):
        r_lo, r_hi = 2.0**k, 2.0 ** (k + 1)
        frac_hi = np.mean((probe_d < r_hi) & (probe_i != probe_j))
        if frac_hi * n * n / 2 <= 0.5 * policy.annulus_cap:
            pairs = tree.query_pairs(r_hi, output_type="ndarray")
            if len(pairs):
                d = np.linalg.norm(points[pairs[:, 0]] - points[pairs[:, 1]], axis=-1)
                chunks.append(pairs[d >= r_lo])
            continue
        found = []
        total = 0
        attempts = 0
        while total < policy.annulus_cap and attempts < 50:
            attempts += 1
            i = rng.integers(0, n, size=policy.annulus_cap)
            j = rng.integers(0, n, size=policy.annulus_cap)
            d = np.linalg.norm(points[i] - points[j], axis=-1)
            keep = (d >= r_lo) & (d < r_hi) & (i != j)
            if keep.any():
                found.append(np.sort(np.stack([i[keep], j[keep]], -1), axis=1))
                total += int(keep.sum())
        if found:
            chunks.append(np.concatenate(found)[: policy.annulus_cap])
    pairs = np.unique(np.concatenate(chunks), axis=0)
    return pairs[:, 0], pairs[:, 1]


def seminorm_points(points: np.ndarray, values: np.ndarray, g: GrowthFunction, policy: PairPolicy = PairPolicy()) -> tuple[float, tuple[int, int] | None]:
    """sup |f(x)-f(y)| / omega~(|x-y|) over the sampled pairs."""
    points = np.asarray(points, dtype=float)
    values = np.asarray(values)
    n = len(points)
    if n < 2:
        return 0.0, None
    ge = extend(g)
    best, arg = 0.0, None
    if n <= policy.all_pairs_limit:
        for i, d in _all_pair_blocks(points):
            delta = values[i, None] - values[None, :]
            diff = np.abs(delta) if delta.ndim == 2 else np.sqrt(np.sum(np.abs(delta) ** 2, axis=-1))
            mask = d > 0
            ratio = np.zeros_like(d)
            ratio[mask] = diff[mask] / ge(d[mask])
            k = int(np.argmax(ratio))
            if ratio.flat[k] > best:
                best, arg = float(ratio.flat[k]), (int(i[k // n]), int(k % n))
    else:
        i, j = sampled_pairs(points, policy)
        d = np.linalg.norm(points[i] - points[j], axis=-1)
        keep = d > 0
        i, j, d = i[keep], j[keep], d[keep]
        ratio = _magnitude(values[i] - values[j]) / ge(d)
        if len(ratio):
            k = int(np.argmax(ratio))
            best, arg = float(ratio[k]), (int(i[k]), int(j[k]))
    if arg is not None:
        arg = tuple(sorted(arg))
    return best, arg


def seminorm(fld: BoundaryField, g: GrowthFunction, pairs: PairPolicy = PairPolicy()) -> HolderReport:
    semi, arg = seminorm_points(fld.mesh.nodes, fld.values, g, pairs)
    sup = float(np.max(fld.magnitude())) if fld.mesh.N else 0.0
    return HolderReport(semi, sup, sup + semi, arg, pairs.describe(fld.mesh.N))


def product_norms(f: BoundaryField, h: BoundaryField, g: GrowthFunction) -> tuple[float, float]:
    """(||f h||, ||f|| ||h||) for scalar fields on the same mesh."""
    if f.mesh is not h.mesh:
        raise ValueError("fields live on different meshes")
    lhs = seminorm(f * h, g).norm
    return lhs, seminorm(f, g).norm * seminorm(h, g).norm


def product_norm_check(f: BoundaryField, h: BoundaryField, g: GrowthFunction, rtol: float = 1e-12) -> bool:
    lhs, rhs = product_norms(f, h, g)
    return lhs <= rhs * (1 + rtol)


@dataclass(frozen=True)
class ModulusRow:
    bin_lo: float
    bin_hi: float
    max_delta: float


def modulus_profile(fld: BoundaryField, bins=None, policy: PairPolicy = PairPolicy()) -> list[ModulusRow]:
    """Largest |f(x)-f(y)| for pair distances in each bin (default: dyadic bins)."""
    pts, vals = fld.mesh.nodes, fld.values
    n = len(pts)
    if n < 2:
        raise ValueError("need at least two nodes")
    if n <= policy.all_pairs_limit:
        ii, jj = np.triu_indices(n, 1)
    else:
        ii, jj = sampled_pairs(pts, policy)
    d = np.linalg.norm(pts[ii] - pts[jj], axis=-1)
    delta = _magnitude(vals[ii] - vals[jj])
    if bins is None:
        lo = math.floor(math.log2(d[d > 0].min()))
        hi = math.ceil(math.log2(d.max())) + 1
        bins = 2.0 ** np.arange(lo, hi + 1)
    bins = np.asarray(bins, dtype=float)
    which = np.searchsorted(bins, d, side="right") - 1
    rows = []
    for k in range(len(bins) - 1):
        sel = which == k
        if sel.any():
            rows.append(ModulusRow(float(bins[k]), float(bins[k + 1]), float(delta[sel].max())))
    return rows


# strict-inclusion fixtures


def radial_fixture(mesh: BoundaryMesh, phi: GrowthFunction, center: int) -> BoundaryField:
    """F(y) = phi(|y - z|) with z a mesh node and phi(0) = 0."""
    d = np.linalg.norm(mesh.nodes - mesh.nodes[center], axis=-1)
    vals = np.zeros(mesh.N)
    vals[d > 0] = extend(phi)(d[d > 0])
    return BoundaryField(mesh, vals)


def log_corrected_modulus(alpha: float, D: float) -> GrowthFunction:
    """t^alpha (1/alpha + ln(D/t)) on (0, D)."""
    return GrowthFunction.power_log_D(alpha, 1.0, D)


def power_fixture(mesh: BoundaryMesh, alpha: float, eps: float, center: int) -> BoundaryField:
    """|y - x0|^(alpha - eps): in the (alpha-eps) class but not the log-corrected one."""
    if not 0 < eps < alpha < 1:
        raise ValueError("need 0 < eps < alpha < 1")
    return radial_fixture(mesh, GrowthFunction.power(alpha - eps), center)


def log_power_fixture(mesh: BoundaryMesh, alpha: float, D: float, center: int) -> BoundaryField:
    """|y - x0|^alpha (1/alpha + ln(D/|y - x0|)): log-corrected class, not C^alpha."""
    return radial_fixture(mesh, log_corrected_modulus(alpha, D), center)
