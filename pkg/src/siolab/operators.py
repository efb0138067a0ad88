"""Nystrom discretizations of layer potentials and principal-value boundary
operators on curve and sphere meshes.

Two principal-value rules are used on curves, both spectrally accurate on
smooth closed curves:

* subtraction: for kernels of the form <nu(y), k(x-y)>, the integrand
  <nu, k>(f(y) - f(x)) is smooth across y = x, so the trapezoid rule applies
  once its diagonal limit -<nu(x), k(tau(x))> f'(x) (per unit parameter) is
  inserted; the constant -/+ theta/2 f(x) is added exactly.
* punctured trapezoid: for a general odd kernel A of degree -1 the node sum
  skips y = x and adds the constant Laurent coefficient of the integrand,
  G g - A(tau) g', with G = -(grad A(tau).b / (2|a|) + A(tau)(tau.b)/|a|)
  where a, b are the first two parameter derivatives of the curve.

On surface meshes the subtraction rule keeps the plain punctured sum for the
smooth remainder, and Riesz operators are rebuilt from R_j 1 = -(C nu)_j since
the punctured rule alone does not converge for odd kernels there.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .clifford import embed_arrays, gproduct_arrays, scalar_arrays, vector_part_arrays
from .geometry import BoundaryMesh, DomainSpec, boundary_distance, build_mesh
from .holder import BoundaryField
from .kernels import (
    DoubleLayerField,
    PolyKernel,
    cauchy_clifford_field,
    harmonic_double_layer,
    laplace_fundamental,
    laplace_fundamental_gradient,
    theta,
)

OPERATOR_KINDS = ("riesz", "poly_kernel", "double_layer", "cauchy_clifford", "single_layer")
SIDES = ("interior", "exterior")
THREADS_ENV = "SIOLAB_THREADS"
TARGET_CHUNK = 128


class OperatorError(ValueError):
    pass


class AccuracyWarning(UserWarning):
    pass


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        count = int(raw)
    except ValueError as exc:
        raise OperatorError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from exc
    if count < 1:
        raise OperatorError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return count


def _map_targets(fn: Callable[[np.ndarray], np.ndarray], targets: np.ndarray) -> np.ndarray:
    """Apply fn to fixed-size target chunks; chunking is independent of the
    thread count, so results are bit-identical for any SIOLAB_THREADS."""
    chunks = [targets[k : k + TARGET_CHUNK] for k in range(0, len(targets), TARGET_CHUNK)]
    threads = thread_count()
    if threads == 1 or len(chunks) == 1:
        parts = [fn(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(fn, chunks))
    return np.concatenate(parts, axis=0)


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    """Which operator, on which mesh, seen from which side.

    The exterior side uses the outward normal of the exterior domain, -nu.
    """

    kind: str
    mesh: BoundaryMesh
    side: str = "interior"
    j: int | None = None
    kernel: PolyKernel | None = None
    field: DoubleLayerField | None = None

    def __post_init__(self):
        if self.kind not in OPERATOR_KINDS:
            raise OperatorError(f"unknown operator kind {self.kind!r}")
        if self.side not in SIDES:
            raise OperatorError(f"side must be one of {SIDES}")
        n = self.mesh.dim
        if self.kind == "riesz":
            if self.j is None or not 1 <= self.j <= n:
                raise OperatorError("riesz operator needs 1 <= j <= n")
            object.__setattr__(self, "kernel", PolyKernel.riesz(self.j, n))
        if self.kind == "poly_kernel":
            if self.kernel is None or self.kernel.n != n:
                raise OperatorError("poly_kernel operator needs a kernel of matching dimension")
        if self.kind == "cauchy_clifford":
            object.__setattr__(self, "field", cauchy_clifford_field(n))
        if self.kind == "double_layer":
            if self.field is None:
                object.__setattr__(self, "field", harmonic_double_layer(n))
            if self.field.n != n:
                raise OperatorError("double layer field dimension does not match the mesh")

    @property
    def orientation(self) -> float:
        return 1.0 if self.side == "interior" else -1.0

    @property
    def normals(self) -> np.ndarray:
        return self.orientation * self.mesh.normals

    @property
    def clifford(self) -> bool:
        return self.field is not None and self.field.value_kind == "clifford"

    @property
    def theta(self):
        """Spherical mean of the field; Clifford fields return their scalar part."""
        if self.field is None:
            raise OperatorError(f"{self.kind} has no double layer field")
        th = theta(self.field)
        if self.clifford:
            if np.max(np.abs(th[1:])) > 1e-10:
                raise OperatorError("non-scalar theta is not supported")
            return float(th[0])
        return th


@dataclass(frozen=True, eq=False)
class DomainField:
    points: np.ndarray
    rho: np.ndarray
    values: np.ndarray
    gradient_values: np.ndarray | None = None
    near_boundary: np.ndarray | None = None


def _clifford_density(op: OperatorSpec, values: np.ndarray) -> np.ndarray:
    """Promote scalar samples to Clifford arrays for Clifford-valued operators."""
    size = 1 << op.mesh.dim
    values = np.asarray(values)
    if values.ndim == 2 and values.shape[1] == size:
        return values
    if values.ndim == 1:
        return scalar_arrays(values, op.mesh.dim)
    raise OperatorError("Clifford operators need scalar or (N, 2**n) densities")


def _values(f) -> np.ndarray:
    return f.values if isinstance(f, BoundaryField) else np.asarray(f)


def potential(op: OperatorSpec, f, X, with_gradient: bool = False) -> DomainField:
    """Boundary-to-domain operator evaluated at points off the boundary."""
    mesh = op.mesh
    X = np.atleast_2d(np.asarray(X, dtype=float))
    rho = boundary_distance(mesh, X)
    if np.any(rho <= 0):
        raise OperatorError("evaluation point lies on the boundary")
    inside = mesh.spec.contains(X)
    if np.any(inside != (op.side == "interior")):
        raise OperatorError(f"evaluation points must lie on the {op.side} side")
    near = rho < 2 * mesh.panel_h
    if near.any():
        warnings.warn("evaluation points closer than 2*panel_h: quadrature accuracy degrades", AccuracyWarning, stacklevel=2)
    f = _values(f)
    if op.clifford:
        f = _clifford_density(op, f)
    y, w, nu = mesh.nodes, mesh.weights, op.normals
    n = mesh.dim

    def evaluate(block: np.ndarray) -> np.ndarray:
        z = block[:, None, :] - y[None, :, :]
        if op.kind in ("riesz", "poly_kernel"):
            K = op.kernel(z) * w
            val = np.tensordot(K, f, axes=(1, 0))
            grad = np.einsum("tkm,k...->tm...", op.kernel.gradient(z) * w[:, None], f) if with_gradient else None
        elif op.kind == "single_layer":
            E = laplace_fundamental(z) * w
            val = np.tensordot(E, f, axes=(1, 0))
            grad = np.einsum("tkm,k...->tm...", laplace_fundamental_gradient(z) * w[:, None], f) if with_gradient else None
        elif op.clifford:
            pair = op.field.pair(nu[None], z) * w[None, :, None]
            val = gproduct_arrays(pair, f[None], n).sum(axis=1)
            grad = None
            if with_gradient:
                jac = np.einsum("kj,tkjmb->tkmb", nu, op.field.jacobian(z)) * w[None, :, None, None]
                grad = gproduct_arrays(jac, f[None, :, None, :], n).sum(axis=1)
        else:
            pair = op.field.pair(nu[None], z) * w
            val = np.tensordot(pair, f, axes=(1, 0))
            grad = None
            if with_gradient:
                jac = np.einsum("kj,tkjm->tkm", nu, op.field.jacobian(z)) * w[None, :, None]
                grad = np.einsum("tkm,k...->tm...", jac, f)
        if with_gradient:
            return np.concatenate([val.reshape(len(block), -1), grad.reshape(len(block), -1)], axis=1)
        return val.reshape(len(block), -1)

    out = _map_targets(evaluate, X)
    val_shape = (len(X),) + _value_shape(op, f)
    width = int(np.prod(val_shape[1:], dtype=int))
    values = out[:, :width].reshape(val_shape)
    grad = out[:, width:].reshape((len(X), n) + val_shape[1:]) if with_gradient else None
    return DomainField(points=X, rho=rho, values=values, gradient_values=grad, near_boundary=near)


def _value_shape(op: OperatorSpec, f: np.ndarray) -> tuple[int, ...]:
    if op.clifford:
        return (1 << op.mesh.dim,)
    return tuple(f.shape[1:])


# principal-value boundary operators


def _diag_safe(z: np.ndarray, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Replace the self-interaction displacement by a dummy to avoid 0/0."""
    mask = np.zeros(z.shape[:2], dtype=bool)
    mask[np.arange(len(rows)), rows] = True
    z = z.copy()
    z[mask] = 1.0
    return z, mask


def _check_targets(mesh: BoundaryMesh, targets) -> np.ndarray:
    idx = np.arange(mesh.N) if targets is None else np.atleast_1d(np.asarray(targets, dtype=int))
    if np.any(idx < 0) or np.any(idx >= mesh.N):
        raise OperatorError("target index out of range")
    return idx


def pv_direct(mesh: BoundaryMesh, kernel: PolyKernel, g: np.ndarray, targets=None) -> np.ndarray:
    """PV of int A(x-y) g(y) dsigma(y) by the punctured trapezoid rule with the
    constant Laurent coefficient added at the skipped node (curves)."""
    g = np.asarray(g)
    idx = _check_targets(mesh, targets)
    y, w = mesh.nodes, mesh.weights

    def evaluate(block: np.ndarray) -> np.ndarray:
        z, mask = _diag_safe(mesh.nodes[block][:, None, :] - y[None, :, :], block)
        K = kernel(z) * w
        K[mask] = 0.0
        return np.tensordot(K, g, axes=(1, 0))

    out = _map_targets(evaluate, idx)
    if mesh.is_curve:
        g_t = mesh.param_derivative(g)[idx]
        speed = mesh.speed[idx]
        tau = mesh.tangents[idx]
        b = mesh.accel[idx]
        A = kernel(tau)
        gradA = kernel.gradient(tau)
        G = -(np.sum(gradA * b, -1) / (2 * speed) + A * np.sum(tau * b, -1) / speed)
        shape = (-1,) + (1,) * (g.ndim - 1)
        out = out + mesh.dt * (G.reshape(shape) * g[idx] - A.reshape(shape) * g_t)
    return out


def pv_subtracted(op: OperatorSpec, f: np.ndarray, targets=None) -> np.ndarray:
    """PV of a generalized double layer through the subtraction identity."""
    mesh = op.mesh
    idx = _check_targets(mesh, targets)
    f = np.asarray(f)
    y, w, nu = mesh.nodes, mesh.weights, op.normals
    n = mesh.dim
    cliff = op.clifford

    def evaluate(block: np.ndarray) -> np.ndarray:
        z, mask = _diag_safe(mesh.nodes[block][:, None, :] - y[None, :, :], block)
        pair = op.field.pair(nu[None], z)
        pair[mask] = 0.0
        diff = f[None, :] - f[block][:, None]
        if cliff:
            return np.einsum("k,tkb->tb", w, gproduct_arrays(pair, diff, n))
        return np.einsum("tk,tk...->t...", pair * w, diff)

    out = _map_targets(evaluate, idx)
    if mesh.is_curve:
        f_t = mesh.param_derivative(f)[idx]
        limit = op.field.pair(nu[idx], mesh.tangents[idx])
        if cliff:
            diag = -gproduct_arrays(limit, f_t, n)
        else:
            diag = -limit.reshape((-1,) + (1,) * (f.ndim - 1)) * f_t
        out = out + mesh.dt * diag
    return out - op.orientation * 0.5 * op.theta * f[idx]


def pv_boundary(op: OperatorSpec, f, targets=None, method: str = "auto") -> np.ndarray:
    """Principal-value boundary operator at mesh nodes (all, or ``targets``).

    Riesz and polynomial kernels use the punctured rule; double layers use the
    subtraction identity; the Cauchy-Clifford operator uses subtraction unless
    ``method="direct"``, which applies the punctured rule to nu*f.
    """
    if method not in ("auto", "direct", "subtraction"):
        raise OperatorError(f"unknown method {method!r}")
    vals = _values(f)
    if op.kind in ("riesz", "poly_kernel"):
        if method == "subtraction":
            raise OperatorError("kernel is not of <nu, k> form; use the direct rule")
        if not op.mesh.is_curve:
            if op.kind == "poly_kernel":
                raise OperatorError("principal values of general kernels are implemented on curves only")
            return _surface_riesz(op, vals, targets)
        return pv_direct(op.mesh, op.kernel, vals, targets)
    if op.kind == "single_layer":
        raise OperatorError("the single layer is weakly singular; no principal-value operator is defined here")
    if op.clifford:
        vals = _clifford_density(op, vals)
        if method == "direct":
            if not op.mesh.is_curve:
                raise OperatorError("the direct Clifford rule is implemented on curves only")
            return _clifford_direct(op, vals, targets)
    elif method == "direct":
        raise OperatorError("the direct rule is implemented for kernels and the Cauchy-Clifford operator")
    return pv_subtracted(op, vals, targets)


def _surface_riesz(op: OperatorSpec, g: np.ndarray, targets=None) -> np.ndarray:
    """R_j g = int K_j(x-y) (g(y) - g(x)) + g(x) R_j 1 on surfaces.

    The punctured rule is not symmetric about the target on a surface grid, so
    the odd singular part is carried by R_j 1 = -(C nu)_j, which the Clifford
    subtraction identity resolves; the remaining integrand is weakly singular.
    """
    mesh = op.mesh
    idx = _check_targets(mesh, targets)
    y, w = mesh.nodes, mesh.weights
    cnu = pv_subtracted(OperatorSpec("cauchy_clifford", mesh), embed_arrays(mesh.normals), idx)
    r1 = -vector_part_arrays(cnu, mesh.dim)[:, op.j - 1]

    def evaluate(block: np.ndarray) -> np.ndarray:
        z, mask = _diag_safe(mesh.nodes[block][:, None, :] - y[None, :, :], block)
        K = op.kernel(z) * w
        K[mask] = 0.0
        return np.einsum("tk,tk...->t...", K, g[None, :] - g[block][:, None])

    out = _map_targets(evaluate, idx)
    return out + r1.reshape((-1,) + (1,) * (g.ndim - 1)) * g[idx]


def _clifford_direct(op: OperatorSpec, f: np.ndarray, targets=None) -> np.ndarray:
    """Sum_j e_j * PV[K_j (nu * f)] with the Riesz kernels K_j."""
    mesh = op.mesh
    n = mesh.dim
    g = gproduct_arrays(embed_arrays(op.normals), f, n)
    out = 0
    for j in range(1, n + 1):
        comp = pv_direct(mesh, PolyKernel.riesz(j, n), g, targets)
        e_j = np.zeros(1 << n)
        e_j[1 << (j - 1)] = 1.0
        out = out + gproduct_arrays(e_j, comp, n)
    return out


def clifford_normal_image(mesh: BoundaryMesh, side: str = "interior") -> np.ndarray:
    """Cauchy-Clifford principal value of the outward normal, (N, 2**n)."""
    op = OperatorSpec("cauchy_clifford", mesh, side)
    return pv_boundary(op, embed_arrays(mesh.normals))


def riesz_via_clifford(mesh: BoundaryMesh) -> list[BoundaryField]:
    """R_j 1 read off from C nu = -sum_j (R_j 1) e_j."""
    img = clifford_normal_image(mesh)
    vec = -vector_part_arrays(img, mesh.dim)
    return [BoundaryField(mesh, vec[:, j]) for j in range(mesh.dim)]


def riesz_direct(mesh: BoundaryMesh) -> list[BoundaryField]:
    ones = np.ones(mesh.N)
    return [BoundaryField(mesh, pv_boundary(OperatorSpec("riesz", mesh, j=j), ones)) for j in range(1, mesh.dim + 1)]


def pv_matrix(op: OperatorSpec) -> np.ndarray:
    """Nystrom matrix of a real scalar principal-value operator, (N, N)."""
    if op.clifford:
        raise OperatorError("pv_matrix is defined for scalar operators")
    return pv_boundary(op, np.eye(op.mesh.N))


def l2_operator_norm(op: OperatorSpec) -> float:
    """Spectral norm of the Nystrom matrix on L^2(sigma) with the mesh weights."""
    s = np.sqrt(op.mesh.weights)
    return float(np.linalg.norm(s[:, None] * pv_matrix(op) / s[None, :], 2))


def boundary_trace(op: OperatorSpec, f, targets=None) -> np.ndarray:
    """Expected nontangential boundary value -theta/2 f + T f (both sides)."""
    vals = _values(f)
    if op.clifford:
        vals = _clifford_density(op, vals)
    idx = _check_targets(op.mesh, targets)
    return -0.5 * op.theta * vals[idx] + pv_boundary(op, vals, idx)


# nontangential traces


def richardson(values: Sequence[np.ndarray], levels: int = 2) -> tuple[np.ndarray, bool]:
    """Extrapolate a sequence sampled at heights h, h/2, h/4, ... to h -> 0,
    assuming an expansion in integer powers of h. Returns (limit, stable)."""
    table = [np.asarray(v) for v in values]
    estimates = []
    for k in range(1, min(levels, len(table) - 1) + 1):
        table = [(2**k * table[i + 1] - table[i]) / (2**k - 1) for i in range(len(table) - 1)]
        estimates.append(table[-1])
    if not estimates:
        return table[-1], False
    if len(table) >= 2:
        last = float(np.max(np.abs(table[-1] - table[-2])))
        prev = float(np.max(np.abs(np.asarray(values[-1]) - np.asarray(values[-2]))))
        stable = last <= prev or last < 1e-13
    else:
        stable = True
    return table[-1], stable


@dataclass(frozen=True)
class TraceRow:
    h: float
    N: int
    value: np.ndarray
    residual: float


@dataclass(frozen=True)
class TraceLadder:
    rows: list[TraceRow]
    target: np.ndarray
    limit: np.ndarray
    limit_residual: float
    stable: bool

    @property
    def residuals(self) -> np.ndarray:
        return np.array([r.residual for r in self.rows])

    def monotone(self, floor: float = 1e-12) -> bool:
        r = self.residuals
        return bool(np.all((r[1:] <= r[:-1]) | (r[1:] <= floor)))


def nontangential_trace(op: OperatorSpec, f, cone) -> TraceLadder:
    """Potential values at the cone samples of one mesh against the boundary trace."""
    target = boundary_trace(op, f, [cone.node])[0]
    dom = potential(op, f, cone.samples)
    rows = [
        TraceRow(float(h), op.mesh.N, v, float(np.max(np.abs(v - target))))
        for h, v in zip(cone.heights, dom.values)
    ]
    limit, stable = richardson([r.value for r in rows])
    return TraceLadder(rows, target, limit, float(np.max(np.abs(limit - target))), stable)


def tied_trace_ladder(
    spec: DomainSpec,
    kind: str,
    density: Callable[[BoundaryMesh], np.ndarray],
    t0: float = math.pi / 4,
    levels: Sequence[int] = range(1, 8),
    ratio: float = 4.0,
    side: str = "interior",
    field: DoubleLayerField | None = None,
) -> TraceLadder:
    """Approach the boundary point at parameter t0 along the normal with
    h_m = 2^-m, each on a mesh fine enough that panel_h <= h_m / ratio.

    The boundary trace is evaluated on the finest mesh, at that node only.
    """
    if not spec.dim == 2:
        raise OperatorError("the tied ladder is implemented for curves")
    speed_max = float(np.max(build_mesh(spec, 256).speed))
    rows = []
    meshes = []
    for m in levels:
        h = 2.0**-m
        N = int(math.ceil(2 * math.pi * speed_max * ratio / h / 64)) * 64
        mesh = build_mesh(spec, N)
        node = int(round(t0 / mesh.dt))
        if not math.isclose(mesh.parametric_t[node], t0, abs_tol=1e-12):
            raise OperatorError("t0 must be a node of every ladder mesh")
        op = OperatorSpec(kind, mesh, side, field=field)
        sgn = -1.0 if side == "interior" else 1.0
        z = mesh.nodes[node] + sgn * h * mesh.normals[node]
        value = potential(op, density(mesh), z[None]).values[0]
        rows.append((h, N, value))
        meshes.append((mesh, op, node))
    mesh, op, node = meshes[-1]
    target = boundary_trace(op, density(mesh), [node])[0]
    table = [TraceRow(h, N, v, float(np.max(np.abs(v - target)))) for h, N, v in rows]
    limit, stable = richardson([r.value for r in table])
    return TraceLadder(table, target, limit, float(np.max(np.abs(limit - target))), stable)


# identities


@dataclass(frozen=True)
class SingleLayerReport:
    residual: float
    scalar_residual: float
    probes: np.ndarray


def interior_probes(mesh: BoundaryMesh, count: int, rho_min: float, seed: int = 0) -> np.ndarray:
    """Uniform random interior points with dist(x, boundary) >= rho_min."""
    rng = np.random.default_rng(seed)
    lo, hi = mesh.nodes.min(axis=0), mesh.nodes.max(axis=0)
    found = []
    total = 0
    for _ in range(1000):
        cand = rng.uniform(lo, hi, size=(4 * count, mesh.dim))
        cand = cand[mesh.spec.contains(cand)]
        if len(cand):
            cand = cand[boundary_distance(mesh, cand) >= rho_min]
        found.append(cand)
        total += len(cand)
        if total >= count:
            break
    pts = np.concatenate(found)[:count]
    if len(pts) < count:
        raise OperatorError("could not place enough interior probes")
    return pts


def single_layer_gradient_identity(mesh: BoundaryMesh, probes: np.ndarray) -> SingleLayerReport:
    """max |grad S1 + vec(C nu)| over probes, with the scalar part of C nu."""
    ones = np.ones(mesh.N)
    grad = potential(OperatorSpec("single_layer", mesh), ones, probes, with_gradient=True).gradient_values
    cnu = potential(OperatorSpec("cauchy_clifford", mesh), embed_arrays(mesh.normals), probes).values
    res = float(np.max(np.linalg.norm(grad + vector_part_arrays(cnu, mesh.dim), axis=-1)))
    others = np.delete(cnu, [1 << j for j in range(mesh.dim)], axis=1)
    return SingleLayerReport(res, float(np.max(np.abs(others))), probes)


def clifford_involution_check(mesh: BoundaryMesh, f) -> float:
    """max over nodes of |C(C f) - f/4|."""
    if not mesh.periodic_smooth:
        raise OperatorError("the involution check needs a smooth closed curve mesh")
    op = OperatorSpec("cauchy_clifford", mesh)
    vals = _clifford_density(op, _values(f))
    once = pv_boundary(op, vals)
    twice = pv_boundary(op, once)
    return float(np.max(np.linalg.norm(twice - 0.25 * vals, axis=-1)))
