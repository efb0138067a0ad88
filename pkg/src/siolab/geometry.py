"""Model domains, boundary quadrature meshes and geometric diagnostics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Any, ClassVar, Mapping

import numpy as np
from scipy.spatial import ConvexHull

from .growth import GrowthFunction, extend
from .quadrature import QuadratureSpec, fixed_gl, gauss_legendre

DOMAIN_KINDS = ("disk", "ellipse", "star", "teardrop", "sphere3")


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class DomainSpec:
    """A bounded model domain; its boundary is oriented with outward normals.

    ``teardrop`` is the lens bounded by two circular arcs of equal radius that
    meet at the origin (and, by symmetry, at ``(chord, 0)``) with interior
    angle ``gamma``; it is C^0 but not C^1 unless ``gamma == pi``.
    """

    kind: str
    r: float = 1.0
    a: float = 2.0
    b: float = 1.0
    r0: float = 1.0
    eps: float = 0.1
    k: int = 5
    gamma: float = math.pi / 3
    chord: float = 2.0

    def __post_init__(self):
        if self.kind not in DOMAIN_KINDS:
            raise GeometryError(f"unknown domain kind {self.kind!r}")
        if self.kind in ("disk", "sphere3") and not self.r > 0:
            raise GeometryError("radius must be positive")
        if self.kind == "ellipse" and not (self.a > 0 and self.b > 0):
            raise GeometryError("ellipse semi-axes must be positive")
        if self.kind == "star":
            if not (self.r0 > 0 and self.k >= 1 and 0 <= self.eps and self.eps * self.k < 1):
                raise GeometryError("star needs r0 > 0, k >= 1 and 0 <= eps*k < 1")
        if self.kind == "teardrop" and not (0 < self.gamma < math.pi and self.chord > 0):
            raise GeometryError("teardrop needs 0 < gamma < pi and chord > 0")

    @classmethod
    def disk(cls, r: float = 1.0) -> "DomainSpec":
        return cls("disk", r=r)

    @classmethod
    def ellipse(cls, a: float = 2.0, b: float = 1.0) -> "DomainSpec":
        return cls("ellipse", a=a, b=b)

    @classmethod
    def star(cls, r0: float = 1.0, eps: float = 0.1, k: int = 5) -> "DomainSpec":
        return cls("star", r0=r0, eps=eps, k=k)

    @classmethod
    def teardrop(cls, gamma: float = math.pi / 3, chord: float = 2.0) -> "DomainSpec":
        return cls("teardrop", gamma=gamma, chord=chord)

    @classmethod
    def sphere3(cls, r: float = 1.0) -> "DomainSpec":
        return cls("sphere3", r=r)

    _KEYS: ClassVar[dict[str, tuple[str, ...]]] = {
        "disk": ("r",),
        "ellipse": ("a", "b"),
        "star": ("r0", "eps", "k"),
        "teardrop": ("gamma", "chord"),
        "sphere3": ("r",),
    }

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, **{key: getattr(self, key) for key in self._KEYS[self.kind]}}

    @classmethod
    def from_dict(cls, spec: Mapping[str, Any]) -> "DomainSpec":
        spec = dict(spec)
        kind = spec.pop("kind", None)
        if kind not in DOMAIN_KINDS:
            raise GeometryError(f"unknown domain kind {kind!r}")
        unknown = set(spec) - set(cls._KEYS[kind])
        if unknown:
            raise GeometryError(f"unknown keys for {kind}: {sorted(unknown)}")
        if "k" in spec:
            spec["k"] = int(spec["k"])
        return cls(kind, **spec)

    @property
    def dim(self) -> int:
        return 3 if self.kind == "sphere3" else 2

    @property
    def smooth(self) -> bool:
        return self.kind != "teardrop"

    # lens geometry

    @property
    def lens_radius(self) -> float:
        return 0.5 * self.chord / math.sin(0.5 * self.gamma)

    @property
    def lens_offset(self) -> float:
        return 0.5 * self.chord / math.tan(0.5 * self.gamma)

    def lens_arcs(self) -> list[tuple[np.ndarray, float]]:
        """(center, start angle) of the lower and upper arcs; each spans gamma."""
        L, c, g = self.chord, self.lens_offset, self.gamma
        return [
            (np.array([0.5 * L, c]), -0.5 * math.pi - 0.5 * g),
            (np.array([0.5 * L, -c]), 0.5 * math.pi - 0.5 * g),
        ]

    # parametrization, t in [0, 2 pi), counterclockwise

    def curve(self, t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """gamma(t), gamma'(t), gamma''(t) as (N, 2) arrays."""
        t = np.asarray(t, dtype=float)
        c, s = np.cos(t), np.sin(t)
        if self.kind == "disk":
            p = self.r * np.stack([c, s], -1)
            return p, self.r * np.stack([-s, c], -1), -p
        if self.kind == "ellipse":
            p = np.stack([self.a * c, self.b * s], -1)
            return p, np.stack([-self.a * s, self.b * c], -1), -p
        if self.kind == "star":
            k, r0, e = self.k, self.r0, self.eps
            rho = r0 * (1 + e * np.cos(k * t))
            d1 = -r0 * e * k * np.sin(k * t)
            d2 = -r0 * e * k * k * np.cos(k * t)
            p = np.stack([rho * c, rho * s], -1)
            v = np.stack([d1 * c - rho * s, d1 * s + rho * c], -1)
            acc = np.stack([(d2 - rho) * c - 2 * d1 * s, (d2 - rho) * s + 2 * d1 * c], -1)
            return p, v, acc
        if self.kind == "teardrop":
            R, g = self.lens_radius, self.gamma
            rate = g / math.pi
            second = t >= math.pi
            (c0, a0), (c1, a1) = self.lens_arcs()
            center = np.where(second[:, None], c1, c0) if t.ndim else (c1 if second else c0)
            psi = np.where(second, a1 + (t - math.pi) * rate, a0 + t * rate)
            u = np.stack([np.cos(psi), np.sin(psi)], -1)
            du = np.stack([-np.sin(psi), np.cos(psi)], -1)
            return center + R * u, R * rate * du, -R * rate * rate * u
        raise GeometryError("sphere3 has no curve parametrization")

    def contains(self, y) -> np.ndarray:
        """Strict interior membership."""
        y = np.asarray(y, dtype=float)
        if self.kind in ("disk", "sphere3"):
            return np.sum(y * y, axis=-1) < self.r**2
        if self.kind == "ellipse":
            return (y[..., 0] / self.a) ** 2 + (y[..., 1] / self.b) ** 2 < 1.0
        if self.kind == "star":
            theta = np.arctan2(y[..., 1], y[..., 0])
            rho = self.r0 * (1 + self.eps * np.cos(self.k * theta))
            return np.hypot(y[..., 0], y[..., 1]) < rho
        R = self.lens_radius
        inside = np.ones(y.shape[:-1], dtype=bool)
        for center, _ in self.lens_arcs():
            inside &= np.sum((y - center) ** 2, axis=-1) < R * R
        return inside

    def perimeter(self) -> float:
        """Closed-form boundary measure where one exists."""
        from scipy.special import ellipe

        if self.kind == "disk":
            return 2 * math.pi * self.r
        if self.kind == "sphere3":
            return 4 * math.pi * self.r**2
        if self.kind == "ellipse":
            a, b = max(self.a, self.b), min(self.a, self.b)
            return 4 * a * float(ellipe(1 - (b / a) ** 2))
        if self.kind == "teardrop":
            return 2 * self.lens_radius * self.gamma
        raise GeometryError("no closed-form perimeter for star")


@dataclass(frozen=True, eq=False)
class BoundaryMesh:
    """Quadrature nodes on the boundary with weights for surface measure.

    Curves carry the parametrization data (``dt``, tangents, ``accel`` =
    gamma'', ``dnormal`` = d nu/dt) used by the singular quadrature corrections;
    ``pieces`` lists index ranges on which the parametrization is smooth.
    """

    spec: DomainSpec
    nodes: np.ndarray
    weights: np.ndarray
    normals: np.ndarray
    panel_h: float
    parametric_t: np.ndarray | None = None
    dt: float | None = None
    speed: np.ndarray | None = None
    tangents: np.ndarray | None = None
    accel: np.ndarray | None = None
    dnormal: np.ndarray | None = None
    pieces: tuple[tuple[int, int], ...] = ()

    @property
    def N(self) -> int:
        return self.nodes.shape[0]

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def is_curve(self) -> bool:
        return self.dt is not None

    @property
    def periodic_smooth(self) -> bool:
        return self.is_curve and self.spec.smooth

    def diameter(self) -> float:
        pts = self.nodes
        if pts.shape[0] > pts.shape[1] + 1:
            pts = pts[ConvexHull(pts).vertices]
        # convex boundaries keep every node on the hull, so bound memory by rows
        best = 0.0
        for k in range(0, len(pts), 512):
            diff = pts[k : k + 512, None, :] - pts[None, :, :]
            best = max(best, float(np.max(np.sum(diff * diff, axis=-1))))
        return math.sqrt(best)

    def param_derivative(self, values: np.ndarray) -> np.ndarray:
        """d/dt of nodal samples along the parametrization (axis 0).

        Spectral on smooth closed curves; second-order differences on each
        smooth piece otherwise.
        """
        if not self.is_curve:
            raise GeometryError("parameter derivatives need a curve mesh")
        values = np.asarray(values)
        if self.periodic_smooth:
            N = self.N
            k = np.fft.fftfreq(N, d=1.0 / N)
            if N % 2 == 0:
                k[N // 2] = 0.0
            shape = (N,) + (1,) * (values.ndim - 1)
            spec = np.fft.fft(values, axis=0) * (1j * k).reshape(shape)
            out = np.fft.ifft(spec, axis=0)
            return out if np.iscomplexobj(values) else out.real
        out = np.empty_like(values, dtype=np.result_type(values, float))
        for lo, hi in self.pieces:
            out[lo:hi] = np.gradient(values[lo:hi], self.dt, axis=0, edge_order=2)
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            if self.dim == 2:
                w.writerow(["t", "x", "y", "w", "nx", "ny"])
            else:
                w.writerow(["t", "x", "y", "z", "w", "nx", "ny", "nz"])
            t = self.parametric_t if self.parametric_t is not None else np.arange(self.N, dtype=float)
            for i in range(self.N):
                w.writerow([repr(float(t[i])), *map(repr, map(float, self.nodes[i])), repr(float(self.weights[i])), *map(repr, map(float, self.normals[i]))])


def _outward(tangents: np.ndarray) -> np.ndarray:
    # counterclockwise orientation puts the interior on the left
    return np.stack([tangents[:, 1], -tangents[:, 0]], -1)


def build_mesh(spec: DomainSpec, N: int) -> BoundaryMesh:
    """Nystrom quadrature mesh with N nodes (sphere3: nearest 2m^2 nodes)."""
    if N < 16:
        raise GeometryError("need N >= 16")
    if spec.kind == "sphere3":
        return _sphere_mesh(spec, N)
    if spec.kind == "teardrop" and N % 2:
        raise GeometryError("teardrop meshes need even N (equal nodes per arc)")
    dt = 2 * math.pi / N
    if spec.kind == "teardrop":
        t = (np.arange(N) + 0.5) * dt
        pieces = ((0, N // 2), (N // 2, N))
    else:
        t = np.arange(N) * dt
        pieces = ((0, N),)
    p, v, acc = spec.curve(t)
    speed = np.hypot(v[:, 0], v[:, 1])
    tang = v / speed[:, None]
    normals = _outward(tang)
    # d tau/dt = (a - tau (tau.a)) / |v|, and nu is tau rotated by -90 degrees
    dtau = (acc - tang * np.sum(tang * acc, -1)[:, None]) / speed[:, None]
    weights = speed * dt
    return BoundaryMesh(
        spec=spec,
        nodes=p,
        weights=weights,
        normals=normals,
        panel_h=float(np.max(weights)),
        parametric_t=t,
        dt=dt,
        speed=speed,
        tangents=tang,
        accel=acc,
        dnormal=_outward(dtau),
        pieces=pieces,
    )


def _sphere_mesh(spec: DomainSpec, N: int) -> BoundaryMesh:
    m = max(4, int(round(math.sqrt(N / 2))))
    x, w = gauss_legendre(m)
    phi = 2 * math.pi * np.arange(2 * m) / (2 * m)
    ct = np.repeat(x, 2 * m)
    st = np.sqrt(1 - ct * ct)
    ph = np.tile(phi, m)
    normals = np.stack([st * np.cos(ph), st * np.sin(ph), ct], -1)
    weights = spec.r**2 * np.repeat(w, 2 * m) * (2 * math.pi / (2 * m))
    panel_h = spec.r * max(float(np.max(np.diff(np.arccos(x[::-1])))), 2 * math.pi / (2 * m))
    return BoundaryMesh(spec=spec, nodes=spec.r * normals, weights=weights, normals=normals, panel_h=panel_h)


# distances and cones


def boundary_distance(mesh: BoundaryMesh, z) -> np.ndarray:
    """dist(z, boundary): exact for disk, sphere and lens; otherwise nearest
    node refined by one Newton step on the parametrization."""
    spec = mesh.spec
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if spec.kind in ("disk", "sphere3"):
        return np.abs(spec.r - np.linalg.norm(z, axis=-1))
    if spec.kind == "teardrop":
        return _lens_distance(spec, z)
    d2 = np.sum((z[:, None, :] - mesh.nodes[None, :, :]) ** 2, axis=-1)
    i = np.argmin(d2, axis=1)
    t = mesh.parametric_t[i]
    p, v, acc = spec.curve(t)
    r = p - z
    f1 = np.sum(r * v, -1)
    f2 = np.sum(v * v, -1) + np.sum(r * acc, -1)
    t_new = t - f1 / f2
    p_new, _, _ = spec.curve(t_new)
    return np.minimum(np.sqrt(d2[np.arange(len(i)), i]), np.linalg.norm(p_new - z, axis=-1))


def _lens_distance(spec: DomainSpec, z: np.ndarray) -> np.ndarray:
    R, g = spec.lens_radius, spec.gamma
    best = np.full(z.shape[0], np.inf)
    for center, start in spec.lens_arcs():
        rel = z - center
        ang = np.mod(np.arctan2(rel[:, 1], rel[:, 0]) - start, 2 * math.pi)
        on_arc = ang <= g
        radial = np.abs(R - np.linalg.norm(rel, axis=-1))
        ends = [center + R * np.array([math.cos(start + s), math.sin(start + s)]) for s in (0.0, g)]
        endpoint = np.minimum(*(np.linalg.norm(z - e, axis=-1) for e in ends))
        best = np.minimum(best, np.where(on_arc, radial, endpoint))
    return best


@dataclass(frozen=True, eq=False)
class ConePoint:
    """Samples approaching the boundary point x along the inward normal."""

    x: np.ndarray
    normal: np.ndarray
    kappa: float
    heights: np.ndarray
    samples: np.ndarray
    node: int


def cone_ladder(mesh: BoundaryMesh, node: int, heights, kappa: float = 1.0, side: str = "interior") -> ConePoint:
    """Points x - h nu (interior) or x + h nu (exterior), checked against the
    aperture condition |z - x| < (1 + kappa) dist(z, boundary)."""
    if kappa <= 0:
        raise GeometryError("kappa must be positive")
    h = np.asarray(heights, dtype=float)
    if np.any(h <= 0) or np.any(np.diff(h) >= 0):
        raise GeometryError("heights must be positive and strictly decreasing")
    x = mesh.nodes[node]
    nu = mesh.normals[node]
    sgn = -1.0 if side == "interior" else 1.0
    z = x + sgn * h[:, None] * nu
    dist = boundary_distance(mesh, z)
    if np.any(np.linalg.norm(z - x, axis=-1) >= (1 + kappa) * dist):
        raise GeometryError("cone samples leave the nontangential approach region")
    return ConePoint(x=x, normal=nu, kappa=kappa, heights=h, samples=z, node=node)


# Ahlfors regularity


@dataclass(frozen=True)
class AhlforsRow:
    r: float
    lower: float
    upper: float


def ahlfors_profile(mesh: BoundaryMesh, radii, centers=None) -> list[AhlforsRow]:
    """min/max over centers of sigma(closed ball(x, r) on the boundary) / r^(n-1)."""
    radii = np.asarray(radii, dtype=float)
    diam = mesh.diameter()
    if np.any(radii <= 4 * mesh.panel_h) or np.any(radii >= 2 * diam):
        raise GeometryError("radii must lie in (4*panel_h, 2*diam)")
    idx = np.arange(mesh.N) if centers is None else np.asarray(centers)
    rows = []
    measures = np.zeros((len(idx), len(radii)))
    for lo in range(0, len(idx), 256):
        block = idx[lo : lo + 256]
        d = np.linalg.norm(mesh.nodes[block, None, :] - mesh.nodes[None, :, :], axis=-1)
        for k, r in enumerate(radii):
            measures[lo : lo + len(block), k] = np.sum(np.where(d <= r, mesh.weights, 0.0), axis=1)
    ratios = measures / radii ** (mesh.dim - 1)
    for k, r in enumerate(radii):
        rows.append(AhlforsRow(float(r), float(ratios[:, k].min()), float(ratios[:, k].max())))
    return rows


# pseudo-balls


def pseudo_ball_contains(x, h, a: float, b: float, g: GrowthFunction, y) -> bool:
    """a|y-x| omega(|y-x|) < h.(y-x) < b, false when |y-x| is outside (0, D)."""
    d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    r = float(np.linalg.norm(d))
    if not 0 < r < g.D:
        return False
    proj = float(np.dot(h, d))
    return a * r * g(r) < proj < b


@dataclass(frozen=True)
class HourglassResult:
    per_node: np.ndarray
    ok: bool
    failures: list = field(default_factory=list)
    samples_used: int = 0


def _pseudo_ball_radius(a: float, b: float, g: GrowthFunction) -> float:
    """Largest rho admitting pseudo-ball points: a omega(rho) < 1 and a rho omega(rho) < b."""
    top = min(g.D, 1e6) * (1 - 1e-12)

    def ok(r):
        w = g(r)
        return a * w < 1 and a * r * w < b

    if ok(top):
        return top
    lo, hi = 1e-300, top
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return lo


def _frame(h: np.ndarray) -> np.ndarray:
    """Orthonormal completion of the unit vector h (rows after the first)."""
    n = h.shape[0]
    basis = [h]
    for e in np.eye(n):
        v = e - sum(np.dot(e, q) * q for q in basis)
        if np.linalg.norm(v) > 1e-8:
            basis.append(v / np.linalg.norm(v))
        if len(basis) == n:
            break
    return np.array(basis[1:])


def pseudo_ball_samples(x, h, a: float, b: float, g: GrowthFunction, n_r: int = 48, n_ang: int = 33) -> np.ndarray:
    """Polar-grid points of the pseudo-ball centred at x with axis h."""
    rho_max = _pseudo_ball_radius(a, b, g)
    rho = np.geomspace(rho_max * 1e-4, rho_max, n_r + 1)[1:] * (1 - 1e-9)
    cos_min = a * g(rho)
    h = np.asarray(h, dtype=float)
    perp = _frame(h)
    pts = []
    frac = (np.arange(1, n_ang + 1) / (n_ang + 1)) * 2 - 1  # open grid in (-1, 1)
    for r, cmin in zip(rho, cos_min):
        phi = frac * math.acos(min(1.0, cmin))
        if h.shape[0] == 2:
            dirs = np.cos(phi)[:, None] * h + np.sin(phi)[:, None] * perp[0]
        else:
            psi = 2 * math.pi * np.arange(8) / 8
            dirs = (
                np.cos(phi)[:, None, None] * h
                + np.sin(phi)[:, None, None] * (np.cos(psi)[None, :, None] * perp[0] + np.sin(psi)[None, :, None] * perp[1])
            ).reshape(-1, h.shape[0])
        cand = r * dirs
        proj = cand @ h
        keep = (proj > a * r * g(r)) & (proj < b)
        pts.append(x + cand[keep])
    return np.concatenate(pts) if pts else np.empty((0, h.shape[0]))


def hourglass_check(
    mesh: BoundaryMesh, g: GrowthFunction, a: float, b: float, nodes=None, max_samples: int = 50_000_000, n_r: int = 48, n_ang: int = 33
) -> HourglassResult:
    """Test G(x, -nu) inside the domain and G(x, nu) outside it at each node."""
    idx = np.arange(mesh.N) if nodes is None else np.asarray(nodes)
    per_node = np.ones(len(idx), dtype=bool)
    failures = []
    used = 0
    for k, i in enumerate(idx):
        x = mesh.nodes[i]
        h = -mesh.normals[i]
        for side, axis in (("interior", h), ("exterior", -h)):
            pts = pseudo_ball_samples(x, axis, a, b, g, n_r, n_ang)
            used += len(pts)
            if used > max_samples:
                raise GeometryError("pseudo-ball sampling budget exceeded")
            inside = mesh.spec.contains(pts)
            bad = ~inside if side == "interior" else inside
            if np.any(bad):
                per_node[k] = False
                failures.append((int(i), side, pts[np.argmax(bad)].tolist()))
    return HourglassResult(per_node=per_node, ok=bool(per_node.all()), failures=failures, samples_used=used)


def dyadic_bound_check(mesh: BoundaryMesh, g: GrowthFunction, x_index: int, r: float, d: float, c_ahlfors: float, quad=None) -> tuple[float, float, float, float]:
    """Discretized ball and tail integrals against their dyadic upper bounds.

    Returns (ball_lhs, ball_rhs, tail_lhs, tail_rhs) for
    int_{ball} omega(|x-y|)/|x-y|^(n-1+d) and its complement, with right sides
    C 2^(d+) 2^((n-1+d)+) / ln 2 times int omega(s)/s^d ds/s over (0, 2r) and
    (2r, 4 diam).
    """
    x = mesh.nodes[x_index]
    dist = np.linalg.norm(mesh.nodes - x, axis=-1)
    mask = np.arange(mesh.N) != x_index
    n = mesh.dim
    diam = mesh.diameter()
    ge = extend(g)
    vals = np.zeros(mesh.N)
    vals[mask] = mesh.weights[mask] * ge(dist[mask]) / dist[mask] ** (n - 1 + d)
    in_ball = mask & (dist <= r)
    ball_lhs = float(np.sum(vals[in_ball]))
    tail_lhs = float(np.sum(vals[mask & (dist > r)]))
    const = c_ahlfors * 2.0 ** max(d, 0.0) * 2.0 ** max(n - 1 + d, 0.0) / math.log(2.0)

    def radial(lo: float, hi: float) -> float:
        # int omega(s) s^(-d-1) ds in u = ln s
        q = QuadratureSpec() if quad is None else quad
        f = lambda u: np.exp(ge.log_eval(u) - d * u)
        edges = np.linspace(math.log(lo), math.log(hi), 400)
        return float(np.sum(fixed_gl(f, edges[:-1], edges[1:], q.order)))

    p0 = ge.small_exponent
    if d >= p0:
        ball_rhs = math.inf
    else:
        lo = 2 * r * math.exp(-45.0 / (p0 - d))
        ball_rhs = const * (radial(lo, 2 * r) + math.exp(ge.log_eval(math.log(lo)) - d * math.log(lo)) / (p0 - d))
    tail_rhs = const * radial(2 * r, 4 * diam) if 4 * diam > 2 * r else 0.0
    return ball_lhs, ball_rhs, tail_lhs, tail_rhs
