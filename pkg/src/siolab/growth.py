"""Growth functions (moduli of continuity) and their derived quantities.

Everything that integrates or takes suprema works in the log variable
``u = ln t``: closed-form kinds expose ``log_eval(u) = ln omega(e^u)``, which is
finite far outside the range of double precision ``t`` and keeps the index
estimates free of underflow.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Iterator, Mapping

import numpy as np

from .quadrature import CumulativeRule, QuadratureSpec

INF = math.inf

KINDS = (
    "power",
    "power_log_plus",
    "power_log_inv",
    "power_log_D",
    "max_powers",
    "min_powers",
    "tabulated",
    "extended",
)


class GrowthError(ValueError):
    pass


class DomainError(GrowthError):
    pass


class ExtrapolationError(GrowthError):
    pass


class NonDiniError(GrowthError):
    pass


class DivergenceError(GrowthError):
    pass


class EmptyGridError(GrowthError):
    pass


@dataclass(frozen=True)
class GrowthFunction:
    """A non-decreasing omega on (0, D) with omega(0+) = 0.

    Build instances with the named constructors (``GrowthFunction.power`` etc.)
    rather than by filling fields directly.
    """

    kind: str
    D: float = INF
    alpha: float | None = None
    beta: float | None = None
    theta: float | None = None
    table_t: tuple[float, ...] | None = None
    table_w: tuple[float, ...] | None = None
    base: "GrowthFunction | None" = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GrowthError(f"unknown growth kind {self.kind!r}")
        if not self.D > 0:
            raise GrowthError("D must be positive")
        a, b = self.alpha, self.beta
        if self.kind in ("power", "power_log_plus", "power_log_inv", "power_log_D"):
            if a is None or not a > 0:
                raise GrowthError(f"{self.kind} needs alpha > 0")
        if self.kind in ("power_log_plus", "power_log_inv", "power_log_D") and self.theta is None:
            raise GrowthError(f"{self.kind} needs theta")
        if self.kind == "power_log_D" and not math.isfinite(self.D):
            raise GrowthError("power_log_D requires D < infinity")
        if self.kind in ("max_powers", "min_powers"):
            if a is None or b is None or not 0 < a < b < 1:
                raise GrowthError(f"{self.kind} needs 0 < alpha < beta < 1")
        if self.kind == "tabulated":
            self._check_table()
        if self.kind == "extended":
            if self.base is None or math.isfinite(self.D):
                raise GrowthError("extended kind wraps a base and has D = infinity")

    def _check_table(self):
        t = np.asarray(self.table_t, dtype=float)
        w = np.asarray(self.table_w, dtype=float)
        if t.ndim != 1 or t.shape != w.shape or t.size < 2:
            raise GrowthError("table needs matching 1-d t and omega arrays of length >= 2")
        if np.any(t <= 0) or np.any(w <= 0):
            raise GrowthError("table entries must be positive")
        if np.any(np.diff(t) <= 0):
            raise GrowthError("table t values must be strictly increasing")
        if np.any(np.diff(w) < 0):
            raise GrowthError("table omega values must be non-decreasing")
        if t[-1] > self.D * (1 + 1e-15):
            raise GrowthError("table extends beyond D")

    # constructors

    @classmethod
    def power(cls, alpha: float, D: float = INF) -> "GrowthFunction":
        return cls("power", D=D, alpha=alpha)

    @classmethod
    def power_log_plus(cls, alpha: float, theta: float, D: float = INF) -> "GrowthFunction":
        return cls("power_log_plus", D=D, alpha=alpha, theta=theta)

    @classmethod
    def power_log_inv(cls, alpha: float, theta: float, D: float = INF) -> "GrowthFunction":
        return cls("power_log_inv", D=D, alpha=alpha, theta=theta)

    @classmethod
    def power_log_D(cls, alpha: float, theta: float, D: float) -> "GrowthFunction":
        return cls("power_log_D", D=D, alpha=alpha, theta=theta)

    @classmethod
    def max_powers(cls, alpha: float, beta: float, D: float = INF) -> "GrowthFunction":
        return cls("max_powers", D=D, alpha=alpha, beta=beta)

    @classmethod
    def min_powers(cls, alpha: float, beta: float, D: float = INF) -> "GrowthFunction":
        return cls("min_powers", D=D, alpha=alpha, beta=beta)

    @classmethod
    def tabulated(cls, t, omega, D: float | None = None) -> "GrowthFunction":
        t = tuple(float(v) for v in t)
        w = tuple(float(v) for v in omega)
        return cls("tabulated", D=t[-1] if D is None else D, table_t=t, table_w=w)

    # constants of the log-corrected kinds

    @property
    def log_offset(self) -> float:
        """A for power_log_plus, B for power_log_inv and power_log_D."""
        a, th = self.alpha, self.theta
        if self.kind == "power_log_plus":
            return max(1.0, -th / a)
        if self.kind in ("power_log_inv", "power_log_D"):
            return max(1.0, th / a)
        raise AttributeError(f"{self.kind} has no log offset")

    # evaluation

    def log_eval(self, u) -> np.ndarray:
        """ln omega(e^u), without domain checks."""
        u = np.asarray(u, dtype=float)
        k = self.kind
        if k == "power":
            return self.alpha * u
        if k == "power_log_plus":
            return self.alpha * u + self.theta * np.log(self.log_offset + np.maximum(u, 0.0))
        if k == "power_log_inv":
            return self.alpha * u + self.theta * np.log(self.log_offset + np.maximum(-u, 0.0))
        if k == "power_log_D":
            return self.alpha * u + self.theta * np.log(self.log_offset + math.log(self.D) - u)
        if k == "max_powers":
            return np.maximum(self.alpha * u, self.beta * u)
        if k == "min_powers":
            return np.minimum(self.alpha * u, self.beta * u)
        if k == "tabulated":
            lt = np.log(np.asarray(self.table_t))
            lw = np.log(np.asarray(self.table_w))
            p0 = self.small_exponent
            # below the table: the first segment's power law (integration tails only)
            return np.where(u < lt[0], lw[0] + p0 * (u - lt[0]), np.interp(u, lt, lw))
        return self.base.log_eval(np.minimum(u, math.log(self.base.D)))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise DomainError("growth functions are evaluated at t > 0")
        if self.kind == "tabulated":
            if np.any(t < self.table_t[0]) or np.any(t > self.table_t[-1]):
                raise ExtrapolationError("t outside the tabulated grid")
        elif np.any(t >= self.D):
            raise DomainError(f"t must lie in (0, D) with D={self.D}")
        out = np.exp(self.log_eval(np.log(t)))
        return float(out) if out.ndim == 0 else out

    def at_D(self) -> float:
        """omega(D) := lim omega(t) as t -> D-."""
        if not math.isfinite(self.D):
            raise DomainError("omega(D) is undefined for D = infinity")
        if self.kind == "tabulated":
            if self.table_t[-1] < self.D:
                raise ExtrapolationError("table does not reach D")
            return float(self.table_w[-1])
        return float(np.exp(self.log_eval(math.log(self.D))))

    # analytic metadata used by the integrators

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """Values of u where log_eval is not smooth."""
        k = self.kind
        if k in ("power_log_plus", "power_log_inv", "max_powers", "min_powers"):
            return (0.0,)
        if k == "tabulated":
            return tuple(float(v) for v in np.log(self.table_t))
        if k == "extended":
            return (*self.base.breakpoints, math.log(self.base.D))
        return ()

    @property
    def small_exponent(self) -> float:
        """p with omega(t) ~ t^p (up to logs) as t -> 0."""
        k = self.kind
        if k == "min_powers":
            return self.beta
        if k == "tabulated":
            lt = np.log(self.table_t[:2])
            lw = np.log(self.table_w[:2])
            return float((lw[1] - lw[0]) / (lt[1] - lt[0]))
        if k == "extended":
            return self.base.small_exponent
        return self.alpha

    @property
    def large_exponent(self) -> float | None:
        """p with omega(t) ~ t^p (up to logs) as t -> infinity, None if unknown."""
        k = self.kind
        if k == "max_powers":
            return self.beta
        if k == "extended":
            return 0.0
        if k == "tabulated":
            return None
        return self.alpha

    # config grammar

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        if self.kind == "extended":
            out["base"] = self.base.to_dict()
            return out
        out["D"] = self.D if math.isfinite(self.D) else "inf"
        for key in ("alpha", "beta", "theta"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        if self.kind == "tabulated":
            out["t"] = list(self.table_t)
            out["omega"] = list(self.table_w)
        return out

    @classmethod
    def from_dict(cls, spec: Mapping[str, Any]) -> "GrowthFunction":
        spec = dict(spec)
        kind = spec.pop("kind", None)
        if kind == "extended":
            return extend(cls.from_dict(spec["base"]))
        D = _parse_D(spec.pop("D", INF))
        if kind == "tabulated":
            return cls.tabulated(spec.pop("t"), spec.pop("omega"), D=D if math.isfinite(D) else None)
        allowed = {"alpha", "beta", "theta"}
        unknown = set(spec) - allowed
        if unknown:
            raise GrowthError(f"unknown keys for omega: {sorted(unknown)}")
        return cls(kind, D=D, **{k: float(v) for k, v in spec.items()})


def _parse_D(value) -> float:
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "infinity", "+inf"):
            return INF
        raise GrowthError(f"cannot parse D={value!r}")
    return float(value)


def extend(g: GrowthFunction) -> GrowthFunction:
    """omega~(t) = omega(min(t, D)) on (0, infinity)."""
    if not math.isfinite(g.D):
        return g
    g.at_D()  # tabulated tables must reach D
    return GrowthFunction("extended", D=INF, base=g)


# integrals in u = ln t


class _Integrals:
    """Cumulative rules for phi1(u) = omega(e^u) and phi2(u) = omega(e^u) e^-u."""

    def __init__(self, g: GrowthFunction, u_min: float, u_max: float, quad: QuadratureSpec):
        self.g = g
        p0 = g.small_exponent
        if not p0 > 0:
            raise NonDiniError("omega does not decay like a positive power at 0; Dini integral diverges")
        lo = u_min - quad.decay_margin / p0
        if g.kind == "tabulated":
            lo = min(lo, math.log(g.table_t[0]))
        phi1 = lambda u: np.exp(g.log_eval(u))
        phi2 = lambda u: np.exp(g.log_eval(u) - u)
        self.rule1 = CumulativeRule(phi1, lo, u_max, g.breakpoints, quad)
        self.tail1 = float(phi1(lo)) / p0
        if math.isfinite(g.D):
            hi = math.log(g.D)
            self.tail2 = 0.0
        else:
            p_inf = g.large_exponent
            if p_inf is None or not p_inf < 1:
                raise DivergenceError("tail integral at D = infinity is not known to converge")
            hi = max(u_max, *(b for b in g.breakpoints), 0.0) + quad.decay_margin / (1.0 - p_inf)
            self.tail2 = float(phi2(hi)) / (1.0 - p_inf)
        self.rule2 = CumulativeRule(phi2, min(u_min, hi - 1.0), hi, g.breakpoints, quad)

    def lower(self, u) -> np.ndarray:
        """int_{-inf}^{u} omega(e^s) ds."""
        return self.tail1 + self.rule1.below(u)

    def upper(self, u) -> np.ndarray:
        """int_{u}^{ln D} omega(e^s) e^-s ds."""
        return self.rule2.above(u) + self.tail2


def _log_args(g: GrowthFunction, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0) or np.any(t >= g.D):
        raise DomainError(f"t must lie in (0, D) with D={g.D}")
    return np.log(t)


def _scalar_or_array(x: np.ndarray):
    return float(x) if np.ndim(x) == 0 else x


def zygmund_transform(g: GrowthFunction, t, quad: QuadratureSpec = QuadratureSpec()):
    """omega_Z(t) = int_0^t omega(s) ds/s + t int_t^D omega(s) ds/s^2."""
    u = _log_args(g, t)
    ints = _Integrals(g, float(np.min(u)), float(np.max(u)), quad)
    return _scalar_or_array(ints.lower(u) + np.exp(u) * ints.upper(u))


def w_omega(g: GrowthFunction, t, quad: QuadratureSpec = QuadratureSpec()):
    """W_omega(t) = int_t^D omega(s) ds/s^2."""
    u = _log_args(g, t)
    ints = _Integrals(g, float(np.min(u)), float(np.max(u)), quad)
    return _scalar_or_array(ints.upper(u))


def integral_of_w(g: GrowthFunction, tau, quad: QuadratureSpec = QuadratureSpec()):
    """int_0^tau W_omega(t) dt, by an outer panel rule over nested W evaluations."""
    v = _log_args(g, tau)
    p0 = g.small_exponent
    lo = float(np.min(v)) - quad.decay_margin / p0
    ints = _Integrals(g, lo, float(np.max(v)), quad)
    psi = lambda s: ints.upper(s) * np.exp(s)
    outer = CumulativeRule(psi, lo, float(np.max(v)), g.breakpoints, quad)
    tail = float(psi(lo)) / p0
    return _scalar_or_array(tail + outer.below(v))


def dini_integral(g: GrowthFunction, quad: QuadratureSpec = QuadratureSpec()) -> float:
    """int_0^D omega(t) / max(t, t^2) dt."""
    top = min(0.0, math.log(g.D)) if math.isfinite(g.D) else 0.0
    ints = _Integrals(g, top - 1.0, top, quad)
    value = float(ints.lower(top))
    if not math.isfinite(g.D) or g.D > 1.0:
        value += float(ints.upper(0.0))
    return value


# dilation function and indices


@dataclass(frozen=True)
class LogGrid:
    """Sampling description for grid suprema.

    The t-grid has ``n_t`` points placed at log-spaced offsets ``span`` below the
    top of the admissible range in u = ln t (and symmetric about u = 0 when
    D = infinity). Index estimates use s = 10^(-k) and 10^(+k) for the two
    decade exponents k in ``decades``.
    """

    n_t: int = 512
    span: tuple[float, float] = (1e-12, 1e8)
    decades: tuple[float, float] = (300.0, 3000.0)
    tol: float = 0.05
    n_sample: int = 96

    def __post_init__(self):
        if self.n_t < 2 or self.n_sample < 2:
            raise EmptyGridError("grids need at least two points")
        if not 0 < self.span[0] < self.span[1]:
            raise GrowthError("span must be increasing and positive")
        if not 0 < self.decades[0] < self.decades[1]:
            raise GrowthError("decades must be increasing and positive")


def _u_grid(g: GrowthFunction, log_s: float, grid: LogGrid) -> np.ndarray:
    offsets = np.geomspace(grid.span[0], grid.span[1], grid.n_t)
    if g.kind == "tabulated":
        lt = np.log(np.asarray(g.table_t))
        lo = max(lt[0], lt[0] - log_s)
        hi = min(lt[-1], lt[-1] - log_s)
        if not hi >= lo:
            raise EmptyGridError("no t in the table with ts also in the table")
        return np.linspace(lo, hi, grid.n_t)
    if math.isfinite(g.D):
        top = math.log(g.D) - max(0.0, log_s)
        return top - offsets
    kinks = np.asarray(g.breakpoints + (0.0,))
    pts = np.concatenate([-offsets, offsets, kinks, kinks - log_s])
    return np.unique(pts)


def log_dilation(g: GrowthFunction, log_s: float, grid: LogGrid = LogGrid()) -> float:
    """ln h_omega(s) for s = e^log_s, as a grid supremum (a lower estimate)."""
    u = _u_grid(g, log_s, grid)
    if u.size == 0:
        raise EmptyGridError("empty t-grid")
    return float(np.max(g.log_eval(u + log_s) - g.log_eval(u)))


def dilation_function(g: GrowthFunction, s: float, grid: LogGrid = LogGrid()) -> float:
    """h_omega(s) = sup over 0 < t < min(D, D/s) of omega(ts)/omega(t)."""
    if not s > 0:
        raise GrowthError("s must be positive")
    return math.exp(log_dilation(g, math.log(s), grid))


@dataclass(frozen=True)
class DilationIndices:
    lower: float
    upper: float
    converged: bool
    raw_lower: tuple[float, float]
    raw_upper: tuple[float, float]

    def __iter__(self) -> Iterator[float]:
        return iter((self.lower, self.upper))


def dilation_indices(g: GrowthFunction, grid: LogGrid = LogGrid()) -> DilationIndices:
    """Extrapolated limits of ln h(s)/ln s as s -> 0 and s -> infinity.

    Raw ratios at two decades are combined assuming an O(1/ln s) error, which is
    exact for power-type kinds and removes the leading log correction otherwise.
    """
    L1, L2 = (k * math.log(10.0) for k in grid.decades)

    def extrapolate(sign: float) -> tuple[float, tuple[float, float]]:
        e1 = log_dilation(g, sign * L1, grid) / (sign * L1)
        e2 = log_dilation(g, sign * L2, grid) / (sign * L2)
        return (L2 * e2 - L1 * e1) / (L2 - L1), (e1, e2)

    lower, raw_lo = extrapolate(-1.0)
    upper, raw_hi = extrapolate(1.0)
    converged = abs(raw_lo[1] - raw_lo[0]) <= grid.tol and abs(raw_hi[1] - raw_hi[0]) <= grid.tol
    if lower > upper:
        # both estimate a common value; keep the ordering i <= I
        lower = upper = 0.5 * (lower + upper)
    return DilationIndices(lower, upper, converged, raw_lo, raw_hi)


# summary analysis


@dataclass(frozen=True)
class GrowthAnalysis:
    doubling_constant: float
    dini_integral: float
    zygmund_constant: float
    i_lower: float
    i_upper: float
    grid_spec: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def sample_points(g: GrowthFunction, grid: LogGrid = LogGrid()) -> np.ndarray:
    """Log-spaced t values inside (0, D) used for grid suprema."""
    if g.kind == "tabulated":
        return np.geomspace(g.table_t[0], g.table_t[-1], grid.n_sample)
    if math.isfinite(g.D):
        return g.D * np.exp(-np.geomspace(1e-6, 60.0, grid.n_sample))
    return np.geomspace(1e-12, 1e12, grid.n_sample)


def zygmund_constant(g: GrowthFunction, grid: LogGrid = LogGrid(), quad: QuadratureSpec = QuadratureSpec()) -> float:
    t = sample_points(g, grid)
    return float(np.max(zygmund_transform(g, t, quad) / g(t)))


def analyze(g: GrowthFunction, grid: LogGrid = LogGrid(), quad: QuadratureSpec = QuadratureSpec()) -> GrowthAnalysis:
    idx = dilation_indices(g, grid)
    return GrowthAnalysis(
        doubling_constant=math.exp(log_dilation(g, math.log(2.0), grid)),
        dini_integral=dini_integral(g, quad),
        zygmund_constant=zygmund_constant(g, grid, quad),
        i_lower=idx.lower,
        i_upper=idx.upper,
        grid_spec={**asdict(grid), "indices_converged": idx.converged},
    )


def extension_ratio_constant(g: GrowthFunction, c_zyg: float) -> float:
    """C2 bounding omega~(t2)/t2 <= C2 omega~(t1)/t1 for t1 <= t2."""
    if not math.isfinite(g.D):
        return c_zyg
    return c_zyg + max(1.0, c_zyg) * g.at_D() / g(g.D / 2)
