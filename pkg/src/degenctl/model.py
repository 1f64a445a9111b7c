"""Shared data substrate: grids, degenerate diffusion coefficients, control
regions, integral kernels, weighted quadrature and nonlocal-term evaluation.

Spatial profiles are plain 1-D numpy arrays with one value per grid node
(``shape (n+1,)``); space-time fields are 2-D arrays with one profile per
time level (``shape (m+1, n+1)``).  All routines here are pure functions of
their inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

# Coefficient forms
NONDIV = "nondiv"   # y_t - a y_xx, Dirichlet at both ends
DIV_WD = "wd"       # y_t - (a y_x)_x, weakly degenerate, Dirichlet at both ends
DIV_SD = "sd"       # y_t - (a y_x)_x, strongly degenerate, zero flux at x=0

FORMS = (NONDIV, DIV_WD, DIV_SD)

# Exponent clamp used whenever a stored log-weight is materialised; keeps
# exp() inside the double-precision range so weighted ratios never become 0/0.
EXP_CLAMP = 700.0


def clamped_exp(exponent: np.ndarray | float) -> np.ndarray:
    """exp(exponent) with finite exponents clipped to +-EXP_CLAMP.

    Exact -inf exponents (and the 0*inf NaN artefacts at the singular time
    endpoints, where the true weight limit is 0) map to exactly 0; finite
    underflows are floored at e^-EXP_CLAMP so that ratios of two clamped
    weights never degenerate to 0/0.
    """
    e = np.asarray(exponent, dtype=float)
    zero = np.isnan(e) | np.isneginf(e)
    out = np.exp(np.clip(np.where(zero, 0.0, e), -EXP_CLAMP, EXP_CLAMP))
    return np.where(zero, 0.0, out)


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpatialGrid:
    """Nodes 0 = x_0 < x_1 < ... < x_n = 1 with trapezoid quadrature weights."""

    nodes: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float)
        if x.ndim != 1 or x.size < 3:
            raise ValueError("need at least 3 nodes")
        if x[0] != 0.0 or x[-1] != 1.0:
            raise ValueError("grid endpoints must be exactly 0 and 1")
        if np.any(np.diff(x) <= 0):
            raise ValueError("nodes must be strictly increasing")
        object.__setattr__(self, "nodes", x)

    @classmethod
    def uniform(cls, n: int) -> "SpatialGrid":
        return cls(np.linspace(0.0, 1.0, n + 1))

    @classmethod
    def geometric(cls, n: int, ratio: float = 1.0) -> "SpatialGrid":
        """Grid clustered toward x = 0; cell sizes grow by `1/ratio` per cell.

        ratio = 1 reproduces the uniform grid; ratio in (0, 1) refines near
        the degeneracy point.
        """
        if not 0.0 < ratio <= 1.0:
            raise ValueError("ratio must be in (0, 1]")
        if ratio == 1.0:
            return cls.uniform(n)
        r = 1.0 / ratio
        h = r ** np.arange(n)
        x = np.concatenate(([0.0], np.cumsum(h)))
        return cls(x / x[-1])

    @property
    def n(self) -> int:
        return self.nodes.size - 1

    @property
    def spacing(self) -> np.ndarray:
        """h_i = x_i - x_{i-1} for i = 1..n (length n)."""
        return np.diff(self.nodes)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid-rule node weights (length n+1)."""
        h = self.spacing
        w = np.empty(self.n + 1)
        w[0] = 0.5 * h[0]
        w[-1] = 0.5 * h[-1]
        w[1:-1] = 0.5 * (h[:-1] + h[1:])
        return w

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[:-1] + self.nodes[1:])


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time levels t_0 = 0 < ... < t_m = T."""

    T: float
    m: int

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("horizon T must be positive")
        if self.m < 2:
            raise ValueError("need at least 2 time steps")

    @property
    def dt(self) -> float:
        return self.T / self.m

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.m + 1)

    @property
    def midtimes(self) -> np.ndarray:
        t = self.times
        return 0.5 * (t[:-1] + t[1:])


# ---------------------------------------------------------------------------
# Degenerate diffusion coefficient
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DegenerateCoefficient:
    """Diffusion a(x) vanishing at x = 0, with its form tag and exponent.

    `form` selects the operator (NONDIV / DIV_WD / DIV_SD), `alpha` is the
    degeneracy exponent used in the admissibility hypotheses, `a`/`da`
    evaluate a(x) and a'(x).  `power_law` marks the built-in a(x) = x^alpha,
    for which several integrals get analytic first-cell treatment.
    `beta_near0` is the monotonicity exponent used by the strongly
    degenerate hypothesis check.
    """

    form: str
    alpha: float
    a: Callable[[np.ndarray], np.ndarray]
    da: Callable[[np.ndarray], np.ndarray]
    power_law: bool = False
    beta_near0: float | None = None

    def __post_init__(self):
        if self.form not in FORMS:
            raise ValueError(f"unknown form {self.form!r}")

    @classmethod
    def power(cls, form: str, alpha: float,
              beta_near0: float | None = None) -> "DegenerateCoefficient":
        """The built-in power law a(x) = x**alpha."""
        def a(x):
            x = np.asarray(x, dtype=float)
            with np.errstate(divide="ignore"):
                return np.where(x > 0, x ** alpha, 0.0 if alpha > 0 else 1.0)

        def da(x):
            x = np.asarray(x, dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                d = alpha * x ** (alpha - 1.0)
            return np.where(x > 0, d, 0.0)

        if beta_near0 is None and form == DIV_SD:
            beta_near0 = alpha if alpha > 1 else 0.5
        return cls(form, alpha, a, da, power_law=True, beta_near0=beta_near0)

    @classmethod
    def from_callable(cls, form: str, alpha: float, a, da,
                      beta_near0: float | None = None) -> "DegenerateCoefficient":
        return cls(form, alpha, a, da, power_law=False, beta_near0=beta_near0)

    @classmethod
    def from_table(cls, form: str, alpha: float, x: np.ndarray,
                   values: np.ndarray,
                   beta_near0: float | None = None) -> "DegenerateCoefficient":
        """Tabulated coefficient, linearly interpolated; a' by the table slope."""
        x = np.asarray(x, dtype=float)
        v = np.asarray(values, dtype=float)
        slopes = np.diff(v) / np.diff(x)

        def a(xx):
            return np.interp(xx, x, v)

        def da(xx):
            idx = np.clip(np.searchsorted(x, xx, side="right") - 1, 0,
                          slopes.size - 1)
            return slopes[idx]

        return cls(form, alpha, a, da, power_law=False, beta_near0=beta_near0)


@dataclass
class ValidationEntry:
    name: str
    passed: bool
    value: float | None = None
    detail: str = ""


@dataclass
class ValidationReport:
    entries: list[ValidationEntry] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(e.passed for e in self.entries)

    def add(self, name, passed, value=None, detail=""):
        self.entries.append(ValidationEntry(name, bool(passed),
                                            None if value is None else float(value),
                                            detail))

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "entries": [
                {"name": e.name, "passed": e.passed, "value": e.value,
                 "detail": e.detail}
                for e in self.entries
            ],
        }


_ALPHA_RANGES = {NONDIV: (0.0, 2.0), DIV_WD: (0.0, 1.0), DIV_SD: (1.0, 2.0)}


def validate_coefficient(coef: DegenerateCoefficient,
                         grid: SpatialGrid) -> ValidationReport:
    """Check the admissibility hypotheses of a coefficient on a grid.

    Produces per-hypothesis pass/fail entries: degeneracy at x = 0,
    positivity on (0, 1], the form's alpha range, x a'(x) <= alpha a(x),
    monotonicity of x^alpha / a, integrability of 1/a and 1/sqrt(a)
    (trapezoid on (x_1, 1) plus the analytic tail exponent for power laws),
    the curvature bound (x a'/a)_xx <= c/a with the smallest admissible c,
    and, for the strongly degenerate form, the near-zero monotonicity of
    a(x)/x^beta.
    """
    rep = ValidationReport()
    x = grid.nodes
    xi = x[1:]  # interior + right endpoint
    a0 = float(np.asarray(coef.a(np.array([0.0])))[0])
    ai = np.asarray(coef.a(xi), dtype=float)
    dai = np.asarray(coef.da(xi), dtype=float)

    rep.add("a(0) = 0", abs(a0) <= 1e-14, a0)
    amin = float(ai.min())
    rep.add("a > 0 on (0,1]", amin > 0.0, amin)
    lo, hi = _ALPHA_RANGES[coef.form]
    left_closed = coef.form != NONDIV  # WD admits alpha = 0, SD admits alpha = 1
    in_range = (lo <= coef.alpha < hi) if left_closed else (lo < coef.alpha < hi)
    rep.add("alpha in range" if in_range else "alpha out of range",
            in_range, coef.alpha,
            f"form {coef.form} requires alpha in "
            f"{'[' if left_closed else '('}{lo}, {hi})")
    if amin <= 0.0:
        return rep  # remaining checks would divide by a

    # (i) x a'(x) <= alpha a(x)
    slack = xi * dai - coef.alpha * ai
    worst = float(slack.max())
    rep.add("x a' <= alpha a", worst <= 1e-10 * max(1.0, float(ai.max())), worst)

    # (ii) x^alpha / a nondecreasing
    g = xi ** coef.alpha / ai
    dec = float(np.max(g[:-1] - g[1:]))
    rep.add("x^alpha/a nondecreasing", dec <= 1e-10 * max(1.0, float(np.max(g))), dec)

    # (iii) integrability of 1/a and 1/sqrt(a)
    w = grid.weights[1:]
    int_inv_a = float(np.sum(w / ai))
    int_inv_sqrt = float(np.sum(w / np.sqrt(ai)))
    if coef.power_law:
        inv_a_ok = coef.alpha < 1.0
        inv_sqrt_ok = coef.alpha < 2.0
        tail = "analytic tail exponent"
    else:
        # local exponent near 0 estimated from the first two interior nodes
        alpha_loc = math.log(float(ai[1]) / float(ai[0])) / math.log(x[2] / x[1])
        inv_a_ok = alpha_loc < 1.0
        inv_sqrt_ok = alpha_loc < 2.0
        tail = f"estimated near-0 exponent {alpha_loc:.3f}"
    rep.add("1/a integrable", inv_a_ok, int_inv_a, tail)
    rep.add("1/sqrt(a) integrable", inv_sqrt_ok, int_inv_sqrt, tail)

    # (iv) curvature bound on rho = x a'/a: rho_xx <= c / a; report smallest c
    if coef.form == NONDIV:
        rho = xi * dai / ai
        if coef.power_law:
            c_min = 0.0  # rho is constant, so its curvature is exactly zero
        else:
            hl, hr = np.diff(xi)[:-1], np.diff(xi)[1:]
            d2 = 2.0 * (rho[:-2] / (hl * (hl + hr)) - rho[1:-1] / (hl * hr)
                        + rho[2:] / (hr * (hl + hr)))
            c_min = float(np.max(np.maximum(d2 * ai[1:-1], 0.0)))
        rep.add("(x a'/a)_xx <= c/a", True, c_min,
                "smallest admissible c (0 means any c > 0 works)")

    # strongly degenerate near-0 monotonicity of a/x^beta
    if coef.form == DIV_SD:
        beta = coef.beta_near0 if coef.beta_near0 is not None else coef.alpha
        beta_ok = (1.0 < beta <= coef.alpha) if coef.alpha > 1 else (0.0 < beta < 1.0)
        k = max(2, grid.n // 4)
        gnear = ai[:k] / xi[:k] ** beta
        mono = float(np.max(gnear[:-1] - gnear[1:]))
        rep.add("a/x^beta nondecreasing near 0",
                beta_ok and mono <= 1e-10 * max(1.0, float(np.max(gnear))),
                mono, f"beta = {beta}")
    return rep


# ---------------------------------------------------------------------------
# Control region
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ControlRegion:
    """Control interval omega = (a_bar, b_bar) with a nested observation
    subinterval omega_tilde used by the auxiliary weight profile."""

    omega: tuple[float, float]
    omega_tilde: tuple[float, float] | None = None

    def __post_init__(self):
        a, b = self.omega
        if not (0.0 < a < b < 1.0):
            raise ValueError("omega must be compactly contained in (0,1)")
        if self.omega_tilde is None:
            # default: middle half of omega
            q = 0.25 * (b - a)
            object.__setattr__(self, "omega_tilde", (a + q, b - q))
        ta, tb = self.omega_tilde
        if not (a < ta < tb < b):
            raise ValueError("omega_tilde must be strictly inside omega")

    def mask(self, grid: SpatialGrid) -> np.ndarray:
        """Indicator of omega on the grid nodes (float array)."""
        a, b = self.omega
        x = grid.nodes
        return ((x > a) & (x < b)).astype(float)


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelSpec:
    """Integral kernel K(t, x, tau) on (0,T) x (0,1)^2.

    Variants: ``zero``; ``constant_decay`` kappa0 * exp(-decay/(T-t)^2);
    ``separable_decay`` k1(x) * k2(tau) * exp(-decay/(T-t)^2); ``tabulated``
    values on the (t, x, tau) grid, linearly interpolated in t.  An optional
    support window restricts the kernel to omega x omega.
    """

    kind: str
    T: float
    kappa0: float = 0.0
    decay: float = 0.0
    k1: np.ndarray | None = None
    k2: np.ndarray | None = None
    table: np.ndarray | None = None
    table_times: np.ndarray | None = None
    support: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in ("zero", "constant_decay", "separable_decay",
                             "tabulated"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.decay < 0:
            raise ValueError("decay constant must be >= 0")
        if self.kind == "tabulated":
            if self.table is None or self.table_times is None:
                raise ValueError("tabulated kernel needs table and table_times")

    @classmethod
    def zero(cls, T: float) -> "KernelSpec":
        return cls("zero", T)

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or (
            self.kind == "constant_decay" and self.kappa0 == 0.0)

    def decay_factor(self, t: float) -> float:
        if self.decay == 0.0:
            return 1.0
        dt = self.T - t
        if dt <= 0.0:
            return 0.0
        return math.exp(max(-self.decay / dt ** 2, -EXP_CLAMP))

    def _support_mask(self, grid: SpatialGrid) -> np.ndarray | None:
        if self.support is None:
            return None
        a, b = self.support
        return ((grid.nodes > a) & (grid.nodes < b)).astype(float)

    def matrix(self, t: float, grid: SpatialGrid) -> np.ndarray:
        """Dense node matrix M[i, j] = K(t, x_i, tau_j)."""
        npts = grid.n + 1
        if self.kind == "zero":
            return np.zeros((npts, npts))
        if self.kind == "tabulated":
            tt = self.table_times
            if t < tt[0] - 1e-12 or t > tt[-1] + 1e-12:
                raise ValueError(f"tabulated kernel has no data at t = {t}")
            j = int(np.clip(np.searchsorted(tt, t) - 1, 0, tt.size - 2))
            w = (t - tt[j]) / (tt[j + 1] - tt[j])
            w = min(max(w, 0.0), 1.0)
            M = (1.0 - w) * self.table[j] + w * self.table[j + 1]
        elif self.kind == "constant_decay":
            M = np.full((npts, npts), self.kappa0 * self.decay_factor(t))
        else:
            M = self.decay_factor(t) * np.outer(self.k1, self.k2)
        sm = self._support_mask(grid)
        if sm is not None:
            M = M * np.outer(sm, sm)
        return M

    def restrict(self, t0: float) -> "KernelSpec":
        """Kernel seen from the sub-horizon [t0, T], re-parameterised so that
        its time argument starts at 0.  The decay variants depend on t only
        through T - t, so only the horizon changes."""
        T2 = self.T - t0
        if self.kind == "tabulated":
            tt = self.table_times
            keep = tt >= t0 - 1e-12
            new_times = np.concatenate(([0.0], tt[keep] - t0)) \
                if not keep[0] else tt[keep] - t0
            if keep[0]:
                new_table = self.table[keep]
            else:
                first = self.matrix_raw(t0)
                new_table = np.concatenate(([first], self.table[keep]))
            return KernelSpec("tabulated", T2, table=new_table,
                              table_times=new_times, support=self.support)
        return KernelSpec(self.kind, T2, kappa0=self.kappa0, decay=self.decay,
                          k1=self.k1, k2=self.k2, support=self.support)

    def matrix_raw(self, t: float) -> np.ndarray:
        tt = self.table_times
        j = int(np.clip(np.searchsorted(tt, t) - 1, 0, tt.size - 2))
        w = min(max((t - tt[j]) / (tt[j + 1] - tt[j]), 0.0), 1.0)
        return (1.0 - w) * self.table[j] + w * self.table[j + 1]


def apply_nonlocal(kernel: KernelSpec, y: np.ndarray, t: float,
                   grid: SpatialGrid, transpose: bool = False) -> np.ndarray:
    """Quadrature of integral_0^1 K(t, x, tau) y(tau) dtau at every node x.

    With ``transpose`` the roles of x and tau swap, which is the coupling
    appearing in the adjoint system.
    """
    if kernel.is_zero:
        return np.zeros_like(np.asarray(y, dtype=float))
    M = kernel.matrix(t, grid)
    wy = grid.weights * np.asarray(y, dtype=float)
    return (M.T if transpose else M) @ wy


# ---------------------------------------------------------------------------
# Weighted quadrature
# ---------------------------------------------------------------------------

def weighted_inner(u: np.ndarray, v: np.ndarray, coef: DegenerateCoefficient,
                   grid: SpatialGrid, weight: str = "one") -> float:
    """Trapezoid value of integral u v dx (weight "one") or u v / a dx
    (weight "inv_a").

    At x = 0 the 1/a integrand is taken as 0 when both factors vanish there
    (the correct limit for profiles vanishing at the degeneracy); otherwise
    the first interior value is extrapolated.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.shape != grid.nodes.shape:
        raise ValueError("profile shapes must match the grid")
    if weight == "one":
        integrand = u * v
    elif weight == "inv_a":
        a = np.asarray(coef.a(grid.nodes), dtype=float)
        integrand = np.empty_like(u)
        integrand[1:] = u[1:] * v[1:] / a[1:]
        if u[0] == 0.0 and v[0] == 0.0:
            integrand[0] = 0.0
        elif a[0] > 0.0:
            integrand[0] = u[0] * v[0] / a[0]
        else:
            integrand[0] = integrand[1]
    else:
        raise ValueError(f"unknown weight {weight!r}")
    if not np.all(np.isfinite(integrand[1:-1])):
        raise ValueError("non-finite integrand at an interior node")
    return float(np.dot(grid.weights, integrand))


def weighted_norm(u: np.ndarray, coef: DegenerateCoefficient,
                  grid: SpatialGrid, weight: str = "one") -> float:
    return math.sqrt(max(weighted_inner(u, u, coef, grid, weight), 0.0))


def natural_weight(form: str) -> str:
    """Norm weight natural to each operator form: 1/a for the non-divergence
    problem, plain Lebesgue for the divergence problems."""
    return "inv_a" if form == NONDIV else "one"


def gradient(u: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """Nodal derivative: central differences inside, one-sided second order
    at the endpoints."""
    x = grid.nodes
    u = np.asarray(u, dtype=float)
    g = np.empty_like(u)
    g[1:-1] = (u[2:] - u[:-2]) / (x[2:] - x[:-2])
    h0, h1 = x[1] - x[0], x[2] - x[1]
    g[0] = (-(2 * h0 + h1) * u[0] / (h0 * (h0 + h1))
            + (h0 + h1) * u[1] / (h0 * h1)
            - h0 * u[2] / (h1 * (h0 + h1)))
    hm, hm1 = x[-1] - x[-2], x[-2] - x[-3]
    g[-1] = ((2 * hm + hm1) * u[-1] / (hm * (hm + hm1))
             - (hm + hm1) * u[-2] / (hm * hm1)
             + hm * u[-3] / (hm1 * (hm + hm1)))
    return g


def grad_norm_sq(u: np.ndarray, grid: SpatialGrid) -> float:
    """Plain L^2 norm squared of the nodal derivative."""
    g = gradient(u, grid)
    return float(np.dot(grid.weights, g * g))


# ---------------------------------------------------------------------------
# Kernel hypothesis quantities
# ---------------------------------------------------------------------------

@dataclass
class SupResult:
    value: float
    finite: bool
    analytic: bool
    lower_bound_only: bool = False

    def as_dict(self) -> dict:
        return {"value": self.value, "finite": self.finite,
                "analytic": self.analytic,
                "lower_bound_only": self.lower_bound_only}


def _kernel_base_integral(kernel: KernelSpec, coef: DegenerateCoefficient,
                          grid: SpatialGrid, M: np.ndarray,
                          weight: str) -> float:
    """Quadrature of integral integral M(x,tau)^2 / a(x) dtau dx (or without
    the 1/a weight).  The x = 0 cell is handled analytically for power laws
    with integrable 1/a and flagged infinite otherwise when M(0,.) != 0."""
    w = grid.weights
    row_sq = (M ** 2) @ w  # integral over tau at each x
    if weight == "one":
        return float(np.dot(w, row_sq))
    a = np.asarray(coef.a(grid.nodes), dtype=float)
    val = float(np.dot(w[1:], row_sq[1:] / a[1:]))
    if row_sq[0] > 0.0:
        x1 = grid.nodes[1]
        if coef.power_law and coef.alpha < 1.0:
            val += row_sq[0] * x1 ** (1.0 - coef.alpha) / (1.0 - coef.alpha)
        else:
            return math.inf
    return val


def kernel_weighted_sup(kernel: KernelSpec, coef: DegenerateCoefficient,
                        sgrid: SpatialGrid, tgrid: TimeGrid, c_exp: float,
                        s: float, weight: str = "inv_a",
                        pointwise: bool = False) -> SupResult:
    """Essential sup over t < T of exp(c_exp*s/(T-t)^2) times either the
    double integral of K^2/a (default) or the pointwise sup of |K|
    (``pointwise``, used by the divergence-branch decay condition).

    Parametric decay kernels get an analytic verdict: the integral mode is
    finite when 2*decay >= c_exp*s, the pointwise mode when
    decay >= c_exp*s.  Tabulated kernels get the grid sup with a
    lower-bound-only flag.
    """
    if c_exp < 0:
        raise ValueError("c_exp must be >= 0")
    T = tgrid.T
    if kernel.is_zero:
        return SupResult(0.0, True, True)
    parametric = kernel.kind in ("constant_decay", "separable_decay")
    if parametric:
        M0 = kernel.matrix(0.0, sgrid) / kernel.decay_factor(0.0) \
            if kernel.decay_factor(0.0) > 0 else _undecayed_matrix(kernel, sgrid)
        if pointwise:
            base = float(np.max(np.abs(M0)))
            z = c_exp * s - kernel.decay
        else:
            base = _kernel_base_integral(kernel, coef, sgrid, M0, weight)
            z = c_exp * s - 2.0 * kernel.decay
        if not math.isfinite(base):
            return SupResult(math.inf, False, True)
        if z > 0.0:
            return SupResult(math.inf, False, True)
        # exp(z/(T-t)^2) with z <= 0 is largest as t -> 0+
        return SupResult(base * math.exp(max(z / T ** 2, -EXP_CLAMP)),
                         True, True)
    # tabulated: grid sup over interior times (the condition is an
    # essential-sup statement, t = T excluded)
    best = 0.0
    for t in tgrid.times[:-1]:
        M = kernel.matrix(t, sgrid)
        if pointwise:
            q = float(np.max(np.abs(M)))
            val = q * math.exp(min(c_exp * s / (T - t) ** 2, EXP_CLAMP))
        else:
            q = _kernel_base_integral(kernel, coef, sgrid, M, weight)
            if not math.isfinite(q):
                return SupResult(math.inf, False, False, True)
            val = q * math.exp(min(c_exp * s / (T - t) ** 2, EXP_CLAMP))
        best = max(best, val)
    return SupResult(best, math.isfinite(best), False, True)


def _undecayed_matrix(kernel: KernelSpec, grid: SpatialGrid) -> np.ndarray:
    npts = grid.n + 1
    if kernel.kind == "constant_decay":
        M = np.full((npts, npts), kernel.kappa0)
    else:
        M = np.outer(kernel.k1, kernel.k2)
    sm = kernel._support_mask(grid)
    if sm is not None:
        M = M * np.outer(sm, sm)
    return M
