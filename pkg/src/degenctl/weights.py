"""Construction of every exponential weight used by the control machinery,
plus selection and validation of the parameter budget.

Time profiles:
    theta(t) = 1/[t(T-t)]^2            (blows up at both endpoints)
    nu(t)    = theta(T/2) on [0, T/2], theta(t) on [T/2, T]
               (bounded at t = 0, blows up only at t = T)

Spatial profiles:
    p(x)     = integral_0^x y e^{y^2} / a(y) dy        (non-divergence branch)
    psi(x)   = lam * (p(x) - beta * ||p||_inf)         (strictly negative)
    sigma(x) = reparameterised sine bump, ||sigma||_inf = 1
    Psi(x)   = e^{rho sigma} - e^{2 rho ||sigma||_inf} (strictly negative)
    Upsilon(x) = c * (integral_0^x y/a dy - d)         (divergence branch)

Space-time weights are the separable products theta*psi, theta*Psi,
nu*psi, nu*Psi, theta*Upsilon, nu*Upsilon.  They are kept as exponent
factors; exponentials are materialised only inside quadratures, clamped to
the double-precision range (see model.clamped_exp).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .model import (DIV_SD, DIV_WD, NONDIV, ControlRegion,
                    DegenerateCoefficient, SpatialGrid, TimeGrid, clamped_exp)


class ParameterError(ValueError):
    """Raised when a requested weight budget violates its admissibility bound."""


# ---------------------------------------------------------------------------
# sigma
# ---------------------------------------------------------------------------

def _smoothstep5(u: np.ndarray) -> np.ndarray:
    u = np.clip(u, 0.0, 1.0)
    return u ** 3 * (10.0 - 15.0 * u + 6.0 * u ** 2)


def _smoothstep5_d1(u: np.ndarray) -> np.ndarray:
    u = np.clip(u, 0.0, 1.0)
    return 30.0 * u ** 2 * (1.0 - u) ** 2


@dataclass(frozen=True)
class SigmaTable:
    """C^2 bump sigma = sin(pi r(x)) with r' > 0, r(x_star) = 1/2.

    r is built from a positive density q_mu = exp(-mu * smoothstep(x)); mu is
    solved by bisection so that the unique critical point of sigma sits at
    x_star, the midpoint of the observation subinterval.  By construction
    sigma(0) = sigma(1) = 0, sigma > 0 on (0,1), sigma'(0) > 0 > sigma'(1)
    and ||sigma||_inf = 1 exactly.
    """

    values: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    xstar: float
    mu: float
    norm_inf: float = 1.0


def _sigma_r(x: np.ndarray, mu: float, fine: np.ndarray) -> np.ndarray:
    q = np.exp(-mu * _smoothstep5(fine))
    cum = np.concatenate(([0.0], np.cumsum(0.5 * (q[1:] + q[:-1]) * np.diff(fine))))
    cum /= cum[-1]
    return np.interp(x, fine, cum)


def build_sigma(region: ControlRegion, grid: SpatialGrid) -> SigmaTable:
    """Tabulate sigma, sigma' and sigma'' on the grid nodes."""
    ta, tb = region.omega_tilde
    xstar = 0.5 * (ta + tb)
    if tb - ta <= 0:
        raise ValueError("degenerate observation subinterval")
    fine = np.linspace(0.0, 1.0, 4097)

    def halfmass(mu):
        return _sigma_r(np.array([xstar]), mu, fine)[0] - 0.5

    lo, hi = -80.0, 80.0
    if abs(halfmass(0.0)) < 1e-15:
        mu = 0.0
    else:
        flo, fhi = halfmass(lo), halfmass(hi)
        if not (flo < 0.0 < fhi):
            raise ValueError("observation midpoint too extreme for sigma")
        mu = 0.0
        for _ in range(200):
            mu = 0.5 * (lo + hi)
            if halfmass(mu) < 0.0:
                lo = mu
            else:
                hi = mu
        mu = 0.5 * (lo + hi)

    x = grid.nodes
    z = np.trapezoid(np.exp(-mu * _smoothstep5(fine)), fine)
    r = _sigma_r(x, mu, fine)
    q = np.exp(-mu * _smoothstep5(x))
    r1 = q / z
    r2 = -mu * _smoothstep5_d1(x) * q / z
    values = np.sin(np.pi * r)
    d1 = np.pi * r1 * np.cos(np.pi * r)
    d2 = np.pi * r2 * np.cos(np.pi * r) - (np.pi * r1) ** 2 * np.sin(np.pi * r)
    # endpoints are exact zeros of the sine
    values[0] = values[-1] = 0.0
    return SigmaTable(values, d1, d2, xstar, mu)


# ---------------------------------------------------------------------------
# cumulative coefficient integrals
# ---------------------------------------------------------------------------

def _cumtrap(integrand: np.ndarray, x: np.ndarray, first_cell: float) -> np.ndarray:
    out = np.empty_like(integrand)
    out[0] = 0.0
    out[1] = first_cell
    steps = 0.5 * (integrand[1:] + integrand[:-1]) * np.diff(x)
    out[1:] = first_cell + np.concatenate(([0.0], np.cumsum(steps[1:])))
    return out


def compute_p(coef: DegenerateCoefficient, grid: SpatialGrid) -> tuple[np.ndarray, float]:
    """Cumulative integral p(x) = integral_0^x y e^{y^2}/a(y) dy and its sup
    norm p(1) (p is increasing since the integrand is nonnegative).

    For the power law a = x^alpha the first cell is integrated analytically
    via the series of e^{y^2}; alpha < 2 guarantees integrability.
    """
    if coef.alpha >= 2.0:
        raise ValueError("p is not integrable for alpha >= 2")
    x = grid.nodes
    a = np.asarray(coef.a(x), dtype=float)
    q = np.empty_like(x)
    q[1:] = x[1:] * np.exp(x[1:] ** 2) / a[1:]
    x1 = x[1]
    if coef.power_law:
        e = 2.0 - coef.alpha
        first = sum(x1 ** (e + 2 * k) / (math.factorial(k) * (e + 2 * k))
                    for k in range(4))
        q[0] = 0.0 if coef.alpha < 1.0 else q[1]
    else:
        q[0] = 0.0 if coef.alpha < 1.0 else q[1]
        first = 0.5 * (q[0] + q[1]) * x1
    p = _cumtrap(q, x, first)
    return p, float(p[-1])


def compute_div_primitive(coef: DegenerateCoefficient,
                          grid: SpatialGrid) -> tuple[np.ndarray, float]:
    """Cumulative integral P(x) = integral_0^x y/a(y) dy and
    d_star = sup P = P(1)."""
    x = grid.nodes
    a = np.asarray(coef.a(x), dtype=float)
    q = np.empty_like(x)
    q[1:] = x[1:] / a[1:]
    x1 = x[1]
    if coef.power_law:
        e = 2.0 - coef.alpha
        first = x1 ** e / e
        q[0] = 0.0 if coef.alpha < 1.0 else q[1]
    else:
        q[0] = 0.0 if coef.alpha < 1.0 else q[1]
        first = 0.5 * (q[0] + q[1]) * x1
    P = _cumtrap(q, x, first)
    return P, float(P[-1])


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------

EPSILON_MAX = math.sqrt(1.0 - 2.0 * math.sqrt(2.0) / 3.0)


@dataclass(frozen=True)
class WeightParams:
    """Complete parameter budget for the weight construction.

    ``lam`` must sit inside [lambda_lo, lambda_hi) for the comparison
    2*max Phi_tilde <= max phi_tilde to hold; ``c`` inside (c_lo, c_hi)
    for the divergence-branch smallness inequality.  ``c0``/``c1`` are the
    kernel-decay exponents of the two controllability hypotheses.
    """

    s: float
    lam: float
    beta: float
    rho: float
    epsilon: float
    Tstar: float
    p_norm: float
    sigma_norm: float = 1.0
    c: float | None = None
    d: float | None = None
    d_star: float | None = None
    c0: float | None = None
    c1: float | None = None
    lambda_lo: float | None = None
    lambda_hi: float | None = None
    c_lo: float | None = None
    c_hi: float | None = None

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "s", "lam", "beta", "rho", "epsilon", "Tstar", "p_norm",
            "sigma_norm", "c", "d", "d_star", "c0", "c1",
            "lambda_lo", "lambda_hi", "c_lo", "c_hi")}


def lambda_interval(rho: float, sigma_norm: float, beta: float,
                    p_norm: float) -> tuple[float, float]:
    E = math.exp(rho * sigma_norm)
    lo = (E ** 2 - 1.0) / ((beta - 1.0) * p_norm)
    hi = 2.0 * (E ** 2 - E) / ((beta - 1.0) * p_norm)
    return lo, hi


def c_interval(rho: float, sigma_norm: float, d: float,
               d_star: float) -> tuple[float, float]:
    E = math.exp(rho * sigma_norm)
    lo = (E ** 2 - 1.0) / (d - d_star)
    hi = (16.0 / 15.0) * (E ** 2 - E) / (d - d_star)
    return lo, hi


def default_s(rho: float, sigma_norm: float, T: float,
              target: float = 40.0) -> float:
    """Scale s so that max |2 s nu(t) Psi| at t = 3T/4 is about `target`,
    keeping the materialised exponentials inside double precision."""
    nu34 = theta_of(0.75 * T, T)
    psi_max_abs = math.exp(2.0 * rho * sigma_norm) - 1.0
    return target / (2.0 * nu34 * psi_max_abs)


def theta_of(t, T: float):
    """theta(t) = 1/[t(T-t)]^2, +inf at the endpoints."""
    t = np.asarray(t, dtype=float)
    denom = (t * (T - t)) ** 2
    with np.errstate(divide="ignore"):
        out = np.where(denom > 0.0, 1.0 / np.where(denom > 0, denom, 1.0), np.inf)
    return out if out.ndim else float(out)


def nu_of(t, T: float):
    """nu(t): constant theta(T/2) up to T/2, then theta(t)."""
    t = np.asarray(t, dtype=float)
    cap = theta_of(0.5 * T, T)
    out = np.where(t <= 0.5 * T, cap, theta_of(np.maximum(t, 0.5 * T), T))
    return out if out.ndim else float(out)


def choose_parameters(coef: DegenerateCoefficient, region: ControlRegion,
                      T: float, branch: str, grid: SpatialGrid | None = None,
                      s: float | None = None, epsilon: float = 0.2,
                      beta: float = 4.0, rho: float | None = None,
                      lam: float | None = None, c: float | None = None,
                      d: float | None = None) -> WeightParams:
    """Default parameter budget for a scenario.

    branch "nondiv": rho just above max(1, ln2/||sigma||), lambda at the
    midpoint of its admissible interval.  branch "div": rho large enough
    that the interval for c is nonempty (this needs e^{rho||sigma||} > 15),
    d = 4.5 * d_star, c at the interval midpoint.  s defaults to the
    dynamic-range heuristic of `default_s` and is freely overridable.
    """
    if grid is None:
        grid = SpatialGrid.uniform(64)
    sigma_norm = 1.0  # build_sigma normalises the bump exactly
    p, p_norm = compute_p(coef, grid)
    if rho is None:
        if branch == "div":
            rho = 1.05 * math.log(15.0) / sigma_norm
        else:
            rho = max(1.0, 1.05 * math.log(2.0) / sigma_norm)
    lam_lo, lam_hi = lambda_interval(rho, sigma_norm, beta, p_norm)
    if lam is None:
        lam = 0.5 * (lam_lo + lam_hi)
    Tstar = (1.0 + epsilon) * T / 2.0
    c_lo = c_hi = d_star = None
    if branch == "div":
        _, d_star = compute_div_primitive(coef, grid)
        if d is None:
            d = 4.5 * d_star
        c_lo, c_hi = c_interval(rho, sigma_norm, d, d_star)
        if c is None:
            c = 0.5 * (c_lo + c_hi) if c_hi > c_lo else c_lo * (1.0 + 1e-9)
    if s is None:
        s = default_s(rho, sigma_norm, T)
    c0 = 8.0 * lam * p_norm * (4.0 / T) ** 2
    c1 = c * d * (4.0 / T) ** 2 if branch == "div" else None
    return WeightParams(s=s, lam=lam, beta=beta, rho=rho, epsilon=epsilon,
                        Tstar=Tstar, p_norm=p_norm, sigma_norm=sigma_norm,
                        c=c, d=d, d_star=d_star, c0=c0, c1=c1,
                        lambda_lo=lam_lo, lambda_hi=lam_hi,
                        c_lo=c_lo, c_hi=c_hi)


# ---------------------------------------------------------------------------
# assembled weight set
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightSet:
    """All tabulated weight profiles for one (params, coefficient, region,
    grids, branch) combination.

    Space-time weights are exposed as exponent-factor products, e.g.
    ``exp_weight("2s_Phitilde", at="mid")`` materialises e^{2 s nu Psi} on
    the midpoint times with the exponent clamped.
    """

    branch: str
    params: WeightParams
    sgrid: SpatialGrid
    tgrid: TimeGrid
    sigma: SigmaTable
    p: np.ndarray
    psi: np.ndarray
    Psi: np.ndarray
    Upsilon: np.ndarray | None
    theta_levels: np.ndarray
    theta_mid: np.ndarray
    nu_levels: np.ndarray
    nu_mid: np.ndarray

    # -- time profiles ------------------------------------------------------
    def theta(self, t):
        return theta_of(t, self.tgrid.T)

    def nu(self, t):
        return nu_of(t, self.tgrid.T)

    def _tvec(self, at: str) -> np.ndarray:
        if at == "level":
            return self.nu_levels
        if at == "mid":
            return self.nu_mid
        raise ValueError("at must be 'level' or 'mid'")

    def _thetavec(self, at: str) -> np.ndarray:
        return self.theta_levels if at == "level" else self.theta_mid

    # -- separable space-time exponent factors ------------------------------
    def phi(self, at: str = "level") -> np.ndarray:
        return np.outer(self._thetavec(at), self.psi)

    def Phi(self, at: str = "level") -> np.ndarray:
        return np.outer(self._thetavec(at), self.Psi)

    def phitilde(self, at: str = "level") -> np.ndarray:
        return np.outer(self._tvec(at), self.psi)

    def Phitilde(self, at: str = "level") -> np.ndarray:
        return np.outer(self._tvec(at), self.Psi)

    def phi_div(self, at: str = "level") -> np.ndarray:
        return np.outer(self._thetavec(at), self.Upsilon)

    def phitilde_div(self, at: str = "level") -> np.ndarray:
        return np.outer(self._tvec(at), self.Upsilon)

    def spatial_factor(self) -> np.ndarray:
        """psi for the non-divergence branch, Upsilon for the divergence one."""
        return self.psi if self.branch == "nondiv" else self.Upsilon

    def phitilde_branch(self, at: str = "level") -> np.ndarray:
        return np.outer(self._tvec(at), self.spatial_factor())

    # -- hat / check profiles (exact extrema in x at each time) -------------
    def phihat(self, t):
        """max_x of nu(t) psi(x); psi is increasing and negative."""
        return self.nu(t) * self.psi[-1]

    def phicheck(self, t):
        return self.nu(t) * self.psi[0]

    def Phihat(self, t):
        return self.nu(t) * float(np.max(self.Psi))

    def phihat_div(self, t):
        return self.nu(t) * self.Upsilon[-1]

    def phicheck_div(self, t):
        return self.nu(t) * self.Upsilon[0]

    def phihat_branch(self, t):
        return self.phihat(t) if self.branch == "nondiv" else self.phihat_div(t)

    def phicheck_branch(self, t):
        return self.phicheck(t) if self.branch == "nondiv" else self.phicheck_div(t)

    # -- materialised exponentials -------------------------------------------
    def exp_weight(self, name: str, at: str = "level",
                   sign: float = 1.0) -> np.ndarray:
        """e^{sign * 2 s * factor} for factor in {phi, Phi, phitilde,
        Phitilde, phi_div, phitilde_div}, clamped."""
        factor = getattr(self, name.removeprefix("2s_"))(at)
        return clamped_exp(sign * 2.0 * self.params.s * factor)


def assemble_weights(params: WeightParams, coef: DegenerateCoefficient,
                     region: ControlRegion, sgrid: SpatialGrid,
                     tgrid: TimeGrid, branch: str = "nondiv") -> WeightSet:
    """Fill every weight table for the given budget.

    Raises ParameterError when lambda falls below its admissibility bound
    (the nondiv comparison psi <= Psi would fail), and when the divergence
    branch is requested without c, d.
    """
    if branch not in ("nondiv", "div"):
        raise ValueError("branch must be 'nondiv' or 'div'")
    sigma = build_sigma(region, sgrid)
    p, p_norm = compute_p(coef, sgrid)
    lam_lo, _ = lambda_interval(params.rho, params.sigma_norm, params.beta,
                                p_norm)
    if branch == "nondiv" and params.lam < lam_lo * (1.0 - 1e-12):
        raise ParameterError(
            f"lambda = {params.lam:.6g} below admissible bound {lam_lo:.6g}")
    psi = params.lam * (p - params.beta * p_norm)
    Psi = np.exp(params.rho * sigma.values) - math.exp(
        2.0 * params.rho * params.sigma_norm)
    Upsilon = None
    if branch == "div":
        if params.c is None or params.d is None:
            raise ParameterError("divergence branch needs c and d")
        P, d_star = compute_div_primitive(coef, sgrid)
        if params.d <= d_star:
            raise ParameterError(f"d = {params.d} must exceed d_star = {d_star}")
        Upsilon = params.c * (P - params.d)
    t, tm = tgrid.times, tgrid.midtimes
    return WeightSet(branch=branch, params=params, sgrid=sgrid, tgrid=tgrid,
                     sigma=sigma, p=p, psi=psi, Psi=Psi, Upsilon=Upsilon,
                     theta_levels=theta_of(t, tgrid.T),
                     theta_mid=theta_of(tm, tgrid.T),
                     nu_levels=nu_of(t, tgrid.T),
                     nu_mid=nu_of(tm, tgrid.T))


# ---------------------------------------------------------------------------
# parameter inequality report
# ---------------------------------------------------------------------------

@dataclass
class InequalityEntry:
    name: str
    value: float
    passed: bool


@dataclass
class InequalityReport:
    entries: list[InequalityEntry]

    @property
    def ok(self) -> bool:
        return all(e.passed for e in self.entries)

    def value(self, name: str) -> float:
        for e in self.entries:
            if e.name == name:
                return e.value
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {"ok": self.ok,
                "entries": [{"name": e.name, "value": e.value,
                             "passed": e.passed} for e in self.entries]}


def verify_parameter_inequalities(params: WeightParams, weights: WeightSet,
                                  branch: str = "nondiv") -> InequalityReport:
    """Evaluate the sign conditions behind the fixed-point smallness
    argument; failures are report entries, never exceptions.

    nondiv: (i) 2*(phihat(0) - phicheck(T*) + Phihat(0)) < 0,
            (ii) 8*nu(T*) - 9*nu(0) < 0,
            (iii) 2*Phihat(t) <= phihat(t) at every grid time < T.
    div:    2*Phihat(0) - phicheck_div(5T/8) < 0.
    """
    entries: list[InequalityEntry] = []
    T = weights.tgrid.T
    if branch == "nondiv":
        v1 = 2.0 * (weights.phihat(0.0) - weights.phicheck(params.Tstar)
                    + weights.Phihat(0.0))
        entries.append(InequalityEntry("smallness_exponent", v1, v1 < 0.0))
        v2 = 8.0 * weights.nu(params.Tstar) - 9.0 * weights.nu(0.0)
        entries.append(InequalityEntry("nu_combination", v2, v2 < 0.0))
        ts = weights.tgrid.times[:-1]
        gap = 2.0 * weights.Phihat(ts) - weights.phihat(ts)
        v3 = float(np.max(gap))
        entries.append(InequalityEntry("weight_comparison_max", v3, v3 <= 0.0))
    else:
        v = 2.0 * weights.Phihat(0.0) - weights.phicheck_div(0.625 * T)
        entries.append(InequalityEntry("smallness_exponent_div", v, v < 0.0))
    return InequalityReport(entries)


def epsilon_max_bisect(T: float = 1.0, tol: float = 1e-12) -> float:
    """Locate the sign change of 8*nu(T*) - 9*nu(0) over epsilon by
    bisection; independent reproduction of EPSILON_MAX."""
    def val(eps):
        Tstar = (1.0 + eps) * T / 2.0
        return 8.0 * nu_of(Tstar, T) - 9.0 * nu_of(0.0, T)

    lo, hi = 1e-6, 0.999
    if val(lo) >= 0 or val(hi) <= 0:
        raise RuntimeError("bisection bracket failed")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if val(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
