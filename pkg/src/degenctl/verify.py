"""Numerical verification of the weighted inequalities and identities the
control machinery rests on: the weighted Poincare (Hardy-type) bound, the
conjugated-operator splitting identity, the Carleman-type estimates in all
their variants, the local (Caccioppoli) gradient bound, observability
ratios, and the parabolic energy estimates.

Every checker evaluates both sides of its inequality on a fixed-seed
ensemble of adjoint solutions (or explicit samples) and reports ratios;
the unknown constants of the estimates are reported as empirical maxima,
and pass criteria are boundedness and stability under refinement, never
absolute magnitudes.  All reports are deterministic functions of
(scenario, seed, grids).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import (NONDIV, ControlRegion, DegenerateCoefficient, KernelSpec,
                    SpatialGrid, TimeGrid, clamped_exp, gradient,
                    natural_weight, weighted_inner)
from .pde import solve_adjoint, solve_forward
from .weights import WeightSet

DEFAULT_SEED = 20250101


# ---------------------------------------------------------------------------
# deterministic smooth ensembles
# ---------------------------------------------------------------------------

def random_profiles(grid: SpatialGrid, count: int, seed: int = DEFAULT_SEED,
                    modes: int = 8) -> np.ndarray:
    """Smooth random profiles vanishing at both endpoints: seeded Gaussian
    combinations of the first sine modes with 1/k^2 decay.  The functional
    forms are grid-independent, so refinement studies compare like with
    like."""
    rng = np.random.default_rng(seed)
    coefs = rng.standard_normal((count, modes)) / np.arange(1, modes + 1) ** 2
    k = np.arange(1, modes + 1)
    basis = np.sin(np.pi * np.outer(k, grid.nodes))
    return coefs @ basis


def random_sources(sgrid: SpatialGrid, tgrid: TimeGrid, count: int,
                   seed: int = DEFAULT_SEED, modes: int = 4) -> np.ndarray:
    """Smooth random space-time sources, same construction with a low-order
    polynomial-in-time envelope per mode."""
    rng = np.random.default_rng(seed)
    k = np.arange(1, modes + 1)
    basis = np.sin(np.pi * np.outer(k, sgrid.nodes))
    t = tgrid.times / tgrid.T
    envs = np.stack([np.ones_like(t), t, 1.0 - t, t * (1.0 - t)])
    coefs = rng.standard_normal((count, envs.shape[0], modes)) / k ** 2
    return np.einsum("cem,et,mx->ctx", coefs, envs, basis)


# ---------------------------------------------------------------------------
# Hardy-type ratio
# ---------------------------------------------------------------------------

@dataclass
class HardyReport:
    ratios: list[float]
    ensemble_max: float
    grid_n: int

    def as_dict(self) -> dict:
        return {"ratios": self.ratios, "ensemble_max": self.ensemble_max,
                "grid_n": self.grid_n}


def check_hardy(coef: DegenerateCoefficient, grid: SpatialGrid,
                samples: list[np.ndarray] | None = None,
                ensemble: int = 50, seed: int = DEFAULT_SEED) -> HardyReport:
    """Ratio (int y^2/a) / (int y_x^2) per sample; zero samples are skipped.
    Finiteness of the ensemble max is the empirical constant of the weighted
    Poincare inequality."""
    if samples is None:
        samples = list(random_profiles(grid, ensemble, seed))
    ratios = []
    for y in samples:
        y = np.asarray(y, dtype=float)
        if abs(y[0]) > 1e-13 or abs(y[-1]) > 1e-13:
            raise ValueError("samples must vanish at both endpoints")
        den = float(np.dot(grid.weights, gradient(y, grid) ** 2))
        if den == 0.0:
            continue  # zero profile: ratio undefined, skipped
        num = weighted_inner(y, y, coef, grid, "inv_a")
        ratios.append(num / den)
    return HardyReport(ratios, max(ratios) if ratios else 0.0, grid.n)


# ---------------------------------------------------------------------------
# splitting identity of the conjugated operator
# ---------------------------------------------------------------------------

@dataclass
class IdentityReport:
    value_left: float
    value_right: float
    relative_residual: float
    boundary_term: float
    parts: dict = field(default_factory=dict)
    slope: float | None = None  # convergence order across refinements

    def as_dict(self) -> dict:
        return {"value_left": self.value_left,
                "value_right": self.value_right,
                "relative_residual": self.relative_residual,
                "boundary_term": self.boundary_term, "parts": self.parts,
                "slope": self.slope}


def check_splitting_identity(v: np.ndarray, g: np.ndarray, s: float,
                             weights: WeightSet, coef: DegenerateCoefficient,
                             sgrid: SpatialGrid,
                             tgrid: TimeGrid) -> IdentityReport:
    """Split the conjugated operator into its selfadjoint and skewadjoint
    parts and test the exact-energy identity

        ||Pw||^2 + ||Nw||^2 + 2<Pw, Nw> = ||g e^{s phi}||^2

    in the weighted space-time product, where w = e^{s phi} v, g = v_t +
    a v_xx is supplied by the caller (manufactured from a smooth v), and

        Pw = a w_xx - s phi_t w + s^2 a phi_x^2 w,
        Nw = w_t - 2 s a phi_x w_x - s a phi_xx w.

    w and its derivatives are formed by central finite differences; the
    weight's own derivatives are analytic.  The relative residual therefore
    measures pure discretisation error and shrinks under refinement.  The
    boundary functional -s e int theta w_x^2(t, 1) dt is evaluated
    alongside with a one-sided difference.
    """
    x = sgrid.nodes
    t = tgrid.times
    a = np.asarray(coef.a(x), dtype=float)
    da = np.asarray(coef.da(x), dtype=float)
    theta = weights.theta_levels[:, None]
    psi_part = (weights.p - weights.params.beta * weights.params.p_norm)
    lam = weights.params.lam
    phi = lam * theta * psi_part[None, :]
    w = clamped_exp(s * phi) * v

    # analytic weight derivatives; q = x e^{x^2} / a
    q = np.zeros_like(x)
    q[1:] = x[1:] * np.exp(x[1:] ** 2) / a[1:]
    q[0] = 0.0 if coef.alpha < 1.0 else q[1]
    dq = np.zeros_like(x)
    dq[1:] = (np.exp(x[1:] ** 2) * (1.0 + 2.0 * x[1:] ** 2) / a[1:]
              - x[1:] * np.exp(x[1:] ** 2) * da[1:] / a[1:] ** 2)
    dq[0] = dq[1]
    T = tgrid.T
    tt = t[1:-1]
    dtheta = (-2.0 * (T - 2.0 * tt) / (tt * (T - tt)) ** 3)[:, None]
    phi_t = lam * dtheta * psi_part[None, :]
    phi_x = lam * theta[1:-1] * q[None, :]
    phi_xx = lam * theta[1:-1] * dq[None, :]

    dt = tgrid.dt
    h = sgrid.spacing
    wi = w[1:-1]
    w_t = (w[2:] - w[:-2]) / (2.0 * dt)
    w_x = np.empty_like(wi)
    w_x[:, 1:-1] = (wi[:, 2:] - wi[:, :-2]) / (x[2:] - x[:-2])
    w_x[:, 0] = (-3.0 * wi[:, 0] + 4.0 * wi[:, 1] - wi[:, 2]) / (2.0 * h[0])
    w_x[:, -1] = (3.0 * wi[:, -1] - 4.0 * wi[:, -2] + wi[:, -3]) / (2.0 * h[-1])
    w_xx = np.zeros_like(wi)
    hl, hr = h[:-1][None, :], h[1:][None, :]
    w_xx[:, 1:-1] = 2.0 * (wi[:, :-2] / (hl * (hl + hr))
                           - wi[:, 1:-1] / (hl * hr)
                           + wi[:, 2:] / (hr * (hl + hr)))

    P = a[None, :] * w_xx - s * phi_t * wi + s ** 2 * a[None, :] * phi_x ** 2 * wi
    N = w_t - 2.0 * s * a[None, :] * phi_x * w_x - s * a[None, :] * phi_xx * wi
    ge = clamped_exp(s * phi[1:-1]) * g[1:-1]

    qw = sgrid.weights.copy()
    rvec = np.zeros_like(a)
    rvec[1:] = 1.0 / a[1:]
    rvec[0] = 0.0  # integrands vanish at the degeneracy for Dirichlet data

    def qint(F1, F2):
        return float(np.einsum("ji,ji,i->", F1, F2,
                               qw * rvec) * dt)

    ip, im = qint(P, P), qint(N, N)
    cross = qint(P, N)
    right = qint(ge, ge)
    left = ip + im + 2.0 * cross
    resid = abs(left - right) / max(right, 1e-300)
    bt = -s * math.e * float(np.sum(
        weights.theta_levels[1:-1] * w_x[:, -1] ** 2) * dt)
    return IdentityReport(left, right, resid, bt,
                          {"selfadjoint_sq": ip, "skewadjoint_sq": im,
                           "cross": cross})


def splitting_manufactured(coef: DegenerateCoefficient, sgrid: SpatialGrid,
                           tgrid: TimeGrid
                           ) -> tuple[np.ndarray, np.ndarray]:
    """Canonical smooth test pair: v = sin(pi x) t^2 (T-t)^2 with its exact
    image under the parabolic operator v_t + a v_xx."""
    x, t = sgrid.nodes, tgrid.times[:, None]
    T = tgrid.T
    sx = np.sin(np.pi * x)[None, :]
    v = sx * t ** 2 * (T - t) ** 2
    v_t = sx * (2.0 * t * (T - t) ** 2 - 2.0 * t ** 2 * (T - t))
    a = np.asarray(coef.a(x), dtype=float)[None, :]
    g = v_t - a * np.pi ** 2 * v
    return v, g


def splitting_refinement_study(coef: DegenerateCoefficient,
                               region: ControlRegion, sgrid: SpatialGrid,
                               tgrid: TimeGrid, s: float,
                               params_factory, levels: int = 2
                               ) -> IdentityReport:
    """Run the splitting check on the given grid and `levels - 1`
    simultaneous space-time refinements; returns the base-grid report with
    the empirical convergence slope attached."""
    residuals = []
    base = None
    for lev in range(levels):
        sg = SpatialGrid.uniform(sgrid.n * 2 ** lev)
        tg = TimeGrid(tgrid.T, tgrid.m * 2 ** lev)
        ws = params_factory(sg, tg)
        v, g = splitting_manufactured(coef, sg, tg)
        rep = check_splitting_identity(v, g, s, ws, coef, sg, tg)
        residuals.append(rep.relative_residual)
        if lev == 0:
            base = rep
    if len(residuals) > 1 and residuals[-1] > 0:
        base.slope = math.log2(residuals[0] / residuals[-1]) / (len(residuals) - 1)
    base.parts["residuals_by_level"] = residuals
    return base


# ---------------------------------------------------------------------------
# Carleman-type checkers
# ---------------------------------------------------------------------------

CARLEMAN_VARIANTS = ("boundary", "local", "modified_nondiv", "div",
                     "modified_div")


@dataclass
class CarlemanRecord:
    s: float
    member: int
    lhs_terms: dict
    rhs_terms: dict
    lhs_total: float
    rhs_total: float

    @property
    def ratio(self) -> float:
        return self.lhs_total / self.rhs_total if self.rhs_total > 0 else math.nan


@dataclass
class CarlemanReport:
    variant: str
    records: list[CarlemanRecord]
    excluded: int
    grid_tag: str

    @property
    def max_ratio(self) -> float:
        vals = [r.ratio for r in self.records if math.isfinite(r.ratio)]
        return max(vals) if vals else math.nan

    def ratios_by_s(self) -> dict[float, float]:
        out: dict[float, float] = {}
        for r in self.records:
            if math.isfinite(r.ratio):
                out[r.s] = max(out.get(r.s, 0.0), r.ratio)
        return out

    def top_quartile_nonincreasing(self, slack: float = 1.05) -> bool:
        """The per-s max ratio must not grow along the top quartile of the
        sweep (mild slack for quadrature noise)."""
        by_s = sorted(self.ratios_by_s().items())
        if len(by_s) < 2:
            return True
        k = max(2, len(by_s) // 4 + 1)
        tail = [v for _, v in by_s[-k:]]
        return all(tail[i + 1] <= slack * tail[i] for i in range(len(tail) - 1))

    def as_dict(self) -> dict:
        return {"variant": self.variant, "grid_tag": self.grid_tag,
                "excluded": self.excluded, "max_ratio": self.max_ratio,
                "records": [
                    {"s": r.s, "member": r.member, "lhs": r.lhs_total,
                     "rhs": r.rhs_total, "ratio": r.ratio,
                     "lhs_terms": r.lhs_terms, "rhs_terms": r.rhs_terms}
                    for r in self.records]}


def _adjoint_ensemble(coef, region, sgrid, tgrid, count, seed,
                      kernel: KernelSpec | None = None):
    """Adjoint solutions from random terminal data and random sources."""
    vts = random_profiles(sgrid, count, seed)
    gs = random_sources(sgrid, tgrid, count, seed + 1)
    members = []
    for i in range(count):
        v = solve_adjoint(vts[i], gs[i], kernel, coef, sgrid, tgrid)
        members.append((v, gs[i]))
    return members


def _st_integral(field_sq_log: np.ndarray, rvec: np.ndarray,
                 sgrid: SpatialGrid, tgrid: TimeGrid,
                 xmask: np.ndarray | None = None) -> float:
    """Trapezoid space-time integral of exp(field_sq_log) * rvec.

    The log integrands combine polynomial and exponential weight factors;
    at the singular time endpoints the +inf and -inf parts meet and the
    true limit is 0, which is how clamped_exp resolves the NaN."""
    vals = clamped_exp(field_sq_log) * rvec[None, :]
    qw = sgrid.weights if xmask is None else sgrid.weights * xmask
    tw = np.full(vals.shape[0], tgrid.dt)
    tw[0] = tw[-1] = 0.5 * tgrid.dt
    return float(np.einsum("j,ji,i->", tw, vals, qw))


def _loggrid(F: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(np.abs(F))


def _logsum(*terms):
    """Sum of log-scale factors; inf - inf at the singular endpoints is the
    log of a vanishing weight and resolves to NaN -> 0 in clamped_exp."""
    with np.errstate(invalid="ignore"):
        total = terms[0]
        for t in terms[1:]:
            total = total + t
    return total


def check_carleman(variant: str, coef: DegenerateCoefficient,
                   region: ControlRegion, sgrid: SpatialGrid,
                   tgrid: TimeGrid, weights: WeightSet,
                   s_sweep: np.ndarray, ensemble: int = 10,
                   seed: int = DEFAULT_SEED,
                   grid_tag: str = "") -> CarlemanReport:
    """Evaluate both sides of one Carleman-type estimate over an adjoint
    ensemble and an s-sweep.

    Variants: "boundary" (full-domain estimate with the x = 1 trace term on
    the right), "local" (localised observation on omega), "modified_nondiv"
    (bounded-at-t=0 weights, initial-datum trace on the left), "div" and
    "modified_div" (divergence-form analogues).  Members with vanishing
    right side are excluded with a note.
    """
    if variant not in CARLEMAN_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    members = _adjoint_ensemble(coef, region, sgrid, tgrid, ensemble, seed)
    x = sgrid.nodes
    a = np.asarray(coef.a(x), dtype=float)
    inv_a = np.zeros_like(a)
    inv_a[1:] = 1.0 / a[1:]
    xa_sq = np.zeros_like(a)
    xa_sq[1:] = (x[1:] / a[1:]) ** 2
    x2_over_a = np.zeros_like(a)
    x2_over_a[1:] = x[1:] ** 2 / a[1:]
    theta = weights.theta_levels[:, None]
    nu = weights.nu_levels[:, None]
    mask = region.mask(sgrid)
    records: list[CarlemanRecord] = []
    excluded = 0
    T = tgrid.T
    for i, (v, g) in enumerate(members):
        vx = np.stack([gradient(v[j], sgrid) for j in range(v.shape[0])])
        lv, lvx, lg = _loggrid(v), _loggrid(vx), _loggrid(g)
        for s in np.asarray(s_sweep, dtype=float):
            lhs_terms, rhs_terms = {}, {}
            if variant in ("boundary", "local"):
                e2sphi = 2.0 * s * weights.phi("level")
                lhs_terms["gradient"] = _st_integral(
                    _logsum(np.log(s * theta), 2.0 * lvx, e2sphi), np.ones_like(a),
                    sgrid, tgrid)
                lhs_terms["cubic"] = _st_integral(
                    _logsum(3.0 * np.log(s * theta), 2.0 * lv, e2sphi), xa_sq,
                    sgrid, tgrid)
                if variant == "boundary":
                    rhs_terms["source"] = _st_integral(
                        _logsum(2.0 * lg, e2sphi), inv_a, sgrid, tgrid)
                    wtr = clamped_exp(_logsum(np.log(2.0 * s * theta[:, 0]),
                                              e2sphi[:, -1]))
                    rhs_terms["trace_x1"] = float(
                        np.sum(wtr[1:-1] * vx[1:-1, -1] ** 2) * tgrid.dt)
                else:
                    e2sPhi = 2.0 * s * weights.Phi("level")
                    rhs_terms["source"] = _st_integral(
                        _logsum(2.0 * lg, e2sPhi), inv_a, sgrid, tgrid)
                    rhs_terms["observation"] = _st_integral(
                        _logsum(3.0 * np.log(s * theta), 2.0 * lv, e2sPhi), inv_a,
                        sgrid, tgrid, xmask=mask)
            elif variant == "modified_nondiv":
                e2sphit = 2.0 * s * weights.phitilde("level")
                e2sPhit = 2.0 * s * weights.Phitilde("level")
                lhs_terms["state"] = _st_integral(_logsum(2.0 * lv, e2sphit), inv_a,
                                                  sgrid, tgrid)
                w0 = clamped_exp(2.0 * s * weights.phihat(0.0))
                lhs_terms["initial_trace"] = w0 * weighted_inner(
                    v[0], v[0], coef, sgrid, "inv_a")
                fac = clamped_exp(2.0 * s * (weights.phihat(0.0)
                                             - weights.phicheck(
                                                 weights.params.Tstar)))
                rhs_terms["source"] = fac * _st_integral(
                    _logsum(2.0 * lg, e2sPhit), inv_a, sgrid, tgrid)
                rhs_terms["observation"] = fac * _st_integral(
                    _logsum(3.0 * np.log(s * nu), 2.0 * lv, e2sPhit), inv_a,
                    sgrid, tgrid, xmask=mask)
            elif variant == "div":
                e2sphid = 2.0 * s * weights.phi_div("level")
                e2sPhi = 2.0 * s * weights.Phi("level")
                lhs_terms["gradient"] = _st_integral(
                    _logsum(np.log(s * theta), 2.0 * lvx, e2sphid), a, sgrid, tgrid)
                lhs_terms["cubic"] = _st_integral(
                    _logsum(3.0 * np.log(s * theta), 2.0 * lv, e2sphid), x2_over_a,
                    sgrid, tgrid)
                rhs_terms["source"] = _st_integral(
                    _logsum(2.0 * lg, e2sPhi), np.ones_like(a), sgrid, tgrid)
                rhs_terms["observation"] = _st_integral(
                    _logsum(3.0 * np.log(s * theta), 2.0 * lv, e2sPhi),
                    np.ones_like(a), sgrid, tgrid, xmask=mask)
            else:  # modified_div
                e2sphtd = 2.0 * s * weights.phitilde_div("level")
                e2sPhit = 2.0 * s * weights.Phitilde("level")
                lhs_terms["state"] = _st_integral(_logsum(2.0 * lv, e2sphtd),
                                                  np.ones_like(a), sgrid,
                                                  tgrid)
                w0 = clamped_exp(2.0 * s * weights.phihat_div(0.0))
                lhs_terms["initial_trace"] = w0 * weighted_inner(
                    v[0], v[0], coef, sgrid, "one")
                fac = clamped_exp(2.0 * s * (
                    weights.phihat_div(0.0)
                    - weights.phicheck_div(0.625 * T)))
                rhs_terms["source"] = fac * _st_integral(
                    _logsum(2.0 * lg, e2sPhit), np.ones_like(a), sgrid, tgrid)
                rhs_terms["observation"] = fac * _st_integral(
                    _logsum(3.0 * np.log(s * nu), 2.0 * lv, e2sPhit),
                    np.ones_like(a), sgrid, tgrid, xmask=mask)
            lhs = sum(lhs_terms.values())
            rhs = sum(rhs_terms.values())
            if rhs <= 0.0:
                excluded += 1
                continue
            records.append(CarlemanRecord(float(s), i, lhs_terms, rhs_terms,
                                          lhs, rhs))
    return CarlemanReport(variant, records, excluded,
                          grid_tag or f"n{sgrid.n}_m{tgrid.m}")


# ---------------------------------------------------------------------------
# local gradient (Caccioppoli) bound
# ---------------------------------------------------------------------------

@dataclass
class CaccioppoliReport:
    ratios: list[float]
    max_ratio: float
    excluded: int
    omega1: tuple[float, float]
    omega2: tuple[float, float]

    def as_dict(self) -> dict:
        return {"ratios": self.ratios, "max_ratio": self.max_ratio,
                "excluded": self.excluded, "omega1": list(self.omega1),
                "omega2": list(self.omega2)}


def check_caccioppoli(coef: DegenerateCoefficient, region: ControlRegion,
                      sgrid: SpatialGrid, tgrid: TimeGrid,
                      weights: WeightSet, s: float,
                      omega1: tuple[float, float] | None = None,
                      omega2: tuple[float, float] | None = None,
                      ensemble: int = 10,
                      seed: int = DEFAULT_SEED) -> CaccioppoliReport:
    """Gradient integral over the inner window against the weighted state
    and source integrals over the outer window, with the singular-in-time
    weight pi = theta * eta, eta the strictly negative spatial profile of
    the non-divergence weights."""
    a, b = region.omega
    if omega1 is None:
        omega1 = (a, b)
    if omega2 is None:
        q = 0.25 * (omega1[1] - omega1[0])
        omega2 = (omega1[0] + q, omega1[1] - q)
    if not (omega1[0] <= omega2[0] < omega2[1] <= omega1[1]):
        raise ValueError("need omega2 nested inside omega1")
    x = sgrid.nodes
    m1 = ((x > omega1[0]) & (x < omega1[1])).astype(float)
    m2 = ((x > omega2[0]) & (x < omega2[1])).astype(float)
    pi = weights.phi("level")  # theta * psi, strictly negative eta = psi
    theta = weights.theta_levels[:, None]
    members = _adjoint_ensemble(coef, region, sgrid, tgrid, ensemble, seed)
    ratios = []
    excluded = 0
    ones = np.ones(sgrid.n + 1)
    for v, g in members:
        vx = np.stack([gradient(v[j], sgrid) for j in range(v.shape[0])])
        e2spi = 2.0 * s * pi
        lhs = _st_integral(_logsum(2.0 * _loggrid(vx), e2spi), ones, sgrid, tgrid,
                           xmask=m2)
        rhs = (_st_integral(_logsum(2.0 * np.log(s * theta), 2.0 * _loggrid(v),
                                    e2spi), ones, sgrid, tgrid, xmask=m1)
               + _st_integral(_logsum(2.0 * _loggrid(g), e2spi), ones, sgrid, tgrid))
        if rhs <= 0.0:
            excluded += 1
            continue
        ratios.append(lhs / rhs)
    return CaccioppoliReport(ratios, max(ratios) if ratios else 0.0,
                             excluded, omega1, omega2)


# ---------------------------------------------------------------------------
# observability ratios
# ---------------------------------------------------------------------------

@dataclass
class ObservabilityReport:
    ratios_omega: list[float]
    ratios_full: list[float]
    ratios_weighted_full: list[float]
    excluded: int

    @property
    def max_ratio(self) -> float:
        return max(self.ratios_omega) if self.ratios_omega else 0.0

    def as_dict(self) -> dict:
        return {"ratios_omega": self.ratios_omega,
                "ratios_full": self.ratios_full,
                "ratios_weighted_full": self.ratios_weighted_full,
                "excluded": self.excluded, "max_ratio": self.max_ratio}


def check_observability(coef: DegenerateCoefficient, region: ControlRegion,
                        sgrid: SpatialGrid, tgrid: TimeGrid,
                        kernel: KernelSpec | None = None,
                        ensemble_size: int = 20,
                        seed: int = DEFAULT_SEED) -> ObservabilityReport:
    """Empirical observability constants: ratio of the adjoint initial
    energy to its observation over (0,T) x omega, per random terminal
    datum.  Reported alongside: the full-domain ratio (denominator over all
    of Q, hence ratio_omega >= ratio_full member-wise) and the fully
    weighted full-domain variant."""
    vts = random_profiles(sgrid, ensemble_size, seed)
    mask = region.mask(sgrid)
    ones = np.ones(sgrid.n + 1)
    r_om, r_full, r_wfull = [], [], []
    excluded = 0
    for i in range(ensemble_size):
        v = solve_adjoint(vts[i], None, kernel, coef, sgrid, tgrid)
        num = weighted_inner(v[0], v[0], coef, sgrid, "inv_a")
        den_om = _plain_st(v, sgrid, tgrid, mask)
        den_full = _plain_st(v, sgrid, tgrid, None)
        den_wfull = _weighted_st(v, coef, sgrid, tgrid)
        if den_om <= 0.0 or den_full <= 0.0 or den_wfull <= 0.0:
            excluded += 1
            continue
        r_om.append(num / den_om)
        r_full.append(num / den_full)
        r_wfull.append(num / den_wfull)
    return ObservabilityReport(r_om, r_full, r_wfull, excluded)


def _plain_st(v, sgrid, tgrid, xmask):
    qw = sgrid.weights if xmask is None else sgrid.weights * xmask
    tw = np.full(v.shape[0], tgrid.dt)
    tw[0] = tw[-1] = 0.5 * tgrid.dt
    return float(np.einsum("j,ji,i->", tw, v * v, qw))


def _weighted_st(v, coef, sgrid, tgrid):
    tw = np.full(v.shape[0], tgrid.dt)
    tw[0] = tw[-1] = 0.5 * tgrid.dt
    vals = [weighted_inner(v[j], v[j], coef, sgrid, "inv_a")
            for j in range(v.shape[0])]
    return float(np.dot(tw, vals))


# ---------------------------------------------------------------------------
# energy estimates and dissipativity
# ---------------------------------------------------------------------------

@dataclass
class EnergyReport:
    constants: list[float]
    max_constant: float
    dissipative: bool
    max_step_increase: float
    a2_constant: float

    def as_dict(self) -> dict:
        return {"constants": self.constants,
                "max_constant": self.max_constant,
                "dissipative": self.dissipative,
                "max_step_increase": self.max_step_increase,
                "a2_constant": self.a2_constant}


def check_energy_estimates(coef: DegenerateCoefficient,
                           region: ControlRegion, sgrid: SpatialGrid,
                           tgrid: TimeGrid, kernel: KernelSpec | None = None,
                           ensemble: int = 8,
                           seed: int = DEFAULT_SEED) -> EnergyReport:
    """Empirical constant of the parabolic energy estimate

        sup_t ||y||^2 + int ||y||_{H^1}^2  <=  C (||y0||^2 + ||f||^2 + ||u||^2)

    over a random ensemble (norms natural to the form), plus the per-step
    dissipativity of the zero-data flow and the per-step discrete energy
    inequality constant."""
    nw = natural_weight(coef.form)
    y0s = random_profiles(sgrid, ensemble, seed)
    fs = random_sources(sgrid, tgrid, ensemble, seed + 2)
    us = random_sources(sgrid, tgrid, ensemble, seed + 3)
    mask = region.mask(sgrid)
    consts = []
    for i in range(ensemble):
        u = us[i] * mask
        y = solve_forward(y0s[i], fs[i], u, kernel, coef, region, sgrid,
                          tgrid)
        sup_e = max(weighted_inner(y[j], y[j], coef, sgrid, nw)
                    for j in range(y.shape[0]))
        h1 = _weighted_h1_time_integral(y, coef, sgrid, tgrid, nw)
        num = sup_e + h1
        den = (weighted_inner(y0s[i], y0s[i], coef, sgrid, nw)
               + _general_st(fs[i], coef, sgrid, tgrid, nw)
               + _general_st(u, coef, sgrid, tgrid, nw))
        if den > 0.0:
            consts.append(num / den)
    # zero-data dissipativity, step by step
    y0 = np.sin(np.pi * sgrid.nodes)
    y = solve_forward(y0, None, None, None, coef, region, sgrid, tgrid)
    norms = np.array([math.sqrt(max(weighted_inner(y[j], y[j], coef, sgrid,
                                                   nw), 0.0))
                      for j in range(y.shape[0])])
    incr = float(np.max(np.diff(norms)))
    # discrete energy-inequality constant over the same flow
    a2 = 0.0
    for j in range(tgrid.m):
        e_now = weighted_inner(y[j + 1], y[j + 1], coef, sgrid, nw)
        e_prev = weighted_inner(y[j], y[j], coef, sgrid, nw)
        gradsq = float(np.dot(sgrid.weights,
                              gradient(y[j + 1], sgrid) ** 2))
        lhs = (e_now - e_prev) / (2.0 * tgrid.dt) + gradsq
        if e_now > 0:
            a2 = max(a2, lhs / e_now)
    return EnergyReport(consts, max(consts) if consts else 0.0,
                        incr <= 1e-12, incr, a2)


def _weighted_h1_time_integral(y, coef, sgrid, tgrid, nw):
    tw = np.full(y.shape[0], tgrid.dt)
    tw[0] = tw[-1] = 0.5 * tgrid.dt
    vals = []
    for j in range(y.shape[0]):
        base = weighted_inner(y[j], y[j], coef, sgrid, nw)
        if nw == "inv_a":
            grad = float(np.dot(sgrid.weights, gradient(y[j], sgrid) ** 2))
        else:
            a = np.asarray(coef.a(sgrid.nodes), dtype=float)
            grad = float(np.dot(sgrid.weights,
                                a * gradient(y[j], sgrid) ** 2))
        vals.append(base + grad)
    return float(np.dot(tw, vals))


def _general_st(field, coef, sgrid, tgrid, nw):
    if field.shape[0] == tgrid.m:
        tw = np.full(tgrid.m, tgrid.dt)
    else:
        tw = np.full(field.shape[0], tgrid.dt)
        tw[0] = tw[-1] = 0.5 * tgrid.dt
    vals = [weighted_inner(field[j], field[j], coef, sgrid, nw)
            for j in range(field.shape[0])]
    return float(np.dot(tw, vals))
