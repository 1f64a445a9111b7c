"""Null control of the full nonlocal problems.

The frozen-coefficient controllability result is promoted to the nonlocal
equation by a monitored Picard iteration: each sweep freezes the nonlocal
term at the previous controlled trajectory, solves the resulting
nonhomogeneous control problem, and monitors the weighted norms that the
self-mapping argument keeps inside a ball.  Divergence of the loop is a
reported outcome, never an exception.

Also here: the two-phase driver that buys regularity for rough initial
data by running the free flow on an initial subinterval, and the shortcut
for kernels supported inside omega x omega, which needs no decay
hypothesis and no iteration at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .model import (ControlRegion, DegenerateCoefficient, KernelSpec,
                    SpatialGrid, TimeGrid, apply_nonlocal, kernel_weighted_sup,
                    natural_weight, weighted_norm)
from .pde import solve_forward
from .hum import (ControlOptions, ControlResult, null_control_nonhom,
                  weighted_field_norm, _field_norm_sq)
from .weights import WeightParams, WeightSet, assemble_weights, choose_parameters


# ---------------------------------------------------------------------------
# kernel hypothesis report
# ---------------------------------------------------------------------------

@dataclass
class KernelReport:
    wellposed: dict
    decay: dict
    wellposed_ok: bool
    decay_ok: bool
    branch: str
    exponent: float  # c0*s (nondiv) or c1*s (div)

    @property
    def ok(self) -> bool:
        return self.wellposed_ok and self.decay_ok

    def as_dict(self) -> dict:
        return {"ok": self.ok, "branch": self.branch,
                "exponent": self.exponent,
                "wellposed": dict(self.wellposed, ok=self.wellposed_ok),
                "decay": dict(self.decay, ok=self.decay_ok)}


def check_kernel_hypotheses(kernel: KernelSpec, params: WeightParams,
                            coef: DegenerateCoefficient, sgrid: SpatialGrid,
                            tgrid: TimeGrid,
                            branch: str = "nondiv") -> KernelReport:
    """Well-posedness and controllability-decay verdicts for a kernel.

    Well-posedness needs the plain weighted double integral of K^2/a
    bounded in time.  Controllability additionally needs the kernel to beat
    the weight blow-up at t = T: exponent c0*s on the squared-kernel
    integral (nondiv) or c1*s on |K| pointwise (div).
    """
    wp = kernel_weighted_sup(kernel, coef, sgrid, tgrid, c_exp=0.0, s=1.0)
    if branch == "nondiv":
        if params.c0 is None:
            raise ValueError("params carry no c0 exponent")
        dec = kernel_weighted_sup(kernel, coef, sgrid, tgrid,
                                  c_exp=params.c0, s=params.s)
        expo = params.c0 * params.s
    else:
        if params.c1 is None:
            raise ValueError("params carry no c1 exponent")
        dec = kernel_weighted_sup(kernel, coef, sgrid, tgrid,
                                  c_exp=params.c1, s=params.s,
                                  pointwise=True)
        expo = params.c1 * params.s
    return KernelReport(wp.as_dict(), dec.as_dict(), wp.finite, dec.finite,
                        branch, expo)


# ---------------------------------------------------------------------------
# fixed point
# ---------------------------------------------------------------------------

@dataclass
class FixedPointIteration:
    index: int
    iterate_norm: float      # ||e^{-s Phitilde} y_k|| (ball membership norm)
    change: float            # relative weighted change from the previous iterate
    control_norm: float
    local_final_ratio: float
    in_ball: bool

    def as_dict(self) -> dict:
        return {"index": self.index, "iterate_norm": self.iterate_norm,
                "change": self.change, "control_norm": self.control_norm,
                "local_final_ratio": self.local_final_ratio,
                "in_ball": self.in_ball}


@dataclass
class FixedPointTrace:
    iterations: list[FixedPointIteration] = field(default_factory=list)
    converged: bool = False
    M_bound: float = 0.0
    warnings: list[str] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.iterations)

    def contraction_ratios(self) -> list[float]:
        ch = [it.change for it in self.iterations]
        return [ch[k + 1] / ch[k] for k in range(len(ch) - 1) if ch[k] > 0]

    def as_dict(self) -> dict:
        return {"converged": self.converged, "iterations": self.count,
                "M_bound": self.M_bound,
                "records": [it.as_dict() for it in self.iterations],
                "warnings": list(self.warnings)}


def fixed_point_control(y0: np.ndarray, kernel: KernelSpec,
                        coef: DegenerateCoefficient, region: ControlRegion,
                        sgrid: SpatialGrid, tgrid: TimeGrid,
                        weights: WeightSet,
                        opts: ControlOptions | None = None
                        ) -> tuple[ControlResult, FixedPointTrace]:
    """Picard iteration for the nonlocal control problem.

    Starting from the free nonlocal trajectory, each iterate feeds the
    frozen nonlocal term as a source to the nonhomogeneous driver.  The
    loop stops when the weighted relative change of the iterate (or of the
    induced source, which is the quantity actually frozen) drops below
    opts.fp_tol.  The returned result carries the final ratio of a full
    nonlocal forward solve with the final control; the trace records the
    per-iteration norms and the ball monitor (radius 4x the first
    controlled iterate).
    """
    opts = opts or ControlOptions()
    params = weights.params
    trace = FixedPointTrace()
    hyp = check_kernel_hypotheses(kernel, params, coef, sgrid, tgrid,
                                  weights.branch)
    if not hyp.ok:
        trace.warnings.append(
            "kernel decay hypothesis not satisfied; iterating anyway")
    nw = natural_weight(coef.form)
    w_prev = solve_forward(y0, None, None, kernel, coef, region, sgrid,
                           tgrid, stepper=opts.verify_stepper)
    f_prev = _nonlocal_source(kernel, w_prev, sgrid, tgrid)
    dual = None
    res = None
    for k in range(1, opts.max_fp + 1):
        res = null_control_nonhom(y0, -f_prev, coef, region, sgrid, tgrid,
                                  weights, opts, x0=dual, keep_dual=True)
        dual = res.dual
        y_k = res.y
        norm_k = weighted_field_norm(y_k, weights, coef, sgrid, tgrid)
        if k == 1:
            trace.M_bound = 4.0 * norm_k
        prev_norm = weighted_field_norm(w_prev, weights, coef, sgrid, tgrid)
        change = (weighted_field_norm(y_k - w_prev, weights, coef, sgrid,
                                      tgrid) / prev_norm
                  if prev_norm > 0 else 0.0)
        unorm = math.sqrt(max(_field_norm_sq(res.u, coef, sgrid, tgrid, nw),
                              0.0))
        trace.iterations.append(FixedPointIteration(
            k, norm_k, change, unorm, res.final_ratio,
            norm_k <= trace.M_bound * (1.0 + 1e-12)))
        f_next = _nonlocal_source(kernel, y_k, sgrid, tgrid)
        src_gap = float(np.max(np.abs(f_next - f_prev))) \
            / max(float(np.max(np.abs(f_prev))), 1e-300)
        if change <= opts.fp_tol or src_gap <= 1e-300:
            trace.converged = True
            w_prev, f_prev = y_k, f_next
            break
        w_prev, f_prev = y_k, f_next
    if not trace.converged:
        trace.warnings.append(
            f"no convergence within {opts.max_fp} sweeps; "
            f"last change {trace.iterations[-1].change:.3e}")
    # authoritative verification: one forward solve of the full nonlocal
    # system driven by the final control
    y_ver = solve_forward(y0, None, res.u_mid, kernel, coef, region, sgrid,
                          tgrid, stepper=opts.verify_stepper)
    y0n = res.y0_norm
    yTn = weighted_norm(y_ver[-1], coef, sgrid, nw)
    final_ratio = yTn / y0n if y0n > 0 else (0.0 if yTn <= 1e-14 else math.inf)
    ynorm = math.sqrt(max(_field_norm_sq(y_ver, coef, sgrid, tgrid, nw), 0.0))
    ydiff = math.sqrt(max(_field_norm_sq(y_ver - res.y_pred, coef, sgrid,
                                         tgrid, nw), 0.0))
    out = replace(res, y=y_ver, final_ratio=final_ratio,
                  state_discrepancy=(ydiff / ynorm if ynorm > 0 else 0.0),
                  warnings=res.warnings + trace.warnings, dual=None)
    return out, trace


def _nonlocal_source(kernel: KernelSpec, w: np.ndarray, sgrid: SpatialGrid,
                     tgrid: TimeGrid) -> np.ndarray:
    """Midpoint samples of the nonlocal term along a trajectory."""
    m = tgrid.m
    out = np.zeros((m, sgrid.n + 1))
    if kernel.is_zero:
        return out
    tm = tgrid.midtimes
    wm = 0.5 * (w[:-1] + w[1:])
    for j in range(m):
        out[j] = apply_nonlocal(kernel, wm[j], tm[j], sgrid)
    return out


# ---------------------------------------------------------------------------
# two-phase driver for rough initial data
# ---------------------------------------------------------------------------

@dataclass
class TwoPhaseResult:
    result: ControlResult      # concatenated over [0, T]
    trace: FixedPointTrace
    t0: float
    regularity_grad_norm: float


def two_phase_control(y0: np.ndarray, kernel: KernelSpec,
                      coef: DegenerateCoefficient, region: ControlRegion,
                      sgrid: SpatialGrid, tgrid: TimeGrid, branch: str,
                      opts: ControlOptions | None = None,
                      params: WeightParams | None = None) -> TwoPhaseResult:
    """Free nonlocal flow on [0, t0], then the fixed-point control on
    [t0, T] with weights rebuilt for the shortened horizon.

    The initial datum only needs square-integrability in the weighted
    sense: the free flow smooths it, and the gradient norm actually gained
    at t0 is recorded.  The returned trajectory and control are the
    concatenations (control identically zero on [0, t0]).
    """
    from .model import grad_norm_sq
    opts = opts or ControlOptions()
    m = tgrid.m
    j0 = int(round(opts.t0_fraction * m))
    j0 = min(max(j0, 1), m - 2)
    t0 = tgrid.times[j0]
    grid1 = TimeGrid(t0, j0)
    phase1 = solve_forward(y0, None, None, kernel, coef, region, sgrid,
                           grid1, stepper=opts.verify_stepper)
    y_t0 = phase1[-1]
    gradsq = grad_norm_sq(y_t0, sgrid)
    grid2 = TimeGrid(tgrid.T - t0, m - j0)
    kernel2 = kernel.restrict(t0)
    params2 = choose_parameters(coef, region, grid2.T, branch, sgrid,
                                epsilon=(params.epsilon if params else 0.2))
    weights2 = assemble_weights(params2, coef, region, sgrid, grid2, branch)
    res2, trace = fixed_point_control(y_t0, kernel2, coef, region, sgrid,
                                      grid2, weights2, opts)
    y = np.vstack([phase1[:-1], res2.y])
    u = np.vstack([np.zeros((j0, sgrid.n + 1)), res2.u])
    u_mid = np.vstack([np.zeros((j0, sgrid.n + 1)), res2.u_mid])
    nw = natural_weight(coef.form)
    y0n = weighted_norm(np.asarray(y0, dtype=float), coef, sgrid, nw)
    yTn = weighted_norm(y[-1], coef, sgrid, nw)
    ratio = yTn / y0n if y0n > 0 else (0.0 if yTn <= 1e-14 else math.inf)
    combined = replace(res2, u=u, u_mid=u_mid, y=y, final_ratio=ratio,
                       y0_norm=y0n)
    return TwoPhaseResult(combined, trace, t0, math.sqrt(max(gradsq, 0.0)))


# ---------------------------------------------------------------------------
# supported-kernel shortcut
# ---------------------------------------------------------------------------

class KernelSupportError(ValueError):
    """Kernel mass found outside omega x omega."""


def supported_kernel_shortcut(y0: np.ndarray, kernel: KernelSpec,
                              coef: DegenerateCoefficient,
                              region: ControlRegion, sgrid: SpatialGrid,
                              tgrid: TimeGrid, weights: WeightSet,
                              opts: ControlOptions | None = None
                              ) -> ControlResult:
    """Null control for kernels supported inside omega x omega: control the
    kernel-free problem, then absorb the nonlocal term of the *controlled
    trajectory* into the control.  No decay hypothesis and no fixed-point
    sweeps are needed.

    The absorbed term is automatically supported in omega, so u - v
    vanishes identically outside the control region.
    """
    opts = opts or ControlOptions()
    _check_support(kernel, region, sgrid, tgrid)
    res = null_control_nonhom(y0, None, coef, region, sgrid, tgrid, weights,
                              opts)
    # local problem: y_t - A y = 1_omega v; nonlocal: y_t - A y + Ky = 1_omega u
    # with supp K in omega^2, u = v + Ky keeps y a solution of the latter
    corr_mid = _nonlocal_source(kernel, res.y, sgrid, tgrid)
    u_mid = res.u_mid + corr_mid
    u_lv = res.u.copy()
    for j in range(tgrid.m + 1):
        u_lv[j] += apply_nonlocal(kernel, res.y[j], tgrid.times[j], sgrid)
    y_ver = solve_forward(y0, None, u_mid, kernel, coef, region, sgrid,
                          tgrid, stepper=opts.verify_stepper)
    nw = natural_weight(coef.form)
    yTn = weighted_norm(y_ver[-1], coef, sgrid, nw)
    ratio = yTn / res.y0_norm if res.y0_norm > 0 else \
        (0.0 if yTn <= 1e-14 else math.inf)
    return replace(res, u=u_lv, u_mid=u_mid, y=y_ver, final_ratio=ratio)


def _check_support(kernel: KernelSpec, region: ControlRegion,
                   sgrid: SpatialGrid, tgrid: TimeGrid,
                   tol: float = 1e-14) -> None:
    if kernel.is_zero:
        return
    outside = 1.0 - region.mask(sgrid)
    sel = np.outer(outside, np.ones_like(outside)) \
        + np.outer(np.ones_like(outside), outside)
    worst = 0.0
    for t in tgrid.times[:-1]:
        M = kernel.matrix(t, sgrid)
        worst = max(worst, float(np.max(np.abs(M)[sel > 0])))
        if worst > tol:
            raise KernelSupportError(
                f"kernel mass {worst:.3e} outside omega x omega")
