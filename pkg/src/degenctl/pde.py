"""Discrete degenerate parabolic operators, forward/adjoint time-steppers
for the three operator forms, and an independent spectral solver built on
the weighted eigenbasis.

Conventions
-----------
* A field is an array of shape (m+1, n+1): one spatial profile per time
  level, Dirichlet entries kept at zero.
* Sources (f, u, g) may be given on time levels (m+1, n+1) -- they are
  averaged onto the step midpoints -- or directly on midpoints (m, n+1).
* The discrete operator A approximates a*d_xx (non-divergence) or
  d_x(a d_x) (divergence) on the *active* nodes; both are self-adjoint in
  the trapezoid inner product natural to their form (weight 1/a for
  non-divergence, plain for divergence), which is what makes the control
  machinery exactly dual to these steppers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh, solve_banded

from .model import (DIV_SD, DIV_WD, NONDIV, ControlRegion,
                    DegenerateCoefficient, KernelSpec, SpatialGrid, TimeGrid,
                    apply_nonlocal)


@dataclass(frozen=True)
class DiscreteOperator:
    """Tridiagonal operator on the active node range [lo, hi) of the grid.

    Rows are stored as (lower, diag, upper); `apply` acts on full profiles
    and returns values on active nodes.  Dirichlet nodes never enter.
    """

    form: str
    lo: int
    hi: int  # active nodes are lo..hi-1; node hi..n carry Dirichlet data
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    @property
    def size(self) -> int:
        return self.hi - self.lo

    def apply(self, v: np.ndarray) -> np.ndarray:
        """A v on active nodes, v a full profile (boundary entries used)."""
        x = v[self.lo:self.hi]
        out = self.diag * x
        out[1:] += self.lower[1:] * x[:-1]
        out[:-1] += self.upper[:-1] * x[1:]
        if self.lo > 0:
            out[0] += self.lower[0] * v[self.lo - 1]
        if self.hi < v.size:
            out[-1] += self.upper[-1] * v[self.hi]
        return out

    def apply_transpose(self, r: np.ndarray) -> np.ndarray:
        """A^T r on active nodes, for r given on active nodes only."""
        out = self.diag * r
        out[:-1] += self.lower[1:] * r[1:]
        out[1:] += self.upper[:-1] * r[:-1]
        return out

    def solve_shifted(self, tau: float, rhs: np.ndarray) -> np.ndarray:
        """Solve (I - tau*A) x = rhs on the active nodes."""
        k = self.size
        ab = np.zeros((3, k))
        ab[0, 1:] = -tau * self.upper[:-1]
        ab[1, :] = 1.0 - tau * self.diag
        ab[2, :-1] = -tau * self.lower[1:]
        return solve_banded((1, 1), ab, rhs)


def active_range(form: str, grid: SpatialGrid) -> tuple[int, int]:
    """Unknown node indices: both endpoints Dirichlet except the strongly
    degenerate form, whose x = 0 node evolves under the zero-flux condition."""
    return (0 if form == DIV_SD else 1), grid.n


def assemble_operator(coef: DegenerateCoefficient, grid: SpatialGrid,
                      form: str | None = None) -> DiscreteOperator:
    """Discretise a*d_xx (non-divergence, nodes) or the conservative flux
    form of d_x(a d_x) (divergence, with zero flux at x = 0 for the
    strongly degenerate case)."""
    form = coef.form if form is None else form
    x = grid.nodes
    n = grid.n
    lo, hi = active_range(form, grid)
    k = hi - lo
    lower = np.zeros(k)
    diag = np.zeros(k)
    upper = np.zeros(k)
    if form == NONDIV:
        a = np.asarray(coef.a(x), dtype=float)
        for idx in range(k):
            i = lo + idx
            hl = x[i] - x[i - 1]
            hr = x[i + 1] - x[i]
            lower[idx] = 2.0 * a[i] / (hl * (hl + hr))
            upper[idx] = 2.0 * a[i] / (hr * (hl + hr))
            diag[idx] = -2.0 * a[i] / (hl * hr)
    elif form in (DIV_WD, DIV_SD):
        amid = np.asarray(coef.a(grid.midpoints), dtype=float)
        w = grid.weights
        for idx in range(k):
            i = lo + idx
            fr = amid[i] / (x[i + 1] - x[i]) if i < n else 0.0
            fl = amid[i - 1] / (x[i] - x[i - 1]) if i > 0 else 0.0
            # zero left flux at i = 0 reproduces (a y_x)(0) = 0 without
            # evaluating a' at the degeneracy
            lower[idx] = fl / w[i]
            upper[idx] = fr / w[i]
            diag[idx] = -(fl + fr) / w[i]
    else:
        raise ValueError(f"unsupported form {form!r}")
    return DiscreteOperator(form, lo, hi, lower, diag, upper)


# ---------------------------------------------------------------------------
# source handling
# ---------------------------------------------------------------------------

def to_midpoints(src, tgrid: TimeGrid, npts: int) -> np.ndarray:
    """Normalise a source to shape (m, npts): None -> zeros, level fields
    are averaged onto midpoints, midpoint arrays pass through."""
    m = tgrid.m
    if src is None:
        return np.zeros((m, npts))
    arr = np.asarray(src, dtype=float)
    if arr.shape == (m, npts):
        return arr
    if arr.shape == (m + 1, npts):
        return 0.5 * (arr[:-1] + arr[1:])
    raise ValueError(f"source shape {arr.shape} matches neither levels "
                     f"({m + 1}, {npts}) nor midpoints ({m}, {npts})")


# ---------------------------------------------------------------------------
# forward / adjoint steppers
# ---------------------------------------------------------------------------

def solve_forward(y0: np.ndarray, f, u, kernel: KernelSpec | None,
                  coef: DegenerateCoefficient, region: ControlRegion | None,
                  sgrid: SpatialGrid, tgrid: TimeGrid,
                  form: str | None = None, stepper: str = "be") -> np.ndarray:
    """March y_t = A y - (K y) + f + 1_omega u from y0 and return the full
    trajectory on time levels.

    "be" is implicit Euler with midpoint source sampling and the nonlocal
    term lagged one step; "cn" is Crank-Nicolson with one midpoint Picard
    correction of the nonlocal term.  Both are unconditionally stable.
    """
    form = coef.form if form is None else form
    op = assemble_operator(coef, sgrid, form)
    lo, hi = op.lo, op.hi
    m, dt = tgrid.m, tgrid.dt
    npts = sgrid.n + 1
    fm = to_midpoints(f, tgrid, npts)
    um = to_midpoints(u, tgrid, npts)
    if region is not None:
        um = um * region.mask(sgrid)
    y = np.zeros((m + 1, npts))
    y[0] = np.asarray(y0, dtype=float)
    y[0, hi:] = 0.0
    if lo > 0:
        y[0, :lo] = 0.0
    has_kernel = kernel is not None and not kernel.is_zero
    tmid = tgrid.midtimes
    for j in range(m):
        src = fm[j, lo:hi] + um[j, lo:hi]
        if stepper == "be":
            if has_kernel:
                src = src - apply_nonlocal(kernel, y[j], tgrid.times[j],
                                           sgrid)[lo:hi]
            rhs = y[j, lo:hi] + dt * src
            y[j + 1, lo:hi] = op.solve_shifted(dt, rhs)
        elif stepper == "cn":
            base = y[j, lo:hi] + 0.5 * dt * op.apply(y[j])
            if has_kernel:
                pred = op.solve_shifted(
                    0.5 * dt, base + dt * (src - apply_nonlocal(
                        kernel, y[j], tgrid.times[j], sgrid)[lo:hi]))
                ymid = y[j].copy()
                ymid[lo:hi] = 0.5 * (ymid[lo:hi] + pred)
                src = src - apply_nonlocal(kernel, ymid, tmid[j], sgrid)[lo:hi]
            y[j + 1, lo:hi] = op.solve_shifted(0.5 * dt, base + dt * src)
        else:
            raise ValueError(f"unknown stepper {stepper!r}")
        if not np.all(np.isfinite(y[j + 1, lo:hi])):
            raise FloatingPointError(f"non-finite state at step {j + 1}")
    return y


def solve_adjoint(vT: np.ndarray, g, kernel: KernelSpec | None,
                  coef: DegenerateCoefficient, sgrid: SpatialGrid,
                  tgrid: TimeGrid, form: str | None = None,
                  stepper: str = "be") -> np.ndarray:
    """Backward solve of the adjoint problem from terminal data vT.

    Non-divergence: v_t + a v_xx = g + K^T v.  Divergence (both cases):
    -z_t - (a z_x)_x + K^T z = g.  The kernel always enters with its
    transpose.  Marching is implicit Euler (or Crank-Nicolson) in reversed
    time, where both problems are ordinary heat flows.
    """
    form = coef.form if form is None else form
    op = assemble_operator(coef, sgrid, form)
    lo, hi = op.lo, op.hi
    m, dt = tgrid.m, tgrid.dt
    npts = sgrid.n + 1
    gm = to_midpoints(g, tgrid, npts)
    # sign of g in reversed time: nondiv convention has +a v_xx and g on the
    # right; divergence convention has the source on the forward side
    gsign = -1.0 if form == NONDIV else 1.0
    v = np.zeros((m + 1, npts))
    v[m] = np.asarray(vT, dtype=float)
    v[m, hi:] = 0.0
    if lo > 0:
        v[m, :lo] = 0.0
    has_kernel = kernel is not None and not kernel.is_zero
    for j in range(m - 1, -1, -1):
        src = gsign * gm[j, lo:hi]
        if has_kernel:
            src = src - apply_nonlocal(kernel, v[j + 1], tgrid.times[j + 1],
                                       sgrid, transpose=True)[lo:hi]
        if stepper == "be":
            rhs = v[j + 1, lo:hi] + dt * src
            v[j, lo:hi] = op.solve_shifted(dt, rhs)
        elif stepper == "cn":
            base = v[j + 1, lo:hi] + 0.5 * dt * op.apply(v[j + 1])
            v[j, lo:hi] = op.solve_shifted(0.5 * dt, base + dt * src)
        else:
            raise ValueError(f"unknown stepper {stepper!r}")
    return v


# ---------------------------------------------------------------------------
# spectral solver on the weighted eigenbasis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GalerkinBasis:
    """First m eigenpairs of the generalized problem S w = L M w with S the
    Dirichlet stiffness matrix (integral of w' v') and M the lumped mass with
    weight 1/a; modes are orthonormal in the weighted product and L_k equals
    the Rayleigh quotient integral of |w_k'|^2 exactly."""

    modes: np.ndarray    # (m, n+1), zero boundary entries
    lambdas: np.ndarray  # (m,), positive nondecreasing
    mass: np.ndarray     # diagonal of M on interior nodes


def galerkin_eigenbasis(coef: DegenerateCoefficient, grid: SpatialGrid,
                        m: int) -> GalerkinBasis:
    n = grid.n
    if not 1 <= m <= n - 1:
        raise ValueError("mode count must be between 1 and n-1")
    x = grid.nodes
    h = grid.spacing
    k = n - 1
    S = np.zeros((k, k))
    for i in range(k):
        S[i, i] = 1.0 / h[i] + 1.0 / h[i + 1]
        if i + 1 < k:
            S[i, i + 1] = S[i + 1, i] = -1.0 / h[i + 1]
    a = np.asarray(coef.a(x[1:-1]), dtype=float)
    mass = grid.weights[1:-1] / a
    w, vecs = eigh(S, np.diag(mass))
    order = np.argsort(w)[:m]
    modes = np.zeros((m, n + 1))
    modes[:, 1:-1] = vecs[:, order].T
    return GalerkinBasis(modes, w[order], mass)


def galerkin_project(basis: GalerkinBasis, profile: np.ndarray) -> np.ndarray:
    """Coefficients of the weighted-orthogonal projection onto the basis."""
    return basis.modes[:, 1:-1] @ (basis.mass * profile[1:-1])


def solve_galerkin(y0: np.ndarray, f, u, kernel: KernelSpec | None,
                   basis: GalerkinBasis, coef: DegenerateCoefficient,
                   region: ControlRegion | None, sgrid: SpatialGrid,
                   tgrid: TimeGrid) -> np.ndarray:
    """Implicit-Euler integration of the modal system
    alpha_k' + Lambda_k alpha_k = <sources, w_k>, nonlocal term lagged,
    reconstructed onto the grid."""
    m, dt = tgrid.m, tgrid.dt
    npts = sgrid.n + 1
    fm = to_midpoints(f, tgrid, npts)
    um = to_midpoints(u, tgrid, npts)
    if region is not None:
        um = um * region.mask(sgrid)
    has_kernel = kernel is not None and not kernel.is_zero
    alpha = galerkin_project(basis, np.asarray(y0, dtype=float))
    traj = np.zeros((m + 1, npts))
    traj[0] = basis.modes.T @ alpha
    for j in range(m):
        src = fm[j] + um[j]
        if has_kernel:
            yj = basis.modes.T @ alpha
            src = src - apply_nonlocal(kernel, yj, tgrid.times[j], sgrid)
        F = galerkin_project(basis, src)
        alpha = (alpha + dt * F) / (1.0 + dt * basis.lambdas)
        traj[j + 1] = basis.modes.T @ alpha
    return traj


# ---------------------------------------------------------------------------
# space-time norms
# ---------------------------------------------------------------------------

def spacetime_norm_sq(field: np.ndarray, coef: DegenerateCoefficient,
                      sgrid: SpatialGrid, tgrid: TimeGrid,
                      weight: str = "one",
                      weight_table: np.ndarray | None = None) -> float:
    """Trapezoid-in-time, trapezoid-in-space integral of field^2 (optionally
    times a pointwise weight table and/or 1/a)."""
    from .model import weighted_inner
    vals = np.empty(field.shape[0])
    wt = np.ones_like(field) if weight_table is None else weight_table
    for j in range(field.shape[0]):
        vals[j] = weighted_inner(field[j] * np.sqrt(np.maximum(wt[j], 0.0)),
                                 field[j] * np.sqrt(np.maximum(wt[j], 0.0)),
                                 coef, sgrid, weight)
    tw = np.full(field.shape[0], tgrid.dt)
    tw[0] = tw[-1] = 0.5 * tgrid.dt
    if field.shape[0] == tgrid.m:  # midpoint samples
        tw = np.full(field.shape[0], tgrid.dt)
    return float(np.dot(tw, vals))
