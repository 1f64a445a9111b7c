"""Command-line front end: scenario configuration, command dispatch and
file output.

    degenctl validate <config.json> [--out FILE]
    degenctl control  <config.json> [--two-phase | --shortcut] [--outdir DIR]
    degenctl verify   <config.json> --check NAME [--s-sweep lo:hi:k] [--outdir DIR]
    degenctl sweep    <config.json> --param NAME --values v1 v2 ... [--out FILE]

Exit codes: 0 all checks pass, 1 a check or convergence failed, 2 usage or
parse error.  All outputs are deterministic for a fixed config and seed:
JSON is emitted with sorted keys, CSV with a fixed column order and 17
significant digits.  DEGENCTL_THREADS caps sweep concurrency; results are
written in input order regardless.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import hum, model, nonlocal_control, verify, weights
from .model import (DIV_SD, DIV_WD, NONDIV, ControlRegion,
                    DegenerateCoefficient, KernelSpec, SpatialGrid, TimeGrid)
from .weights import ParameterError

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2


class ConfigError(ValueError):
    """Configuration file cannot be turned into a validated scenario."""


# ---------------------------------------------------------------------------
# scenario
# ---------------------------------------------------------------------------

_FORMS = {"nondiv": NONDIV, "wd": DIV_WD, "sd": DIV_SD}


@dataclass
class Scenario:
    """Validated run configuration; `build` turns it into model objects."""

    form: str
    alpha: float
    omega: tuple[float, float]
    T: float = 1.0
    n: int = 64
    m: int = 128
    omega_tilde: tuple[float, float] | None = None
    grid_ratio: float = 1.0
    kernel_cfg: dict = field(default_factory=lambda: {"kind": "zero"})
    weight_cfg: dict = field(default_factory=dict)
    solver_cfg: dict = field(default_factory=dict)
    coefficient_table: dict | None = None
    seed: int = verify.DEFAULT_SEED

    @classmethod
    def from_dict(cls, raw: dict) -> "Scenario":
        try:
            form = str(raw["form"])
            if form not in _FORMS:
                raise ConfigError(f"form must be one of {sorted(_FORMS)}, "
                                  f"got {form!r}")
            omega = tuple(float(v) for v in raw["omega"])
            sc = cls(form=form,
                     alpha=float(raw.get("alpha", 0.5)),
                     omega=omega,  # type: ignore[arg-type]
                     T=float(raw.get("T", 1.0)),
                     n=int(raw.get("n", 64)),
                     m=int(raw.get("m", 128)),
                     grid_ratio=float(raw.get("grid_ratio", 1.0)),
                     kernel_cfg=dict(raw.get("kernel", {"kind": "zero"})),
                     weight_cfg=dict(raw.get("weights", {})),
                     solver_cfg=dict(raw.get("solver", {})),
                     coefficient_table=raw.get("coefficient_table"),
                     seed=int(raw.get("seed", verify.DEFAULT_SEED)))
            if "omega_tilde" in raw:
                sc.omega_tilde = tuple(float(v) for v in raw["omega_tilde"])
            return sc
        except KeyError as e:
            raise ConfigError(f"missing required key {e.args[0]!r}") from e
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from e

    @property
    def branch(self) -> str:
        return "nondiv" if self.form == "nondiv" else "div"

    def build(self) -> "Bundle":
        sgrid = SpatialGrid.geometric(self.n, self.grid_ratio)
        tgrid = TimeGrid(self.T, self.m)
        if self.coefficient_table is not None:
            coef = DegenerateCoefficient.from_table(
                _FORMS[self.form], self.alpha,
                np.asarray(self.coefficient_table["x"], dtype=float),
                np.asarray(self.coefficient_table["a"], dtype=float))
        else:
            coef = DegenerateCoefficient.power(_FORMS[self.form], self.alpha)
        region = ControlRegion(self.omega, self.omega_tilde)
        wc = self.weight_cfg
        params = weights.choose_parameters(
            coef, region, self.T, self.branch, sgrid,
            s=wc.get("s"), epsilon=float(wc.get("epsilon", 0.2)),
            beta=float(wc.get("beta", 4.0)), rho=wc.get("rho"),
            lam=wc.get("lambda"), c=wc.get("c"), d=wc.get("d"))
        wset = weights.assemble_weights(params, coef, region, sgrid, tgrid,
                                        self.branch)
        kernel = self._build_kernel(sgrid, region, params)
        opts = self._build_opts()
        return Bundle(self, coef, region, sgrid, tgrid, params, wset, kernel,
                      opts)

    def _build_kernel(self, sgrid, region, params) -> KernelSpec:
        cfg = self.kernel_cfg
        kind = cfg.get("kind", "zero")
        decay = self._resolve_decay(cfg.get("decay", 0.0), params)
        support = tuple(region.omega) if cfg.get("support_omega") else None
        if kind == "zero":
            return KernelSpec.zero(self.T)
        if kind == "constant_decay":
            return KernelSpec("constant_decay", self.T,
                              kappa0=float(cfg.get("kappa0", 1.0)),
                              decay=decay, support=support)
        if kind == "bump":
            # separable mollifier supported strictly inside omega x omega
            a, b = region.omega
            pad = float(cfg.get("pad", 0.1)) * (b - a)
            k1 = bump_profile(sgrid.nodes, a + pad, b - pad)
            k1 = float(cfg.get("kappa0", 1.0)) * k1
            return KernelSpec("separable_decay", self.T, decay=decay,
                              k1=k1, k2=k1.copy(),
                              support=(a, b))
        if kind == "separable_decay":
            k1 = np.asarray(cfg["k1"], dtype=float)
            k2 = np.asarray(cfg["k2"], dtype=float)
            return KernelSpec("separable_decay", self.T, decay=decay,
                              k1=k1, k2=k2, support=support)
        if kind == "tabulated":
            return KernelSpec("tabulated", self.T,
                              table=np.asarray(cfg["table"], dtype=float),
                              table_times=np.asarray(cfg["times"],
                                                     dtype=float),
                              support=support)
        raise ConfigError(f"unknown kernel kind {kind!r}")

    def _resolve_decay(self, decay, params) -> float:
        """Numbers pass through; the strings "c0s+<x>" / "c1s+<x>" resolve
        against the scenario's decay exponents."""
        if isinstance(decay, (int, float)):
            return float(decay)
        text = str(decay).replace(" ", "")
        for tag, base in (("c0s", params.c0), ("c1s", params.c1)):
            if text.startswith(tag):
                if base is None:
                    raise ConfigError(f"decay rule {text!r} needs the "
                                      f"{tag[:2]} exponent of this branch")
                rest = text[len(tag):]
                offset = float(rest[1:]) if rest.startswith("+") else 0.0
                return base * params.s + offset
        raise ConfigError(f"cannot parse kernel decay {decay!r}")

    def _build_opts(self) -> hum.ControlOptions:
        sc = self.solver_cfg
        return hum.ControlOptions(
            cg_tol=float(sc.get("cg_tol", 1e-8)),
            cg_max_iter=int(sc.get("cg_max_iter", 5000)),
            verify_stepper=str(sc.get("verify_stepper",
                                      sc.get("stepper", "cn"))),
            fp_tol=float(sc.get("fp_tol", 1e-6)),
            max_fp=int(sc.get("max_fp", 30)),
            t0_fraction=float(sc.get("t0_fraction", 0.25)),
            final_ratio_threshold=float(sc.get("final_ratio_threshold",
                                               1e-2)))


def bump_profile(x: np.ndarray, a: float, b: float) -> np.ndarray:
    """Smooth mollifier profile compactly supported in (a, b), peak 1."""
    z = (2.0 * x - a - b) / (b - a)
    out = np.zeros_like(x)
    inside = np.abs(z) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - z[inside] ** 2))
    return out


@dataclass
class Bundle:
    scenario: Scenario
    coef: DegenerateCoefficient
    region: ControlRegion
    sgrid: SpatialGrid
    tgrid: TimeGrid
    params: weights.WeightParams
    weights: weights.WeightSet
    kernel: KernelSpec
    opts: hum.ControlOptions


def load_scenario(path: str | Path) -> Scenario:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from e
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(
            f"{path}:{e.lineno}:{e.colno}: invalid JSON: {e.msg}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}:1:1: top level must be a JSON object")
    return Scenario.from_dict(raw)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.16e}"


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if not isinstance(v, str) else v
                              for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_json(path: Path, obj: dict) -> None:
    path.write_text(json.dumps(_sanitize(obj), sort_keys=True, indent=2)
                    + "\n", encoding="utf-8")


def _sanitize(obj):
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _sanitize(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def field_rows(fieldarr: np.ndarray, sgrid: SpatialGrid,
               times: np.ndarray) -> list[list]:
    rows = []
    for j, t in enumerate(times):
        for i, x in enumerate(sgrid.nodes):
            rows.append([t, x, fieldarr[j, i]])
    return rows


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_validate(config_path: str, out: str | None = None) -> int:
    scenario = load_scenario(config_path)
    sgrid = SpatialGrid.geometric(scenario.n, scenario.grid_ratio)
    tgrid = TimeGrid(scenario.T, scenario.m)
    if scenario.coefficient_table is not None:
        coef = DegenerateCoefficient.from_table(
            _FORMS[scenario.form], scenario.alpha,
            np.asarray(scenario.coefficient_table["x"], dtype=float),
            np.asarray(scenario.coefficient_table["a"], dtype=float))
    else:
        coef = DegenerateCoefficient.power(_FORMS[scenario.form],
                                           scenario.alpha)
    report: dict = {"scenario": {"form": scenario.form,
                                 "alpha": scenario.alpha,
                                 "n": scenario.n, "m": scenario.m,
                                 "T": scenario.T}}
    coef_rep = model.validate_coefficient(coef, sgrid)
    report["coefficient"] = coef_rep.as_dict()
    ok = coef_rep.ok
    if coef_rep.ok:
        region = ControlRegion(scenario.omega, scenario.omega_tilde)
        wc = scenario.weight_cfg
        try:
            params = weights.choose_parameters(
                coef, region, scenario.T, scenario.branch, sgrid,
                s=wc.get("s"), epsilon=float(wc.get("epsilon", 0.2)),
                beta=float(wc.get("beta", 4.0)), rho=wc.get("rho"),
                lam=wc.get("lambda"), c=wc.get("c"), d=wc.get("d"))
            wset = weights.assemble_weights(params, coef, region, sgrid,
                                            tgrid, scenario.branch)
            ineq = weights.verify_parameter_inequalities(params, wset,
                                                         scenario.branch)
            report["parameters"] = params.as_dict()
            report["inequalities"] = ineq.as_dict()
            ok = ok and ineq.ok
            bundle = scenario.build()
            krep = nonlocal_control.check_kernel_hypotheses(
                bundle.kernel, params, coef, sgrid, tgrid, scenario.branch)
            report["kernel"] = krep.as_dict()
            ok = ok and krep.ok
        except (ParameterError, ConfigError) as e:
            report["parameters_error"] = str(e)
            ok = False
    report["ok"] = ok
    payload = json.dumps(_sanitize(report), sort_keys=True, indent=2)
    if out:
        Path(out).write_text(payload + "\n", encoding="utf-8")
    else:
        print(payload)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_control(config_path: str, two_phase: bool = False,
                shortcut: bool = False, outdir: str = ".") -> int:
    scenario = load_scenario(config_path)
    bundle = scenario.build()
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    y0 = np.sin(np.pi * bundle.sgrid.nodes)
    if scenario.solver_cfg.get("initial") == "indicator":
        lohi = scenario.solver_cfg.get("initial_interval", [0.2, 0.6])
        y0 = ((bundle.sgrid.nodes > lohi[0])
              & (bundle.sgrid.nodes < lohi[1])).astype(float)
    summary: dict = {"command": "control", "two_phase": two_phase,
                     "shortcut": shortcut}
    trace = None
    if shortcut:
        res = nonlocal_control.supported_kernel_shortcut(
            y0, bundle.kernel, bundle.coef, bundle.region, bundle.sgrid,
            bundle.tgrid, bundle.weights, bundle.opts)
    elif two_phase:
        tp = nonlocal_control.two_phase_control(
            y0, bundle.kernel, bundle.coef, bundle.region, bundle.sgrid,
            bundle.tgrid, scenario.branch, bundle.opts, bundle.params)
        res, trace = tp.result, tp.trace
        summary["t0"] = tp.t0
        summary["regularity_grad_norm"] = tp.regularity_grad_norm
    elif bundle.kernel.is_zero:
        res = hum.null_control_nonhom(
            y0, None, bundle.coef, bundle.region, bundle.sgrid, bundle.tgrid,
            bundle.weights, bundle.opts)
    else:
        res, trace = nonlocal_control.fixed_point_control(
            y0, bundle.kernel, bundle.coef, bundle.region, bundle.sgrid,
            bundle.tgrid, bundle.weights, bundle.opts)
    summary.update(res.summary())
    if trace is not None:
        summary["fixed_point"] = trace.as_dict()
        write_csv(out / "fixed_point.csv",
                  ["iteration", "iterate_norm", "change", "control_norm",
                   "local_final_ratio", "in_ball"],
                  [[it.index, it.iterate_norm, it.change, it.control_norm,
                    it.local_final_ratio, it.in_ball]
                   for it in trace.iterations])
    threshold = bundle.opts.final_ratio_threshold
    summary["threshold"] = threshold
    summary["passed"] = bool(res.final_ratio <= threshold)
    times = bundle.tgrid.times
    write_csv(out / "u.csv", ["t", "x", "value"],
              field_rows(res.u, bundle.sgrid, times))
    write_csv(out / "y.csv", ["t", "x", "value"],
              field_rows(res.y, bundle.sgrid, times))
    write_json(out / "summary.json", summary)
    print(json.dumps(_sanitize(
        {k: summary[k] for k in ("final_ratio", "passed", "cg_iterations")}),
        sort_keys=True))
    converged = trace.converged if trace is not None else True
    return EXIT_OK if summary["passed"] and converged else EXIT_CHECK_FAILED


_CHECK_NAMES = ("hardy", "splitting", "carleman-boundary", "carleman-local",
                "carleman-modified", "carleman-div", "carleman-modified-div",
                "caccioppoli", "observability", "energy")


def parse_sweep(text: str | None, params) -> np.ndarray:
    if text is None:
        return np.linspace(params.s / 2.0, 2.0 * params.s, 5)
    try:
        lo, hi, k = text.split(":")
        return np.linspace(float(lo), float(hi), int(k))
    except ValueError as e:
        raise ConfigError(f"cannot parse sweep {text!r}, expected lo:hi:k") \
            from e


def cmd_verify(config_path: str, check: str, s_sweep: str | None = None,
               outdir: str = ".") -> int:
    if check not in _CHECK_NAMES:
        raise ConfigError(f"unknown check {check!r}; choose from "
                          f"{', '.join(_CHECK_NAMES)}")
    scenario = load_scenario(config_path)
    bundle = scenario.build()
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    coef, region = bundle.coef, bundle.region
    sgrid, tgrid, wset = bundle.sgrid, bundle.tgrid, bundle.weights
    ok = True
    rows: list[list] = []
    header: list[str]
    if check == "hardy":
        rep = verify.check_hardy(coef, sgrid, seed=scenario.seed)
        canonical = sgrid.nodes * (1.0 - sgrid.nodes)
        can = verify.check_hardy(coef, sgrid, samples=[canonical])
        payload = rep.as_dict()
        payload["canonical_ratio"] = can.ratios[0]
        ok = math.isfinite(rep.ensemble_max)
        header = ["member", "ratio"]
        rows = [[i, r] for i, r in enumerate(rep.ratios)]
    elif check == "splitting":
        s = float(scenario.weight_cfg.get("s_splitting", 0.02))

        def factory(sg, tg):
            p = weights.choose_parameters(coef, region, tg.T,
                                          scenario.branch, sg, s=s)
            return weights.assemble_weights(p, coef, region, sg, tg,
                                            scenario.branch)

        rep = verify.splitting_refinement_study(coef, region, sgrid, tgrid,
                                                s, factory)
        payload = rep.as_dict()
        ok = math.isfinite(rep.relative_residual)
        header = ["level", "residual"]
        rows = [[i, r] for i, r in
                enumerate(rep.parts["residuals_by_level"])]
    elif check.startswith("carleman"):
        variant = {"carleman-boundary": "boundary",
                   "carleman-local": "local",
                   "carleman-modified": "modified_nondiv",
                   "carleman-div": "div",
                   "carleman-modified-div": "modified_div"}[check]
        if variant in ("div", "modified_div") and scenario.branch != "div":
            raise ConfigError(f"{check} needs a divergence-form scenario")
        if variant in ("boundary", "local", "modified_nondiv") \
                and scenario.branch != "nondiv":
            raise ConfigError(f"{check} needs a non-divergence scenario")
        sweep = parse_sweep(s_sweep, bundle.params)
        rep = verify.check_carleman(variant, coef, region, sgrid, tgrid,
                                    wset, sweep, seed=scenario.seed)
        payload = rep.as_dict()
        payload["trend_ok"] = rep.top_quartile_nonincreasing()
        ok = math.isfinite(rep.max_ratio) and payload["trend_ok"]
        header = ["s", "member", "lhs", "rhs", "ratio"]
        rows = [[r.s, r.member, r.lhs_total, r.rhs_total, r.ratio]
                for r in rep.records]
    elif check == "caccioppoli":
        rep = verify.check_caccioppoli(coef, region, sgrid, tgrid, wset,
                                       s=bundle.params.s,
                                       seed=scenario.seed)
        payload = rep.as_dict()
        ok = math.isfinite(rep.max_ratio)
        header = ["member", "ratio"]
        rows = [[i, r] for i, r in enumerate(rep.ratios)]
    elif check == "observability":
        rep = verify.check_observability(coef, region, sgrid, tgrid,
                                         kernel=bundle.kernel,
                                         seed=scenario.seed)
        payload = rep.as_dict()
        ok = math.isfinite(rep.max_ratio) and all(
            a >= b for a, b in zip(rep.ratios_omega, rep.ratios_full))
        header = ["member", "ratio_omega", "ratio_full",
                  "ratio_weighted_full"]
        rows = [[i, a, b, c] for i, (a, b, c) in
                enumerate(zip(rep.ratios_omega, rep.ratios_full,
                              rep.ratios_weighted_full))]
    else:  # energy
        rep = verify.check_energy_estimates(coef, region, sgrid, tgrid,
                                            kernel=bundle.kernel,
                                            seed=scenario.seed)
        payload = rep.as_dict()
        ok = rep.dissipative and math.isfinite(rep.max_constant)
        header = ["member", "constant"]
        rows = [[i, c] for i, c in enumerate(rep.constants)]
    payload["check"] = check
    payload["ok"] = ok
    stem = check.replace("-", "_")
    write_json(out / f"{stem}.json", payload)
    write_csv(out / f"{stem}.csv", header, rows)
    print(json.dumps(_sanitize({"check": check, "ok": ok}), sort_keys=True))
    return EXIT_OK if ok else EXIT_CHECK_FAILED


_SWEEPABLE = ("s", "epsilon", "alpha", "n", "m")


def _sweep_one(config_path: str, param: str, value: float) -> dict:
    scenario = load_scenario(config_path)
    raw = json.loads(Path(config_path).read_text(encoding="utf-8"))
    if param in ("n", "m"):
        raw[param] = int(value)
    elif param == "alpha":
        raw["alpha"] = float(value)
    else:
        raw.setdefault("weights", {})[param] = float(value)
    scenario = Scenario.from_dict(raw)
    row: dict = {"param": param, "value": value}
    try:
        bundle = scenario.build()
    except (ParameterError, ConfigError, ValueError) as e:
        row["error"] = str(e)
        row["passed"] = False
        return row
    ineq = weights.verify_parameter_inequalities(bundle.params,
                                                 bundle.weights,
                                                 scenario.branch)
    row["inequalities_ok"] = ineq.ok
    for e in ineq.entries:
        row[e.name] = e.value
    y0 = np.sin(np.pi * bundle.sgrid.nodes)
    if bundle.kernel.is_zero:
        res = hum.null_control_nonhom(y0, None, bundle.coef, bundle.region,
                                      bundle.sgrid, bundle.tgrid,
                                      bundle.weights, bundle.opts)
    else:
        res, _ = nonlocal_control.fixed_point_control(
            y0, bundle.kernel, bundle.coef, bundle.region, bundle.sgrid,
            bundle.tgrid, bundle.weights, bundle.opts)
    row["final_ratio"] = res.final_ratio
    row["cost_J"] = res.cost_J
    row["cg_iterations"] = res.cg_iterations
    row["passed"] = bool(ineq.ok and res.final_ratio
                         <= bundle.opts.final_ratio_threshold)
    return row


def cmd_sweep(config_path: str, param: str, values: list[float],
              out: str | None = None) -> int:
    if param not in _SWEEPABLE:
        raise ConfigError(f"unknown sweep parameter {param!r}; choose from "
                          f"{', '.join(_SWEEPABLE)}")
    threads = int(os.environ.get("DEGENCTL_THREADS", "1"))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda v: _sweep_one(config_path, param, v),
                                 values))
    else:
        rows = [_sweep_one(config_path, param, v) for v in values]
    keys = ["param", "value"]
    for row in rows:
        for k in row:
            if k not in keys:
                keys.append(k)
    table = [[row.get(k, "") for k in keys] for row in rows]
    lines = [",".join(keys)]
    for row in table:
        lines.append(",".join(
            v if isinstance(v, str) else _fmt(v) for v in row))
    text = "\n".join(lines) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    all_ok = all(row.get("passed") for row in rows)
    return EXIT_OK if all_ok else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="degenctl",
        description="Null controls and inequality checks for 1-D "
                    "degenerate heat equations with nonlocal terms")
    sub = ap.add_subparsers(dest="command", required=True)
    v = sub.add_parser("validate", help="validate a scenario configuration")
    v.add_argument("config")
    v.add_argument("--out", default=None)
    c = sub.add_parser("control", help="compute and verify a null control")
    c.add_argument("config")
    c.add_argument("--two-phase", action="store_true")
    c.add_argument("--shortcut", action="store_true")
    c.add_argument("--outdir", default=".")
    w = sub.add_parser("verify", help="run one inequality/identity check")
    w.add_argument("config")
    w.add_argument("--check", required=True, choices=_CHECK_NAMES)
    w.add_argument("--s-sweep", default=None, metavar="LO:HI:K")
    w.add_argument("--outdir", default=".")
    s = sub.add_parser("sweep", help="sweep one parameter")
    s.add_argument("config")
    s.add_argument("--param", required=True)
    s.add_argument("--values", required=True, nargs="+", type=float)
    s.add_argument("--out", default=None)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    try:
        if args.command == "validate":
            return cmd_validate(args.config, args.out)
        if args.command == "control":
            if args.two_phase and args.shortcut:
                raise ConfigError("--two-phase and --shortcut are exclusive")
            return cmd_control(args.config, args.two_phase, args.shortcut,
                               args.outdir)
        if args.command == "verify":
            return cmd_verify(args.config, args.check, args.s_sweep,
                              args.outdir)
        if args.command == "sweep":
            return cmd_sweep(args.config, args.param, args.values, args.out)
    except (ParameterError, nonlocal_control.KernelSupportError,
            hum.SourceDecayError) as e:
        print(f"check failed: {e}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
