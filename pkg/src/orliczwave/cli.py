"""Command-line driver.

    orliczwave <command> --config <path> [--out <dir>] [--seed <n>]

Commands: solve, converge-time, converge-space, verify-orlicz, verify-nfun,
probe-unique.  Exit codes: 0 all asserted checks passed, 1 an asserted check
failed, 2 configuration problem, 3 solver failure.  Every command writes its
delimited tables, a summary.txt with one verdict per check, and a figure
rendered from the same numbers.  Identical config and seed give bit-identical
CSV output.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import harness, monitors, reporting
from .config import COMMANDS, ConfigError, RunConfig, compile_expression, parse_config
from .nfunction import (MaximizationError, NFunctionSpec, UnsupportedSpecError,
                        axiom_samples, delta2_check, growth_constant_estimate,
                        monotonicity_probe, young_gap)
from .orlicz import (CellField, holder_check, luxemburg_norm, modular,
                     norm_modular_relations)
from .space import Field, build_space, field_to_csv, grid_dump, l2_project
from .stepper import NewtonError, SchemeConfig, SourceSampler, run, second_order_residual

__all__ = ["main", "execute"]


class UsageError(Exception):
    """Config is well-formed but misses what this command needs."""


class _Summary:
    def __init__(self):
        self.lines = []
        self.failed = False

    def check(self, name: str, ok: bool, detail: str):
        verdict = "PASS" if ok else "FAIL"
        self.lines.append(f"{name}: {detail} [{verdict}]")
        if not ok:
            self.failed = True

    def note(self, name: str, detail: str):
        self.lines.append(f"{name}: {detail} [INFO]")

    def finish(self, out_dir: str) -> int:
        path = os.path.join(out_dir, "summary.txt")
        with open(path, "w") as fh:
            for line in self.lines:
                fh.write(line + "\n")
        for line in self.lines:
            print(line)
        return 1 if self.failed else 0


def _build_spec(config: RunConfig, dim: int) -> NFunctionSpec:
    if config.spec_kind is None:
        raise UsageError("this command needs a [spec] section (kind = ...)")
    if config.spec_kind == "power":
        return NFunctionSpec.power(config.spec_p, dim=dim)
    if config.spec_kind == "exp":
        return NFunctionSpec.exponential(dim=dim)
    return NFunctionSpec.quad_form(config.spec_matrix)


def _build_space(config: RunConfig, default: tuple | None = None):
    kind = config.space_kind
    if kind is None:
        if default is None:
            raise UsageError("this command needs a [space] section (kind = ...)")
        return build_space(*default)
    if kind == "fem2d":
        if config.nx is not None and config.ny is not None:
            return build_space(kind, (config.nx, config.ny))
        return build_space(kind, config.resolution)
    return build_space(kind, config.resolution)


def _spec_dim(config: RunConfig) -> int:
    if isinstance(config.spec_matrix, np.ndarray):
        return config.spec_matrix.shape[0]
    if config.space_kind == "fem2d":
        return 2
    return 1


# -- solve ---------------------------------------------------------------------

def _cmd_solve(config: RunConfig) -> int:
    out = config.out_dir
    summary = _Summary()
    if config.case is not None:
        case = harness.get_case(config.case)
        space = _build_space(config, default=case.default_space)
        spec = case.spec
        u0, v0 = harness.initial_fields(case, space)
        sampler = SourceSampler(case.source)
        summary.note("case", f"{case.name}: {case.description}")
    else:
        space = _build_space(config)
        spec = _build_spec(config, space.dim)
        u0 = (l2_project(space, lambda x: compile_expression(config.u0_expr)(x, 0.0))
              if config.u0_expr else Field(space, space.zero_coefficients()))
        v0 = (l2_project(space, lambda x: compile_expression(config.v0_expr)(x, 0.0))
              if config.v0_expr else Field(space, space.zero_coefficients()))
        sampler = (SourceSampler(compile_expression(config.forcing_expr))
                   if config.forcing_expr else SourceSampler.zero())
    if config.n_steps is None:
        raise UsageError("solve needs [time] N")
    scheme = SchemeConfig(config.t_final, config.n_steps, newton_tol=config.newton_tol)
    report = run(spec, space, u0, v0, sampler, scheme)

    reporting.write_run_csv(report, os.path.join(out, "run.csv"))
    reporting.energy_figure(report, os.path.join(out, "energy.png"))
    field_to_csv(report.final_state.u, os.path.join(out, "final_state.csv"))
    if space.kind == "fem2d":
        grid_dump(report.final_state.u, os.path.join(out, "final_grid.dat"))

    dissipation = monitors.check_dissipation(report)
    summary.check("dissipation", dissipation.ok,
                  f"max slack beyond Newton allowance {dissipation.max_violation:.3e}")
    estimate = monitors.check_energy_estimate(report)
    summary.check("energy estimate", estimate.ok or estimate.generic_only,
                  f"max lhs {estimate.max_lhs:.6e} vs rhs {estimate.rhs_bound:.6e}"
                  + (" (generic constant only)" if estimate.generic_only else ""))
    summary.check("telescoping", report.telescoping_error <= 1e-12,
                  f"|u_N - (u_0 + tau sum v)| = {report.telescoping_error:.3e}")
    second = second_order_residual(report).max()
    tol = max(report.max_newton_tol(), 1e-16)
    summary.check("second-order form", second <= 10.0 * tol,
                  f"max residual {second:.3e} <= 10 x Newton tol {tol:.3e}")
    if space.kind == "spectral1d" and spec.has_closed_conjugate:
        dual = monitors.dual_increment_sum(report)
        summary.note("dual increment sum",
                     f"lhs {dual.lhs:.6e}, data functional {dual.data_functional:.6e}")
    iters = max(rec.newton_iters for rec in report.records)
    summary.note("newton", f"max iterations per step {iters}")
    return summary.finish(out)


# -- convergence ----------------------------------------------------------------

def _cmd_converge_time(config: RunConfig) -> int:
    if config.case is None:
        raise UsageError("converge-time needs [case] name")
    if not config.tau_ladder:
        raise UsageError("converge-time needs [time] tau_ladder")
    case = harness.get_case(config.case)
    space = _build_space(config, default=case.default_space)
    study = harness.temporal_convergence(case, space, config.tau_ladder,
                                         t_final=config.t_final,
                                         newton_tol=config.newton_tol)
    out, summary = config.out_dir, _Summary()
    rows = [(study.case_name, "time", e.resolution, e.tau, e.l2_error, e.v_error,
             study.rate) for e in study.entries]
    reporting.write_convergence_csv(rows, os.path.join(out, "convergence.csv"))
    reporting.convergence_figure([(e.tau, e.l2_error, e.v_error) for e in study.entries],
                                 study.rate, os.path.join(out, "convergence.png"), "tau")

    lo = config.rate_min if config.rate_min is not None else 0.85
    hi = config.rate_max if config.rate_max is not None else 1.15
    summary.check("temporal rate", lo <= study.rate <= hi,
                  f"fitted rate {study.rate:.4f} in [{lo:g}, {hi:g}]")
    min_err = min(e.l2_error for e in study.entries)
    summary.check("spatial floor", 10.0 * study.floor <= min_err,
                  f"projection floor {study.floor:.3e} at least 10x below "
                  f"smallest error {min_err:.3e}")
    summary.note("velocity rate", f"{study.v_rate:.4f}")
    return summary.finish(out)


def _cmd_converge_space(config: RunConfig) -> int:
    if config.case is None:
        raise UsageError("converge-space needs [case] name")
    if not config.resolution_ladder:
        raise UsageError("converge-space needs [time] resolution_ladder")
    if config.tau is None:
        raise UsageError("converge-space needs [time] tau")
    case = harness.get_case(config.case)
    kind = config.space_kind or case.default_space[0]
    study = harness.spatial_convergence(case, config.resolution_ladder, config.tau,
                                        space_kind=kind, t_final=config.t_final,
                                        newton_tol=config.newton_tol)
    out, summary = config.out_dir, _Summary()
    rows = [(study.case_name, "space", e.resolution, e.tau, e.l2_error, e.v_error,
             study.rate) for e in study.entries]
    proj_rate = harness.rate_fit(
        [(1.0 / e.resolution, p) for e, p in zip(study.entries, study.projection_errors)])
    rows += [(f"{study.case_name}-projection", "space", e.resolution, e.tau, p, p,
              proj_rate) for e, p in zip(study.entries, study.projection_errors)]
    reporting.write_convergence_csv(rows, os.path.join(out, "convergence.csv"))
    reporting.convergence_figure(
        [(1.0 / e.resolution, e.l2_error, e.v_error) for e in study.entries],
        study.rate, os.path.join(out, "convergence.png"), "h")

    lo = config.rate_min if config.rate_min is not None else 1.7
    hi = config.rate_max if config.rate_max is not None else 2.3
    summary.check("spatial rate", lo <= study.rate <= hi,
                  f"fitted rate {study.rate:.4f} in [{lo:g}, {hi:g}]")
    summary.note("projection-control rate", f"{proj_rate:.4f}")
    return summary.finish(out)


# -- verification suites ---------------------------------------------------------

def _random_field(rng, dim: int, n_cells: int = 16, scale: float = 3.0) -> CellField:
    measures = rng.random(n_cells) + 0.1
    measures /= measures.sum()
    values = scale * rng.standard_normal((n_cells, dim))
    return CellField(values, measures)


def _cmd_verify_orlicz(config: RunConfig) -> int:
    spec = _build_spec(config, _spec_dim(config))
    rng = np.random.default_rng(config.seed)
    out, summary = config.out_dir, _Summary()
    rows, gaps = [], []

    worst_gap = np.inf
    worst_eq = 0.0
    for _ in range(config.check_trials):
        xi = 3.0 * rng.standard_normal(spec.dim)
        eta = 3.0 * rng.standard_normal(spec.dim)
        gap = young_gap(spec, xi, eta)
        gaps.append(gap)
        worst_gap = min(worst_gap, gap)
        eq_gap = abs(young_gap(spec, xi, spec.stress(xi)))
        worst_eq = max(worst_eq, eq_gap / (1.0 + spec.evaluate(xi)))
    rows.append(("young-gap", "min over trials", worst_gap,
                 "PASS" if worst_gap >= -1e-9 else "FAIL"))
    rows.append(("young-equality", "max scaled gap at eta = sigma(xi)", worst_eq,
                 "PASS" if worst_eq <= 1e-8 else "FAIL"))
    summary.check("young gap nonnegative", worst_gap >= -1e-9, f"min {worst_gap:.3e}")
    summary.check("young equality at the stress", worst_eq <= 1e-8, f"max {worst_eq:.3e}")

    worst_mod = 0.0
    for _ in range(config.check_trials):
        field = _random_field(rng, spec.dim)
        lam = luxemburg_norm(spec, field)
        worst_mod = max(worst_mod, abs(modular(spec, field.scaled(1.0 / lam)) - 1.0))
    rows.append(("luxemburg", "max |modular(xi/norm) - 1|", worst_mod,
                 "PASS" if worst_mod <= 1e-8 else "FAIL"))
    summary.check("luxemburg normalization", worst_mod <= 1e-8, f"max {worst_mod:.3e}")

    try:
        holder_ok, holder_margin = True, np.inf
        for _ in range(config.check_trials):
            xi = _random_field(rng, spec.dim)
            eta = CellField(3.0 * rng.standard_normal(xi.values.shape), xi.measures)
            result = holder_check(spec, xi, eta)
            holder_ok &= result.ok
            holder_margin = min(holder_margin, result.rhs - result.lhs)
        rows.append(("holder", "min rhs - lhs", holder_margin,
                     "PASS" if holder_ok else "FAIL"))
        summary.check("holder factor 2", holder_ok, f"min margin {holder_margin:.3e}")
    except UnsupportedSpecError as exc:
        rows.append(("holder", "skipped", 0.0, "SKIP"))
        summary.note("holder factor 2", f"skipped: {exc}")

    relations_ok = True
    for target in (0.5, 1.0, 2.0):
        field = _random_field(rng, spec.dim)
        field = field.scaled(target / luxemburg_norm(spec, field))
        result = norm_modular_relations(spec, field)
        relations_ok &= result.ok
        rows.append((f"norm-modular@{target:g}", "norm vs modular", result.modular,
                     "PASS" if result.ok else "FAIL"))
    summary.check("norm-modular relations", relations_ok, "at norms 0.5, 1, 2")

    reporting.write_check_csv(rows, os.path.join(out, "orlicz.csv"))
    reporting.gap_figure(gaps, os.path.join(out, "young_gap.png"))
    return summary.finish(out)


def _cmd_verify_nfun(config: RunConfig) -> int:
    spec = _build_spec(config, _spec_dim(config))
    rng = np.random.default_rng(config.seed)
    out, summary = config.out_dir, _Summary()
    rows = []

    axioms = axiom_samples(spec, seed=config.seed)
    summary.check("axioms", axioms.ok(),
                  f"min value {axioms.min_value:.2e}, evenness gap "
                  f"{axioms.evenness_gap:.2e}, convexity margin "
                  f"{axioms.midpoint_convexity_margin:.2e}")
    rows.append(("axioms", "midpoint convexity margin",
                 axioms.midpoint_convexity_margin, "PASS" if axioms.ok() else "FAIL"))

    d2 = delta2_check(spec, sample_radius=config.check_radius,
                      samples=config.check_samples, seed=config.seed)
    growth = growth_constant_estimate(spec, sample_radius=config.check_radius,
                                      samples=config.check_samples, seed=config.seed)
    rows.append(("delta2", "doubling constant",
                 d2.constant if d2.constant is not None else np.inf,
                 "satisfied" if d2.satisfied else "not satisfied"))
    rows.append(("growth", "conjugate growth constant",
                 growth.constant if growth.constant is not None else np.inf,
                 "finite" if growth.finite else "divergent"))
    summary.note("delta2", "satisfied, constant "
                 f"{d2.constant:.6g}" if d2.satisfied else
                 f"not satisfied, sups {d2.level_sups}")
    summary.note("growth", f"finite, constant {growth.constant:.6g}" if growth.finite
                 else f"divergent, sups {growth.level_sups}")
    summary.check("delta2/growth equivalence", d2.satisfied == growth.finite,
                  f"doubling {'holds' if d2.satisfied else 'fails'}, growth constant "
                  f"{'finite' if growth.finite else 'divergent'}")

    pts = 5.0 * rng.standard_normal((200, spec.dim))
    other = 5.0 * rng.standard_normal((200, spec.dim))
    mono = monotonicity_probe(spec, pts, other)
    rows.append(("monotonicity", "min pairing", mono, "PASS" if mono >= -1e-9 else "FAIL"))
    summary.check("stress monotonicity", mono >= -1e-9, f"min pairing {mono:.3e}")

    worst_fd = 0.0
    sample = 0.5 + 4.5 * rng.random((50, spec.dim))
    stress = spec.stress(sample)
    h = 1e-5
    for a in range(spec.dim):
        shift = np.zeros_like(sample)
        shift[:, a] = h
        fd = (spec.evaluate(sample + shift) - spec.evaluate(sample - shift)) / (2 * h)
        denom = np.maximum(np.abs(stress[:, a]), 1.0)
        worst_fd = max(worst_fd, float(np.max(np.abs(fd - stress[:, a]) / denom)))
    rows.append(("stress-vs-fd", "max relative error", worst_fd,
                 "PASS" if worst_fd <= 1e-6 else "FAIL"))
    summary.check("stress matches potential slope", worst_fd <= 1e-6,
                  f"max relative FD error {worst_fd:.3e}")

    reporting.write_check_csv(rows, os.path.join(out, "nfun.csv"))
    radii = [config.check_radius * 2 ** k for k in range(3)]
    reporting.quotient_figure(radii, d2.level_sups, growth.level_sups,
                              os.path.join(out, "growth.png"))
    return summary.finish(out)


def _cmd_probe_unique(config: RunConfig) -> int:
    if config.case is None:
        raise UsageError("probe-unique needs [case] name")
    case = harness.get_case(config.case)
    space = _build_space(config, default=case.default_space)
    tau = config.tau if config.tau is not None else 0.05
    result = harness.uniqueness_probe(case, space, tau, config.probe_steps,
                                      perturbation=config.probe_perturbation,
                                      seed=config.seed,
                                      newton_tol=config.newton_tol)
    out, summary = config.out_dir, _Summary()
    reporting.write_probe_csv(result.divergences, os.path.join(out, "probe.csv"))
    tolerance = 100.0 * result.newton_tol
    reporting.probe_figure(result.divergences, tolerance, os.path.join(out, "probe.png"))
    detail = (f"max state divergence {result.max_divergence:.3e} vs "
              f"100 x Newton tol {tolerance:.3e}")
    if result.asserted:
        summary.check("uniqueness", result.max_divergence <= tolerance, detail)
    else:
        summary.note("uniqueness (not asserted: non-monotone control)", detail)
    return summary.finish(out)


_DISPATCH = {
    "solve": _cmd_solve,
    "converge-time": _cmd_converge_time,
    "converge-space": _cmd_converge_space,
    "verify-orlicz": _cmd_verify_orlicz,
    "verify-nfun": _cmd_verify_nfun,
    "probe-unique": _cmd_probe_unique,
}


def execute(config: RunConfig) -> int:
    """Run one configured command; returns the process exit code."""
    if config.command not in _DISPATCH:
        raise UsageError(f"no command selected (got {config.command!r})")
    os.makedirs(config.out_dir, exist_ok=True)
    return _DISPATCH[config.command](config)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="orliczwave",
        description="Implicit solver and Orlicz diagnostics for damped "
                    "elastodynamics with monotone stress.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="path to the run configuration")
    parser.add_argument("--out", default=None, help="output directory (default: config or 'out')")
    parser.add_argument("--seed", type=int, default=None, help="sampling seed (default: config or 0)")
    args = parser.parse_args(argv)

    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        config = parse_config(text)
    except ConfigError as exc:
        for lineno, message in exc.problems:
            print(f"{args.config}:{lineno}: {message}", file=sys.stderr)
        return 2
    if config.command is not None and config.command != args.command:
        print(f"error: config sets command = {config.command!r} but "
              f"{args.command!r} was invoked", file=sys.stderr)
        return 2
    config.command = args.command
    if args.out is not None:
        config.out_dir = args.out
    if args.seed is not None:
        config.seed = args.seed

    try:
        return execute(config)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NewtonError, MaximizationError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
