"""Delimited outputs and the figures rendered next to them.

CSV files are the canonical artifacts: fixed headers, floats through repr-
exact formatting, bit-identical across runs with the same config and seed.
Each report path also renders a small matplotlib figure beside the CSV so a
run can be eyeballed without further tooling; figures are a convenience, the
numbers live in the delimited files.
"""

from __future__ import annotations

import csv

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .stepper import RunReport

__all__ = [
    "fmt",
    "write_run_csv",
    "write_convergence_csv",
    "write_probe_csv",
    "write_check_csv",
    "energy_figure",
    "convergence_figure",
    "quotient_figure",
    "probe_figure",
    "gap_figure",
]

RUN_COLUMNS = ["step", "t", "l2_v", "h1semi_v", "potential", "energy",
               "dissipation_slack", "newton_iters", "residual_norm"]
CONVERGENCE_COLUMNS = ["case", "kind", "resolution", "tau", "l2_error",
                       "v_error", "fitted_rate"]


def fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def write_run_csv(report: RunReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RUN_COLUMNS)
        for rec in report.records:
            writer.writerow([fmt(rec.step), fmt(rec.t), fmt(rec.l2_v),
                             fmt(rec.h1semi_v), fmt(rec.potential), fmt(rec.energy),
                             fmt(rec.dissipation_slack), fmt(rec.newton_iters),
                             fmt(rec.residual_norm)])


def write_convergence_csv(rows, path) -> None:
    """rows: iterables matching CONVERGENCE_COLUMNS."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CONVERGENCE_COLUMNS)
        for row in rows:
            writer.writerow([fmt(v) if not isinstance(v, str) else v for v in row])


def write_probe_csv(divergences, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "divergence"])
        for n, d in enumerate(divergences, start=1):
            writer.writerow([fmt(n), fmt(d)])


def write_check_csv(rows, path) -> None:
    """Generic check table: name, quantity, value, verdict."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["check", "quantity", "value", "verdict"])
        for name, quantity, value, verdict in rows:
            writer.writerow([name, quantity, fmt(value), verdict])


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def energy_figure(report: RunReport, path) -> None:
    t = [rec.t for rec in report.records]
    fig, (ax_e, ax_r) = plt.subplots(2, 1, figsize=(6.0, 5.0), sharex=True)
    ax_e.plot(t, [rec.energy for rec in report.records], label="energy")
    ax_e.plot(t, [rec.potential for rec in report.records], "--", label="potential")
    ax_e.set_ylabel("energy")
    ax_e.legend()
    ax_r.semilogy(t[1:], [max(rec.residual_norm, 1e-18) for rec in report.records[1:]],
                  ".-", label="newton residual")
    ax_r.set_xlabel("t")
    ax_r.set_ylabel("residual")
    ax_r.legend()
    _save(fig, path)


def convergence_figure(entries, rate: float, path, xlabel: str) -> None:
    """entries: (step, l2_error, v_error) triples, step = tau or h."""
    steps = np.array([e[0] for e in entries])
    err_u = np.array([e[1] for e in entries])
    err_v = np.array([e[2] for e in entries])
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    ax.loglog(steps, err_u, "o-", label="u error")
    ax.loglog(steps, err_v, "s-", label="v error")
    anchor = err_u[np.argmax(steps)]
    ax.loglog(steps, anchor * (steps / steps.max()) ** rate, "k--",
              label=f"slope {rate:.2f}")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("final-time L2 error")
    ax.legend()
    _save(fig, path)


def quotient_figure(radii, delta2_sups, growth_sups, path) -> None:
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    ax.loglog(radii, delta2_sups, "o-", label="sup phi(2x)/phi(x)")
    ax.loglog(radii, growth_sups, "s-", label="sup phi*(sigma)/(1+phi)")
    ax.set_xlabel("sample radius")
    ax.set_ylabel("sampled sup")
    ax.legend()
    _save(fig, path)


def probe_figure(divergences, tolerance: float, path) -> None:
    steps = np.arange(1, len(divergences) + 1)
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    ax.semilogy(steps, np.maximum(divergences, 1e-18), "o-", label="|v_a - v_b|")
    ax.axhline(tolerance, color="k", linestyle="--", label="tolerance")
    ax.set_xlabel("step")
    ax.set_ylabel("divergence")
    ax.legend()
    _save(fig, path)


def gap_figure(gaps, path) -> None:
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    ax.semilogy(np.arange(len(gaps)), np.maximum(gaps, 1e-18), ".",
                label="Young gap")
    ax.set_xlabel("trial")
    ax.set_ylabel("phi(xi) + phi*(eta) - xi . eta")
    ax.legend()
    _save(fig, path)
