"""Modulars, Luxemburg norms, and the inequalities that relate them.

Everything here acts on piecewise-constant vector fields (`CellField`), for
which the modular integral is an exact finite sum.  That makes the classical
Orlicz-space inequalities checkable without quadrature error.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .nfunction import NFunctionSpec

__all__ = [
    "CellField",
    "modular",
    "luxemburg_norm",
    "holder_check",
    "HolderResult",
    "norm_modular_relations",
    "NormModularResult",
    "cell_field_to_csv",
]


@dataclass(frozen=True)
class CellField:
    """Piecewise-constant field: one d-vector per cell plus cell measures."""

    values: np.ndarray    # (n_cells, dim)
    measures: np.ndarray  # (n_cells,), strictly positive

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        measures = np.asarray(self.measures, dtype=float)
        if values.ndim != 2:
            raise ValueError(f"values must be (n_cells, dim), got shape {values.shape}")
        if measures.shape != (values.shape[0],):
            raise ValueError(f"measures must be ({values.shape[0]},), got {measures.shape}")
        if not np.all(measures > 0):
            raise ValueError("cell measures must be strictly positive")
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(measures))):
            raise ValueError("field values and measures must be finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "measures", measures)

    @property
    def n_cells(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def total_measure(self) -> float:
        return float(np.sum(self.measures))

    def scaled(self, factor: float) -> "CellField":
        return CellField(self.values * factor, self.measures)


def modular(spec: NFunctionSpec, field: CellField) -> float:
    """Integral of phi over the field: sum of measure * phi(value), exact."""
    if field.dim != spec.dim:
        raise ValueError(f"field dim {field.dim} does not match spec dim {spec.dim}")
    return float(field.measures @ spec.evaluate(field.values))


def luxemburg_norm(spec: NFunctionSpec, field: CellField, tol: float = 1e-10) -> float:
    """inf { lam > 0 : modular(field / lam) <= 1 } by bisection.

    The returned lam satisfies |modular(field/lam) - 1| <= tol unless the
    field vanishes, in which case the norm is 0.  The initial bracket walks
    lam down by halving until the modular exceeds 1 and up by doubling until
    it drops below 1; superlinear growth guarantees both sides exist.
    """
    if np.all(field.values == 0.0):
        return 0.0

    def gauge(lam: float) -> float:
        with np.errstate(over="ignore"):
            return modular(spec, field.scaled(1.0 / lam))

    lo = hi = 1.0
    for _ in range(4000):
        if gauge(lo) > 1.0:
            break
        lo *= 0.5
    else:
        raise RuntimeError("luxemburg bracket failed: modular never exceeded 1 "
                           "(potential may be degenerate along this field)")
    for _ in range(4000):
        if gauge(hi) < 1.0:
            break
        hi *= 2.0
    else:
        raise RuntimeError("luxemburg bracket failed: modular never dropped below 1")

    lam = 0.5 * (lo + hi)
    for _ in range(200):
        value = gauge(lam)
        if np.isfinite(value) and abs(value - 1.0) <= tol:
            return lam
        if value > 1.0:
            lo = lam
        else:
            hi = lam
        lam = 0.5 * (lo + hi)
    raise RuntimeError(f"luxemburg bisection did not reach |modular - 1| <= {tol:g}")


@dataclass(frozen=True)
class HolderResult:
    lhs: float        # |integral xi . eta|
    rhs: float        # 2 ||xi||_phi ||eta||_phi*
    ok: bool


def holder_check(spec: NFunctionSpec, xi: CellField, eta: CellField,
                 tol: float = 1e-8) -> HolderResult:
    """Generalized Holder inequality with the factor-2 constant.

    The second field is measured in the conjugate Luxemburg norm, so the
    spec must have a closed-form conjugate (power or quadform); otherwise an
    UnsupportedSpecError propagates.  For phi = |.|^2/2 and xi = eta the
    inequality is an equality, hence the additive tolerance.
    """
    if xi.n_cells != eta.n_cells or xi.dim != eta.dim:
        raise ValueError("fields must share cell count and dimension")
    if not np.array_equal(xi.measures, eta.measures):
        raise ValueError("fields must live on the same cells")
    conj = spec.conjugate_spec()
    lhs = float(abs(xi.measures @ np.einsum("ni,ni->n", xi.values, eta.values)))
    rhs = 2.0 * luxemburg_norm(spec, xi) * luxemburg_norm(conj, eta)
    return HolderResult(lhs, rhs, lhs <= rhs + tol * (1.0 + rhs))


@dataclass(frozen=True)
class NormModularResult:
    norm: float
    modular: float
    ok_small: bool    # norm <= 1  =>  modular <= norm
    ok_large: bool    # norm > 1   =>  modular >= norm
    ok_additive: bool  # norm <= modular + 1

    @property
    def ok(self) -> bool:
        return self.ok_small and self.ok_large and self.ok_additive


def norm_modular_relations(spec: NFunctionSpec, field: CellField,
                           tol: float = 1e-8) -> NormModularResult:
    """Check the standard norm/modular comparisons on one field."""
    norm = luxemburg_norm(spec, field) if np.any(field.values != 0.0) else 0.0
    rho = modular(spec, field)
    ok_small = norm > 1.0 - tol or rho <= norm + tol
    ok_large = norm < 1.0 + tol or rho >= norm - tol
    ok_additive = norm <= rho + 1.0 + tol
    return NormModularResult(norm, rho, ok_small, ok_large, ok_additive)


def cell_field_to_csv(field: CellField, path) -> None:
    """Write one row per cell: index, measure, value components."""
    header = ["cell", "measure"] + [f"v{i}" for i in range(field.dim)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(field.n_cells):
            row = [str(i), f"{field.measures[i]:.17g}"]
            row += [f"{v:.17g}" for v in field.values[i]]
            writer.writerow(row)
