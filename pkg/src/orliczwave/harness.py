"""Manufactured solutions, convergence studies, and the uniqueness probe.

Each case carries a closed-form solution u(x, t), its time derivative, and a
hand-derived source f so that u solves

    u_tt - div(grad u_t) - div sigma(grad u) = f,   u = 0 on the boundary.

Registration recomputes the strong residual by Richardson-extrapolated finite
differences of the solution callbacks (the stress curvature is analytic, the
u-derivatives are not taken from the hand derivation), so a typo in f cannot
survive registration.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .nfunction import NFunctionSpec
from .space import (Field, SpaceHandle, build_space, l2_error, l2_norm, l2_project)
from .stepper import RunReport, SchemeConfig, SourceSampler, run

__all__ = [
    "ManufacturedCase",
    "CaseConsistencyError",
    "make_case",
    "get_case",
    "case_names",
    "verify_consistency",
    "initial_fields",
    "ConvergenceEntry",
    "ConvergenceStudy",
    "temporal_convergence",
    "spatial_convergence",
    "projection_floor",
    "rate_fit",
    "ProbeResult",
    "uniqueness_probe",
]


class CaseConsistencyError(ValueError):
    """The supplied source does not solve the strong equation for u_exact."""


@dataclass(frozen=True)
class ManufacturedCase:
    """A closed-form solution with matching source and potential.

    Callbacks are vectorized: points have shape (n, dim), values (n,).
    `default_space` is the (kind, resolution) the acceptance studies use.
    Cases built through `make_case` have passed the consistency check;
    constructing the dataclass directly skips it (used for discrete fixtures
    that are not strong solutions).
    """

    name: str
    dim: int
    spec: NFunctionSpec
    u_exact: callable
    dudt_exact: callable
    source: callable
    default_space: tuple = ("fem1d", 64)
    assert_uniqueness: bool = True
    description: str = ""


def make_case(*args, consistency_tol: float = 1e-8, **kwargs) -> ManufacturedCase:
    case = ManufacturedCase(*args, **kwargs)
    verify_consistency(case, tol=consistency_tol)
    return case


# -- Richardson finite differences -------------------------------------------
#
# Two extrapolation levels on centered differences leave O(h^6) truncation;
# with the base steps below both the truncation and the roundoff stay under
# ~1e-10 for trigonometric solutions, well inside the 1e-8 gate.

def _richardson(d_h, d_h2, d_h4):
    r1 = (4.0 * d_h2 - d_h) / 3.0
    r2 = (4.0 * d_h4 - d_h2) / 3.0
    return (16.0 * r2 - r1) / 15.0


def _deriv1(sample, h0: float = 0.02):
    def central(h):
        return (sample(h) - sample(-h)) / (2.0 * h)
    return _richardson(central(h0), central(h0 / 2), central(h0 / 4))


def _deriv2(sample, h0: float = 0.04):
    base = sample(0.0)

    def central(h):
        return (sample(h) - 2.0 * base + sample(-h)) / h ** 2
    return _richardson(central(h0), central(h0 / 2), central(h0 / 4))


def _deriv_mixed(sample2, h0: float = 0.04):
    def central(h):
        return (sample2(h, h) - sample2(h, -h) - sample2(-h, h) + sample2(-h, -h)) \
            / (4.0 * h ** 2)
    return _richardson(central(h0), central(h0 / 2), central(h0 / 4))


def _shift(points: np.ndarray, axis: int, amount: float) -> np.ndarray:
    out = points.copy()
    out[:, axis] += amount
    return out


def _strong_residual(case: ManufacturedCase, points: np.ndarray, t: float) -> np.ndarray:
    """u_tt - div grad u_t - div sigma(grad u) - f by numerics, not by hand."""
    d = case.dim
    u_tt = _deriv1(lambda s: case.dudt_exact(points, t + s))
    lap_ut = sum(_deriv2(lambda s, a=a: case.dudt_exact(_shift(points, a, s), t))
                 for a in range(d))

    grad = np.column_stack(
        [_deriv1(lambda s, a=a: case.u_exact(_shift(points, a, s), t)) for a in range(d)])
    hess = np.empty((points.shape[0], d, d))
    for a in range(d):
        hess[:, a, a] = _deriv2(lambda s, a=a: case.u_exact(_shift(points, a, s), t))
        for b in range(a + 1, d):
            mixed = _deriv_mixed(
                lambda sa, sb, a=a, b=b: case.u_exact(_shift(_shift(points, a, sa), b, sb), t))
            hess[:, a, b] = hess[:, b, a] = mixed
    curv = case.spec.stress_jacobian(grad)
    div_sigma = np.einsum("nab,nab->n", curv, hess)

    return u_tt - lap_ut - div_sigma - case.source(points, t)


def _sample_points(dim: int) -> np.ndarray:
    axis = np.linspace(0.15, 0.85, 7 if dim == 1 else 5)
    if dim == 1:
        return axis[:, None]
    xx, yy = np.meshgrid(axis, axis)
    return np.column_stack([xx.ravel(), yy.ravel()])


def verify_consistency(case: ManufacturedCase, tol: float = 1e-8,
                       t_values=(0.15, 0.45, 0.8, 1.1)) -> float:
    """Largest sampled strong residual; raises above tol.

    Also cross-checks the two solution callbacks against each other and the
    homogeneous boundary values, since the scheme silently assumes both.
    """
    pts = _sample_points(case.dim)
    worst = 0.0
    for t in t_values:
        dudt_gap = np.max(np.abs(
            _deriv1(lambda s: case.u_exact(pts, t + s)) - case.dudt_exact(pts, t)))
        if dudt_gap > tol:
            raise CaseConsistencyError(
                f"{case.name}: dudt_exact disagrees with d/dt of u_exact by {dudt_gap:.2e}")
        worst = max(worst, float(np.max(np.abs(_strong_residual(case, pts, t)))))

    boundary = _boundary_points(case.dim)
    bc = max(float(np.max(np.abs(case.u_exact(boundary, t)))) for t in t_values)
    if bc > 1e-12:
        raise CaseConsistencyError(f"{case.name}: u_exact is {bc:.2e} on the boundary")
    if worst > tol:
        raise CaseConsistencyError(
            f"{case.name}: strong residual {worst:.2e} exceeds {tol:.1e}; "
            "the source does not match the solution")
    return worst


def _boundary_points(dim: int) -> np.ndarray:
    s = np.linspace(0.0, 1.0, 9)
    if dim == 1:
        return np.array([[0.0], [1.0]])
    edges = [np.column_stack([s, np.zeros_like(s)]),
             np.column_stack([s, np.ones_like(s)]),
             np.column_stack([np.zeros_like(s), s]),
             np.column_stack([np.ones_like(s), s])]
    return np.vstack(edges)


# -- built-in cases -----------------------------------------------------------

def _case_c1() -> ManufacturedCase:
    pi = np.pi

    def u(x, t):
        return np.sin(pi * x[:, 0]) * np.sin(t)

    def dudt(x, t):
        return np.sin(pi * x[:, 0]) * np.cos(t)

    def f(x, t):
        sx = np.sin(pi * x[:, 0])
        return sx * (-np.sin(t) + pi ** 2 * np.cos(t) + pi ** 2 * np.sin(t))

    return make_case("C1", 1, NFunctionSpec.power(2.0, dim=1), u, dudt, f,
                     default_space=("spectral1d", 64),
                     description="linear stress, single sine mode")


def _case_c2() -> ManufacturedCase:
    pi = np.pi

    def u(x, t):
        return np.sin(pi * x[:, 0]) * np.sin(t)

    def dudt(x, t):
        return np.sin(pi * x[:, 0]) * np.cos(t)

    def f(x, t):
        # With sigma(s) = s^3 the stress divergence is 3 u_x^2 u_xx.
        sx = np.sin(pi * x[:, 0])
        cx = np.cos(pi * x[:, 0])
        return (sx * (-np.sin(t) + pi ** 2 * np.cos(t))
                + 3.0 * pi ** 4 * sx * cx ** 2 * np.sin(t) ** 3)

    return make_case("C2", 1, NFunctionSpec.power(4.0, dim=1), u, dudt, f,
                     default_space=("fem1d", 512),
                     description="quartic potential, cubic stress")


def _case_c3() -> ManufacturedCase:
    pi = np.pi
    matrix = np.array([[2.0, -1.0], [-1.0, 2.0]])

    def u(x, t):
        return np.sin(pi * x[:, 0]) * np.sin(pi * x[:, 1]) * np.sin(t)

    def dudt(x, t):
        return np.sin(pi * x[:, 0]) * np.sin(pi * x[:, 1]) * np.cos(t)

    def f(x, t):
        ss = np.sin(pi * x[:, 0]) * np.sin(pi * x[:, 1])
        cc = np.cos(pi * x[:, 0]) * np.cos(pi * x[:, 1])
        return (-ss * np.sin(t) + 2.0 * pi ** 2 * ss * np.cos(t)
                + 8.0 * pi ** 2 * ss * np.sin(t) + 4.0 * pi ** 2 * cc * np.sin(t))

    return make_case("C3", 2, NFunctionSpec.quad_form(matrix), u, dudt, f,
                     default_space=("fem2d", 16),
                     description="anisotropic quadratic potential on the square")


def _case_nonmonotone() -> ManufacturedCase:
    """Negative control: the stress dips below zero slope near the origin.

    sigma(s) = s - 2s/(1+s^2) has sigma'(0) = -1, so the potential is not
    convex and nothing guarantees the per-step solution is unique.  The
    uniqueness probe reports this case without asserting on it.
    """
    pi = np.pi

    def phi(x):
        s = x[:, 0]
        return 0.5 * s ** 2 - np.log1p(s ** 2)

    def sigma(x):
        s = x[:, 0]
        return (s - 2.0 * s / (1.0 + s ** 2))[:, None]

    def dsigma(x):
        s = x[:, 0]
        return (1.0 - 2.0 * (1.0 - s ** 2) / (1.0 + s ** 2) ** 2)[:, None, None]

    spec = NFunctionSpec.custom(1, phi, sigma, gradient_jacobian=dsigma,
                                label="nonmonotone control")

    def u(x, t):
        return np.sin(pi * x[:, 0]) * np.sin(t)

    def dudt(x, t):
        return np.sin(pi * x[:, 0]) * np.cos(t)

    def f(x, t):
        sx = np.sin(pi * x[:, 0])
        ux = pi * np.cos(pi * x[:, 0]) * np.sin(t)
        slope = 1.0 - 2.0 * (1.0 - ux ** 2) / (1.0 + ux ** 2) ** 2
        return sx * (-np.sin(t) + pi ** 2 * np.cos(t)) + pi ** 2 * sx * np.sin(t) * slope

    return make_case("nonmonotone", 1, spec, u, dudt, f,
                     default_space=("fem1d", 64), assert_uniqueness=False,
                     description="non-monotone stress; uniqueness not guaranteed")


_CASE_FACTORIES = {
    "C1": _case_c1,
    "C2": _case_c2,
    "C3": _case_c3,
    "nonmonotone": _case_nonmonotone,
}
_CASE_CACHE: dict[str, ManufacturedCase] = {}


def case_names() -> list[str]:
    return list(_CASE_FACTORIES)


def get_case(name: str) -> ManufacturedCase:
    """Fetch a built-in case; first access runs the consistency gate."""
    if name not in _CASE_FACTORIES:
        raise KeyError(f"unknown case {name!r}; known: {', '.join(_CASE_FACTORIES)}")
    if name not in _CASE_CACHE:
        _CASE_CACHE[name] = _CASE_FACTORIES[name]()
    return _CASE_CACHE[name]


# -- studies -------------------------------------------------------------------

def initial_fields(case: ManufacturedCase, space: SpaceHandle) -> tuple[Field, Field]:
    """L^2 projections of the exact initial displacement and velocity."""
    u0 = l2_project(space, lambda x: case.u_exact(x, 0.0))
    v0 = l2_project(space, lambda x: case.dudt_exact(x, 0.0))
    return u0, v0


@dataclass(frozen=True)
class ConvergenceEntry:
    resolution: int
    tau: float
    l2_error: float
    v_error: float


@dataclass
class ConvergenceStudy:
    case_name: str
    kind: str                      # "time" or "space"
    entries: list
    rate: float
    v_rate: float
    floor: float                   # projection error of u(., T), spatial limit
    projection_errors: list = dataclass_field(default_factory=list)
    reports: list = dataclass_field(default_factory=list)


def _space_resolution(space: SpaceHandle) -> int:
    if space.kind == "fem1d":
        return space.n_cells
    if space.kind == "fem2d":
        return space.nx
    return space.ndof


def _final_errors(case, space, report, t_final):
    state = report.final_state
    e_u = l2_error(state.u, lambda x: case.u_exact(x, t_final))
    e_v = l2_error(state.v, lambda x: case.dudt_exact(x, t_final))
    return e_u, e_v


def _steps_for(tau: float, t_final: float) -> int:
    n = round(t_final / tau)
    if n < 1 or abs(n * tau - t_final) > 1e-12 * max(1.0, t_final):
        raise ValueError(f"tau {tau!r} does not divide the horizon {t_final!r}")
    return n


def projection_floor(case: ManufacturedCase, space: SpaceHandle,
                     t_final: float = 1.0) -> float:
    """Projection error of the exact final state: the spatial error floor."""
    target = lambda x: case.u_exact(x, t_final)
    return l2_error(l2_project(space, target), target)


def temporal_convergence(case: ManufacturedCase, space: SpaceHandle,
                         taus, t_final: float = 1.0,
                         newton_tol: float | None = None) -> ConvergenceStudy:
    """Step-size refinement on a fixed space; errors at the final time."""
    sampler = SourceSampler(case.source)
    u0, v0 = initial_fields(case, space)
    entries, reports = [], []
    for tau in taus:
        config = SchemeConfig(t_final, _steps_for(tau, t_final), newton_tol=newton_tol)
        report = run(case.spec, space, u0, v0, sampler, config)
        e_u, e_v = _final_errors(case, space, report, t_final)
        entries.append(ConvergenceEntry(_space_resolution(space), tau, e_u, e_v))
        reports.append(report)
    rate = rate_fit([(e.tau, e.l2_error) for e in entries])
    v_rate = rate_fit([(e.tau, e.v_error) for e in entries])
    return ConvergenceStudy(case.name, "time", entries, rate, v_rate,
                            projection_floor(case, space, t_final), reports=reports)


def spatial_convergence(case: ManufacturedCase, resolutions, tau: float,
                        space_kind: str | None = None, t_final: float = 1.0,
                        newton_tol: float | None = None) -> ConvergenceStudy:
    """Mesh refinement at a small fixed step; includes projection controls."""
    kind = space_kind or case.default_space[0]
    sampler = SourceSampler(case.source)
    entries, controls, reports = [], [], []
    for res in resolutions:
        space = build_space(kind, res)
        u0, v0 = initial_fields(case, space)
        config = SchemeConfig(t_final, _steps_for(tau, t_final), newton_tol=newton_tol)
        report = run(case.spec, space, u0, v0, sampler, config)
        e_u, e_v = _final_errors(case, space, report, t_final)
        entries.append(ConvergenceEntry(res, tau, e_u, e_v))
        controls.append(projection_floor(case, space, t_final))
        reports.append(report)
    rate = rate_fit([(1.0 / e.resolution, e.l2_error) for e in entries])
    v_rate = rate_fit([(1.0 / e.resolution, e.v_error) for e in entries])
    return ConvergenceStudy(case.name, "space", entries, rate, v_rate,
                            controls[-1], projection_errors=controls, reports=reports)


def rate_fit(pairs) -> float:
    """Least-squares slope of log error against log step.

    Zero or negative errors cannot enter the fit; they are dropped with a
    warning, and fewer than two usable points is an error.
    """
    usable = [(s, e) for s, e in pairs if e > 0.0 and np.isfinite(e)]
    if len(usable) < len(list(pairs)):
        warnings.warn("rate_fit dropped non-positive error entries", stacklevel=2)
    if len(usable) < 2:
        raise ValueError("need at least two positive errors to fit a rate")
    steps, errors = zip(*usable)
    return float(np.polyfit(np.log(steps), np.log(errors), 1)[0])


@dataclass(frozen=True)
class ProbeResult:
    case_name: str
    max_divergence: float
    newton_tol: float
    divergences: tuple
    asserted: bool


def uniqueness_probe(case: ManufacturedCase, space: SpaceHandle, tau: float,
                     n_steps: int, perturbation: float = 1.0, seed: int = 0,
                     newton_tol: float | None = None) -> ProbeResult:
    """Solve twice with perturbed Newton warm starts and compare states.

    For monotone stress the per-step solution is unique, so both runs land on
    the same trajectory to solver accuracy.  The non-monotone control may
    legitimately diverge; its result is reported with asserted=False.
    """
    sampler = SourceSampler(case.source)
    u0, v0 = initial_fields(case, space)
    config = SchemeConfig.from_tau(tau, n_steps, newton_tol=newton_tol)
    plain = run(case.spec, space, u0, v0, sampler, config)
    noisy = run(case.spec, space, u0, v0, sampler, config,
                guess_noise=perturbation, noise_seed=seed)
    divergences = tuple(
        l2_norm(Field(space, va - vb))
        for va, vb in zip(plain.v_history[1:], noisy.v_history[1:]))
    tol = max(plain.max_newton_tol(), noisy.max_newton_tol())
    return ProbeResult(case.name, max(divergences), tol, divergences,
                       case.assert_uniqueness)
