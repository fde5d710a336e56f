"""Implicit two-field time stepping for  u_tt - div(grad u_t) - div sigma(grad u) = f.

One backward Euler step advances the velocity v and displacement u through

    M (v^n - v^{n-1}) / tau + A v^n + B(u^{n-1} + tau v^n) = load^n,
    u^n = u^{n-1} + tau v^n,

with M the mass matrix, A the (damping) stiffness matrix and B the monotone
stress residual.  The per-step system is solved by a damped Newton iteration
on v; for convex potentials the Newton matrix M/tau + A + tau J is symmetric
positive definite, so each step has exactly one solution.

Loads use the step average of the source, load^n = (1/tau) int_{t_{n-1}}^{t_n}
(f(., t), basis) dt, integrated by Gauss quadrature in time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .nfunction import NFunctionSpec
from .space import (Field, SpaceHandle, discrete_potential, hr_dual_norm,
                    nonlinear_jacobian, nonlinear_residual)

__all__ = [
    "SchemeConfig",
    "SchemeState",
    "SourceSampler",
    "StepRecord",
    "RunReport",
    "NewtonError",
    "average_source",
    "step",
    "run",
    "second_order_residual",
]


class NewtonError(RuntimeError):
    """The per-step Newton iteration failed; carries the step and residual."""

    def __init__(self, message, *, step_index=None, residual_norm=None):
        super().__init__(message)
        self.step_index = step_index
        self.residual_norm = residual_norm


@dataclass(frozen=True)
class SchemeConfig:
    """Time grid and Newton controls.

    The grid is t_n = n * tau with tau = t_final / n_steps, so tau * n_steps
    reproduces t_final to machine accuracy by construction.  A newton_tol of
    None selects the per-step default 1e-11 * (1 + |load|).
    """

    t_final: float
    n_steps: int
    newton_tol: float | None = None
    newton_max_iter: int = 30

    def __post_init__(self):
        if self.t_final <= 0 or self.n_steps < 0:
            raise ValueError("need t_final > 0 and n_steps >= 0")
        if self.newton_tol is not None and self.newton_tol <= 0:
            raise ValueError("newton_tol must be positive")

    @property
    def tau(self) -> float:
        # A zero-step config is legal (run() reports the initial state only)
        # and then no step ever reads tau.
        return self.t_final / self.n_steps if self.n_steps else 0.0

    @classmethod
    def from_tau(cls, tau: float, n_steps: int, **kwargs) -> "SchemeConfig":
        return cls(t_final=tau * n_steps, n_steps=n_steps, **kwargs)


@dataclass(frozen=True)
class SchemeState:
    u: Field
    v: Field
    n: int
    t: float


class SourceSampler:
    """Right-hand side f(x, t) with Gauss time averaging per step.

    The callback must be vectorized over points: f(points (n, d), t) -> (n,).
    """

    def __init__(self, fn=None, time_quad_order: int = 4):
        self.fn = fn
        nodes, weights = np.polynomial.legendre.leggauss(time_quad_order)
        self._nodes = nodes
        self._weights = weights

    @classmethod
    def zero(cls) -> "SourceSampler":
        return cls(None)

    def step_average_load(self, space: SpaceHandle, n: int, tau: float) -> np.ndarray:
        """Load of the average of f over (t_{n-1}, t_n)."""
        if self.fn is None:
            return np.zeros(space.ndof)
        t0 = (n - 1) * tau
        out = np.zeros(space.ndof)
        for node, weight in zip(self._nodes, self._weights):
            t = t0 + 0.5 * tau * (1.0 + node)
            out += 0.5 * weight * space.load_vector(lambda x: self.fn(x, t))
        return out


def average_source(sampler: SourceSampler, space: SpaceHandle, n: int,
                   tau: float) -> np.ndarray:
    return sampler.step_average_load(space, n, tau)


@dataclass(frozen=True)
class StepRecord:
    """Everything the estimate monitors need about one accepted step."""

    step: int
    t: float
    l2_v: float
    h1semi_v: float
    potential: float
    energy: float
    dissipation_slack: float
    newton_iters: int
    residual_norm: float
    newton_tol: float = 0.0
    dv_l2: float = 0.0                   # |v^n - v^{n-1}|_{L^2}
    f_l2: float = 0.0                    # |P f^n|_{L^2}
    f_dot_v: float = 0.0                 # (f^n, v^n)
    dual_increment: float | None = None  # |(v^n - v^{n-1})/tau| in (H^r)^*
    conj_modular: float | None = None    # modular of phi* at sigma(grad u^n)


@dataclass
class RunReport:
    spec: NFunctionSpec
    space: SpaceHandle
    config: SchemeConfig
    records: list = dataclass_field(default_factory=list)
    u_history: list = dataclass_field(default_factory=list)   # coefficient arrays
    v_history: list = dataclass_field(default_factory=list)
    loads: list = dataclass_field(default_factory=list)       # load^n, n = 1..N
    telescoping_error: float = 0.0

    @property
    def final_state(self) -> SchemeState:
        n = len(self.u_history) - 1
        return SchemeState(Field(self.space, self.u_history[-1]),
                           Field(self.space, self.v_history[-1]),
                           n, n * self.config.tau)

    def max_newton_tol(self) -> float:
        return max((r.newton_tol for r in self.records[1:]), default=0.0)


class _StepSolver:
    """Per-run workspace: matrices, factorizations, and the Newton loop."""

    def __init__(self, spec: NFunctionSpec, space: SpaceHandle, config: SchemeConfig):
        self.spec = spec
        self.space = space
        self.config = config
        self.mass = space.mass()
        self.stiff = space.stiffness()
        self.tau = config.tau
        # Affine stress (p = 2 power, any quadform): the Newton matrix is the
        # same every step, so factorize once.
        self.linear = spec.kind == "quadform" or (spec.kind == "power" and spec.p == 2.0)
        self._frozen_solve = None
        if self.linear:
            j0 = nonlinear_jacobian(spec, Field(space, space.zero_coefficients()))
            self._frozen_solve = self._factorize(self._newton_matrix(j0))

    def _newton_matrix(self, jac):
        base = self.mass / self.tau + self.stiff
        if sp.issparse(jac):
            return (base + self.tau * jac).tocsc()
        return np.asarray(base.todense()) + self.tau * jac

    @staticmethod
    def _factorize(matrix):
        if sp.issparse(matrix):
            return spla.factorized(matrix)
        lu = np.linalg.inv(matrix)  # small dense systems only (spectral)
        return lambda rhs: lu @ rhs

    def residual(self, v, u_prev, v_prev, load):
        u_new = Field(self.space, u_prev + self.tau * v)
        return (self.mass @ ((v - v_prev) / self.tau) + self.stiff @ v
                + nonlinear_residual(self.spec, u_new) - load)

    def solve(self, u_prev, v_prev, load, *, guess=None, step_index=None):
        tol = self.config.newton_tol
        if tol is None:
            tol = 1e-11 * (1.0 + float(np.linalg.norm(load)))
        v = np.array(v_prev if guess is None else guess, dtype=float)
        res = self.residual(v, u_prev, v_prev, load)
        res_norm = float(np.linalg.norm(res))
        iters = 0
        while res_norm > tol:
            if iters >= self.config.newton_max_iter:
                raise NewtonError(
                    f"Newton did not reach tol {tol:.3e} in {iters} iterations "
                    f"(residual {res_norm:.3e})",
                    step_index=step_index, residual_norm=res_norm)
            if self._frozen_solve is not None:
                solve = self._frozen_solve
            else:
                jac = nonlinear_jacobian(self.spec, Field(self.space, u_prev + self.tau * v))
                solve = self._factorize(self._newton_matrix(jac))
            delta = -solve(res)
            scale = 1.0
            for _ in range(30):
                v_try = v + scale * delta
                res_try = self.residual(v_try, u_prev, v_prev, load)
                res_try_norm = float(np.linalg.norm(res_try))
                if res_try_norm < res_norm:
                    break
                scale *= 0.5
            else:
                raise NewtonError(
                    "Newton step produced no residual decrease after 30 halvings "
                    f"(residual {res_norm:.3e})",
                    step_index=step_index, residual_norm=res_norm)
            v, res, res_norm = v_try, res_try, res_try_norm
            iters += 1
        return v, iters, res_norm, tol


def step(spec: NFunctionSpec, state: SchemeState, load: np.ndarray,
         config: SchemeConfig, *, solver: _StepSolver | None = None,
         guess: np.ndarray | None = None) -> tuple[SchemeState, StepRecord]:
    """Advance one step; returns the new state and its record."""
    space = state.u.space
    if solver is None:
        solver = _StepSolver(spec, space, config)
    tau = config.tau
    u_prev, v_prev = state.u.coefficients, state.v.coefficients
    v_new, iters, res_norm, tol = solver.solve(
        u_prev, v_prev, load, guess=guess, step_index=state.n + 1)
    u_new = u_prev + tau * v_new
    new_state = SchemeState(Field(space, u_new), Field(space, v_new),
                            state.n + 1, (state.n + 1) * tau)
    record = _make_record(spec, solver, new_state, state, load, iters, res_norm, tol)
    return new_state, record


def _make_record(spec, solver, state, prev_state, load, iters, res_norm, tol,
                 *, dual_r: int = 2) -> StepRecord:
    space = state.u.space
    mass = solver.mass
    v, v_prev = state.v.coefficients, prev_state.v.coefficients
    dv = v - v_prev
    l2_v = math.sqrt(max(v @ (mass @ v), 0.0))
    l2_v_prev = math.sqrt(max(v_prev @ (mass @ v_prev), 0.0))
    h1_v = math.sqrt(max(v @ (solver.stiff @ v), 0.0))
    dv_l2 = math.sqrt(max(dv @ (mass @ dv), 0.0))
    pot = discrete_potential(spec, state.u)
    pot_prev = discrete_potential(spec, prev_state.u)
    tau = solver.tau

    f_dot_v = float(load @ v)
    f_l2 = math.sqrt(max(float(load @ space.mass_solve(load)), 0.0))
    # Testing the step equation with v^n gives the one-step energy identity;
    # everything beyond the forcing term is Newton residual leakage.
    slack = (0.5 * (l2_v ** 2 - l2_v_prev ** 2 + dv_l2 ** 2)
             + tau * h1_v ** 2 + pot - pot_prev - tau * f_dot_v)

    dual = None
    if space.kind == "spectral1d":
        dual = hr_dual_norm(Field(space, dv / tau), r=dual_r)
    conj_mod = None
    if spec.has_closed_conjugate:
        from .space import sampled_gradient
        grad = sampled_gradient(state.u)
        conj_mod = float(grad.measures @ spec.conjugate(spec.stress(grad.values)))

    return StepRecord(
        step=state.n, t=state.t, l2_v=l2_v, h1semi_v=h1_v, potential=pot,
        energy=0.5 * l2_v ** 2 + pot, dissipation_slack=slack,
        newton_iters=iters, residual_norm=res_norm, newton_tol=tol,
        dv_l2=dv_l2, f_l2=f_l2, f_dot_v=f_dot_v,
        dual_increment=dual, conj_modular=conj_mod)


def run(spec: NFunctionSpec, space: SpaceHandle, u0: Field, v0: Field,
        sampler: SourceSampler, config: SchemeConfig, *,
        monitor=None, dual_r: int = 2,
        guess_noise: float = 0.0, noise_seed: int = 0) -> RunReport:
    """March n_steps from (u0, v0) and record every step.

    monitor, if given, is called with (record, state) after each step.
    guess_noise perturbs the Newton warm start by that amount times a unit
    vector (seeded); the converged states must not care, which is what the
    uniqueness probe exercises.
    """
    if u0.space is not space or v0.space is not space:
        raise ValueError("initial fields must live on the given space")
    solver = _StepSolver(spec, space, config) if config.n_steps else None
    tau = config.tau
    rng = np.random.default_rng(noise_seed) if guess_noise else None

    state = SchemeState(u0, v0, 0, 0.0)
    mass, stiff = space.mass(), space.stiffness()
    l2_v0 = math.sqrt(max(v0.coefficients @ (mass @ v0.coefficients), 0.0))
    pot0 = discrete_potential(spec, u0)
    report = RunReport(spec, space, config)
    report.records.append(StepRecord(
        step=0, t=0.0, l2_v=l2_v0,
        h1semi_v=math.sqrt(max(v0.coefficients @ (stiff @ v0.coefficients), 0.0)),
        potential=pot0, energy=0.5 * l2_v0 ** 2 + pot0,
        dissipation_slack=0.0, newton_iters=0, residual_norm=0.0))
    report.u_history.append(u0.coefficients.copy())
    report.v_history.append(v0.coefficients.copy())

    v_sum = np.zeros(space.ndof)
    for n in range(1, config.n_steps + 1):
        load = sampler.step_average_load(space, n, tau)
        guess = None
        if rng is not None:
            direction = rng.standard_normal(space.ndof)
            direction /= np.linalg.norm(direction)
            guess = state.v.coefficients + guess_noise * direction
        v_new, iters, res_norm, tol = solver.solve(
            state.u.coefficients, state.v.coefficients, load,
            guess=guess, step_index=n)
        u_new = state.u.coefficients + tau * v_new
        new_state = SchemeState(Field(space, u_new), Field(space, v_new), n, n * tau)
        record = _make_record(spec, solver, new_state, state, load, iters,
                              res_norm, tol, dual_r=dual_r)
        report.records.append(record)
        report.u_history.append(u_new.copy())
        report.v_history.append(v_new.copy())
        report.loads.append(load)
        v_sum += v_new
        if monitor is not None:
            monitor(record, new_state)
        state = new_state

    telescoped = u0.coefficients + tau * v_sum
    report.telescoping_error = float(np.max(np.abs(telescoped - state.u.coefficients))) \
        if space.ndof else 0.0
    return report


def second_order_residual(report: RunReport) -> np.ndarray:
    """Norms of the second-order form of the scheme at each step.

    Substituting v^n = (u^n - u^{n-1})/tau turns the two-field step into
    M (u^n - 2u^{n-1} + u^{n-2})/tau^2 + A (u^n - u^{n-1})/tau + B(u^n) = load^n
    with the ghost value u^{-1} = u^0 - tau v^0.  For converged steps these
    norms sit at the Newton tolerance; they certify the implementations agree.
    """
    spec, space, config = report.spec, report.space, report.config
    tau = config.tau
    mass, stiff = space.mass(), space.stiffness()
    u = report.u_history
    ghost = u[0] - tau * report.v_history[0]
    norms = []
    for n in range(1, len(u)):
        u_prev2 = ghost if n == 1 else u[n - 2]
        accel = (u[n] - 2.0 * u[n - 1] + u_prev2) / tau ** 2
        damping = (u[n] - u[n - 1]) / tau
        res = (mass @ accel + stiff @ damping
               + nonlinear_residual(spec, Field(space, u[n]))
               - report.loads[n - 1])
        norms.append(float(np.linalg.norm(res)))
    return np.array(norms)
