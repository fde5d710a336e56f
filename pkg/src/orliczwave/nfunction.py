"""Catalog of N-function potentials, their stresses, and growth diagnostics.

An N-function is an even, convex, continuous potential ``phi`` on R^d with
``phi(0) = 0``, ``phi > 0`` away from the origin, superlinear growth at
infinity and sublinear decay at zero.  Each catalog entry carries the stress
``sigma = grad phi`` and, where a closed form exists, the Legendre-Fenchel
conjugate ``phi*(eta) = sup_xi (xi . eta - phi(xi))``.

The doubling and conjugate-growth diagnostics at the bottom of the module are
sampled heuristics, not proofs: they certify nothing, they only report what a
finite sample shows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "NFunctionSpec",
    "UnsupportedSpecError",
    "MaximizationError",
    "young_gap",
    "delta2_check",
    "Delta2Result",
    "growth_constant_estimate",
    "GrowthResult",
    "monotonicity_probe",
    "axiom_samples",
    "AxiomReport",
]

# Below this radius the stress and its Jacobian switch to their analytic
# limits; keeps p < 2 powers and the exponential kind free of 0/0 noise.
_TINY_RADIUS = 1e-150


class UnsupportedSpecError(ValueError):
    """An operation needs structure (e.g. a closed-form conjugate) the spec lacks."""


class MaximizationError(RuntimeError):
    """Numeric conjugate maximization did not converge."""

    def __init__(self, message: str, *, eta=None, last_point=None, gradient_norm=None):
        super().__init__(message)
        self.eta = eta
        self.last_point = last_point
        self.gradient_norm = gradient_norm


def _require_finite(name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")


class NFunctionSpec:
    """Immutable convex potential with stress ``sigma = grad phi``.

    Build instances through the factories :meth:`power`, :meth:`exponential`,
    :meth:`quad_form` or :meth:`custom`.  All value operations accept a single
    point of shape ``(dim,)`` or a batch of shape ``(n, dim)`` and return a
    scalar or an ``(n,)`` / ``(n, dim)`` array accordingly.  Instances hold no
    mutable state and are safe to share between threads.
    """

    def __init__(self, kind: str, dim: int, *, p: float | None = None,
                 matrix: np.ndarray | None = None,
                 evaluate: Callable | None = None,
                 gradient: Callable | None = None,
                 gradient_jacobian: Callable | None = None,
                 conjugate: Callable | None = None,
                 label: str | None = None):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.kind = kind
        self.dim = int(dim)
        self.p = p
        self.matrix = None
        self._matrix_inv = None
        self._evaluate_fn = evaluate
        self._gradient_fn = gradient
        self._gradient_jacobian_fn = gradient_jacobian
        self._conjugate_fn = conjugate
        self.label = label or kind

        if kind == "power":
            if p is None or not p > 1.0:
                raise ValueError(f"power kind needs exponent p > 1, got {p}")
        elif kind == "exp":
            pass
        elif kind == "quadform":
            matrix = np.asarray(matrix, dtype=float)
            if matrix.shape != (dim, dim):
                raise ValueError(f"quadform matrix must be ({dim}, {dim}), got {matrix.shape}")
            if not np.allclose(matrix, matrix.T, rtol=0.0, atol=1e-12 * max(1.0, abs(matrix).max())):
                raise ValueError("quadform matrix must be symmetric")
            try:
                np.linalg.cholesky(matrix)
            except np.linalg.LinAlgError:
                raise ValueError("quadform matrix must be positive definite") from None
            self.matrix = matrix
            self._matrix_inv = np.linalg.inv(matrix)
        elif kind == "custom":
            if evaluate is None or gradient is None:
                raise ValueError("custom kind needs evaluate and gradient callbacks")
        else:
            raise ValueError(f"unknown kind {kind!r}")

    # -- factories ---------------------------------------------------------

    @classmethod
    def power(cls, p: float, dim: int = 1) -> "NFunctionSpec":
        """phi(xi) = |xi|^p / p with stress |xi|^(p-2) xi, for p > 1."""
        return cls("power", dim, p=float(p), label=f"power(p={p:g})")

    @classmethod
    def exponential(cls, dim: int = 1) -> "NFunctionSpec":
        """phi(xi) = exp(|xi|) - |xi| - 1; grows faster than any power."""
        return cls("exp", dim, label="exp")

    @classmethod
    def quad_form(cls, matrix) -> "NFunctionSpec":
        """phi(xi) = xi^T A xi for a symmetric positive definite A."""
        matrix = np.asarray(matrix, dtype=float)
        return cls("quadform", matrix.shape[0], matrix=matrix, label="quadform")

    @classmethod
    def custom(cls, dim: int, evaluate: Callable, gradient: Callable, *,
               gradient_jacobian: Callable | None = None,
               conjugate: Callable | None = None,
               label: str = "custom") -> "NFunctionSpec":
        """Wrap user callbacks. They must accept (n, dim) batches.

        No axiom is verified automatically; run the sampling diagnostics if
        the callbacks are meant to be a genuine N-function.  Without a
        ``gradient_jacobian`` callback the Jacobian falls back to centered
        finite differences of ``gradient``.
        """
        return cls("custom", dim, evaluate=evaluate, gradient=gradient,
                   gradient_jacobian=gradient_jacobian, conjugate=conjugate,
                   label=label)

    # -- shape plumbing ----------------------------------------------------

    def _as_batch(self, xi) -> tuple[np.ndarray, bool]:
        arr = np.asarray(xi, dtype=float)
        single = arr.ndim == 1
        if single:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[1] != self.dim:
            raise ValueError(f"expected points of shape ({self.dim},) or (n, {self.dim}), "
                             f"got {np.shape(xi)}")
        _require_finite("xi", arr)
        return arr, single

    # -- potential, stress, curvature ---------------------------------------

    def evaluate(self, xi):
        """Potential phi(xi)."""
        x, single = self._as_batch(xi)
        if self.kind == "power":
            r = np.linalg.norm(x, axis=-1)
            out = r ** self.p / self.p
        elif self.kind == "exp":
            r = np.linalg.norm(x, axis=-1)
            # phi -> inf past the float exponent range is the honest value;
            # callers compare or argmax, so the overflow is not an error.
            with np.errstate(over="ignore"):
                out = np.expm1(r) - r
        elif self.kind == "quadform":
            out = np.einsum("ni,ij,nj->n", x, self.matrix, x)
        else:
            out = np.asarray(self._evaluate_fn(x), dtype=float).reshape(x.shape[0])
        return float(out[0]) if single else out

    def stress(self, xi):
        """Stress sigma(xi) = grad phi(xi)."""
        x, single = self._as_batch(xi)
        if self.kind == "power":
            r = np.linalg.norm(x, axis=-1)
            factor = np.zeros_like(r)
            nz = r > _TINY_RADIUS
            factor[nz] = r[nz] ** (self.p - 2.0)
            out = factor[:, None] * x
        elif self.kind == "exp":
            r = np.linalg.norm(x, axis=-1)
            factor = np.ones_like(r)
            nz = r > 1e-12
            with np.errstate(over="ignore"):
                factor[nz] = np.expm1(r[nz]) / r[nz]
            # expm1(r)/r -> 1 + r/2 as r -> 0
            factor[~nz] = 1.0 + 0.5 * r[~nz]
            out = factor[:, None] * x
        elif self.kind == "quadform":
            out = 2.0 * x @ self.matrix
        else:
            out = np.asarray(self._gradient_fn(x), dtype=float).reshape(x.shape)
        return out[0] if single else out

    def stress_jacobian(self, xi):
        """Derivative D sigma(xi), shape (dim, dim) or (n, dim, dim).

        Symmetric positive semidefinite for convex phi; the implicit solver
        relies on that.
        """
        x, single = self._as_batch(xi)
        n, d = x.shape
        if self.kind == "power":
            p = self.p
            r = np.linalg.norm(x, axis=-1)
            out = np.zeros((n, d, d))
            eye = np.eye(d)
            nz = r > _TINY_RADIUS
            rp2 = np.zeros_like(r)
            rp2[nz] = r[nz] ** (p - 2.0)
            out += rp2[:, None, None] * eye
            if abs(p - 2.0) > 0:
                rp4 = np.zeros_like(r)
                rp4[nz] = r[nz] ** (p - 4.0)
                out += (p - 2.0) * rp4[:, None, None] * np.einsum("ni,nj->nij", x, x)
            if not np.any(nz) and p == 2.0:
                pass
            if p == 2.0:
                out[~nz] = eye
        elif self.kind == "exp":
            r = np.linalg.norm(x, axis=-1)
            eye = np.eye(d)
            transverse = np.ones_like(r)
            radial = np.ones_like(r)
            nz = r > 1e-8
            with np.errstate(over="ignore"):
                transverse[nz] = np.expm1(r[nz]) / r[nz]
                transverse[~nz] = 1.0 + 0.5 * r[~nz]
                radial = np.exp(r)
            unit = np.zeros_like(x)
            unit[nz] = x[nz] / r[nz, None]
            out = transverse[:, None, None] * eye \
                + (radial - transverse)[:, None, None] * np.einsum("ni,nj->nij", unit, unit)
        elif self.kind == "quadform":
            out = np.broadcast_to(2.0 * self.matrix, (n, d, d)).copy()
        else:
            if self._gradient_jacobian_fn is not None:
                out = np.asarray(self._gradient_jacobian_fn(x), dtype=float).reshape(n, d, d)
            else:
                out = self._fd_jacobian(x)
        return out[0] if single else out

    def _fd_jacobian(self, x: np.ndarray) -> np.ndarray:
        n, d = x.shape
        out = np.empty((n, d, d))
        scale = 1.0 + np.linalg.norm(x, axis=-1)
        for j in range(d):
            h = 1e-6 * scale
            e = np.zeros_like(x)
            e[:, j] = h
            out[:, :, j] = (self.stress(x + e) - self.stress(x - e)) / (2.0 * h)[:, None]
        # symmetrize: grad of a gradient field
        return 0.5 * (out + np.swapaxes(out, 1, 2))

    # -- conjugate -----------------------------------------------------------

    @property
    def has_closed_conjugate(self) -> bool:
        return self.kind in ("power", "quadform") or (
            self.kind == "custom" and self._conjugate_fn is not None)

    def conjugate_spec(self) -> "NFunctionSpec":
        """The conjugate as a spec of its own; closed-form kinds only.

        power(p) pairs with power(p/(p-1)); quadform(A) with quadform(A^-1/4).
        """
        if self.kind == "power":
            q = self.p / (self.p - 1.0)
            return NFunctionSpec.power(q, dim=self.dim)
        if self.kind == "quadform":
            return NFunctionSpec.quad_form(0.25 * self._matrix_inv)
        raise UnsupportedSpecError(
            f"{self.label}: no closed-form conjugate spec (kind {self.kind!r})")

    def conjugate(self, eta):
        """Conjugate value phi*(eta).

        Closed form where available, otherwise a grid search followed by
        damped ascent on ``xi . eta - phi(xi)``; the search radius doubles
        until the maximizer is interior (superlinear growth guarantees one).
        """
        e, single = self._as_batch(eta)
        if self.kind == "power":
            q = self.p / (self.p - 1.0)
            out = np.linalg.norm(e, axis=-1) ** q / q
        elif self.kind == "quadform":
            out = 0.25 * np.einsum("ni,ij,nj->n", e, self._matrix_inv, e)
        elif self.kind == "custom" and self._conjugate_fn is not None:
            out = np.asarray(self._conjugate_fn(e), dtype=float).reshape(e.shape[0])
        else:
            out = np.array([self._conjugate_numeric(row) for row in e])
        return float(out[0]) if single else out

    def _conjugate_numeric(self, eta: np.ndarray) -> float:
        d = self.dim
        target_norm = float(np.linalg.norm(eta))
        radius = 1.0 + target_norm
        point = None
        for _ in range(60):
            pts = _ball_grid(d, radius)
            gains = pts @ eta - self.evaluate(pts)
            point = pts[int(np.argmax(gains))]
            if np.linalg.norm(point) <= 0.9 * radius:
                break
            radius *= 2.0
        else:
            raise MaximizationError(
                "conjugate maximizer kept escaping the search radius "
                f"(radius {radius:g}); potential may not be superlinear",
                eta=eta, last_point=point)

        gain = float(point @ eta - self.evaluate(point))
        for _ in range(200):
            grad = eta - self.stress(point)
            grad_norm = float(np.linalg.norm(grad))
            if grad_norm <= 1e-12 * (1.0 + target_norm):
                return gain
            direction = grad
            hess = self.stress_jacobian(point)
            try:
                newton_dir = np.linalg.solve(hess, grad)
                if newton_dir @ grad > 0:
                    direction = newton_dir
            except np.linalg.LinAlgError:
                pass
            step = 1.0
            for _ in range(50):
                trial = point + step * direction
                trial_gain = float(trial @ eta - self.evaluate(trial))
                if trial_gain > gain:
                    point, gain = trial, trial_gain
                    break
                step *= 0.5
            else:
                # No strict ascent at float resolution.  The value error is
                # quadratic in the gradient norm, so a modest stationarity
                # level still leaves the conjugate accurate to ~1e-12 rel.
                if grad_norm <= 1e-6 * (1.0 + target_norm + abs(gain)):
                    return gain
                raise MaximizationError(
                    "damped ascent stalled before reaching the stationarity tolerance",
                    eta=eta, last_point=point, gradient_norm=grad_norm)
        raise MaximizationError("conjugate ascent did not converge in 200 iterations",
                                eta=eta, last_point=point)


def _ball_grid(dim: int, radius: float) -> np.ndarray:
    """Deterministic coarse sample of the ball |xi| <= radius."""
    if dim == 1:
        return np.linspace(-radius, radius, 129)[:, None]
    if dim == 2:
        axis = np.linspace(-radius, radius, 33)
        xx, yy = np.meshgrid(axis, axis)
        return np.column_stack([xx.ravel(), yy.ravel()])
    if dim == 3:
        axis = np.linspace(-radius, radius, 13)
        pts = np.stack(np.meshgrid(axis, axis, axis), axis=-1).reshape(-1, 3)
        return pts
    rng = np.random.default_rng(0)
    direction = rng.standard_normal((4096, dim))
    direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
    radii = radius * rng.random(4096) ** (1.0 / dim)
    return direction * radii[:, None]


def young_gap(spec: NFunctionSpec, xi, eta) -> float:
    """phi(xi) + phi*(eta) - xi . eta; nonnegative, zero iff eta = sigma(xi)."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return float(spec.evaluate(xi) + spec.conjugate(eta) - xi @ eta)


def _sample_points(dim: int, radius: float, samples: int, rng) -> np.ndarray:
    """Nonzero sample points with radii spread up to `radius`."""
    radii = radius * (np.arange(1, samples + 1) / samples)
    if dim == 1:
        signs = rng.choice([-1.0, 1.0], size=samples)
        return (radii * signs)[:, None]
    direction = rng.standard_normal((samples, dim))
    direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
    return direction * radii[:, None]


@dataclass(frozen=True)
class Delta2Result:
    satisfied: bool
    constant: float | None
    level_sups: tuple[float, ...]   # sup phi(2 xi)/phi(xi) at each radius level


def delta2_check(spec: NFunctionSpec, sample_radius: float = 50.0,
                 samples: int = 400, *, blowup_threshold: float = 1e6,
                 seed: int = 0) -> Delta2Result:
    """Sampled doubling check: is sup phi(2 xi)/phi(xi) bounded?

    Samples the ratio at radii R, 2R, 4R.  Reports not-satisfied when the
    largest sampled sup exceeds `blowup_threshold` while the sups grow
    monotonically across the levels (or stop being finite).  Otherwise the
    largest sampled sup is returned as the doubling constant.  A heuristic:
    slow divergence below the threshold goes undetected.
    """
    rng = np.random.default_rng(seed)
    sups = []
    for level in range(3):
        pts = _sample_points(spec.dim, sample_radius * 2 ** level, samples, rng)
        lo = spec.evaluate(pts)
        hi = spec.evaluate(2.0 * pts)
        good = lo > 0
        if not np.any(good):
            raise ValueError("all sampled potential values vanished; bad spec or radius")
        with np.errstate(over="ignore", invalid="ignore"):
            ratios = hi[good] / lo[good]
        sups.append(float(np.max(ratios)))
    sups = tuple(sups)
    blows_up = (not np.all(np.isfinite(sups))) or (
        sups[-1] > blowup_threshold and sups[0] <= sups[1] <= sups[2])
    if blows_up:
        return Delta2Result(False, None, sups)
    return Delta2Result(True, max(sups), sups)


@dataclass(frozen=True)
class GrowthResult:
    finite: bool
    constant: float | None
    level_sups: tuple[float, ...]   # sup phi*(sigma(xi)) / (1 + phi(xi)) per level


def growth_constant_estimate(spec: NFunctionSpec, sample_radius: float = 50.0,
                             samples: int = 400, *, divergence_ratio: float = 1.5,
                             blowup_threshold: float = 1e6,
                             seed: int = 0) -> GrowthResult:
    """Estimate the least C with phi*(sigma(xi)) <= C (1 + phi(xi)).

    phi*(sigma(xi)) is evaluated through the equality case of the
    Fenchel-Young inequality, phi*(sigma(xi)) = sigma(xi) . xi - phi(xi),
    which holds whenever sigma = grad phi.  The quotient sup is sampled at
    radii R, 2R, 4R; sups that keep growing by `divergence_ratio` per
    doubling (or blow past `blowup_threshold`) are reported as not finite.
    For differentiable potentials finiteness is equivalent to the doubling
    condition, so this and `delta2_check` should agree.
    """
    rng = np.random.default_rng(seed)
    sups = []
    for level in range(3):
        pts = _sample_points(spec.dim, sample_radius * 2 ** level, samples, rng)
        phi = spec.evaluate(pts)
        conj_at_stress = np.einsum("ni,ni->n", spec.stress(pts), pts) - phi
        quotients = conj_at_stress / (1.0 + phi)
        sups.append(float(np.max(quotients)))
    sups = tuple(sups)
    diverges = (not np.all(np.isfinite(sups))) or sups[-1] > blowup_threshold or (
        sups[0] <= sups[1] <= sups[2]
        and sups[1] >= divergence_ratio * sups[0]
        and sups[2] >= divergence_ratio * sups[1])
    if diverges:
        return GrowthResult(False, None, sups)
    return GrowthResult(True, max(sups), sups)


def monotonicity_probe(spec: NFunctionSpec, xis, etas) -> float:
    """min over pairs of (sigma(xi) - sigma(eta)) . (xi - eta).

    Nonnegative for convex potentials; a negative value certifies the stress
    is not monotone.
    """
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    etas = np.atleast_2d(np.asarray(etas, dtype=float))
    if xis.shape != etas.shape:
        raise ValueError(f"pair arrays must match, got {xis.shape} vs {etas.shape}")
    gap = np.einsum("ni,ni->n", spec.stress(xis) - spec.stress(etas), xis - etas)
    return float(np.min(gap))


@dataclass(frozen=True)
class AxiomReport:
    min_value: float                 # min phi over samples (>= 0 expected)
    evenness_gap: float              # max |phi(xi) - phi(-xi)|
    midpoint_convexity_margin: float  # min (phi(xi)+phi(eta))/2 - phi(mid)
    min_value_on_shell: float        # min phi at |xi| = radius/2 (> 0 expected)
    superlinear_increase: float      # min increase of phi(t u)/t along growing t
    sublinear_at_zero: float         # phi(eps u)/eps at the smallest sampled eps

    def ok(self, tol: float = 1e-9) -> bool:
        return (self.min_value >= -tol and self.evenness_gap <= tol
                and self.midpoint_convexity_margin >= -tol
                and self.min_value_on_shell > 0.0
                and self.superlinear_increase >= -tol)


def axiom_samples(spec: NFunctionSpec, radius: float = 10.0,
                  samples: int = 300, seed: int = 0) -> AxiomReport:
    """Sample the N-function axioms; see AxiomReport for what each field means."""
    rng = np.random.default_rng(seed)
    pts = _sample_points(spec.dim, radius, samples, rng)
    other = _sample_points(spec.dim, radius, samples, rng)
    phi = spec.evaluate(pts)
    evenness = float(np.max(np.abs(phi - spec.evaluate(-pts))))
    midpoint = float(np.min(0.5 * (phi + spec.evaluate(other))
                            - spec.evaluate(0.5 * (pts + other))))
    shell = _sample_points(spec.dim, radius / 2.0, 64, rng)
    shell *= (radius / 2.0) / np.linalg.norm(shell, axis=-1, keepdims=True)
    min_shell = float(np.min(spec.evaluate(shell)))

    directions = _sample_points(spec.dim, 1.0, 16, rng)
    directions /= np.linalg.norm(directions, axis=-1, keepdims=True)
    t_ladder = np.geomspace(1.0, radius, 8)
    slopes = np.array([[spec.evaluate(t * u) / t for t in t_ladder] for u in directions])
    superlinear = float(np.min(np.diff(slopes, axis=1)))
    eps = 1e-6
    sublinear = float(np.max([spec.evaluate(eps * u) / eps for u in directions]))

    return AxiomReport(
        min_value=float(np.min(phi)),
        evenness_gap=evenness,
        midpoint_convexity_margin=midpoint,
        min_value_on_shell=min_shell,
        superlinear_increase=superlinear,
        sublinear_at_zero=sublinear,
    )
