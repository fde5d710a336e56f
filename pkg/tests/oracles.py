"""Independent reference computations the tests compare the library against.

Everything here deliberately avoids the library's own numerics: conjugates by
brute-force optimization, Luxemburg norms by scalar root finding, the linear
single-mode scheme by a hand recursion, and dual norms by constrained
maximization.  Slow and dumb on purpose.
"""

import numpy as np
from scipy import optimize


def conjugate_bruteforce(spec, eta, n_grid=401):
    """sup_xi (xi . eta - phi(xi)) by grid scan plus Nelder-Mead polish."""
    eta = np.asarray(eta, dtype=float)
    d = eta.size

    def loss(xi):
        xi = np.asarray(xi, dtype=float)
        return -(xi @ eta - spec.evaluate(xi))

    radius = 1.0 + float(np.linalg.norm(eta))
    best = np.zeros(d)
    for _ in range(60):
        if d == 1:
            grid = np.linspace(-radius, radius, n_grid)[:, None]
        else:
            axis = np.linspace(-radius, radius, 41)
            mesh = np.meshgrid(*([axis] * d))
            grid = np.stack([m.ravel() for m in mesh], axis=-1)
        values = grid @ eta - spec.evaluate(grid)
        best = grid[int(np.argmax(values))]
        if np.linalg.norm(best) <= 0.9 * radius:
            break
        radius *= 2.0

    # A single simplex run can degenerate on anisotropic targets, so chain
    # several polish stages.  Every iterate is a feasible point of the sup,
    # hence a valid lower bound: taking the best value seen is always sound.
    candidates = [float(np.max(values))]
    x = best
    stages = (("Nelder-Mead", dict(xatol=1e-12, fatol=1e-14,
                                   maxiter=20000, maxfev=20000)),
              ("BFGS", dict(gtol=1e-11, maxiter=500)),
              ("Nelder-Mead", dict(xatol=1e-13, fatol=1e-15,
                                   maxiter=20000, maxfev=20000)))
    for method, opts in stages:
        with np.errstate(over="ignore", invalid="ignore"):
            result = optimize.minimize(loss, x, method=method, options=opts)
        if np.isfinite(result.fun):
            candidates.append(-float(result.fun))
            x = result.x
    return max(candidates)


def luxemburg_brentq(spec, values, measures):
    """Luxemburg norm of a piecewise-constant field via scipy's brentq."""
    values = np.asarray(values, dtype=float)
    measures = np.asarray(measures, dtype=float)
    if not np.any(values):
        return 0.0

    def gauge(lam):
        with np.errstate(over="ignore"):
            return float(measures @ spec.evaluate(values / lam)) - 1.0

    lo = hi = 1.0
    while gauge(lo) <= 0.0:
        lo *= 0.5
    while gauge(hi) >= 0.0:
        hi *= 2.0
    return optimize.brentq(gauge, lo, hi, xtol=1e-14, rtol=1e-15)


def linear_mode_recursion(lam, u0, v0, tau, n_steps, loads=None):
    """Backward Euler for the scalar mode u'' + lam u' + lam u = f.

    This is the two-field scheme reduced to one spectral coefficient with
    stiffness eigenvalue lam and phi = |.|^2/2 (so the stress term is again
    lam u).  Returns the lists (u_n, v_n), n = 0..N.
    """
    us, vs = [u0], [v0]
    for n in range(1, n_steps + 1):
        f = 0.0 if loads is None else loads[n - 1]
        v = (vs[-1] / tau + f - lam * us[-1]) / (1.0 / tau + lam + tau * lam)
        us.append(us[-1] + tau * v)
        vs.append(v)
    return us, vs


def dual_norm_maximize(coeffs, r, seed=0):
    """sup over test coefficients of <w, y> / |y|_r with weights (k pi)^{2j}.

    Independent route to the weighted-coefficient dual norm: numerically
    maximize the pairing over the H^r unit sphere in the same mode basis.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    m = coeffs.size
    k = np.arange(1, m + 1)
    weights = sum((k * np.pi) ** (2 * j) for j in range(r + 1))

    def neg_pairing(y):
        norm = np.sqrt(weights @ (y * y))
        if norm == 0.0:
            return 0.0
        return -(coeffs @ y) / norm

    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(8):
        start = rng.standard_normal(m)
        result = optimize.minimize(neg_pairing, start, method="Nelder-Mead",
                                   options=dict(xatol=1e-12, fatol=1e-15,
                                                maxiter=40000, maxfev=40000))
        best = max(best, -float(result.fun))
    return best
