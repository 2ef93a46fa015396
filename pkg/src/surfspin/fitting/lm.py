"""Levenberg-Marquardt least squares with finite-difference Jacobians.

``lm_fit`` minimizes ``0.5 * sum(rho(r_i))`` where ``rho`` is the identity
(``loss="linear"``) or the soft-L1 loss ``2 f^2 (sqrt(1 + (r/f)^2) - 1)``.  The
robust loss is folded into the residual vector itself, so the same damped
Gauss-Newton step serves both.

Bounds are enforced through smooth reparametrizations (sine for two-sided,
square-root hyperbola for one-sided bounds); the returned covariance is for
the physical parameters.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from ..errors import NumericError

Z95 = 1.959963984540054


@dataclass
class FitResult:
    params: dict
    covariance: np.ndarray
    ci95: dict
    stderr: dict
    residual_norm: float
    n_iter: int
    converged: bool
    model_id: str = ""
    residuals: np.ndarray = field(default=None, repr=False)
    dof: int = 0
    derived: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    message: str = ""
    model: object = field(default=None, repr=False)

    @property
    def names(self):
        return list(self.params)

    @property
    def values(self):
        return np.array(list(self.params.values()), dtype=float)

    def __getitem__(self, name):
        if name in self.params:
            return self.params[name]
        return self.derived[name]

    def to_dict(self):
        return {
            "model_id": self.model_id,
            "converged": bool(self.converged),
            "n_iter": int(self.n_iter),
            "residual_norm": float(self.residual_norm),
            "dof": int(self.dof),
            "params": {k: _jsonable(v) for k, v in self.params.items()},
            "stderr": {k: _jsonable(v) for k, v in self.stderr.items()},
            "ci95": {k: [_jsonable(a), _jsonable(b)] for k, (a, b) in self.ci95.items()},
            "covariance": [[_jsonable(x) for x in row] for row in np.asarray(self.covariance)],
            "derived": {k: _jsonable(v) for k, v in self.derived.items()},
            "flags": list(self.flags),
            "message": self.message,
        }


def _jsonable(v):
    if isinstance(v, (complex, np.complexfloating)):
        return {"re": _jsonable(v.real), "im": _jsonable(v.imag)}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return v


# --------------------------------------------------------------------------
# bound transforms
# --------------------------------------------------------------------------

class _Transform:
    def __init__(self, p0, bounds, scale):
        n = len(p0)
        lo, hi = (np.full(n, -np.inf), np.full(n, np.inf)) if bounds is None else bounds
        self.lo = np.broadcast_to(np.asarray(lo, dtype=float), (n,)).copy()
        self.hi = np.broadcast_to(np.asarray(hi, dtype=float), (n,)).copy()
        if np.any(self.lo >= self.hi):
            raise ValueError("inconsistent bounds")
        self.s = np.asarray(scale, dtype=float)

    def to_internal(self, p):
        p = np.clip(np.asarray(p, dtype=float), self.lo, self.hi)
        u = p.copy()
        for i in range(len(p)):
            lo, hi, s = self.lo[i], self.hi[i], self.s[i]
            if np.isfinite(lo) and np.isfinite(hi):
                u[i] = math.asin(2.0 * (p[i] - lo) / (hi - lo) - 1.0)
            elif np.isfinite(lo):
                u[i] = math.sqrt((p[i] - lo + s) ** 2 - s * s)
            elif np.isfinite(hi):
                u[i] = math.sqrt((hi - p[i] + s) ** 2 - s * s)
        return u

    def to_external(self, u):
        p = np.array(u, dtype=float)
        for i in range(len(p)):
            lo, hi, s = self.lo[i], self.hi[i], self.s[i]
            if np.isfinite(lo) and np.isfinite(hi):
                p[i] = lo + 0.5 * (hi - lo) * (math.sin(u[i]) + 1.0)
            elif np.isfinite(lo):
                p[i] = lo - s + math.sqrt(u[i] * u[i] + s * s)
            elif np.isfinite(hi):
                p[i] = hi + s - math.sqrt(u[i] * u[i] + s * s)
        return p


def _robustify(r, loss, f_scale):
    if loss == "linear":
        return r
    if loss == "soft_l1":
        z = (r / f_scale) ** 2
        # 2(sqrt(1+z)-1) written to stay accurate for small z
        rho = 2.0 * z / (np.sqrt(1.0 + z) + 1.0)
        return np.sign(r) * f_scale * np.sqrt(rho)
    raise ValueError(f"unknown loss {loss!r}")


def numeric_jacobian(fun, x, step):
    """Central-difference Jacobian of ``fun`` at ``x``."""
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(len(x)):
        h = step[j]
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        cols.append((fun(xp) - fun(xm)) / (2.0 * h))
    return np.column_stack(cols) if cols else np.zeros((len(fun(x)), 0))


def _steps(x, x_scale, rel_step):
    return rel_step * np.maximum(np.abs(x), x_scale)


def lm_fit(residuals, p0, bounds=None, names=None, loss="linear", f_scale=1.0,
           max_iter=200, ftol=1e-14, xtol=1e-14, gtol=1e-16, rel_step=1e-6,
           x_scale=None, absolute_sigma=False, model_id=""):
    """Levenberg-Marquardt fit of ``residuals(p) -> 1-d array``.

    Parameters
    ----------
    p0 : sequence of float
        Starting point (physical parameters).
    bounds : (lower, upper) or None
        Per-parameter bounds; infinities mean unbounded.
    loss : {"linear", "soft_l1"}
        ``soft_l1`` down-weights residuals much larger than ``f_scale``.
    x_scale : array, optional
        Typical parameter magnitudes; sets finite-difference steps for
        parameters near zero (default ``max(|p0|, 1)``).
    absolute_sigma : bool
        If true the residuals are taken as already divided by known standard
        deviations and the covariance is not rescaled by the reduced chi^2.

    Returns
    -------
    FitResult
        ``converged`` is false when ``max_iter`` is exhausted.
    """
    p0 = np.asarray(p0, dtype=float)
    n = len(p0)
    names = list(names) if names is not None else [f"p{i}" for i in range(n)]
    if x_scale is None:
        x_scale = np.where(p0 != 0, np.abs(p0), 1.0)
    x_scale = np.broadcast_to(np.asarray(x_scale, dtype=float), (n,))
    tr = _Transform(p0, bounds, x_scale)

    def raw(p):
        r = np.asarray(residuals(p), dtype=float).ravel()
        if not np.all(np.isfinite(r)):
            raise NumericError("residual function returned non-finite values")
        return r

    def F(u):
        return _robustify(raw(tr.to_external(u)), loss, f_scale)

    u = tr.to_internal(p0)
    u_scale = np.maximum(np.abs(u), np.where(np.isfinite(tr.lo) & np.isfinite(tr.hi), 1e-3, x_scale))
    r = F(u)
    cost = 0.5 * float(r @ r)
    lam = 1e-3
    converged = False
    message = "maximum number of iterations reached"
    it = 0
    for it in range(1, max_iter + 1):
        J = numeric_jacobian(F, u, _steps(u, u_scale, rel_step))
        g = J.T @ r
        if np.max(np.abs(g), initial=0.0) <= gtol * max(cost, 1e-300) or cost == 0.0:
            converged = True
            message = "gradient vanished"
            break
        D = np.sum(J * J, axis=0)
        D = np.where(D > 0, D, 0.0)
        improved = False
        while lam < 1e20:
            A = np.vstack([J, np.diag(np.sqrt(lam * D))])
            rhs = np.concatenate([-r, np.zeros(n)])
            delta = np.linalg.lstsq(A, rhs, rcond=None)[0]
            u_new = u + delta
            try:
                r_new = F(u_new)
            except NumericError:
                lam *= 10.0
                continue
            cost_new = 0.5 * float(r_new @ r_new)
            if cost_new < cost:
                improved = True
                break
            lam *= 10.0
        if not improved:
            converged = True
            message = "no further decrease possible"
            break
        dcost = cost - cost_new
        step_small = np.linalg.norm(delta) <= xtol * (np.linalg.norm(u) + xtol)
        u, r, cost = u_new, r_new, cost_new
        lam = max(lam / 10.0, 1e-15)
        if dcost <= ftol * cost or step_small or cost == 0.0:
            converged = True
            message = "relative reduction below tolerance" if not step_small else "step below tolerance"
            break

    p = tr.to_external(u)
    return _finish(residuals, p, u, tr, F, loss, f_scale, names, it, converged, message,
                   rel_step, x_scale, absolute_sigma, model_id)


def _finish(residuals, p, u, tr, F, loss, f_scale, names, it, converged, message,
            rel_step, x_scale, absolute_sigma, model_id):
    n = len(p)

    def Fp(pp):
        return _robustify(np.asarray(residuals(pp), dtype=float).ravel(), loss, f_scale)

    r = Fp(p)
    m = r.size
    # Jacobian w.r.t. physical parameters; one-sided at active bounds
    steps = _steps(p, x_scale, rel_step)
    cols = []
    for j in range(n):
        h = steps[j]
        pp, pm = p.copy(), p.copy()
        pp[j] = min(p[j] + h, tr.hi[j])
        pm[j] = max(p[j] - h, tr.lo[j])
        cols.append((Fp(pp) - Fp(pm)) / (pp[j] - pm[j]))
    J = np.column_stack(cols) if cols else np.zeros((m, 0))
    cov, flags, unconstrained = covariance_from_jacobian(J)
    dof = max(m - n, 0)
    s2 = 1.0
    if not absolute_sigma:
        s2 = float(r @ r) / dof if dof > 0 else np.nan
    cov = cov * s2
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    se = np.where(unconstrained, np.inf, se)
    params = {k: float(v) for k, v in zip(names, p)}
    stderr = {k: float(v) for k, v in zip(names, se)}
    ci = {k: (float(v - Z95 * s), float(v + Z95 * s)) for k, v, s in zip(names, p, se)}
    for k, unc in zip(names, unconstrained):
        if unc:
            flags.append(f"unconstrained:{k}")
    if not converged:
        flags.append("not_converged")
    raw = np.asarray(residuals(p), dtype=float).ravel()
    return FitResult(params=params, covariance=cov, ci95=ci, stderr=stderr,
                     residual_norm=float(np.linalg.norm(raw)), n_iter=it, converged=converged,
                     model_id=model_id, residuals=raw, dof=dof, flags=flags, message=message)


def covariance_from_jacobian(J, rcond=1e-10):
    """``(J^T J)^-1`` via SVD of the column-scaled Jacobian.

    Returns ``(cov, flags, unconstrained)``; parameters with significant weight
    on singular directions are reported as unconstrained.
    """
    m, n = J.shape
    if n == 0:
        return np.zeros((0, 0)), [], np.zeros(0, dtype=bool)
    scale = np.sqrt(np.sum(J * J, axis=0))
    scale = np.where(scale > 0, scale, 1.0)
    Js = J / scale
    U, s, Vt = np.linalg.svd(Js, full_matrices=False)
    tol = rcond * (s[0] if s.size else 0.0)
    good = s > tol
    flags = []
    unconstrained = np.zeros(n, dtype=bool)
    if not np.all(good) or m < n:
        flags.append("rank_deficient")
        null = Vt[~good]
        if null.size:
            unconstrained = np.max(np.abs(null), axis=0) > 0.1
        unconstrained |= np.sqrt(np.sum(J * J, axis=0)) == 0
    inv_s2 = np.where(good, 1.0 / np.where(good, s, 1.0) ** 2, 0.0)
    cov_s = (Vt.T * inv_s2) @ Vt
    cov = cov_s / np.outer(scale, scale)
    cov = 0.5 * (cov + cov.T)
    return cov, flags, unconstrained


def transform_result(res, fn, names, rel_step=1e-7, model_id=None):
    """Map a fit in internal coordinates to physical ones (delta method).

    ``fn(values) -> array`` converts the internal parameter vector; the
    covariance is propagated with its central-difference Jacobian.
    """
    x = res.values
    y = np.asarray(fn(x), dtype=float)
    steps = rel_step * np.maximum(np.abs(x), 1e-3)
    G = numeric_jacobian(lambda v: np.asarray(fn(v), dtype=float), x, steps) if len(x) else np.zeros((len(y), 0))
    cov_in = np.where(np.isfinite(res.covariance), res.covariance, 0.0)
    cov = G @ cov_in @ G.T
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    unc_in = np.array([not np.isfinite(res.stderr[k]) for k in res.params])
    if unc_in.any():
        se = np.where(np.any(np.abs(G[:, unc_in]) > 0, axis=1), np.inf, se)
    params = {k: float(v) for k, v in zip(names, y)}
    stderr = {k: float(s) for k, s in zip(names, se)}
    ci = {k: (float(v - Z95 * s), float(v + Z95 * s)) for k, v, s in zip(names, y, se)}
    flags = [f for f in res.flags if not f.startswith("unconstrained:")]
    flags += [f"unconstrained:{k}" for k, s in stderr.items() if not np.isfinite(s)]
    return FitResult(params=params, covariance=cov, ci95=ci, stderr=stderr,
                     residual_norm=res.residual_norm, n_iter=res.n_iter, converged=res.converged,
                     model_id=model_id or res.model_id, residuals=res.residuals, dof=res.dof,
                     derived=dict(res.derived), flags=flags, message=res.message)


def bootstrap_ci(fit_rows, rows, n_boot=200, seed=0, level=0.95):
    """Percentile bootstrap over data rows.

    ``fit_rows(rows_subset) -> FitResult``; returns ``{name: (lo, hi)}``.
    """
    rng = np.random.default_rng(seed)
    rows = list(rows)
    samples = []
    for _ in range(n_boot):
        idx = rng.integers(0, len(rows), len(rows))
        samples.append(fit_rows([rows[i] for i in idx]).values)
    base = fit_rows(rows)
    samples = np.array(samples)
    a = 100 * (1 - level) / 2
    lo = np.percentile(samples, a, axis=0)
    hi = np.percentile(samples, 100 - a, axis=0)
    return {k: (float(l), float(h)) for k, l, h in zip(base.names, lo, hi)}
