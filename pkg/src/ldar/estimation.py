"""Quasi-likelihood losses, constrained fitting and sandwich covariances.

Two criteria are supported:

* "gqmle": mean of  ln h_t + eps_t^2 / (2 h_t^2)   (Gaussian quasi-likelihood)
* "eqmle": mean of  ln h_t + |eps_t| / h_t         (exponential quasi-likelihood)

Both average over t = p+1..n by default; order selection passes a later
start index so every candidate order is scored on the same sample.

Fitting works in a transformed, unconstrained space: omega = exp(u) and
beta_i = v_i^2, which enforces omega > 0 and beta_i >= 0.  The Gaussian
criterion is smooth and is minimized by projected quasi-Newton steps with
the analytic gradient; the exponential criterion is not differentiable in
alpha, so it is minimized by Nelder-Mead restarted from jittered starting
points.
"""

from dataclasses import dataclass
import math
import warnings

import numpy as np
from scipy import optimize

from .errors import DegenerateSampleError, NonConvergenceError, SingularMatrixError
from .model import LdarParams, as_series

METHODS = ("gqmle", "eqmle")

_JITTER_SEED_TAG = 0x1DA2


# ---------------------------------------------------------------------------
# design matrices and losses
# ---------------------------------------------------------------------------

class _Design:
    """Lag matrices for the loss sum t = start..n (1-based start)."""

    def __init__(self, y: np.ndarray, p: int, start: int):
        n = len(y)
        if not p + 1 <= start <= n:
            raise ValueError(f"start must satisfy {p + 1} <= start <= {n}, got {start}")
        self.target = y[start - 1:]
        self.lags = np.column_stack([y[start - 1 - j: n - j] for j in range(1, p + 1)])
        self.abs_lags = np.abs(self.lags)
        self.m = n - start + 1

    def eps_h(self, alpha, omega, beta):
        eps = self.target - self.lags @ alpha
        h = omega + self.abs_lags @ beta
        return eps, h


def _split_theta(theta, p):
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (2 * p + 1,):
        raise ValueError(f"theta must have length {2 * p + 1}, got shape {theta.shape}")
    return theta[:p], theta[p], theta[p + 1:]


def _check_theta(omega, beta):
    if not omega > 0:
        raise ValueError(f"omega must be positive, got {omega}")
    if np.any(beta < 0):
        raise ValueError(f"beta entries must be nonnegative, got {beta}")


def gaussian_loss(series, p: int, theta, start: int | None = None) -> float:
    """Average Gaussian quasi-likelihood loss over t = start..n.

    theta is ordered (alpha_1..alpha_p, omega, beta_1..beta_p); start
    defaults to p + 1.
    """
    y = as_series(series, p)
    alpha, omega, beta = _split_theta(theta, p)
    _check_theta(omega, beta)
    d = _Design(y, p, start if start is not None else p + 1)
    eps, h = d.eps_h(alpha, omega, beta)
    return float(np.mean(np.log(h) + eps * eps / (2.0 * h * h)))


def exponential_loss(series, p: int, theta, start: int | None = None) -> float:
    """Average exponential quasi-likelihood loss over t = start..n."""
    y = as_series(series, p)
    alpha, omega, beta = _split_theta(theta, p)
    _check_theta(omega, beta)
    d = _Design(y, p, start if start is not None else p + 1)
    eps, h = d.eps_h(alpha, omega, beta)
    return float(np.mean(np.log(h) + np.abs(eps) / h))


def gaussian_gradient(series, p: int, theta, start: int | None = None) -> np.ndarray:
    """Analytic gradient of `gaussian_loss`, ordered like theta.

    Componentwise, d/dalpha_i = -eps_t y_{t-i} / h_t^2,
    d/domega = (1 - eps_t^2/h_t^2) / h_t and
    d/dbeta_i = |y_{t-i}| (1 - eps_t^2/h_t^2) / h_t, averaged over t.
    """
    y = as_series(series, p)
    alpha, omega, beta = _split_theta(theta, p)
    _check_theta(omega, beta)
    d = _Design(y, p, start if start is not None else p + 1)
    eps, h = d.eps_h(alpha, omega, beta)
    h2 = h * h
    g_alpha = -(d.lags.T @ (eps / h2)) / d.m
    w = (1.0 - eps * eps / h2) / h
    g_omega = np.mean(w)
    g_beta = (d.abs_lags.T @ w) / d.m
    return np.concatenate([g_alpha, [g_omega], g_beta])


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FitOptions:
    """Optimizer controls.

    max_iter of None uses the backend default.  `restarts` counts starting
    points in total (the deterministic initialization plus jittered ones).
    `init` is "ols" or "fixed"; the latter starts from `init_params`.
    """

    max_iter: int | None = None
    param_tol: float = 1e-6
    objective_tol: float = 1e-9
    restarts: int = 5
    omega_floor: float = 1e-6
    init: str = "ols"
    init_params: LdarParams | None = None
    init_floor: float = 1e-4

    def __post_init__(self):
        if self.param_tol <= 0 or self.objective_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.omega_floor <= 0:
            raise ValueError("omega_floor must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.init not in ("ols", "fixed"):
            raise ValueError(f"unknown init strategy {self.init!r}")
        if self.init == "fixed" and self.init_params is None:
            raise ValueError("init='fixed' requires init_params")


@dataclass(frozen=True)
class FitResult:
    """A fitted model: estimates, residuals and optimizer bookkeeping."""

    method: str
    params: LdarParams
    loss: float
    residuals: np.ndarray
    converged: bool
    iterations: int
    restarts_used: int
    loss_start: int  # first 1-based t entering the reported loss


@dataclass(frozen=True)
class MomentSummary:
    """Residual moments feeding the covariance and diagnostic estimators."""

    kappa1: float
    kappa2: float
    kappa3: float
    kappa4: float
    tau1: float
    tau2: float
    sigma1_sq: float
    sigma2_sq: float


@dataclass(frozen=True)
class CovarianceReport:
    """Plug-in sandwich covariance: Sigma, Omega, Xi and standard errors."""

    method: str
    sigma_hat: np.ndarray
    omega_hat: np.ndarray
    xi_hat: np.ndarray
    ase: np.ndarray
    moments: MomentSummary
    n_obs: int
    f0: float | None = None
    bandwidth: float | None = None


def _to_transformed(theta, p):
    alpha, omega, beta = _split_theta(theta, p)
    return np.concatenate([alpha, [math.log(omega)], np.sqrt(beta)])


def _to_natural(z, p):
    alpha = z[:p]
    omega = math.exp(z[p])
    beta = z[p + 1:] ** 2
    return np.concatenate([alpha, [omega], beta])


def _ols_init(design: _Design, p: int, floor: float) -> np.ndarray:
    """AR(p) least squares for alpha, then |residual| regressed on (1, |lags|)."""
    alpha, *_ = np.linalg.lstsq(design.lags, design.target, rcond=None)
    resid = design.target - design.lags @ alpha
    x = np.column_stack([np.ones(design.m), design.abs_lags])
    delta, *_ = np.linalg.lstsq(x, np.abs(resid), rcond=None)
    delta = np.maximum(delta, floor)
    return np.concatenate([alpha, delta])


def _jitter(z0: np.ndarray, restart: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence((_JITTER_SEED_TAG, restart)))
    return z0 + rng.normal(0.0, 0.25, size=len(z0))


def _minimize_gaussian(design, p, z0, options):
    def fun(z):
        nat = _to_natural(z, p)
        alpha, omega, beta = nat[:p], nat[p], nat[p + 1:]
        eps, h = design.eps_h(alpha, omega, beta)
        h2 = h * h
        loss = np.mean(np.log(h) + eps * eps / (2.0 * h2))
        g_alpha = -(design.lags.T @ (eps / h2)) / design.m
        w = (1.0 - eps * eps / h2) / h
        g_omega = np.mean(w)
        g_beta = (design.abs_lags.T @ w) / design.m
        # chain rule into the (alpha, u, v) coordinates
        grad = np.concatenate([g_alpha, [g_omega * omega], g_beta * 2.0 * z[p + 1:]])
        if not np.isfinite(loss):
            return 1e300, np.zeros_like(grad)
        return loss, grad

    bounds = [(None, None)] * p + [(math.log(options.omega_floor), 50.0)] + [(None, None)] * p
    res = optimize.minimize(
        fun,
        z0,
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={
            "maxiter": options.max_iter or 500,
            "ftol": 1e-14,
            "gtol": min(1e-9, options.param_tol),
        },
    )
    return res.x, float(res.fun), bool(res.success), int(res.nit)


def _minimize_exponential(design, p, z0, options):
    def fun(z):
        nat = _to_natural(z, p)
        eps, h = design.eps_h(nat[:p], nat[p], nat[p + 1:])
        if nat[p] < options.omega_floor:
            return 1e300
        loss = np.mean(np.log(h) + np.abs(eps) / h)
        return loss if np.isfinite(loss) else 1e300

    nm_options = {
        "xatol": options.param_tol,
        "fatol": options.objective_tol,
        "maxiter": options.max_iter or 400 * (2 * p + 1),
    }
    # Nelder-Mead can shrink prematurely in higher dimensions; restarting the
    # simplex at the incumbent until no improvement is the standard remedy.
    z, f = z0, fun(z0)
    nit = 0
    success = False
    for _ in range(4):
        res = optimize.minimize(fun, z, method="Nelder-Mead", options=nm_options)
        nit += int(res.nit)
        improved = f - float(res.fun)
        if res.fun <= f:
            z, f = res.x, float(res.fun)
        success = bool(res.success)
        if improved <= max(options.objective_tol, 1e-12):
            break
    return z, f, success, nit


def fit(series, p: int, method: str, options: FitOptions | None = None,
        start: int | None = None) -> FitResult:
    """Minimize the chosen quasi-likelihood under omega > 0, beta >= 0.

    Runs `options.restarts` starting points (deterministic initialization
    first, then fixed jitters) and keeps the best.  The returned loss is
    re-evaluated at the final natural-scale parameters, and residuals
    eta_t = eps_t/h_t cover the full range t = p+1..n regardless of
    `start`.  Raises NonConvergenceError only when every start fails to
    produce a finite loss; an optimizer stopping at its iteration cap is
    reported through `converged=False` instead.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if options is None:
        options = FitOptions()
    y = as_series(series, p)
    n = len(y)
    loss_start = start if start is not None else p + 1
    design = _Design(y, p, loss_start)
    if design.m < 5 * (2 * p + 1):
        warnings.warn(
            f"effective sample {design.m} is below the recommended 5*(2p+1)={5 * (2 * p + 1)}",
            stacklevel=2,
        )

    if options.init == "fixed":
        theta0 = options.init_params.as_vector()
        if len(theta0) != 2 * p + 1:
            raise ValueError("init_params order does not match p")
        theta0 = theta0.copy()
        theta0[p:] = np.maximum(theta0[p:], options.init_floor)
    else:
        theta0 = _ols_init(design, p, options.init_floor)
    z0 = _to_transformed(theta0, p)

    minimize = _minimize_gaussian if method == "gqmle" else _minimize_exponential
    best = None
    for r in range(options.restarts):
        z_start = z0 if r == 0 else _jitter(z0, r)
        try:
            z, f, success, nit = minimize(design, p, z_start, options)
        except (ValueError, FloatingPointError):
            continue
        if not np.isfinite(f):
            continue
        if best is None or f < best[1] - 1e-15 or (success and not best[2] and f <= best[1] + options.objective_tol):
            best = (z, f, success, nit)
    if best is None:
        raise NonConvergenceError(
            f"{method} optimization failed on all {options.restarts} restarts"
        )

    theta_hat = _to_natural(best[0], p)
    theta_hat[p] = max(theta_hat[p], options.omega_floor)
    params = LdarParams(alpha=theta_hat[:p], omega=theta_hat[p], beta=theta_hat[p + 1:])
    loss_fn = gaussian_loss if method == "gqmle" else exponential_loss
    loss = loss_fn(y, p, params.as_vector(), start=loss_start)
    full = _Design(y, p, p + 1)
    eps, h = full.eps_h(params.alpha, params.omega, params.beta)
    return FitResult(
        method=method,
        params=params,
        loss=loss,
        residuals=eps / h,
        converged=best[2],
        iterations=best[3],
        restarts_used=options.restarts,
        loss_start=loss_start,
    )


# ---------------------------------------------------------------------------
# covariance estimation
# ---------------------------------------------------------------------------

def solve_spd(mat: np.ndarray, rhs: np.ndarray, rcond_min: float = 1e-12,
              what: str = "matrix") -> np.ndarray:
    """Solve a symmetric system with condition monitoring, never a pseudo-inverse."""
    sym = 0.5 * (mat + mat.T)
    eigvals = np.linalg.eigvalsh(sym)
    lo, hi = np.min(np.abs(eigvals)), np.max(np.abs(eigvals))
    if hi == 0 or lo / hi < rcond_min:
        raise SingularMatrixError(
            f"{what} is numerically singular (rcond {0.0 if hi == 0 else lo / hi:.2e}); "
            "consider a smaller order or more data"
        )
    return np.linalg.solve(sym, rhs)


def residual_moments(residuals) -> MomentSummary:
    r = np.asarray(residuals, dtype=float)
    a = np.abs(r)
    return MomentSummary(
        kappa1=float(np.mean(r)),
        kappa2=float(np.mean(r * r) - 1.0),
        kappa3=float(np.mean(r ** 3)),
        kappa4=float(np.mean(r ** 4) - 1.0),
        tau1=float(np.mean(np.sign(r))),
        tau2=float(np.mean(a)),
        sigma1_sq=float(np.var(r)),
        sigma2_sq=float(np.var(a)),
    )


def scaled_regressor_matrices(series, params: LdarParams):
    """Rows Y1_t' and Y2_t' for t = p+1..n at the given parameters."""
    y = as_series(series, params.p)
    d = _Design(y, params.p, params.p + 1)
    h = params.omega + d.abs_lags @ params.beta
    y1 = d.lags / h[:, None]
    y2 = np.column_stack([np.ones(d.m), d.abs_lags]) / h[:, None]
    return y1, y2


def sandwich_covariance(series, fit_result: FitResult) -> CovarianceReport:
    """Plug-in asymptotic covariance for a fitted model.

    Sample averages of the scaled regressors replace the expectation
    blocks; residual moments replace the innovation moments.  For the
    exponential criterion the mean block is weighted by a kernel density
    estimate of the residual density at zero and the whole sandwich
    carries the extra factor 1/4.  Standard errors are
    sqrt(diag(Xi)/n).
    """
    if not fit_result.converged:
        warnings.warn("covariance requested for a fit that did not converge", stacklevel=2)
    params = fit_result.params
    y = as_series(series, params.p)
    n = len(y)
    y1, y2 = scaled_regressor_matrices(y, params)
    m = len(y1)
    a_mat = y1.T @ y1 / m
    b_mat = y1.T @ y2 / m
    c_mat = y2.T @ y2 / m
    moments = residual_moments(fit_result.residuals)

    p = params.p
    dim = 2 * p + 1
    f0 = bandwidth = None
    if fit_result.method == "gqmle":
        sigma = np.zeros((dim, dim))
        sigma[:p, :p] = a_mat
        sigma[p:, p:] = 2.0 * c_mat
        k_off, k_diag = moments.kappa3, moments.kappa4
        if moments.kappa4 - moments.kappa3 ** 2 <= 0:
            warnings.warn(
                "kappa4 - kappa3^2 <= 0 in the residual sample; the Gaussian "
                "sandwich middle matrix is not interpretable as a covariance",
                stacklevel=2,
            )
        extra = 1.0
    else:
        f0, bandwidth = kde_density_at_zero(fit_result.residuals)
        sigma = np.zeros((dim, dim))
        sigma[:p, :p] = f0 * a_mat
        sigma[p:, p:] = 0.5 * c_mat
        k_off, k_diag = moments.kappa1, moments.kappa2
        extra = 0.25
    omega_mat = np.zeros((dim, dim))
    omega_mat[:p, :p] = a_mat
    omega_mat[:p, p:] = k_off * b_mat
    omega_mat[p:, :p] = k_off * b_mat.T
    omega_mat[p:, p:] = k_diag * c_mat

    inv_sigma = solve_spd(sigma, np.eye(dim), what="Sigma estimate")
    xi = extra * inv_sigma @ omega_mat @ inv_sigma
    xi = 0.5 * (xi + xi.T)
    diag = np.diag(xi).copy()
    if np.any(diag < -1e-12):
        warnings.warn("Xi estimate has negative diagonal entries", stacklevel=2)
    ase = np.sqrt(np.maximum(diag, 0.0) / n)
    return CovarianceReport(
        method=fit_result.method,
        sigma_hat=sigma,
        omega_hat=omega_mat,
        xi_hat=xi,
        ase=ase,
        moments=moments,
        n_obs=n,
        f0=f0,
        bandwidth=bandwidth,
    )


# ---------------------------------------------------------------------------
# kernel density at zero
# ---------------------------------------------------------------------------

def rule_of_thumb_bandwidth(s: float, iqr: float, n: int) -> float:
    """0.9 n^(-1/5) min(s, iqr/1.34)."""
    return 0.9 * n ** (-0.2) * min(s, iqr / 1.34)


def kde_density_at_zero(residuals, bandwidth: float | None = None) -> tuple[float, float]:
    """Gaussian-kernel density estimate at zero with the rule-of-thumb bandwidth.

    The bandwidth uses the sample standard deviation and interquartile
    range of the residuals; passing `bandwidth` overrides it (and skips
    the spread guard).
    """
    r = np.asarray(residuals, dtype=float)
    if bandwidth is None:
        if len(r) < 10:
            raise ValueError(f"need at least 10 residuals, got {len(r)}")
        s = float(np.std(r, ddof=1))
        q25, q75 = np.percentile(r, [25.0, 75.0])
        b = rule_of_thumb_bandwidth(s, float(q75 - q25), len(r))
        if not b > 0:
            raise DegenerateSampleError("residual sample has no spread")
    else:
        b = float(bandwidth)
        if not b > 0:
            raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    u = r / b
    f0 = float(np.mean(np.exp(-0.5 * u * u)) / (b * math.sqrt(2.0 * math.pi)))
    return f0, b
