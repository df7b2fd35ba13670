"""Core model: parameters, residual/scale evaluation, simulation.

The observation equation is an AR(p) conditional mean with a conditional
standard deviation that is linear in lagged absolute values:

    y_t = sum_i alpha_i * y_{t-i} + eta_t * (omega + sum_i beta_i * |y_{t-i}|)

Time series are plain 1-d numpy arrays.  The math below is written with
1-based time indices t = 1..n as in the estimation formulas; arrays are
stored 0-based, so y_t lives at ``values[t - 1]``.
"""

from dataclasses import dataclass
import math

import numpy as np

from .distributions import InnovationSpec, innovation_sampler


@dataclass(frozen=True)
class LdarParams:
    """Full parameter vector theta = (alpha', delta')' with delta = (omega, beta')'.

    Parameters
    ----------
    alpha : array-like, length p
        Conditional-mean coefficients.
    omega : float
        Scale intercept, strictly positive.
    beta : array-like, length p
        Scale slopes, all nonnegative.
    """

    alpha: np.ndarray
    omega: float
    beta: np.ndarray

    def __post_init__(self):
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "omega", float(self.omega))
        if alpha.ndim != 1 or beta.ndim != 1:
            raise ValueError("alpha and beta must be 1-d vectors")
        if len(alpha) != len(beta) or len(alpha) < 1:
            raise ValueError(
                f"alpha and beta must share a positive length, got {len(alpha)} and {len(beta)}"
            )
        if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(beta)) and math.isfinite(self.omega)):
            raise ValueError("parameters must be finite")
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if np.any(beta < 0):
            raise ValueError(f"beta entries must be nonnegative, got {beta}")

    @property
    def p(self) -> int:
        return len(self.alpha)

    def as_vector(self) -> np.ndarray:
        """Stacked (alpha_1..alpha_p, omega, beta_1..beta_p)."""
        return np.concatenate([self.alpha, [self.omega], self.beta])

    @classmethod
    def from_vector(cls, theta, p: int) -> "LdarParams":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (2 * p + 1,):
            raise ValueError(f"theta must have length {2 * p + 1}, got {theta.shape}")
        return cls(alpha=theta[:p], omega=theta[p], beta=theta[p + 1:])


@dataclass(frozen=True)
class RegressorPair:
    """Scaled lag vectors: y1 = lags/h_t and y2 = (1, |lags|)/h_t."""

    y1: np.ndarray
    y2: np.ndarray


def as_series(values, p: int | None = None) -> np.ndarray:
    """Validate a 1-d finite series, optionally requiring n > p."""
    y = np.asarray(values, dtype=float)
    if y.ndim != 1:
        raise ValueError(f"series must be 1-d, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ValueError("series contains non-finite values")
    if p is not None and len(y) <= p:
        raise ValueError(f"series length {len(y)} must exceed the order p={p}")
    return y


def mean_residual_and_scale(series, t: int, params: LdarParams) -> tuple[float, float]:
    """Residual eps_t(alpha) and scale h_t(delta) at 1-based time t.

    eps_t = y_t - sum_i alpha_i y_{t-i} and h_t = omega + sum_i beta_i |y_{t-i}|,
    requiring p + 1 <= t <= n.
    """
    y = as_series(series, params.p)
    p = params.p
    if not p + 1 <= t <= len(y):
        raise IndexError(f"t must satisfy {p + 1} <= t <= {len(y)}, got {t}")
    lags = y[t - 1 - p: t - 1][::-1]  # (y_{t-1}, ..., y_{t-p})
    eps = y[t - 1] - float(params.alpha @ lags)
    h = params.omega + float(params.beta @ np.abs(lags))
    return eps, h


def regressor_vectors(series, t: int, params: LdarParams) -> RegressorPair:
    """The scaled regressors Y1_t and Y2_t at 1-based time t."""
    y = as_series(series, params.p)
    p = params.p
    if not p + 1 <= t <= len(y):
        raise IndexError(f"t must satisfy {p + 1} <= t <= {len(y)}, got {t}")
    lags = y[t - 1 - p: t - 1][::-1]
    h = params.omega + float(params.beta @ np.abs(lags))
    y1 = lags / h
    y2 = np.concatenate([[1.0], np.abs(lags)]) / h
    return RegressorPair(y1=y1, y2=y2)


def simulate(
    params: LdarParams,
    innov: InnovationSpec,
    n: int,
    burn_in: int = 500,
    seed=0,
) -> np.ndarray:
    """Simulate n observations of the model, deterministic given the seed.

    The recursion starts from p zero lags and the first `burn_in` generated
    values are discarded.  The innovations are exactly the stream produced
    by `innovation_sampler(innov, n + burn_in, seed)`.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if burn_in < 0:
        raise ValueError(f"burn_in must be >= 0, got {burn_in}")
    p = params.p
    eta = innovation_sampler(innov, n + burn_in, seed)
    alpha = params.alpha
    beta = params.beta
    omega = params.omega
    y = np.zeros(p + n + burn_in)
    for t in range(p, p + n + burn_in):
        lags = y[t - p: t][::-1]
        y[t] = alpha @ lags + eta[t - p] * (omega + beta @ np.abs(lags))
    return y[p + burn_in:]


def stationarity_margin(
    params: LdarParams,
    innov: InnovationSpec,
    kappa: float = 1.0,
    n_mc: int = 100_000,
    seed=0,
) -> float:
    """Monte Carlo estimate of the sufficient-stationarity sum.

    Estimates sum_i max{ E|alpha_i - beta_i*eta|^kappa, E|alpha_i + beta_i*eta|^kappa }.
    A value below 1 certifies (up to Monte Carlo error) the sufficient
    condition for strict stationarity; the condition is not necessary, so
    callers should treat values >= 1 as advisory only.
    """
    if not 0 < kappa <= 1:
        raise ValueError(f"kappa must lie in (0, 1], got {kappa}")
    if n_mc < 10_000:
        raise ValueError(f"n_mc must be >= 10000, got {n_mc}")
    eta = innovation_sampler(innov, n_mc, seed)
    total = 0.0
    for a, b in zip(params.alpha, params.beta):
        minus = np.mean(np.abs(a - b * eta) ** kappa)
        plus = np.mean(np.abs(a + b * eta) ** kappa)
        total += max(minus, plus)
    return float(total)
