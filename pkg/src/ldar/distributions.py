"""Innovation distributions, standardization constants and special functions.

Three innovation families are supported: standard normal, Laplace with unit
scale, and Student's t with ``df`` degrees of freedom.  Each can be
standardized under two regimes:

* ``"mean_zero_unit_variance"``: E(eta) = 0 and var(eta) = 1, the regime
  required by the Gaussian quasi-likelihood.
* ``"median_zero_unit_abs_mean"``: median(eta) = 0 and E|eta| = 1, the
  regime required by the exponential quasi-likelihood.

All three base families are symmetric about zero, so the standardization
shift is always 0 and only the scale divisor differs.
"""

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from scipy import integrate, special

MEAN_VARIANCE = "mean_zero_unit_variance"
MEDIAN_ABS_MEAN = "median_zero_unit_abs_mean"

_FAMILIES = ("normal", "laplace", "student_t")
_MODES = (MEAN_VARIANCE, MEDIAN_ABS_MEAN)


@dataclass(frozen=True)
class StandardizationConstants:
    """Location/scale pair mapping a base draw onto a standardized one."""

    shift: float
    scale: float

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")


@dataclass(frozen=True)
class InnovationSpec:
    """Innovation family plus standardization mode.

    Parameters
    ----------
    family : str
        One of "normal", "laplace", "student_t".
    mode : str
        One of "mean_zero_unit_variance", "median_zero_unit_abs_mean".
    df : float, optional
        Degrees of freedom, required for (and only for) "student_t".
    """

    family: str
    mode: str
    df: float | None = None

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown innovation family {self.family!r}")
        if self.mode not in _MODES:
            raise ValueError(f"unknown standardization mode {self.mode!r}")
        if self.family == "student_t":
            if self.df is None or not self.df > 0:
                raise ValueError("student_t requires df > 0")
        elif self.df is not None:
            raise ValueError(f"df is only meaningful for student_t, got {self.family}")

    @property
    def constants(self) -> StandardizationConstants:
        return standardization(self.family, self.mode, self.df)


@lru_cache(maxsize=None)
def _abs_mean_student_t(df: float) -> float:
    """E|T_df| by adaptive quadrature on the positive half line."""
    if df <= 1:
        raise ValueError("E|T_df| is infinite for df <= 1")

    def integrand(x):
        # 2 * x * t-density(x), integrated over x >= 0
        c = math.exp(
            math.lgamma((df + 1) / 2) - math.lgamma(df / 2)
        ) / math.sqrt(df * math.pi)
        return 2.0 * x * c * (1.0 + x * x / df) ** (-(df + 1) / 2)

    value, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=1e-13, epsrel=1e-13)
    return value


@lru_cache(maxsize=None)
def standardization(family: str, mode: str, df: float | None = None) -> StandardizationConstants:
    """Constants (shift, scale) so that (X - shift)/scale meets the mode's targets.

    X is the raw family draw: N(0,1), Laplace(0, b=1) or t_df.  Raises
    ValueError for student_t with df <= 2 in the unit-variance mode, where
    the variance does not exist.
    """
    spec = InnovationSpec(family, mode, df)
    if mode == MEAN_VARIANCE:
        if family == "normal":
            scale = 1.0
        elif family == "laplace":
            scale = math.sqrt(2.0)  # var(Laplace(b=1)) = 2
        else:
            if spec.df <= 2:
                raise ValueError(
                    "student_t needs df > 2 for the unit-variance mode"
                )
            scale = math.sqrt(spec.df / (spec.df - 2.0))
    else:
        if family == "normal":
            scale = math.sqrt(2.0 / math.pi)  # E|Z|
        elif family == "laplace":
            scale = 1.0  # E|Laplace(b=1)| = 1
        else:
            scale = _abs_mean_student_t(spec.df)
    return StandardizationConstants(shift=0.0, scale=scale)


def innovation_sampler(spec: InnovationSpec, n: int, seed) -> np.ndarray:
    """Draw `n` iid standardized innovations, deterministic per seed.

    The seed may be anything `numpy.random.SeedSequence` accepts (an int or
    a tuple of ints), so callers can derive disjoint streams per task.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    if spec.family == "normal":
        base = rng.standard_normal(n)
    elif spec.family == "laplace":
        # inverse CDF of Laplace(0, 1)
        u = rng.random(n) - 0.5
        base = -np.sign(u) * np.log1p(-2.0 * np.abs(u))
    else:
        # ratio construction: Z / sqrt(V / df), V ~ chi^2_df
        z = rng.standard_normal(n)
        v = rng.chisquare(spec.df, n)
        base = z / np.sqrt(v / spec.df)
    c = spec.constants
    return (base - c.shift) / c.scale


def chi2_survival(x: float, df: int) -> float:
    """P(chi^2_df > x) via the regularized upper incomplete gamma function."""
    if x < 0:
        raise ValueError(f"x must be nonnegative, got {x}")
    if df <= 0:
        raise ValueError(f"df must be a positive integer, got {df}")
    return float(special.gammaincc(df / 2.0, x / 2.0))


def chi2_cdf(x: float, df: int) -> float:
    """P(chi^2_df <= x), the complement of `chi2_survival`."""
    if x < 0:
        raise ValueError(f"x must be nonnegative, got {x}")
    if df <= 0:
        raise ValueError(f"df must be a positive integer, got {df}")
    return float(special.gammainc(df / 2.0, x / 2.0))


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF, accurate to well below 1e-8."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must be in (0, 1), got {p}")
    return float(special.ndtri(p))
