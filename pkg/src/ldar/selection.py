"""Order selection by BIC for either quasi-likelihood criterion.

Every candidate order p in 1..pmax is fitted and scored on the common
sample t = pmax+1..n, so the loss terms are comparable across orders:

    BIC(p) = 2 (n - pmax) L(theta_hat_p) + (2p + 1) ln(n - pmax)

with L the average loss over the common sample.
"""

from dataclasses import dataclass
import math
import warnings

import numpy as np

from .errors import NumericalError
from .estimation import FitOptions, FitResult, fit
from .model import as_series


@dataclass(frozen=True)
class OrderSelection:
    method: str
    pmax: int
    bic_values: np.ndarray  # index i holds BIC(i + 1)
    chosen_order: int
    fits: list[FitResult | None]  # None where the fit failed


def bic_from_loss(loss: float, n_common: int, p: int) -> float:
    """BIC given a mean loss over a common sample of size n_common."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return 2.0 * n_common * loss + (2 * p + 1) * math.log(n_common)


def bic(series, p: int, pmax: int, method: str,
        options: FitOptions | None = None) -> float:
    """BIC of the order-p fit evaluated on the common sample."""
    y = as_series(series, pmax)
    if not 1 <= p <= pmax:
        raise ValueError(f"need 1 <= p <= pmax, got p={p}, pmax={pmax}")
    result = fit(y, p, method, options=options, start=pmax + 1)
    return bic_from_loss(result.loss, len(y) - pmax, p)


def select_order(series, pmax: int, method: str,
                 options: FitOptions | None = None) -> OrderSelection:
    """Fit orders 1..pmax on the common sample and pick the BIC minimizer.

    A failed fit contributes +inf with a warning instead of aborting the
    scan.  Exact ties break toward the smaller order.
    """
    if pmax < 1:
        raise ValueError(f"pmax must be >= 1, got {pmax}")
    y = as_series(series, pmax)
    n_common = len(y) - pmax
    values = np.full(pmax, np.inf)
    fits: list[FitResult | None] = [None] * pmax
    for p in range(1, pmax + 1):
        try:
            result = fit(y, p, method, options=options, start=pmax + 1)
        except NumericalError as exc:
            warnings.warn(f"order {p} fit failed ({exc}); BIC set to +inf", stacklevel=2)
            continue
        fits[p - 1] = result
        values[p - 1] = bic_from_loss(result.loss, n_common, p)
    # argmin returns the first minimizer, which is the smallest order
    chosen = int(np.argmin(values)) + 1
    return OrderSelection(
        method=method,
        pmax=pmax,
        bic_values=values,
        chosen_order=chosen,
        fits=fits,
    )
