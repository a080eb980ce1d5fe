"""Misclustering loss and replication summary statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import as_assignment


@dataclass(frozen=True)
class LossValue:
    """Flip-minimized normalized Hamming distance, at most 1/2.

    orientation is the sign s for which s * z_hat achieved the minimum; ties
    report +1.
    """

    value: float
    orientation: int


def misclustering(z_hat, z) -> LossValue:
    """min over s in {+1, -1} of (1/n) #{i: s * z_hat_i != z_i}."""
    z_hat = as_assignment(z_hat)
    z = as_assignment(z)
    if z_hat.shape[0] != z.shape[0]:
        raise ValueError(f"length mismatch: {z_hat.shape[0]} vs {z.shape[0]}")
    n = z.shape[0]
    d = int(np.count_nonzero(z_hat != z))
    if d <= n - d:
        return LossValue(value=d / n, orientation=1)
    return LossValue(value=(n - d) / n, orientation=-1)


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    sd: float  # population standard deviation
    q05: float
    q25: float
    q50: float
    q75: float
    q95: float
    count: int


def summarize(values) -> SummaryStats:
    """Mean, population sd, and the 5/25/50/75/95 percent quantiles."""
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise ValueError("summarize needs at least one value")
    qs = np.quantile(arr, [0.05, 0.25, 0.50, 0.75, 0.95])
    return SummaryStats(mean=float(arr.mean()), sd=float(arr.std()),
                        q05=float(qs[0]), q25=float(qs[1]), q50=float(qs[2]),
                        q75=float(qs[3]), q95=float(qs[4]), count=arr.size)
