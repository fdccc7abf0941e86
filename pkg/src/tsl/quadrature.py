"""Cumulative time quadrature on sample grids.

Two grades are used by the checkers: cumulative trapezoid for the inequality
families (whose tolerance budgets are sized for it), and a fourth-order
cumulative Simpson rule for the identity-grade balances (energy identity,
dissipative-solution comparison), where trapezoid error would dominate the
quantity being measured.
"""

from __future__ import annotations

import numpy as np


def cumtrapz(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Cumulative trapezoid of y(x); out[0] = 0."""
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(y)
    if y.size > 1:
        out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(x))
    return out


def cumsimps(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Cumulative Simpson integral of y(x); out[0] = 0.

    Fourth-order on uniform grids: node i >= 2 chains the three-point Simpson
    panel ending at i, and node 1 uses the quadratic through the first three
    samples.  Falls back to the trapezoid rule when the spacing is nonuniform
    or there are fewer than three samples.
    """
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    n = y.size
    if n < 3:
        return cumtrapz(y, x)
    h = np.diff(x)
    if np.max(np.abs(h - h[0])) > 1e-9 * max(abs(h[0]), 1e-300):
        return cumtrapz(y, x)
    h0 = h[0]
    out = np.zeros_like(y)
    out[1] = h0 * (5.0 * y[0] + 8.0 * y[1] - y[2]) / 12.0
    panels = h0 * (y[:-2] + 4.0 * y[1:-1] + y[2:]) / 3.0  # panel ending at i = 2..n-1
    out[2::2] = np.cumsum(panels[0::2])
    if n > 3:
        out[3::2] = out[1] + np.cumsum(panels[1::2])
    elif n == 3:
        pass
    return out
