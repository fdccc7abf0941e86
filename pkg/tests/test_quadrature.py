"""Cumulative quadrature rules against closed-form integrals."""

import numpy as np
import pytest

from tsl.quadrature import cumsimps, cumtrapz


def test_cumtrapz_linear_exact():
    x = np.linspace(0.0, 2.0, 11)
    y = 3.0 * x + 1.0
    exact = 1.5 * x ** 2 + x
    assert np.allclose(cumtrapz(y, x), exact, atol=1e-14)


def test_cumsimps_quadratic_exact():
    x = np.linspace(0.0, 1.0, 21)
    y = x ** 2 - 2.0 * x + 0.5
    exact = x ** 3 / 3.0 - x ** 2 + 0.5 * x
    assert np.allclose(cumsimps(y, x), exact, atol=1e-14)


def test_cumsimps_fourth_order_on_smooth():
    errs = []
    for n in (17, 33, 65):
        x = np.linspace(0.0, 1.0, n)
        out = cumsimps(np.exp(x), x)
        errs.append(np.max(np.abs(out - (np.exp(x) - 1.0))))
    orders = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 3.5


def test_cumsimps_beats_trapezoid():
    x = np.linspace(0.0, 1.0, 101)
    y = np.exp(-2.0 * x)
    exact = (1.0 - np.exp(-2.0 * x)) / 2.0
    err_s = np.max(np.abs(cumsimps(y, x) - exact))
    err_t = np.max(np.abs(cumtrapz(y, x) - exact))
    assert err_s < err_t / 100.0


def test_cumsimps_short_inputs():
    assert np.allclose(cumsimps(np.array([1.0]), np.array([0.0])), [0.0])
    out = cumsimps(np.array([1.0, 3.0]), np.array([0.0, 1.0]))
    assert out[1] == pytest.approx(2.0)


def test_cumsimps_nonuniform_falls_back():
    x = np.array([0.0, 0.1, 0.3, 0.4])
    y = 2.0 * x
    assert np.allclose(cumsimps(y, x), cumtrapz(y, x))
