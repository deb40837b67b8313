import math

import numpy as np
import pytest

from steklov_lab import tracelab
from steklov_lab.errors import PreconditionError


def test_zero_symbol_gives_zero_return_operator():
    res = tracelab.return_operator_lab(lambda x: 0 * x, N=128)
    assert np.all(res.empirical == 0) and res.deviation == 0.0


def test_constant_symbol_closed_form():
    # b = beta makes B diagonal, so W e_k = (exp(i t beta / |k|) - 1) e_k exactly
    beta, t, N = 0.8, 2.0, 128
    res = tracelab.return_operator_lab(lambda x: beta + 0 * x, N=N, t=t)
    zero = np.nonzero(res.offsets == 0)[0][0]
    exact = np.exp(1j * t * beta / np.abs(res.freqs)) - 1
    np.testing.assert_allclose(res.empirical[:, zero], exact, atol=1e-12)
    np.testing.assert_allclose(res.predicted[:, zero], 1j * t * beta / np.abs(res.freqs), atol=1e-14)
    want = np.abs(exact - 1j * t * beta / np.abs(res.freqs)) / (t * beta / np.abs(res.freqs))
    np.testing.assert_allclose(res.deviations, want, rtol=1e-9)


@pytest.mark.parametrize("k_order", [1, 2])
def test_column_norms_decay_like_symbol_order(k_order):
    res = tracelab.return_operator_lab(np.cos, k_order=k_order, N=256)
    assert res.decay_exponent == pytest.approx(-k_order, abs=0.05)


def test_symbol_on_grid_is_consistent_with_coefficients():
    res = tracelab.return_operator_lab(np.cos, N=128)
    x = np.linspace(0, 2 * math.pi, 7)
    emp = res.symbol_on_grid(x)
    pred = res.symbol_on_grid(x, "predicted")
    assert emp.shape == (res.freqs.size, 7)
    assert np.max(np.abs(emp - pred)) < 0.1 * np.max(np.abs(pred))


def test_deviation_halves_when_window_doubles():
    d = [tracelab.return_operator_lab(np.sin, N=N).deviation for N in (128, 256)]
    assert 0.35 < d[1] / d[0] < 0.65


def test_preconditions():
    with pytest.raises(PreconditionError):
        tracelab.return_operator_lab(np.cos, N=130 + 1)
    with pytest.raises(PreconditionError):
        tracelab.return_operator_lab(np.cos, N=2048)
    with pytest.raises(PreconditionError):
        tracelab.return_operator_lab(np.cos, N=128, window=(10, 64))
    with pytest.raises(PreconditionError):
        tracelab.return_operator_lab(lambda x: 30 * np.cos(x), N=128)
    with pytest.raises(PreconditionError):
        tracelab.return_operator_lab(np.cos, k_order=0)
