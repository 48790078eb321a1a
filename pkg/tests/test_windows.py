from math import factorial, pi, sqrt

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from phaseless.windows import (
    GrowthEnvelope,
    WindowSpec,
    class_after_product,
    envelope_fit,
    eval_window,
    gaussian,
    hermite,
    hermite_poly,
    log_abs_window,
    polygaussian,
)

_T = sp.symbols("t", real=True)


def rodrigues(n):
    """h_n from (d/dt)^n exp(-2 pi t^2), normalised to unit L2 norm.

    The unit-norm constant is 2^(1/4)/sqrt(n!) * (-1/(2 sqrt(pi)))^n.
    """
    c = sp.Integer(2) ** sp.Rational(1, 4) / sp.sqrt(sp.factorial(n)) * (-1 / (2 * sp.sqrt(sp.pi))) ** n
    expr = c * sp.exp(sp.pi * _T ** 2) * sp.diff(sp.exp(-2 * sp.pi * _T ** 2), _T, n)
    return sp.lambdify(_T, sp.simplify(expr), "mpmath")


@pytest.mark.parametrize("n", range(11))
def test_recurrence_matches_rodrigues(n):
    h = rodrigues(n)
    for t in (-2.0, -1.0, 0.0, 0.7, 1.5):
        ref = complex(h(t))
        got = eval_window(hermite(n), t)
        assert abs(got - ref) <= 1e-10 * max(abs(ref), 1e-300) + 1e-300 or abs(ref) < 1e-15


def test_rodrigues_oracle_is_unit_norm():
    # the oracle's constant must itself give an orthonormal family
    for n in (0, 1, 4):
        c = sp.Integer(2) ** sp.Rational(1, 4) / sp.sqrt(sp.factorial(n)) * (-1 / (2 * sp.sqrt(sp.pi))) ** n
        f = c * sp.exp(sp.pi * _T ** 2) * sp.diff(sp.exp(-2 * sp.pi * _T ** 2), _T, n)
        assert float(sp.integrate(sp.simplify(f * f), (_T, -sp.oo, sp.oo))) == pytest.approx(1.0, abs=1e-12)


def test_hermite3_at_07():
    ref = complex(rodrigues(3)(0.7))
    assert eval_window(hermite(3), 0.7) == pytest.approx(ref, rel=1e-12)


def test_h0_at_zero():
    assert eval_window(hermite(0), 0.0) == pytest.approx(2 ** 0.25, abs=1e-15)
    assert eval_window(gaussian(pi), 0.0) == 1.0


def test_scalar_in_scalar_out():
    assert isinstance(eval_window(hermite(2), 0.3), complex)
    assert eval_window(hermite(2), np.zeros(4)).shape == (4,)


@pytest.mark.parametrize("n", range(11))
def test_orthonormal(n):
    t = np.linspace(-10, 10, 8001)
    dt = t[1] - t[0]
    hn = eval_window(hermite(n), t)
    assert np.sum(np.abs(hn) ** 2) * dt == pytest.approx(1.0, abs=1e-8)
    if n:
        hm = eval_window(hermite(n - 1), t)
        assert abs(np.sum(hn * np.conj(hm)) * dt) < 1e-10


def test_hermite_real_on_real_axis(rng):
    t = rng.uniform(-4, 4, 50)
    for n in range(8):
        assert np.max(np.abs(eval_window(hermite(n), t).imag)) == 0.0


def test_gaussian_modulus_exact(rng):
    g = 1.7
    z = rng.uniform(-3, 3, 100) + 1j * rng.uniform(-3, 3, 100)
    expect = np.exp(-g * z.real ** 2) * np.exp(g * z.imag ** 2)
    np.testing.assert_allclose(np.abs(eval_window(gaussian(g), z)), expect, rtol=1e-13)


def test_log_abs_matches_direct(rng):
    w = polygaussian([1, 0.5j, -0.25], 2.0)
    z = rng.uniform(-2, 2, 30) + 1j * rng.uniform(-2, 2, 30)
    np.testing.assert_allclose(log_abs_window(w, z), np.log(np.abs(eval_window(w, z))), rtol=1e-12, atol=1e-12)


def test_overflow_saturates():
    with np.errstate(all="raise"):
        v = eval_window(gaussian(pi), 40j)
    assert np.isinf(abs(v))


def test_extended_precision_agrees():
    t = np.linspace(-3, 3, 13)
    a = eval_window(hermite(5), t)
    b = eval_window(hermite(5), t, dtype=np.clongdouble)
    assert b.dtype == np.clongdouble
    np.testing.assert_allclose(b.astype(complex), a, rtol=1e-13, atol=1e-15)


def test_polygaussian_validation():
    with pytest.raises(ValueError):
        polygaussian([0, 0], 1.0)
    with pytest.raises(ValueError):
        polygaussian([], 1.0)
    with pytest.raises(ValueError):
        gaussian(0.0)
    with pytest.raises(ValueError):
        WindowSpec("hermite", gamma=2.0, n=1)
    with pytest.raises(ValueError):
        WindowSpec("boxcar")


def test_windowspec_json_roundtrip():
    for w in (gaussian(2.5), hermite(4), polygaussian([1, 2 - 1j], 0.8)):
        d = w.to_dict()
        assert set(d) == {"variant", "gamma", "n", "coeffs"}
        assert WindowSpec.from_dict(d) == w


def test_envelope_gaussian_bounded():
    fit = envelope_fit(gaussian(pi), pi, pi)
    assert fit.verdict == "bounded"
    assert fit.envelope.c == pytest.approx(1.0, abs=1e-12)


def test_envelope_hermite2():
    assert envelope_fit(hermite(2), pi - 0.5, pi + 0.5).verdict == "bounded"
    grow = envelope_fit(hermite(2), pi, pi)
    assert grow.verdict == "growing"
    assert grow.constants[0] < grow.constants[1] < grow.constants[2]


@pytest.mark.parametrize("frac", [0.1, 0.5])
@pytest.mark.parametrize("coeffs,gamma", [([1, 0, 2], 1.0), ([0.5, -1j, 0, 0.3], 2.0), ([1, 1, 1, 1, 1], pi)])
def test_envelope_polygaussian_bounded(coeffs, gamma, frac):
    eps = frac * gamma
    assert envelope_fit(polygaussian(coeffs, gamma), gamma - eps, gamma + eps).verdict == "bounded"


def test_envelope_preconditions():
    with pytest.raises(ValueError):
        envelope_fit(gaussian(), 0.0, 1.0)
    with pytest.raises(ValueError):
        envelope_fit(gaussian(), 1.0, -1.0)
    with pytest.raises(ValueError):
        envelope_fit(gaussian(), 1.0, 1.0, radius=3.0)


def test_class_after_product():
    env = class_after_product(GrowthEnvelope(pi, pi), 0.1)
    assert env.a == pytest.approx((pi - 0.1,))
    assert env.b == pytest.approx((pi + 0.1,))
    assert env.c is None
    env2 = class_after_product(GrowthEnvelope((1, 2), (3, 4)), 0.5)
    assert env2.a == (0.5, 1.5) and env2.b == (3.5, 4.5)
    with pytest.raises(ValueError):
        class_after_product(GrowthEnvelope(1, 2), 0)
    with pytest.raises(ValueError):
        class_after_product(GrowthEnvelope((1, 2), (3, 4)), 1.0)


def test_envelope_validation():
    with pytest.raises(ValueError):
        GrowthEnvelope((1, 2), (1,))
    with pytest.raises(ValueError):
        GrowthEnvelope(0, 1)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(0, 30), x=st.floats(-3, 3), y=st.floats(-3, 3))
def test_hermite_parity(n, x, y):
    z = complex(x, y)
    assert eval_window(hermite(n), -z) == pytest.approx((-1) ** n * eval_window(hermite(n), z), rel=1e-12, abs=1e-200)


def test_hermite_poly_leading_term():
    # leading coefficient of p_n in u = sqrt(2 pi) z is 2^{1/4} sqrt(2^n / n!)
    n = 6
    u = 1e3
    z = u / sqrt(2 * pi)
    lead = 2 ** 0.25 * sqrt(2 ** n / factorial(n))
    assert hermite_poly(n, z).real / u ** n == pytest.approx(lead, rel=1e-4)
