import math

import numpy as np
import pytest

from confsphere.errors import InvalidArgumentError
from confsphere.fields import (ball_average, bump_family, bump_test_function, constant,
                               coordinate, derivatives, gradients, integrate, intrinsic_gradient,
                               laplace_beltrami, lp_norm, parse_field, smooth_bump)
from confsphere.scenarios import bubble_field, spike_field
from confsphere.sphere import (basis_vector, sin_power_integral, sphere_volume,
                               uniform_sphere_sampling)


def _probes(n, count=300, seed=11):
    return uniform_sphere_sampling(n, count, seed).points


@pytest.mark.parametrize("n", [3, 4, 5])
def test_coordinate_laplacian_and_gradient(n):
    p = _probes(n)
    for i in range(n + 1):
        x = coordinate(n, i)
        lap = laplace_beltrami(x, p)
        assert np.max(np.abs(lap + n * p[:, i])) < 1e-5
        _, g, _ = derivatives(x, p, laplacian=False)
        exact = np.eye(n + 1)[i][None, :] - p[:, i:i + 1] * p
        assert np.max(np.abs(g - exact)) < 1e-6  # O(h^2) differencing


def test_quadratic_harmonic_eigenvalue():
    # x0^2 - 1/(n+1) is a degree-2 harmonic: eigenvalue -2(n+1)
    n = 3
    p = _probes(n)
    f = parse_field("x0^2 - 0.25", n)
    assert np.allclose(laplace_beltrami(f, p), -8 * (p[:, 0] ** 2 - 0.25), atol=1e-5)


def test_step_size_range():
    with pytest.raises(InvalidArgumentError):
        derivatives(coordinate(3, 0), _probes(3, 5), h=0.1)


def test_intrinsic_gradient_is_tangent():
    p = _probes(3, 50)
    g = intrinsic_gradient(parse_field("exp(x1) * x2", 3), p)
    assert np.max(np.abs(np.sum(g.components * p, axis=1))) < 1e-12


@pytest.mark.parametrize("field", [
    bump_test_function(basis_vector(3, 1), 0.9),
    spike_field(3, basis_vector(3, 0), 1.0, 0.5),
    bubble_field(3, 3.0),
])
def test_closed_form_gradients_match_differences(field):
    p = _probes(3, 400)
    closed = gradients(field, p)
    _, fd, _ = derivatives(field.__class__(field.func, 3), p, h=1e-4, laplacian=False)
    scale = max(1.0, np.abs(closed).max())
    assert np.max(np.abs(closed - fd)) / scale < 1e-5


def test_parse_field_matches_numpy():
    p = _probes(3, 100)
    f = parse_field("exp(0.3*x0) + sin(x1)*cos(x2) - sqrt(2 + x3) / 4 + pi", 3)
    exact = (np.exp(0.3 * p[:, 0]) + np.sin(p[:, 1]) * np.cos(p[:, 2])
             - np.sqrt(2 + p[:, 3]) / 4 + math.pi)
    assert np.allclose(f.evaluate(p), exact)


@pytest.mark.parametrize("bad", ["__import__('os')", "x4", "foo(x0)", "x0.real", "[1, 2]"])
def test_parse_field_rejects(bad):
    with pytest.raises(InvalidArgumentError):
        parse_field(bad, 3)


def test_field_algebra_and_scalar_call():
    x = coordinate(3, 0)
    f = 2 * x + 1
    e0 = basis_vector(3, 0)
    assert f(e0) == pytest.approx(3.0)
    assert (-f)(e0) == pytest.approx(-3.0)
    assert (f / 2)(e0) == pytest.approx(1.5)
    assert f.exp()(e0) == pytest.approx(math.exp(3))


def test_integrals_of_constants(product3):
    om = sphere_volume(3)
    assert integrate(constant(3, 2.0), product3) == pytest.approx(2 * om)
    assert lp_norm(constant(3, 2.0), product3, 4) == pytest.approx(2 * om ** 0.25)


def test_ball_average_of_coordinate():
    # avg over B_r(e0) of x0 = sin^n r / (n int_0^r sin^{n-1})
    n, r = 3, 0.7
    exact = math.sin(r) ** n / (n * sin_power_integral(n - 1, r))
    got = ball_average(coordinate(n, 0), basis_vector(n, 0), r, cap_resolution=8)
    assert got == pytest.approx(exact, rel=1e-10)


def test_bump_family_is_nonnegative_with_support():
    fam = bump_family(3)
    p = _probes(3, 500)
    for phi in fam:
        assert np.all(phi.evaluate(p) >= 0)
    b = bump_test_function(basis_vector(3, 0), 0.5)
    far = p[p[:, 0] < math.cos(0.5)]
    assert np.all(b.evaluate(far) == 0)
    assert smooth_bump(np.array([0.0]))[0] == pytest.approx(1.0)
