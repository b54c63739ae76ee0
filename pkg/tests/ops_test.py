import math
import os
import pytest
import sys

import numpy as np

sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from iflow.lib.grid import GridSpec, ScalarField, VectorField, sample_analytic, sample_analytic_vector
from iflow.lib.ops import Stencil, advect, curl2d, d_dx, d_dy, divergence, gradient, jacobian, laplacian
from iflow.lib.presets import reference_initial_condition

@pytest.fixture
def spec():
  return GridSpec(30)

@pytest.fixture
def rng():
  return np.random.default_rng(2024)

def sinc(h: float) -> float:
  return math.sin(h) / h

def random_scalar(spec, rng):
  return ScalarField(spec, rng.normal(size=(spec.n, spec.n)))

def random_vector(spec, rng):
  return VectorField(spec, rng.normal(size=(spec.n, spec.n)), rng.normal(size=(spec.n, spec.n)))

def interior(a: np.ndarray) -> np.ndarray:
  return a[1:-1, 1:-1]

def test_divergence_constant(spec):
    """A constant field has zero divergence, exactly."""
    X = sample_analytic_vector(lambda x, y: 1.0, lambda x, y: 2.0, spec)
    assert not divergence(X).values.any()

def test_divergence_sine(spec):
    """u = sin x, v = 0 gives cos(x) sin(dx)/dx."""
    X = sample_analytic_vector(lambda x, y: np.sin(x), lambda x, y: 0.0, spec)
    expected = sample_analytic(lambda x, y: np.cos(x) * sinc(spec.dx), spec)
    assert np.allclose(divergence(X).values, expected.values, atol=1e-13)

def test_divergence_reference_ic(spec):
    """The reference initial condition has divergence close to cos(x - y)."""
    div = divergence(reference_initial_condition(spec))
    exact = sample_analytic(lambda x, y: np.cos(x - y), spec)
    assert np.max(np.abs(div.values - exact.values)) < spec.dx ** 2

def test_gradient_constant(spec):
    """A constant potential has zero gradient."""
    g = gradient(sample_analytic(lambda x, y: 3.0, spec))
    assert not g.u.any() and not g.v.any()

def test_gradient_sine(spec):
    """phi = sin x gives ((sin dx/dx) cos x, 0)."""
    g = gradient(sample_analytic(lambda x, y: np.sin(x), spec))
    expected = sample_analytic(lambda x, y: np.cos(x) * sinc(spec.dx), spec)
    assert np.allclose(g.u, expected.values, atol=1e-13)
    assert np.allclose(g.v, 0.0, atol=1e-13)

def test_gradient_linear(spec):
    """phi = x is differentiated exactly away from the seam."""
    g = gradient(sample_analytic(lambda x, y: x, spec))
    assert np.allclose(interior(g.u), 1.0, atol=1e-12)
    assert np.allclose(interior(g.v), 0.0, atol=1e-12)

def test_laplacian_constant(spec):
    """The Laplacian of a constant vanishes."""
    assert not laplacian(sample_analytic(lambda x, y: -1.5, spec)).values.any()

def test_laplacian_sine(spec):
    """phi = sin x gives -(sin dx/dx)^2 sin x."""
    lap = laplacian(sample_analytic(lambda x, y: np.sin(x), spec))
    expected = sample_analytic(lambda x, y: -sinc(spec.dx) ** 2 * np.sin(x), spec)
    assert np.allclose(lap.values, expected.values, atol=1e-13)

def test_laplacian_is_divergence_of_gradient(spec, rng):
    """laplacian == divergence(gradient) nodewise on 50 random fields."""
    for _ in range(50):
        phi = random_scalar(spec, rng)
        scale = np.max(np.abs(phi.values)) / spec.dx ** 2
        gap = np.max(np.abs(laplacian(phi).values - divergence(gradient(phi)).values))
        assert gap <= 1e-12 * scale, f'discrepancy {gap}'

def test_jacobian_constant(spec):
    """A constant field has a zero Jacobian."""
    T = jacobian(sample_analytic_vector(lambda x, y: 1.0, lambda x, y: -4.0, spec))
    assert not T.matrices().any()

def test_jacobian_linear(spec):
    """u = x, v = -y gives diag(1, -1) away from the seam."""
    T = jacobian(sample_analytic_vector(lambda x, y: x, lambda x, y: -y, spec))
    assert np.allclose(interior(T.ux), 1.0, atol=1e-12)
    assert np.allclose(interior(T.uy), 0.0, atol=1e-12)
    assert np.allclose(interior(T.vx), 0.0, atol=1e-12)
    assert np.allclose(interior(T.vy), -1.0, atol=1e-12)

def test_jacobian_sine(spec):
    """u = sin x, v = 0: only du/dx is non zero."""
    T = jacobian(sample_analytic_vector(lambda x, y: np.sin(x), lambda x, y: 0.0, spec))
    expected = sample_analytic(lambda x, y: sinc(spec.dx) * np.cos(x), spec)
    assert np.allclose(T.ux, expected.values, atol=1e-13)
    assert not T.uy.any() and not T.vx.any() and not T.vy.any()

def test_curl_constant(spec):
    """A constant field is curl free."""
    assert not curl2d(sample_analytic_vector(lambda x, y: 2.0, lambda x, y: 1.0, spec)).values.any()

def test_curl_of_gradient(spec, rng):
    """Centered differences commute: curl(grad phi) vanishes."""
    phi = random_scalar(spec, rng)
    scale = np.max(np.abs(phi.values)) / spec.dx ** 2
    assert np.max(np.abs(curl2d(gradient(phi)).values)) <= 1e-13 * scale

def test_curl_rotation(spec):
    """u = -y, v = x has curl 2 away from the seam."""
    w = curl2d(sample_analytic_vector(lambda x, y: -y, lambda x, y: x, spec))
    assert np.allclose(interior(w.values), 2.0, atol=1e-12)

def test_divergence_of_stream_function_field(spec, rng):
    """(D_y psi, -D_x psi) is discretely divergence free."""
    psi = rng.normal(size=(30, 30))
    X = VectorField(spec, d_dy(psi, spec.dx), -d_dx(psi, spec.dx))
    scale = np.max(np.abs(psi)) / spec.dx ** 2
    assert np.max(np.abs(divergence(X).values)) <= 1e-13 * scale

def test_advect_trivial(spec, rng):
    """Advecting a constant, or advecting with w = 0, gives zero."""
    w = random_vector(spec, rng)
    const = sample_analytic_vector(lambda x, y: 1.0, lambda x, y: 5.0, spec)
    assert not np.abs(advect(w, const).u).any()
    zero = advect(VectorField.zeros(spec), random_vector(spec, rng))
    assert not np.abs(zero.u).any() and not np.abs(zero.v).any()

def test_advect_scalar(spec):
    """w = (1, 0) transports sin x at rate (sin dx/dx) cos x."""
    w = sample_analytic_vector(lambda x, y: 1.0, lambda x, y: 0.0, spec)
    out = advect(w, sample_analytic(lambda x, y: np.sin(x), spec))
    assert isinstance(out, ScalarField)
    expected = sample_analytic(lambda x, y: sinc(spec.dx) * np.cos(x), spec)
    assert np.allclose(out.values, expected.values, atol=1e-13)

def test_advect_wide_scalar(spec):
    """The wide stencil transports sin x at rate (sin 2dx/2dx) cos x."""
    w = sample_analytic_vector(lambda x, y: 1.0, lambda x, y: 0.0, spec)
    out = advect(w, sample_analytic(lambda x, y: np.sin(x), spec), Stencil.WIDE)
    expected = sample_analytic(lambda x, y: sinc(2 * spec.dx) * np.cos(x), spec)
    assert np.allclose(out.values, expected.values, atol=1e-13)

def test_advect_wide_keeps_parity_class(spec, rng):
    """A field living on one parity class is transported within it by the wide stencil only."""
    i, j = np.indices((spec.n, spec.n))
    mask = (i % 2 == 0) & (j % 2 == 1)
    X = ScalarField(spec, np.where(mask, rng.normal(size=(spec.n, spec.n)), 0.0))
    w = sample_analytic_vector(lambda x, y: 1.0, lambda x, y: -2.0, spec)
    wide = advect(w, X, Stencil.WIDE).values
    assert not wide[~mask].any()
    assert wide[mask].any()
    assert advect(w, X).values[~mask].any()

def test_operators_are_linear(spec, rng):
    """op(aX + bY) = a op(X) + b op(Y)."""
    X, Y = random_vector(spec, rng), random_vector(spec, rng)
    phi, psi = random_scalar(spec, rng), random_scalar(spec, rng)
    a, b = 1.7, -0.3
    assert np.allclose(divergence(a * X + b * Y).values, a * divergence(X).values + b * divergence(Y).values)
    assert np.allclose(curl2d(a * X + b * Y).values, a * curl2d(X).values + b * curl2d(Y).values)
    assert np.allclose(laplacian(a * phi + b * psi).values, a * laplacian(phi).values + b * laplacian(psi).values)
    g = gradient(a * phi + b * psi)
    assert np.allclose(g.u, a * gradient(phi).u + b * gradient(psi).u)

def _errors(n: int) -> dict[str, float]:
    spec = GridSpec(n)
    ic = reference_initial_condition(spec)
    u = ScalarField(spec, ic.u)
    div = divergence(ic).values - sample_analytic(lambda x, y: np.cos(x - y), spec).values
    g = gradient(u)
    grad = max(
        np.max(np.abs(g.u - sample_analytic(lambda x, y: np.sin(y) * np.sin(x), spec).values)),
        np.max(np.abs(g.v - sample_analytic(lambda x, y: -np.cos(y) * np.cos(x), spec).values)),
    )
    lap = laplacian(u).values - 2 * np.sin(spec.coordinates()[1]) * np.cos(spec.coordinates()[0])
    curl = curl2d(ic).values - sample_analytic(lambda x, y: np.cos(x + y), spec).values
    return {
        'divergence': float(np.max(np.abs(div))),
        'gradient': float(grad),
        'laplacian': float(np.max(np.abs(lap))),
        'curl': float(np.max(np.abs(curl))),
    }

def test_second_order_convergence():
    """Doubling n divides the max-norm error by about 4."""
    coarse, fine = _errors(30), _errors(60)
    for name in coarse:
        ratio = coarse[name] / fine[name]
        assert 3.2 <= ratio <= 4.8, f'{name}: ratio {ratio:.3f}'
