import os
import sys

import numpy as np

sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from enum import Enum

from iflow.lib.grid import ScalarField, TensorField, VectorField, same_spec

# Stencils (periodic, node-centered):
#
#   D_x a(i,j)  = [a(i+1,j) - a(i-1,j)] / 2dx
#   D_y a(i,j)  = [a(i,j+1) - a(i,j-1)] / 2dx
#   lap a(i,j)  = [a(i+2,j) + a(i-2,j) + a(i,j+2) + a(i,j-2) - 4a(i,j)] / 4dx^2
#
# Advection takes either the narrow D_x, D_y above or their wide
# counterparts [a(i+2,j) - a(i-2,j)] / 4dx, which stay inside one parity
# class like the Laplacian.
#
# Axis 0 is i (x), axis 1 is j (y).
# np.roll(a, -k, axis)[i] == a[i+k]

class Stencil(Enum):
  NARROW = 'narrow'
  WIDE = 'wide'

def _shift(a: np.ndarray, k: int, axis: int) -> np.ndarray:
  return np.roll(a, -k, axis=axis)

def d_dx(a: np.ndarray, dx: float) -> np.ndarray:
  return (_shift(a, 1, 0) - _shift(a, -1, 0)) / (2 * dx)

def d_dy(a: np.ndarray, dx: float) -> np.ndarray:
  return (_shift(a, 1, 1) - _shift(a, -1, 1)) / (2 * dx)

def divergence(X: VectorField) -> ScalarField:
  u, v = X.u, X.v
  return ScalarField(X.spec, (
      _shift(u, 1, 0) - _shift(u, -1, 0) + _shift(v, 1, 1) - _shift(v, -1, 1)
  ) / (2 * X.spec.dx))

def gradient(phi: ScalarField) -> VectorField:
  dx = phi.spec.dx
  return VectorField(phi.spec, d_dx(phi.values, dx), d_dy(phi.values, dx))

def laplacian_values(a: np.ndarray, dx: float) -> np.ndarray:
  ''' Wide Laplacian on a raw array (used by the Krylov operator). '''
  return (
      _shift(a, 2, 0) + _shift(a, -2, 0) + _shift(a, 2, 1) + _shift(a, -2, 1) - 4 * a
  ) / (4 * dx * dx)

def laplacian(phi: ScalarField) -> ScalarField:
  ''' Equals divergence(gradient(phi)) on the periodic grid. '''
  return ScalarField(phi.spec, laplacian_values(phi.values, phi.spec.dx))

def jacobian(X: VectorField) -> TensorField:
  dx = X.spec.dx
  return TensorField(
      X.spec,
      d_dx(X.u, dx), d_dy(X.u, dx),
      d_dx(X.v, dx), d_dy(X.v, dx),
  )

def curl2d(X: VectorField) -> ScalarField:
  dx = X.spec.dx
  return ScalarField(X.spec, d_dx(X.v, dx) - d_dy(X.u, dx))

def advect(
    w: VectorField, X: VectorField | ScalarField, stencil: Stencil=Stencil.NARROW
) -> VectorField | ScalarField:
  ''' (w . grad) X, componentwise. '''
  spec = same_spec(w, X)
  dx = spec.dx
  k = 2 if stencil is Stencil.WIDE else 1

  def transport(a: np.ndarray) -> np.ndarray:
    ax = (_shift(a, k, 0) - _shift(a, -k, 0)) / (2 * k * dx)
    ay = (_shift(a, k, 1) - _shift(a, -k, 1)) / (2 * k * dx)
    return w.u * ax + w.v * ay

  if isinstance(X, ScalarField):
    return ScalarField(spec, transport(X.values))
  return VectorField(spec, transport(X.u), transport(X.v))
