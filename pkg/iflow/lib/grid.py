import math
import os
import sys

import numpy as np

sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from dataclasses import dataclass
from typing import Callable

from iflow.lib.exception import IFlowFieldError, IFlowGridError

# Terminology:
# node: grid point (i, j), located at (i*dx, j*dx)
# seam: the identified border x = L ~ x = 0 (same for y)
# field: node samples over the whole periodic grid

MIN_POINTS = 6
NODE_SNAP = 1e-12

def wrap_index(i: int, n: int) -> int:
  ''' Periodic index in [0, n). '''
  if n <= 0:
    raise IFlowGridError(f'Error: grid size must be positive: `{n}`.')
  return i % n

@dataclass(frozen=True)
class GridSpec:
  n: int
  length: float = 4 * math.pi

  def __post_init__(self):
    if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)):
      raise IFlowGridError(f'Error: grid size must be an integer: `{self.n}`.')
    if self.n < MIN_POINTS:
      raise IFlowGridError(f'Error: grid size must be at least {MIN_POINTS}: `{self.n}`.')
    if self.n % 2:
      raise IFlowGridError(f'Error: grid size must be even: `{self.n}`.')
    if not (math.isfinite(self.length) and self.length > 0):
      raise IFlowGridError(f'Error: domain length must be positive: `{self.length}`.')
    object.__setattr__(self, 'n', int(self.n))
    object.__setattr__(self, 'length', float(self.length))

  @property
  def dx(self) -> float:
    return self.length / self.n

  def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
    ''' Node coordinates X[i, j] = i*dx, Y[i, j] = j*dx. '''
    axis = np.arange(self.n) * self.dx
    return np.meshgrid(axis, axis, indexing='ij')

  def nodes(self) -> np.ndarray:
    ''' All nodes as an (n*n, 2) array, row-major. '''
    X, Y = self.coordinates()
    return np.stack((X.ravel(), Y.ravel()), axis=-1)

  def wrap(self, points: np.ndarray) -> np.ndarray:
    return np.mod(points, self.length)

def same_spec(*fields) -> GridSpec:
  spec = fields[0].spec
  for f in fields[1:]:
    if f.spec != spec:
      raise IFlowGridError(f'Error: grid mismatch: `{spec}` vs `{f.spec}`.')
  return spec

def _node_array(values, spec: GridSpec, name: str) -> np.ndarray:
  arr = np.array(values, dtype=np.float64)
  if arr.shape != (spec.n, spec.n):
    raise IFlowGridError(f'Error: `{name}` has shape {arr.shape}, expected {(spec.n, spec.n)}.')
  bad = ~np.isfinite(arr)
  if bad.any():
    i, j = (int(k) for k in np.argwhere(bad)[0])
    raise IFlowFieldError(f'Error: non-finite `{name}` sample at node `({i}, {j})`.', node=(i, j))
  arr.flags.writeable = False
  return arr

@dataclass(frozen=True, eq=False)
class ScalarField:
  spec: GridSpec
  values: np.ndarray

  def __post_init__(self):
    object.__setattr__(self, 'values', _node_array(self.values, self.spec, 'values'))

  @classmethod
  def zeros(cls, spec: GridSpec) -> 'ScalarField':
    return cls(spec, np.zeros((spec.n, spec.n)))

  def __add__(self, other: 'ScalarField') -> 'ScalarField':
    return ScalarField(same_spec(self, other), self.values + other.values)

  def __sub__(self, other: 'ScalarField') -> 'ScalarField':
    return ScalarField(same_spec(self, other), self.values - other.values)

  def __mul__(self, a: float) -> 'ScalarField':
    return ScalarField(self.spec, a * self.values)

  __rmul__ = __mul__

  def __neg__(self) -> 'ScalarField':
    return ScalarField(self.spec, -self.values)

@dataclass(frozen=True, eq=False)
class VectorField:
  spec: GridSpec
  u: np.ndarray
  v: np.ndarray

  def __post_init__(self):
    object.__setattr__(self, 'u', _node_array(self.u, self.spec, 'u'))
    object.__setattr__(self, 'v', _node_array(self.v, self.spec, 'v'))

  @classmethod
  def zeros(cls, spec: GridSpec) -> 'VectorField':
    return cls(spec, np.zeros((spec.n, spec.n)), np.zeros((spec.n, spec.n)))

  def __add__(self, other: 'VectorField') -> 'VectorField':
    return VectorField(same_spec(self, other), self.u + other.u, self.v + other.v)

  def __sub__(self, other: 'VectorField') -> 'VectorField':
    return VectorField(same_spec(self, other), self.u - other.u, self.v - other.v)

  def __mul__(self, a: float) -> 'VectorField':
    return VectorField(self.spec, a * self.u, a * self.v)

  __rmul__ = __mul__

  def __neg__(self) -> 'VectorField':
    return VectorField(self.spec, -self.u, -self.v)

  def speed(self) -> np.ndarray:
    return np.hypot(self.u, self.v)

  def stacked(self) -> np.ndarray:
    ''' (n, n, 2) view of both components. '''
    return np.stack((self.u, self.v), axis=-1)

@dataclass(frozen=True, eq=False)
class TensorField:
  ''' Per-node Jacobian [[du/dx, du/dy], [dv/dx, dv/dy]]. '''
  spec: GridSpec
  ux: np.ndarray
  uy: np.ndarray
  vx: np.ndarray
  vy: np.ndarray

  def __post_init__(self):
    for name in ('ux', 'uy', 'vx', 'vy'):
      object.__setattr__(self, name, _node_array(getattr(self, name), self.spec, name))

  def matrices(self) -> np.ndarray:
    ''' (n, n, 2, 2) array of per-node matrices. '''
    return np.stack((
        np.stack((self.ux, self.uy), axis=-1),
        np.stack((self.vx, self.vy), axis=-1),
    ), axis=-2)

def _evaluate(f: Callable, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
  with np.errstate(all='ignore'):
    try:
      values = f(X, Y)
    except TypeError:
      # Scalar-only callables (math.sin & co).
      values = np.vectorize(f, otypes=[float])(X, Y)
  return np.broadcast_to(np.asarray(values, dtype=np.float64), X.shape)

def sample_analytic(f: Callable, spec: GridSpec) -> ScalarField:
  ''' values[i, j] = f(i*dx, j*dx) '''
  X, Y = spec.coordinates()
  return ScalarField(spec, _evaluate(f, X, Y))

def sample_analytic_vector(fu: Callable, fv: Callable, spec: GridSpec) -> VectorField:
  X, Y = spec.coordinates()
  return VectorField(spec, _evaluate(fu, X, Y), _evaluate(fv, X, Y))

def _cell(spec: GridSpec, p) -> tuple:
  s = np.mod(np.asarray(p, dtype=np.float64), spec.length) / spec.dx
  nearest = np.rint(s)
  s = np.where(np.abs(s - nearest) < NODE_SNAP, nearest, s)
  i0 = np.floor(s).astype(np.int64)
  frac = s - i0
  i0 %= spec.n
  i1 = (i0 + 1) % spec.n
  return i0[..., 0], i1[..., 0], frac[..., 0], i0[..., 1], i1[..., 1], frac[..., 1]

def _blend(a: np.ndarray, ix0, ix1, fx, iy0, iy1, fy) -> np.ndarray:
  return (
      (1 - fx) * (1 - fy) * a[ix0, iy0]
      + fx * (1 - fy) * a[ix1, iy0]
      + (1 - fx) * fy * a[ix0, iy1]
      + fx * fy * a[ix1, iy1]
  )

def bilinear_interp(field: ScalarField | VectorField | TensorField, p):
  '''
  Evaluate 'field' at point(s) 'p' ((2,) or (N, 2)), wrapping periodically.
  Scalar fields give a float (or (N,)), vector fields (2,) (or (N, 2)),
  tensor fields (2, 2) (or (N, 2, 2)).
  '''
  p = np.asarray(p, dtype=np.float64)
  if p.shape[-1] != 2:
    raise IFlowGridError(f'Error: points must have 2 coordinates, got shape `{p.shape}`.')
  cell = _cell(field.spec, p)

  if isinstance(field, ScalarField):
    out = _blend(field.values, *cell)
    return float(out) if p.ndim == 1 else out

  if isinstance(field, VectorField):
    return np.stack((_blend(field.u, *cell), _blend(field.v, *cell)), axis=-1)

  if isinstance(field, TensorField):
    row_u = np.stack((_blend(field.ux, *cell), _blend(field.uy, *cell)), axis=-1)
    row_v = np.stack((_blend(field.vx, *cell), _blend(field.vy, *cell)), axis=-1)
    return np.stack((row_u, row_v), axis=-2)

  raise IFlowGridError(f'Error: cannot interpolate `{type(field).__name__}`.')
