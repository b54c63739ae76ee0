import logging
import os
import sys

import numpy as np

sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from dataclasses import dataclass, field
from typing import Callable

from iflow.lib.exception import IFlowIdentityError, IFlowValidationError

logger = logging.getLogger(__name__)

# Pointwise identities for two smooth fields v, z on R^3, with
# Tv the Jacobian (Tv[a, b] = dv_a/dx_b):
#
#   1. (Tv)^T z = (z.grad)v + z x curl v
#   2. Tz(v) = (v.grad)z
#   3. (v.grad)z + (z.grad)v + z x curl v = grad(v.z) - v x curl z
#
# grad(v.z) = (Tv)^T z + (Tz)^T v  (product rule)

IDENTITY_TOLERANCE = 1e-10
ITEMS = (1, 2, 3)

@dataclass(frozen=True)
class AnalyticField3:
  ''' A 3-vector field with its exact Jacobian. '''
  value: Callable[[np.ndarray], np.ndarray]
  jacobian: Callable[[np.ndarray], np.ndarray]

  def __add__(self, other: 'AnalyticField3') -> 'AnalyticField3':
    return AnalyticField3(
        value=lambda p: self.value(p) + other.value(p),
        jacobian=lambda p: self.jacobian(p) + other.jacobian(p),
    )

  def check_consistency(self, points, h: float=1e-5, tol: float=1e-6) -> float:
    '''
    Compare the Jacobian with central differences of the value at each
    point; return the worst mismatch or raise IFlowIdentityError.
    '''
    worst = 0.0
    for p in np.atleast_2d(np.asarray(points, dtype=np.float64)):
      J = np.asarray(self.jacobian(p), dtype=np.float64)
      fd = np.empty((3, 3))
      for b in range(3):
        e = np.zeros(3)
        e[b] = h
        fd[:, b] = (self.value(p + e) - self.value(p - e)) / (2 * h)
      mismatch = float(np.max(np.abs(fd - J)))
      if mismatch > tol * max(1.0, float(np.max(np.abs(J)))):
        raise IFlowIdentityError(
            f'Error: Jacobian does not match the field at `{tuple(p)}`: mismatch {mismatch:.3e}.',
            point=tuple(float(x) for x in p),
            mismatch=mismatch,
        )
      worst = max(worst, mismatch)
    return worst

def constant_field(c) -> AnalyticField3:
  c = np.asarray(c, dtype=np.float64)
  return AnalyticField3(value=lambda p: c.copy(), jacobian=lambda p: np.zeros((3, 3)))

def linear_field(A, c=None) -> AnalyticField3:
  ''' v(p) = A p + c '''
  A = np.asarray(A, dtype=np.float64)
  c = np.zeros(3) if c is None else np.asarray(c, dtype=np.float64)
  return AnalyticField3(value=lambda p: A @ p + c, jacobian=lambda p: A.copy())

def trig_field(amplitude, wavevectors, phase=None) -> AnalyticField3:
  ''' v_a(p) = amplitude_a * sin(k_a . p + phase_a), k_a the rows of 'wavevectors'. '''
  amplitude = np.asarray(amplitude, dtype=np.float64)
  k = np.asarray(wavevectors, dtype=np.float64)
  phase = np.zeros(3) if phase is None else np.asarray(phase, dtype=np.float64)
  return AnalyticField3(
      value=lambda p: amplitude * np.sin(k @ p + phase),
      jacobian=lambda p: (amplitude * np.cos(k @ p + phase))[:, None] * k,
  )

def random_field(rng: np.random.Generator) -> AnalyticField3:
  ''' Linear part plus one trigonometric mode per component. '''
  linear = linear_field(rng.normal(size=(3, 3)), rng.normal(size=3))
  trig = trig_field(
      rng.normal(size=3),
      rng.integers(-3, 4, size=(3, 3)),
      rng.uniform(0.0, 2 * np.pi, size=3),
  )
  return linear + trig

def _curl(J: np.ndarray) -> np.ndarray:
  return np.array((J[2, 1] - J[1, 2], J[0, 2] - J[2, 0], J[1, 0] - J[0, 1]))

def identity_residual_vector(item: int, v: AnalyticField3, z: AnalyticField3, p) -> np.ndarray:
  ''' LHS - RHS of identity 'item' at point 'p'. '''
  p = np.asarray(p, dtype=np.float64)
  vp, zp = np.asarray(v.value(p), dtype=np.float64), np.asarray(z.value(p), dtype=np.float64)
  Jv, Jz = np.asarray(v.jacobian(p), dtype=np.float64), np.asarray(z.jacobian(p), dtype=np.float64)

  match item:
    case 1:
      return Jv.T @ zp - (Jv @ zp + np.cross(zp, _curl(Jv)))
    case 2:
      v_dot_grad_z = sum(vp[b] * Jz[:, b] for b in range(3))
      return Jz @ vp - v_dot_grad_z
    case 3:
      lhs = Jz @ vp + Jv @ zp + np.cross(zp, _curl(Jv))
      grad_vz = Jv.T @ zp + Jz.T @ vp
      return lhs - (grad_vz - np.cross(vp, _curl(Jz)))
    case _:
      raise IFlowValidationError(f'Error: `{item}`, unknown identity (expected 1, 2 or 3).', key='item')

def identity_residual(item: int, v: AnalyticField3, z: AnalyticField3, p) -> float:
  return float(np.linalg.norm(identity_residual_vector(item, v, z, p)))

@dataclass
class IdentityReport:
  trials: int
  seed: int | None
  max_residual: dict[int, float] = field(default_factory=lambda: {item: 0.0 for item in ITEMS})
  tolerance: float = IDENTITY_TOLERANCE

  @property
  def passed(self) -> bool:
    return all(r <= self.tolerance for r in self.max_residual.values())

  def to_dict(self) -> dict:
    return {
        'trials': self.trials,
        'seed': self.seed,
        'tolerance': self.tolerance,
        'max_residual': {str(k): r for k, r in self.max_residual.items()},
        'passed': self.passed,
    }

def check_identities(trials: int=1000, seed: int=None) -> IdentityReport:
  ''' Draw random field pairs and points; track the worst residual per identity. '''
  if trials < 1:
    raise IFlowValidationError(f'Error: trials must be positive: `{trials}`.', key='trials')
  rng = np.random.default_rng(seed)
  report = IdentityReport(trials=trials, seed=seed)
  for _ in range(trials):
    v, z = random_field(rng), random_field(rng)
    p = rng.uniform(-np.pi, np.pi, size=3)
    v.check_consistency(p)
    z.check_consistency(p)
    for item in ITEMS:
      report.max_residual[item] = max(report.max_residual[item], identity_residual(item, v, z, p))
  logger.debug('identities: %s', report.max_residual)
  return report
