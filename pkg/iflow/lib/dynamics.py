import logging
import os
import sys

import numpy as np

sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from typing import Callable

from iflow.lib.exception import IFlowDivergedStateError, IFlowFieldError, IFlowValidationError
from iflow.lib.grid import GridSpec, ScalarField, TensorField, VectorField, bilinear_interp
from iflow.lib.ops import Stencil, advect, curl2d, gradient, jacobian
from iflow.lib.poisson import PoissonConfig, helmholtz_project
from iflow.lib.utils import coerce_enum, require_real

logger = logging.getLogger(__name__)

# Modified Euler:  dv/dt + (v.grad)v = -grad(p - V),  div v = 0
# Impulse:         dz/dt + (z.grad)v + z x curl v - grad V + (v.grad)z = 0
#                  (Lamb form: dz/dt + grad(v.z) - v x curl z - grad V = 0)
# Flow map:        dphi/dt = v o phi
# Costate:         dpi/dt = -(Tv o phi)^T pi + grad V o phi
#
# In 2D, for a scalar curl w: a x (w e3) = (a2 w, -a1 w).

class ProjectionMode(Enum):
  PER_STEP = 'per-step'
  AT_END = 'at-end'

class TimeScheme(Enum):
  FORWARD_EULER = 'forward-euler'
  RK4 = 'rk4'

class ImpulseForm(Enum):
  ADVECTIVE = 'advective'
  LAMB = 'lamb'

@dataclass(frozen=True)
class ObstaclePotential:
  '''
  V(x, y) = tau / max((x - a)^2 + (y - b)^2 - r^2, eps)
  '''
  center: tuple[float, float] = (7.0, 7.0)
  radius: float = 0.5
  strength: float = 1.0
  regularization: float = 1e-6

  def __post_init__(self):
    try:
      a, b = self.center
    except (TypeError, ValueError):
      raise IFlowValidationError(f'Error: center must be a point (a, b): `{self.center}`.', key='center')
    object.__setattr__(self, 'center', (require_real(a, 'a'), require_real(b, 'b')))
    object.__setattr__(self, 'radius', require_real(self.radius, 'r', minimum=0))
    object.__setattr__(self, 'strength', require_real(self.strength, 'tau', minimum=0, strict=False))
    object.__setattr__(self, 'regularization', require_real(self.regularization, 'epsilon', minimum=0))

@dataclass(frozen=True, eq=False)
class SimState:
  t: float
  velocity: VectorField
  tracers: np.ndarray | None = None
  costates: np.ndarray | None = None
  impulse: VectorField | None = None
  gauge_k: ScalarField | None = None
  pressure_estimate: ScalarField | None = None

  def __post_init__(self):
    if not self.t >= 0:
      raise IFlowValidationError(f'Error: time must be non-negative: `{self.t}`.', key='t')
    if self.tracers is not None:
      object.__setattr__(self, 'tracers', _points(self.tracers, 'tracers'))
    if self.costates is not None:
      costates = _points(self.costates, 'costates')
      if self.tracers is None or costates.shape != self.tracers.shape:
        raise IFlowValidationError('Error: costates must be aligned with tracers.', key='costates')
      object.__setattr__(self, 'costates', costates)

@dataclass(frozen=True)
class StepConfig:
  dt: float = 1.5e-3
  projection_mode: ProjectionMode = ProjectionMode.PER_STEP
  time_scheme: TimeScheme = TimeScheme.FORWARD_EULER
  poisson: PoissonConfig = field(default_factory=PoissonConfig)
  blowup_speed: float = 1e6
  impulse_form: ImpulseForm = ImpulseForm.ADVECTIVE
  advection: Stencil = Stencil.NARROW

  def __post_init__(self):
    object.__setattr__(self, 'dt', require_real(self.dt, 'dt', minimum=0))
    object.__setattr__(self, 'blowup_speed', require_real(self.blowup_speed, 'blowup_speed', minimum=0))
    object.__setattr__(self, 'projection_mode', coerce_enum(self.projection_mode, ProjectionMode, 'projection_mode'))
    object.__setattr__(self, 'time_scheme', coerce_enum(self.time_scheme, TimeScheme, 'time_scheme'))
    object.__setattr__(self, 'impulse_form', coerce_enum(self.impulse_form, ImpulseForm, 'impulse_form'))
    object.__setattr__(self, 'advection', coerce_enum(self.advection, Stencil, 'advection'))

def _points(values, name: str) -> np.ndarray:
  arr = np.array(values, dtype=np.float64).reshape(-1, 2)
  if not np.isfinite(arr).all():
    raise IFlowValidationError(f'Error: non-finite `{name}`.', key=name)
  arr.flags.writeable = False
  return arr

# Potential

def _evaluate(P: ObstaclePotential, x, y) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
  a, b = P.center
  ox, oy = x - a, y - b
  raw = ox * ox + oy * oy - P.radius * P.radius
  # Floor convention: where raw < eps, V = tau/eps and grad V = 0.
  clamped = raw < P.regularization
  d = np.where(clamped, P.regularization, raw)
  scale = np.where(clamped, 0.0, -2.0 * P.strength / (d * d))
  return P.strength / d, scale * ox, scale * oy

def potential_eval(P: ObstaclePotential, p) -> float | np.ndarray:
  ''' V at one point (2,) or many (N, 2). '''
  p = np.asarray(p, dtype=np.float64)
  value, _, _ = _evaluate(P, p[..., 0], p[..., 1])
  return float(value) if p.ndim == 1 else value

def potential_grad(P: ObstaclePotential, p) -> np.ndarray:
  p = np.asarray(p, dtype=np.float64)
  _, gx, gy = _evaluate(P, p[..., 0], p[..., 1])
  return np.stack((gx, gy), axis=-1)

@lru_cache(maxsize=32)
def potential_field(P: ObstaclePotential | None, spec: GridSpec) -> tuple[ScalarField, VectorField]:
  '''
  V and grad V sampled at the nodes.
  A missing or zero-strength potential gives zero fields, so both
  share the unforced path.
  '''
  if P is None or P.strength == 0:
    return ScalarField.zeros(spec), VectorField.zeros(spec)
  X, Y = spec.coordinates()
  value, gx, gy = _evaluate(P, X, Y)
  return ScalarField(spec, value), VectorField(spec, gx, gy)

def _grad_at(P: ObstaclePotential | None, points: np.ndarray) -> np.ndarray:
  if P is None or P.strength == 0:
    return np.zeros_like(points)
  return potential_grad(P, points)

# Integrators

def _rk4(f: Callable, y, dt: float):
  k1 = f(y)
  k2 = f(y + 0.5 * dt * k1)
  k3 = f(y + 0.5 * dt * k2)
  k4 = f(y + dt * k3)
  return y + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)

def _advance(f: Callable, y, dt: float, scheme: TimeScheme):
  if scheme is TimeScheme.RK4:
    return _rk4(f, y, dt)
  return y + dt * f(y)

def _guarded(update: Callable[[], VectorField], cfg: StepConfig, t: float) -> VectorField:
  ''' Run 'update', turning overflow or a speed above the blow-up bound into DivergedState. '''
  try:
    with np.errstate(over='ignore', invalid='ignore'):
      result = update()
  except IFlowFieldError:
    raise IFlowDivergedStateError(
        f'Error: non-finite velocity at t = {t:.6g}.', max_speed=float('inf'), t=t
    )
  max_speed = float(np.max(result.speed()))
  if not max_speed <= cfg.blowup_speed:
    raise IFlowDivergedStateError(
        f'Error: max speed {max_speed:.3e} above blow-up bound {cfg.blowup_speed:.1e} at t = {t:.6g}.',
        max_speed=max_speed,
        t=t,
    )
  return result

def velocity_rhs(v: VectorField, gradV: VectorField, stencil: Stencil=Stencil.NARROW) -> VectorField:
  ''' -(v.grad)v + grad V; pressure is left to the projection. '''
  return -advect(v, v, stencil) + gradV

def impulse_rhs(
    z: VectorField,
    v: VectorField,
    gradV: VectorField,
    form: ImpulseForm=ImpulseForm.ADVECTIVE,
    stencil: Stencil=Stencil.NARROW,
) -> VectorField:
  if form is ImpulseForm.LAMB:
    w = curl2d(z).values
    vz = ScalarField(z.spec, v.u * z.u + v.v * z.v)
    return -gradient(vz) + VectorField(z.spec, v.v * w, -v.u * w) + gradV
  w = curl2d(v).values
  return -advect(z, v, stencil) - VectorField(z.spec, z.v * w, -z.u * w) + gradV - advect(v, z, stencil)

def advect_tracers(tracers, v: VectorField, dt: float, scheme: TimeScheme=TimeScheme.FORWARD_EULER) -> np.ndarray:
  ''' Flow-map step: positions move with v sampled bilinearly, then wrap. '''
  x = np.asarray(tracers, dtype=np.float64).reshape(-1, 2)
  moved = _advance(lambda p: bilinear_interp(v, p), x, dt, scheme)
  return v.spec.wrap(moved)

def step_costate(costates, tracers, Tv: TensorField, P: ObstaclePotential | None, dt: float) -> np.ndarray:
  pi = np.asarray(costates, dtype=np.float64).reshape(-1, 2)
  points = np.asarray(tracers, dtype=np.float64).reshape(-1, 2)
  J = bilinear_interp(Tv, points)
  # (J^T pi)_b = sum_a J_ab pi_a
  return pi + dt * (-np.einsum('nab,na->nb', J, pi) + _grad_at(P, points))

def init_costates_from_impulse(tracers, z: VectorField) -> np.ndarray:
  ''' At t = 0 the flow map is the identity, so pi = z at the tracers. '''
  return bilinear_interp(z, np.asarray(tracers, dtype=np.float64).reshape(-1, 2))

def _carry(s: SimState, v: VectorField, P: ObstaclePotential | None, cfg: StepConfig) -> dict:
  ''' Tracers and costates advanced with the pre-step velocity 'v'. '''
  if s.tracers is None:
    return {}
  moved = {'tracers': advect_tracers(s.tracers, v, cfg.dt, cfg.time_scheme)}
  if s.costates is not None:
    moved['costates'] = step_costate(s.costates, s.tracers, jacobian(v), P, cfg.dt)
  return moved

def step_velocity(s: SimState, cfg: StepConfig, P: ObstaclePotential | None) -> SimState:
  v = s.velocity
  _, gradV = potential_field(P, v.spec)
  t = s.t + cfg.dt

  advanced = _guarded(
      lambda: _advance(lambda w: velocity_rhs(w, gradV, cfg.advection), v, cfg.dt, cfg.time_scheme), cfg, t
  )

  changes = {'t': t, **_carry(s, v, P, cfg)}
  if cfg.projection_mode is ProjectionMode.PER_STEP:
    result = helmholtz_project(advanced, cfg.poisson)
    advanced = result.projected
    p_hat = result.potential * (1.0 / cfg.dt)
    changes['pressure_estimate'] = p_hat
    if s.gauge_k is not None:
      # dk/dt = p - |v|^2 / 2
      half_v2 = ScalarField(v.spec, 0.5 * (v.u * v.u + v.v * v.v))
      changes['gauge_k'] = s.gauge_k + cfg.dt * (p_hat - half_v2)
  changes['velocity'] = advanced

  logger.debug('step_velocity t=%.6g max speed %.6g', t, float(np.max(advanced.speed())))
  return replace(s, **changes)

def step_impulse(s: SimState, cfg: StepConfig, P: ObstaclePotential | None) -> SimState:
  '''
  One forward-Euler step of the impulse equation, then v = P(z).
  The projection potential is stored as the gauge k (z = v + grad k).
  '''
  if cfg.time_scheme is not TimeScheme.FORWARD_EULER:
    raise IFlowValidationError(
        f'Error: the impulse step is forward Euler only: `{cfg.time_scheme.value}`.', key='time_scheme'
    )
  if s.impulse is None:
    raise IFlowValidationError('Error: state carries no impulse field.', key='impulse')
  z, v = s.impulse, s.velocity
  _, gradV = potential_field(P, z.spec)
  t = s.t + cfg.dt

  advanced = _guarded(lambda: z + cfg.dt * impulse_rhs(z, v, gradV, cfg.impulse_form, cfg.advection), cfg, t)
  result = helmholtz_project(advanced, cfg.poisson)

  logger.debug('step_impulse t=%.6g residual %.3e', t, result.residual)
  return replace(
      s,
      t=t,
      impulse=advanced,
      velocity=result.projected,
      gauge_k=result.potential,
      **_carry(s, v, P, cfg),
  )

def initial_state(
    velocity: VectorField,
    tracers=None,
    costates=None,
    impulse: VectorField=None,
    gauge_k: ScalarField=None,
) -> SimState:
  return SimState(0.0, velocity, tracers=tracers, costates=costates, impulse=impulse, gauge_k=gauge_k)

def tracer_lattice(spec: GridSpec, m: int) -> np.ndarray:
  ''' m x m reference labels, spacing L/m from the origin; shape (m*m, 2), row-major. '''
  if m < 1:
    raise IFlowValidationError(f'Error: lattice size must be positive: `{m}`.', key='lattice_m')
  axis = np.arange(m) * (spec.length / m)
  X, Y = np.meshgrid(axis, axis, indexing='ij')
  return np.stack((X.ravel(), Y.ravel()), axis=-1)
