import math
import os
import sys

import numpy as np

sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from dataclasses import asdict, dataclass

from iflow.lib.dynamics import ObstaclePotential, SimState, potential_eval
from iflow.lib.exception import IFlowDegenerateQuadError, IFlowValidationError
from iflow.lib.grid import ScalarField, VectorField, bilinear_interp, same_spec
from iflow.lib.ops import curl2d, divergence

MIN_QUAD_AREA = 1e-12

@dataclass(frozen=True)
class DiagnosticsRecord:
  step: int
  t: float
  kinetic_energy: float
  divergence_max: float
  divergence_l2: float
  cost_accumulator: float
  max_speed: float
  area_error_max: float | None = None

  def to_dict(self) -> dict:
    return asdict(self)

def inner_product(a: VectorField, b: VectorField) -> float:
  ''' Riemann sum of a.b over the nodes, weight dx^2. '''
  spec = same_spec(a, b)
  return float(np.sum(a.u * b.u + a.v * b.v) * spec.dx * spec.dx)

def kinetic_energy(v: VectorField) -> float:
  return 0.5 * inner_product(v, v)

def divergence_norms(v: VectorField) -> tuple[float, float]:
  ''' (max-norm, dx-weighted L2 norm) of the discrete divergence. '''
  d = divergence(v).values
  return float(np.max(np.abs(d))), float(math.sqrt(np.sum(d * d)) * v.spec.dx)

def cost_step(v: VectorField, tracers, P: ObstaclePotential | None, dt: float) -> float:
  '''
  One left-rectangle slice of the cost: dt * (KE + sum_i V(tracer_i) * L^2/N).
  Tracers carry equal weights since the flow preserves area.
  '''
  points = np.asarray(tracers, dtype=np.float64).reshape(-1, 2)
  if not len(points):
    raise IFlowValidationError('Error: cost quadrature needs at least one tracer.', key='tracers')
  potential = 0.0
  if P is not None and P.strength != 0:
    weight = v.spec.length ** 2 / len(points)
    potential = float(np.sum(potential_eval(P, points))) * weight
  return dt * (kinetic_energy(v) + potential)

def _lattice(points, name: str) -> np.ndarray:
  arr = np.asarray(points, dtype=np.float64)
  if arr.ndim == 2 and arr.shape[-1] == 2:
    m = math.isqrt(len(arr))
    if m * m != len(arr):
      raise IFlowValidationError(f'Error: `{name}` is not a square lattice: {len(arr)} points.', key=name)
    arr = arr.reshape(m, m, 2)
  if arr.ndim != 3 or arr.shape[0] != arr.shape[1] or arr.shape[2] != 2:
    raise IFlowValidationError(f'Error: `{name}` has shape {arr.shape}, expected (m, m, 2).', key=name)
  return arr

def _quads(lattice: np.ndarray) -> list[np.ndarray]:
  # Corners counter-clockwise: (a, b), (a+1, b), (a+1, b+1), (a, b+1).
  return [lattice[:-1, :-1], lattice[1:, :-1], lattice[1:, 1:], lattice[:-1, 1:]]

def _shoelace(corners: list[np.ndarray]) -> np.ndarray:
  origin = corners[0]
  rel = [c - origin for c in corners]
  twice = sum(
      rel[k][..., 0] * rel[(k + 1) % 4][..., 1] - rel[k][..., 1] * rel[(k + 1) % 4][..., 0]
      for k in range(4)
  )
  return 0.5 * np.abs(twice)

def _jumps(corners: list[np.ndarray], length: float) -> np.ndarray:
  mask = np.zeros(corners[0].shape[:-1], dtype=bool)
  for k in range(4):
    edge = np.abs(corners[(k + 1) % 4] - corners[k])
    mask |= (edge > 0.5 * length).any(axis=-1)
  return mask

def area_preservation_error(before, after, length: float=None) -> float:
  '''
  Max relative change of the shoelace area over the lattice quads.
  With 'length', quads torn by the periodic wrap are skipped.
  '''
  before, after = _lattice(before, 'before'), _lattice(after, 'after')
  if before.shape != after.shape:
    raise IFlowValidationError(f'Error: lattice shapes differ: {before.shape} vs {after.shape}.', key='after')
  if before.shape[0] < 2:
    return 0.0

  q_before, q_after = _quads(before), _quads(after)
  keep = np.ones(q_before[0].shape[:-1], dtype=bool)
  if length is not None:
    keep &= ~_jumps(q_before, length) & ~_jumps(q_after, length)

  area_before, area_after = _shoelace(q_before), _shoelace(q_after)
  degenerate = keep & (area_before < MIN_QUAD_AREA)
  if degenerate.any():
    a, b = (int(k) for k in np.argwhere(degenerate)[0])
    raise IFlowDegenerateQuadError(f'Error: degenerate lattice quad at `({a}, {b})`.', quad=(a, b))
  if not keep.any():
    return 0.0
  change = np.abs(area_after[keep] - area_before[keep]) / area_before[keep]
  return float(np.max(change))

def vorticity(v: VectorField) -> ScalarField:
  return curl2d(v)

def annulus_energy_density(v: VectorField, center: tuple[float, float], r_inner: float, r_outer: float) -> float:
  ''' Mean of |v|^2 / 2 over the nodes with r_inner < rho < r_outer. '''
  X, Y = v.spec.coordinates()
  rho = np.hypot(X - center[0], Y - center[1])
  ring = (rho > r_inner) & (rho < r_outer)
  if not ring.any():
    raise IFlowValidationError(
        f'Error: no node in annulus {r_inner} < rho < {r_outer} around `{center}`.', key='annulus'
    )
  return float(np.mean(0.5 * (v.u[ring] ** 2 + v.v[ring] ** 2)))

def record(step: int, state: SimState, cost_accumulator: float, area_error: float=None) -> DiagnosticsRecord:
  div_max, div_l2 = divergence_norms(state.velocity)
  return DiagnosticsRecord(
      step=step,
      t=state.t,
      kinetic_energy=kinetic_energy(state.velocity),
      divergence_max=div_max,
      divergence_l2=div_l2,
      cost_accumulator=cost_accumulator,
      max_speed=float(np.max(state.velocity.speed())),
      area_error_max=area_error,
  )

def relative_l2(a: VectorField, b: VectorField) -> float:
  ''' |a - b| / |b| in the inner-product norm. '''
  diff = a - b
  num = inner_product(diff, diff)
  den = inner_product(b, b)
  if den == 0:
    return 0.0 if num == 0 else math.inf
  return math.sqrt(num / den)

def costate_consistency(costates, tracers, z: VectorField) -> float:
  ''' max_i |pi_i - z(phi_i)| '''
  pi = np.asarray(costates, dtype=np.float64).reshape(-1, 2)
  if not len(pi):
    return 0.0
  sampled = bilinear_interp(z, np.asarray(tracers, dtype=np.float64).reshape(-1, 2))
  return float(np.max(np.linalg.norm(pi - sampled, axis=-1)))
