import math
import os
import sys

import numpy as np

sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from iflow.lib.dynamics import ObstaclePotential
from iflow.lib.grid import GridSpec, VectorField, sample_analytic_vector

# Reference run: 30 x 30 nodes on a 4pi box, 140 forward-Euler steps of
# 1.5e-3, obstacle potential 1/((x-7)^2 + (y-7)^2 - 0.5^2), projected
# once after the integration.

REFERENCE_N = 30
REFERENCE_LENGTH = 4 * math.pi
REFERENCE_DT = 1.5e-3
REFERENCE_STEPS = 140
REFERENCE_CENTER = (7.0, 7.0)
REFERENCE_RADIUS = 0.5
REFERENCE_TAU = 1.0
REFERENCE_EPSILON = 1e-6

# Kinetic energy density is compared on this ring around the obstacle.
ANNULUS = (0.5, 1.5)

def reference_grid() -> GridSpec:
  return GridSpec(REFERENCE_N, REFERENCE_LENGTH)

def reference_potential() -> ObstaclePotential:
  return ObstaclePotential(REFERENCE_CENTER, REFERENCE_RADIUS, REFERENCE_TAU, REFERENCE_EPSILON)

def reference_initial_condition(spec: GridSpec) -> VectorField:
  ''' u = -sin y cos x, v = sin y cos x (divergence cos(x - y), not zero). '''
  return sample_analytic_vector(
      lambda x, y: -np.sin(y) * np.cos(x),
      lambda x, y: np.sin(y) * np.cos(x),
      spec,
  )

def taylor_green(spec: GridSpec) -> VectorField:
  '''
  u = sin x cos y, v = -cos x sin y.
  Discretely divergence-free on any grid whose period is a multiple of 2pi.
  '''
  return sample_analytic_vector(
      lambda x, y: np.sin(x) * np.cos(y),
      lambda x, y: -np.cos(x) * np.sin(y),
      spec,
  )

INITIAL_CONDITIONS = {
    'paper':        reference_initial_condition,
    'taylor-green': taylor_green,
}
