import logging
import os
import sys

import numpy as np

from scipy.sparse.linalg import LinearOperator, cg

sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from dataclasses import dataclass
from enum import Enum

from iflow.lib.datacache import IFlowCache
from iflow.lib.exception import IFlowNonConvergenceError
from iflow.lib.grid import GridSpec, ScalarField, VectorField
from iflow.lib.ops import divergence, gradient, laplacian_values
from iflow.lib.utils import coerce_enum, require_int, require_real

logger = logging.getLogger(__name__)

# The wide Laplacian only couples nodes whose indices share parity on
# each axis: on an even periodic grid it splits into 4 independent
# subgrids, and its nullspace is one constant per subgrid.
#
#   compatibility: rhs minus its per-class mean
#   uniqueness:    phi with zero per-class mean

MAX_RESTARTS = 5

class PoissonMethod(Enum):
  CG = 'cg'
  SPECTRAL = 'spectral'

class ParityClass(Enum):
  EE = (0, 0)
  EO = (0, 1)
  OE = (1, 0)
  OO = (1, 1)

def parity_class(i: int, j: int) -> ParityClass:
  return ParityClass((i % 2, j % 2))

@dataclass(frozen=True)
class PoissonConfig:
  tolerance: float = 1e-10
  max_iterations: int | None = None
  method: PoissonMethod = PoissonMethod.CG

  def __post_init__(self):
    require_real(self.tolerance, 'tolerance', minimum=0)
    if self.max_iterations is not None:
      require_int(self.max_iterations, 'max_iterations', minimum=1)
    object.__setattr__(self, 'method', coerce_enum(self.method, PoissonMethod, 'method'))

  def iteration_budget(self, n: int) -> int:
    return self.max_iterations if self.max_iterations is not None else 20 * n * n

@dataclass(frozen=True, eq=False)
class ProjectionResult:
  projected: VectorField
  potential: ScalarField
  residual: float
  iterations: int

def subtract_class_means(values: np.ndarray) -> np.ndarray:
  out = np.array(values, dtype=np.float64)
  for p, q in (c.value for c in ParityClass):
    block = out[p::2, q::2]
    block -= block.mean()
  return out

def _max_residual(x: np.ndarray, rhs: np.ndarray, dx: float) -> float:
  return float(np.max(np.abs(laplacian_values(x, dx) - rhs)))

def _solve_cg(rhs: np.ndarray, dx: float, tolerance: float, budget: int) -> tuple[np.ndarray, int]:
  n = rhs.shape[0]
  size = n * n

  # -lap is symmetric positive semidefinite.
  def matvec(x: np.ndarray) -> np.ndarray:
    return -laplacian_values(x.reshape(n, n), dx).ravel()

  A = LinearOperator(shape=(size, size), matvec=matvec, dtype=np.float64)
  b = -rhs.ravel()
  x = np.zeros(size)
  iterations = 0
  residual = _max_residual(x.reshape(n, n), rhs, dx)

  for _ in range(MAX_RESTARTS):
    if residual <= tolerance or iterations >= budget:
      break
    count = 0

    def tick(_xk):
      nonlocal count
      count += 1

    # ||r||_inf <= ||r||_2, so the L2 stop implies the max-norm bound.
    x, _info = cg(A, b, x0=x, rtol=0.0, atol=0.5 * tolerance, maxiter=budget - iterations, callback=tick)
    iterations += count
    previous, residual = residual, _max_residual(x.reshape(n, n), rhs, dx)
    if count == 0 or residual >= previous:
      break

  if residual > tolerance:
    raise IFlowNonConvergenceError(
        f'Error: Poisson solve did not converge: residual {residual:.3e} after {iterations} iterations.',
        residual=residual,
        iterations=iterations,
    )
  return x.reshape(n, n), iterations

def spectral_symbol(spec: GridSpec) -> tuple[np.ndarray, np.ndarray]:
  '''
  Eigenvalues of the wide Laplacian on Fourier mode (p, q):
  -(sin^2(2 pi p / n) + sin^2(2 pi q / n)) / dx^2,
  and the mask of the 4 null modes (p, q in {0, n/2}).
  '''
  cache = IFlowCache()
  key = ('laplacian-symbol', spec.n, spec.length)
  cached = cache.read(key)
  if cached is not None:
    return cached
  k = np.arange(spec.n)
  s2 = np.sin(2 * np.pi * k / spec.n) ** 2
  symbol = -(s2[:, None] + s2[None, :]) / spec.dx ** 2
  on_null = k % (spec.n // 2) == 0
  null = on_null[:, None] & on_null[None, :]
  symbol[null] = 1.0
  symbol.flags.writeable = False
  null.flags.writeable = False
  cache.write(key, (symbol, null))
  return symbol, null

def _solve_spectral(rhs: np.ndarray, spec: GridSpec) -> np.ndarray:
  symbol, null = spectral_symbol(spec)
  hat = np.fft.fft2(rhs) / symbol
  hat[null] = 0.0
  return np.fft.ifft2(hat).real

def poisson_solve_report(rhs: ScalarField, cfg: PoissonConfig=None) -> tuple[ScalarField, float, int]:
  ''' Solve lap(phi) = rhs - class means; return (phi, max-norm residual, iterations). '''
  cfg = cfg or PoissonConfig()
  spec = rhs.spec
  r = subtract_class_means(rhs.values)
  if not r.any():
    return ScalarField.zeros(spec), 0.0, 0

  if cfg.method is PoissonMethod.SPECTRAL:
    x, iterations = _solve_spectral(r, spec), 0
  else:
    x, iterations = _solve_cg(r, spec.dx, cfg.tolerance, cfg.iteration_budget(spec.n))

  x = subtract_class_means(x)
  residual = _max_residual(x, r, spec.dx)
  if residual > cfg.tolerance:
    raise IFlowNonConvergenceError(
        f'Error: Poisson solve ({cfg.method.value}) residual {residual:.3e} above tolerance {cfg.tolerance:.1e}.',
        residual=residual,
        iterations=iterations,
    )
  logger.debug('poisson %s: %d iterations, residual %.3e', cfg.method.value, iterations, residual)
  return ScalarField(spec, x), residual, iterations

def poisson_solve(rhs: ScalarField, cfg: PoissonConfig=None) -> ScalarField:
  return poisson_solve_report(rhs, cfg)[0]

def helmholtz_project(X: VectorField, cfg: PoissonConfig=None) -> ProjectionResult:
  ''' X0 = X - grad(phi) with lap(phi) = div(X). '''
  phi, residual, iterations = poisson_solve_report(divergence(X), cfg)
  return ProjectionResult(X - gradient(phi), phi, residual, iterations)
