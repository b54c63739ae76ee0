import logging
import os
import sys

import numpy as np

sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from dataclasses import replace
from pathlib import Path

from iflow.lib.diagnostics import (
    DiagnosticsRecord,
    annulus_energy_density,
    area_preservation_error,
    cost_step,
    costate_consistency,
    divergence_norms,
    record,
    relative_l2,
    vorticity,
)
from iflow.lib.dynamics import (
    ProjectionMode,
    SimState,
    TimeScheme,
    init_costates_from_impulse,
    initial_state,
    step_impulse,
    step_velocity,
    tracer_lattice,
)
from iflow.lib.exception import IFlowFormatError, IFlowNumericalError, IFlowValidationError
from iflow.lib.grid import ScalarField, VectorField
from iflow.lib.identities import IdentityReport, check_identities
from iflow.lib.io import JsonlWriter, read_field, write_csv, write_divergence_image, write_field, write_json
from iflow.lib.parser import RunConfig, config_to_dict, load_config
from iflow.lib.poisson import PoissonConfig, helmholtz_project
from iflow.lib.presets import ANNULUS, INITIAL_CONDITIONS
from iflow.lib.utils import performance_measurement, spinner

logger = logging.getLogger(__name__)

OUT_DIR_ENV = 'IFLOW_OUT_DIR'
DEMO_DIR = 'paper-demo'

class IFlow:
  ''' Command facade shared by the CLI and library users. '''
  def __init__(self):
    self._perf_info = {}
    self.progress = not os.getenv('__IFLOW_QUIET__') and sys.stderr.isatty()

    self.commands = {
        'check-identities': self.check_identities,
        'demo-paper':       self.demo_paper,
        'project':          self.project,
        'run':              self.run_file,
    }

  # run

  def run_file(self, path: str, out_dir: str=None) -> dict:
    return self.run(load_config(path), out_dir=out_dir)

  def run(self, cfg: RunConfig, out_dir: str=None) -> dict:
    '''
    Integrate 'cfg' and write its artifacts.
    Output directory: 'out_dir', else $IFLOW_OUT_DIR, else output.directory.
    Numerical failures leave an error.json behind and propagate.
    '''
    directory = out_dir or os.getenv(OUT_DIR_ENV) or cfg.output.directory
    cfg = replace(cfg, output=replace(cfg.output, directory=directory))
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)

    logger.info('run: %d x %d grid, %d steps of %g -> %s', cfg.grid.n, cfg.grid.n, cfg.time.steps, cfg.time.dt, out)
    try:
      summary = self._run(cfg, out)
    except IFlowNumericalError as e:
      write_json(error_document(e), out / 'error.json')
      raise
    logger.info('run: done in %.3fs', summary['wall_time'])
    return summary

  def _initial_velocity(self, cfg: RunConfig) -> VectorField:
    spec = cfg.grid_spec()
    ic = cfg.initial_condition
    if not ic.is_file:
      return INITIAL_CONDITIONS[ic.preset](spec)
    field = read_field(ic.preset)
    if not isinstance(field, VectorField) or field.spec != spec:
      raise IFlowValidationError(
          f'Error: `{ic.preset}` must hold a vector field on the configured grid ({spec}).',
          key='initial_condition.preset'
      )
    return field

  def _run(self, cfg: RunConfig, out: Path) -> dict:
    spec, step_cfg, P = cfg.grid_spec(), cfg.step_config(), cfg.obstacle()

    v0 = self._initial_velocity(cfg)
    if cfg.projection.project_initial:
      v0 = helmholtz_project(v0, step_cfg.poisson).projected
    elif step_cfg.projection_mode is ProjectionMode.PER_STEP:
      logger.warning('per-step projection with a non-projected initial condition')

    gauge = None
    if step_cfg.projection_mode is ProjectionMode.PER_STEP:
      gauge = ScalarField.zeros(spec)
    else:
      logger.warning('gauge integration skipped in at-end mode')

    lattice = tracer_lattice(spec, cfg.tracers.lattice_m) if cfg.tracers.enabled else None
    # At t = 0, z = v (k = 0), so pi = v at the reference labels.
    costates = init_costates_from_impulse(lattice, v0) if cfg.costates.enabled else None
    crosscheck = cfg.impulse_crosscheck.enabled

    state = initial_state(v0, lattice, None if crosscheck else costates, gauge_k=gauge)
    impulse = None
    if crosscheck:
      impulse = initial_state(v0, lattice, costates, impulse=v0)

    self._write_snapshot(cfg, out, 0, state.velocity)
    if 'pgm' in cfg.output.formats:
      write_divergence_image(state.velocity, out / 'divergence_initial.pgm')

    state, impulse, last = self._integrate(cfg, out, state, impulse, lattice)

    if 'pgm' in cfg.output.formats:
      write_divergence_image(state.velocity, out / 'divergence_final.pgm')

    final = helmholtz_project(state.velocity, step_cfg.poisson)
    write_field(final.projected, out / 'final_projected.iflow')
    div_max, div_l2 = divergence_norms(final.projected)

    center = (cfg.potential.a, cfg.potential.b)
    summary = {
        'config': config_to_dict(cfg),
        'steps': cfg.time.steps,
        't': state.t,
        'final': last.to_dict(),
        'final_projected': {
            'divergence_max': div_max,
            'divergence_l2': div_l2,
            'max_speed': float(np.max(final.projected.speed())),
            'residual': final.residual,
            'iterations': final.iterations,
        },
        'annulus_energy_density': {
            'center': list(center),
            'r_inner': ANNULUS[0],
            'r_outer': ANNULUS[1],
            'initial': _annulus(v0, center),
            'final': _annulus(state.velocity, center),
        },
        'wall_time': self._perf_info.get('Integrate', 0.0),
    }
    if impulse is not None:
      summary['impulse_crosscheck'] = {
          'relative_l2': relative_l2(impulse.velocity, state.velocity),
          'costate_consistency': (
              costate_consistency(impulse.costates, impulse.tracers, impulse.impulse)
              if impulse.costates is not None else None
          ),
      }
    write_json(summary, out / 'summary.json')
    logger.info(
        'final: energy %.6g, max speed %.6g, projected divergence %.3e',
        last.kinetic_energy, summary['final_projected']['max_speed'], div_max,
    )
    return summary

  @performance_measurement(message='Integrate')
  def _integrate(
      self, cfg: RunConfig, out: Path, state: SimState, impulse: SimState | None, lattice: np.ndarray | None
  ) -> tuple[SimState, SimState | None, DiagnosticsRecord]:
    spec, step_cfg, P = cfg.grid_spec(), cfg.step_config(), cfg.obstacle()
    impulse_cfg = replace(step_cfg, projection_mode=ProjectionMode.PER_STEP, time_scheme=TimeScheme.FORWARD_EULER)
    if impulse is not None and step_cfg.time_scheme is not TimeScheme.FORWARD_EULER:
      logger.warning('impulse cross-check runs forward Euler, not %s', step_cfg.time_scheme.value)
    # Without tracers the potential term falls back to node quadrature.
    nodes = spec.nodes() if lattice is None else None
    steps = cfg.time.steps
    cost = 0.0
    spin = iter(spinner())

    with JsonlWriter(out / 'diagnostics.jsonl') as log:
      last = record(0, state, cost, 0.0 if lattice is not None else None)
      log.write(last.to_dict())
      for k in range(1, steps + 1):
        cost += cost_step(state.velocity, state.tracers if lattice is not None else nodes, P, step_cfg.dt)
        state = step_velocity(state, step_cfg, P)
        if impulse is not None:
          impulse = step_impulse(impulse, impulse_cfg, P)

        area = None
        if lattice is not None:
          area = area_preservation_error(lattice, state.tracers, length=spec.length)
        last = record(k, state, cost, area)
        log.write(last.to_dict())

        if k % cfg.output.snapshot_every == 0 or k == steps:
          self._write_snapshot(cfg, out, k, state.velocity)
        if self.progress:
          print(f'\r{next(spin)} step {k}/{steps}', end='', file=sys.stderr)
    if self.progress and steps:
      print(file=sys.stderr)
    return state, impulse, last

  def _write_snapshot(self, cfg: RunConfig, out: Path, step: int, v: VectorField) -> None:
    formats = cfg.output.formats
    if 'iflow' in formats:
      write_field(v, out / f'velocity_{step:05d}.iflow')
      write_field(vorticity(v), out / f'vorticity_{step:05d}.iflow')
    if 'csv' in formats:
      write_csv(v, out / f'velocity_{step:05d}.csv')
    logger.info('snapshot %d written', step)

  # project

  def project(
      self,
      path: str,
      out: str=None,
      csv: str=None,
      method: str=None,
      tolerance: float=None,
  ) -> dict:
    ''' Project the vector field stored at 'path'; write <stem>.projected.iflow unless 'out' is given. '''
    field = read_field(path)
    if not isinstance(field, VectorField):
      raise IFlowFormatError(f'{path}: Error: expected a vector field.')
    defaults = PoissonConfig()
    cfg = PoissonConfig(
        tolerance if tolerance is not None else defaults.tolerance,
        None,
        method if method is not None else defaults.method,
    )
    result = helmholtz_project(field, cfg)

    source = Path(path)
    target = Path(out) if out else source.with_name(f'{source.stem}.projected.iflow')
    write_field(result.projected, target)
    if csv:
      write_csv(result.projected, csv)

    div_max, _ = divergence_norms(result.projected)
    return {
        'output': str(target),
        'divergence_max': div_max,
        'max_norm': float(np.max(np.abs(result.projected.stacked()))),
        'residual': result.residual,
        'iterations': result.iterations,
    }

  # check-identities

  def check_identities(self, trials: int=1000, seed: int=None) -> IdentityReport:
    return check_identities(trials, seed)

  # demo-paper

  def demo_paper(self, out: str=None) -> dict:
    ''' The reference run: every RunConfig default, written to 'paper-demo' unless redirected. '''
    cfg = RunConfig()
    return self.run(replace(cfg, output=replace(cfg.output, directory=DEMO_DIR)), out_dir=out)

def _annulus(v: VectorField, center: tuple[float, float]) -> float | None:
  try:
    return annulus_energy_density(v, center, *ANNULUS)
  except IFlowValidationError:
    return None

def error_document(e: IFlowNumericalError) -> dict:
  return {'error': type(e).__name__, 'message': str(e), **e.details()}
