import json
import os
import sys

sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from dataclasses import dataclass, field, fields
from enum import Enum
from pathlib import Path
from typing import Any, Callable

from iflow.lib.dynamics import ImpulseForm, ObstaclePotential, ProjectionMode, StepConfig, TimeScheme
from iflow.lib.exception import IFlowParseError, IFlowValidationError
from iflow.lib.grid import MIN_POINTS, GridSpec
from iflow.lib.ops import Stencil
from iflow.lib.poisson import PoissonConfig, PoissonMethod
from iflow.lib.presets import (
    INITIAL_CONDITIONS,
    REFERENCE_CENTER,
    REFERENCE_DT,
    REFERENCE_EPSILON,
    REFERENCE_LENGTH,
    REFERENCE_N,
    REFERENCE_RADIUS,
    REFERENCE_STEPS,
    REFERENCE_TAU,
)
from iflow.lib.utils import coerce_enum, require_bool, require_int, require_real

# Run configuration, one JSON object per section:
#
# {
#   "grid":               {"n", "length"},
#   "time":               {"dt", "steps", "scheme", "impulse_form", "advection", "blowup_speed"},
#   "projection":         {"mode", "tolerance", "max_iterations", "project_initial", "method"},
#   "potential":          {"enabled", "a", "b", "r", "tau", "epsilon"},
#   "initial_condition":  {"preset"},            preset name or field file path
#   "tracers":            {"enabled", "lattice_m"},
#   "costates":           {"enabled"},
#   "impulse_crosscheck": {"enabled"},
#   "output":             {"directory", "snapshot_every", "formats"}
# }
#
# Missing keys take the reference-run defaults, unknown keys are errors.

FORMATS = ('iflow', 'pgm', 'csv')

@dataclass(frozen=True)
class GridConfig:
  n: int = REFERENCE_N
  length: float = REFERENCE_LENGTH

@dataclass(frozen=True)
class TimeConfig:
  dt: float = REFERENCE_DT
  steps: int = REFERENCE_STEPS
  scheme: TimeScheme = TimeScheme.FORWARD_EULER
  impulse_form: ImpulseForm = ImpulseForm.ADVECTIVE
  advection: Stencil = Stencil.WIDE
  blowup_speed: float = 1e6

@dataclass(frozen=True)
class ProjectionConfig:
  mode: ProjectionMode = ProjectionMode.AT_END
  tolerance: float = 1e-10
  max_iterations: int | None = None
  project_initial: bool = False
  method: PoissonMethod = PoissonMethod.CG

@dataclass(frozen=True)
class PotentialConfig:
  enabled: bool = True
  a: float = REFERENCE_CENTER[0]
  b: float = REFERENCE_CENTER[1]
  r: float = REFERENCE_RADIUS
  tau: float = REFERENCE_TAU
  epsilon: float = REFERENCE_EPSILON

@dataclass(frozen=True)
class InitialConditionConfig:
  preset: str = 'paper'

  @property
  def is_file(self) -> bool:
    return self.preset not in INITIAL_CONDITIONS

@dataclass(frozen=True)
class TracerConfig:
  enabled: bool = True
  lattice_m: int = REFERENCE_N

@dataclass(frozen=True)
class CostateConfig:
  enabled: bool = False

@dataclass(frozen=True)
class CrosscheckConfig:
  enabled: bool = False

@dataclass(frozen=True)
class OutputConfig:
  directory: str = 'iflow-out'
  snapshot_every: int = 20
  formats: tuple[str, ...] = ('iflow', 'pgm')

@dataclass(frozen=True)
class RunConfig:
  grid: GridConfig = field(default_factory=GridConfig)
  time: TimeConfig = field(default_factory=TimeConfig)
  projection: ProjectionConfig = field(default_factory=ProjectionConfig)
  potential: PotentialConfig = field(default_factory=PotentialConfig)
  initial_condition: InitialConditionConfig = field(default_factory=InitialConditionConfig)
  tracers: TracerConfig = field(default_factory=TracerConfig)
  costates: CostateConfig = field(default_factory=CostateConfig)
  impulse_crosscheck: CrosscheckConfig = field(default_factory=CrosscheckConfig)
  output: OutputConfig = field(default_factory=OutputConfig)

  def grid_spec(self) -> GridSpec:
    return GridSpec(self.grid.n, self.grid.length)

  def poisson_config(self) -> PoissonConfig:
    return PoissonConfig(self.projection.tolerance, self.projection.max_iterations, self.projection.method)

  def step_config(self) -> StepConfig:
    return StepConfig(
        dt=self.time.dt,
        projection_mode=self.projection.mode,
        time_scheme=self.time.scheme,
        poisson=self.poisson_config(),
        blowup_speed=self.time.blowup_speed,
        impulse_form=self.time.impulse_form,
        advection=self.time.advection,
    )

  def obstacle(self) -> ObstaclePotential | None:
    ''' None when the potential is disabled. '''
    p = self.potential
    if not p.enabled:
      return None
    return ObstaclePotential((p.a, p.b), p.r, p.tau, p.epsilon)

# Value checkers: (value, dotted key) -> value

def _real(minimum: float=None, strict: bool=True) -> Callable:
  return lambda value, key: require_real(value, key, minimum, strict)

def _int(minimum: int=None) -> Callable:
  return lambda value, key: require_int(value, key, minimum)

def _optional_int(minimum: int) -> Callable:
  return lambda value, key: None if value is None else require_int(value, key, minimum)

def _enum(enum: type[Enum]) -> Callable:
  def check(value, key):
    if not isinstance(value, str):
      raise IFlowValidationError(f'Error: `{key}` must be a string: `{value}`.', key=key)
    return coerce_enum(value, enum, key)
  return check

def _grid_n(value, key):
  n = require_int(value, key, MIN_POINTS)
  if n % 2:
    raise IFlowValidationError(f'Error: `{key}` must be even: `{n}`.', key=key)
  return n

def _directory(value, key):
  if not isinstance(value, str) or not value:
    raise IFlowValidationError(f'Error: `{key}` must be a non-empty string: `{value}`.', key=key)
  return value

def _formats(value, key):
  if not isinstance(value, list):
    raise IFlowValidationError(f'Error: `{key}` must be a list: `{value}`.', key=key)
  for fmt in value:
    if fmt not in FORMATS:
      raise IFlowValidationError(
          f'Error: `{fmt}`, unknown output format.\nAvailable formats: {", ".join(FORMATS)}', key=key
      )
  if len(set(value)) != len(value):
    raise IFlowValidationError(f'Error: duplicate entries in `{key}`: `{value}`.', key=key)
  return tuple(value)

SCHEMA: dict[str, tuple[type, dict[str, Callable]]] = {
    'grid': (GridConfig, {
        'n':      _grid_n,
        'length': _real(0),
    }),
    'time': (TimeConfig, {
        'dt':           _real(0),
        'steps':        _int(0),
        'scheme':       _enum(TimeScheme),
        'impulse_form': _enum(ImpulseForm),
        'advection':    _enum(Stencil),
        'blowup_speed': _real(0),
    }),
    'projection': (ProjectionConfig, {
        'mode':            _enum(ProjectionMode),
        'tolerance':       _real(0),
        'max_iterations':  _optional_int(1),
        'project_initial': require_bool,
        'method':          _enum(PoissonMethod),
    }),
    'potential': (PotentialConfig, {
        'enabled': require_bool,
        'a':       _real(),
        'b':       _real(),
        'r':       _real(0),
        'tau':     _real(0, strict=False),
        'epsilon': _real(0),
    }),
    'initial_condition': (InitialConditionConfig, {
        'preset': _directory,
    }),
    'tracers': (TracerConfig, {
        'enabled':   require_bool,
        'lattice_m': _int(2),
    }),
    'costates': (CostateConfig, {
        'enabled': require_bool,
    }),
    'impulse_crosscheck': (CrosscheckConfig, {
        'enabled': require_bool,
    }),
    'output': (OutputConfig, {
        'directory':      _directory,
        'snapshot_every': _int(1),
        'formats':        _formats,
    }),
}

def _section(name: str, doc: Any) -> Any:
  cls, checkers = SCHEMA[name]
  if not isinstance(doc, dict):
    raise IFlowValidationError(f'Error: `{name}` must be an object: `{doc}`.', key=name)
  values = {}
  for key, value in doc.items():
    if key not in checkers:
      raise IFlowValidationError(f'Error: `{name}.{key}`, unknown key.', key=f'{name}.{key}')
    values[key] = checkers[key](value, f'{name}.{key}')
  return cls(**values)

def _resolve_preset(ic: InitialConditionConfig, base_dir: str | None) -> InitialConditionConfig:
  if not ic.is_file:
    return ic
  path = Path(ic.preset)
  if base_dir is not None and not path.is_absolute():
    path = Path(base_dir) / path
  if not path.is_file():
    raise IFlowValidationError(
        f'Error: `{ic.preset}`, no such preset or field file.'
        f'\nAvailable presets: {", ".join(INITIAL_CONDITIONS)}',
        key='initial_condition.preset'
    )
  return InitialConditionConfig(str(path))

def parse_config(text: str, base_dir: str=None) -> RunConfig:
  '''
  Parse a JSON run configuration.
  Relative field-file paths are resolved against 'base_dir' when given.
  '''
  try:
    doc = json.loads(text)
  except json.JSONDecodeError as e:
    raise IFlowParseError(
        f'Error: malformed JSON: {e.msg} (line {e.lineno}, column {e.colno}).',
        line=e.lineno,
        column=e.colno,
    )
  if not isinstance(doc, dict):
    raise IFlowValidationError('Error: configuration must be a JSON object.', key='')

  for name in doc:
    if name not in SCHEMA:
      raise IFlowValidationError(f'Error: `{name}`, unknown section.', key=name)

  sections = {name: _section(name, doc.get(name, {})) for name in SCHEMA}
  sections['initial_condition'] = _resolve_preset(sections['initial_condition'], base_dir)

  cfg = RunConfig(**sections)
  if cfg.costates.enabled and not cfg.tracers.enabled:
    raise IFlowValidationError('Error: costates ride on tracers: enable `tracers` too.', key='costates.enabled')
  return cfg

def load_config(path: str) -> RunConfig:
  with open(path, 'r', encoding='utf-8') as f:
    text = f.read()
  return parse_config(text, base_dir=os.path.dirname(os.path.abspath(path)))

def config_to_dict(cfg: RunConfig) -> dict:
  ''' JSON echo of 'cfg'; parse_config(json.dumps(...)) gives 'cfg' back. '''
  out = {}
  for section in fields(cfg):
    values = getattr(cfg, section.name)
    out[section.name] = {}
    for f in fields(values):
      value = getattr(values, f.name)
      if isinstance(value, Enum):
        value = value.value
      elif isinstance(value, tuple):
        value = list(value)
      out[section.name][f.name] = value
  return out
