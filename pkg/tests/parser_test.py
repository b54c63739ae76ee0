import json
import math
import os
import pytest
import sys

sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from iflow.lib.dynamics import ImpulseForm, ObstaclePotential, ProjectionMode, TimeScheme
from iflow.lib.exception import IFlowParseError, IFlowValidationError
from iflow.lib.grid import GridSpec, VectorField
from iflow.lib.io import write_field
from iflow.lib.ops import Stencil
from iflow.lib.parser import RunConfig, config_to_dict, load_config, parse_config
from iflow.lib.poisson import PoissonMethod

def test_empty_config_is_reference_run():
    """{} gives the 30 x 30, 140-step defaults."""
    cfg = parse_config('{}')
    assert cfg == RunConfig()
    assert cfg.grid_spec() == GridSpec(30, 4 * math.pi)
    assert cfg.time.dt == 1.5e-3 and cfg.time.steps == 140
    assert cfg.projection.mode is ProjectionMode.AT_END
    assert cfg.time.advection is Stencil.WIDE and cfg.step_config().advection is Stencil.WIDE
    assert cfg.obstacle() == ObstaclePotential((7.0, 7.0), 0.5, 1.0, 1e-6)
    assert cfg.initial_condition.preset == 'paper' and not cfg.initial_condition.is_file
    assert cfg.output.formats == ('iflow', 'pgm')

def test_sections_override_defaults():
    """Given keys replace defaults, the rest stays."""
    cfg = parse_config(json.dumps({
        'grid': {'n': 16, 'length': 6.0},
        'time': {'scheme': 'rk4', 'impulse_form': 'lamb', 'steps': 3},
        'projection': {'mode': 'per-step', 'method': 'spectral', 'max_iterations': 50},
        'potential': {'tau': 0},
        'output': {'formats': ['csv'], 'snapshot_every': 1},
    }))
    assert cfg.grid.n == 16 and cfg.grid.length == 6.0
    assert cfg.time.scheme is TimeScheme.RK4 and cfg.time.impulse_form is ImpulseForm.LAMB
    assert cfg.time.dt == 1.5e-3
    step = cfg.step_config()
    assert step.projection_mode is ProjectionMode.PER_STEP
    assert step.poisson.method is PoissonMethod.SPECTRAL and step.poisson.max_iterations == 50
    assert cfg.obstacle().strength == 0.0
    assert cfg.output.formats == ('csv',)

def test_disabled_potential():
    """A disabled potential gives no obstacle."""
    assert parse_config('{"potential": {"enabled": false}}').obstacle() is None

def test_malformed_json_position():
    """Syntax errors carry line and column."""
    with pytest.raises(IFlowParseError) as e:
        parse_config('{\n  "grid": {"n": 30,}\n}')
    assert e.value.line == 2
    assert e.value.column is not None

@pytest.mark.parametrize('text, key', [
    ('{"grids": {}}', 'grids'),
    ('{"grid": {"size": 30}}', 'grid.size'),
    ('{"grid": {"n": 31}}', 'grid.n'),
    ('{"grid": {"n": 4}}', 'grid.n'),
    ('{"grid": {"n": 30.0}}', 'grid.n'),
    ('{"grid": {"length": -1}}', 'grid.length'),
    ('{"time": {"dt": 0}}', 'time.dt'),
    ('{"time": {"steps": -1}}', 'time.steps'),
    ('{"time": {"scheme": "leapfrog"}}', 'time.scheme'),
    ('{"time": {"advection": "upwind"}}', 'time.advection'),
    ('{"projection": {"mode": 1}}', 'projection.mode'),
    ('{"projection": {"tolerance": "small"}}', 'projection.tolerance'),
    ('{"potential": {"tau": -0.5}}', 'potential.tau'),
    ('{"potential": {"enabled": "yes"}}', 'potential.enabled'),
    ('{"potential": {"epsilon": 0}}', 'potential.epsilon'),
    ('{"tracers": {"lattice_m": 1}}', 'tracers.lattice_m'),
    ('{"output": {"formats": ["png"]}}', 'output.formats'),
    ('{"output": {"formats": ["csv", "csv"]}}', 'output.formats'),
    ('{"output": {"directory": ""}}', 'output.directory'),
    ('{"costates": {"enabled": true}, "tracers": {"enabled": false}}', 'costates.enabled'),
    ('{"initial_condition": {"preset": "no-such-preset"}}', 'initial_condition.preset'),
    ('{"grid": []}', 'grid'),
])
def test_validation_errors(text, key):
    """Each bad value is reported with its dotted key."""
    with pytest.raises(IFlowValidationError) as e:
        parse_config(text)
    assert e.value.key == key

def test_top_level_must_be_object():
    """A JSON array is not a configuration."""
    with pytest.raises(IFlowValidationError):
        parse_config('[]')

def test_field_file_resolved_against_config_dir(tmp_path):
    """A relative field path is looked up next to the configuration."""
    write_field(VectorField.zeros(GridSpec(30)), tmp_path / 'start.iflow')
    path = tmp_path / 'run.json'
    path.write_text('{"initial_condition": {"preset": "start.iflow"}}')
    cfg = load_config(str(path))
    assert cfg.initial_condition.is_file
    assert cfg.initial_condition.preset == str(tmp_path / 'start.iflow')

def test_echo_round_trip():
    """The JSON echo parses back to the same configuration."""
    cfg = parse_config(json.dumps({
        'time': {'scheme': 'rk4', 'steps': 7, 'advection': 'narrow'},
        'projection': {'mode': 'per-step', 'max_iterations': 9},
        'impulse_crosscheck': {'enabled': True},
        'costates': {'enabled': True},
        'initial_condition': {'preset': 'taylor-green'},
    }))
    echo = config_to_dict(cfg)
    assert echo['time']['scheme'] == 'rk4'
    assert echo['time']['advection'] == 'narrow'
    assert echo['output']['formats'] == ['iflow', 'pgm']
    assert parse_config(json.dumps(echo)) == cfg
