import argparse
import json
import logging
import os
import sys

sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from iflow import __version__
from iflow.lib.exception import IFlowError, IFlowIdentityError, IFlowNumericalError
from iflow.lib.iflow import DEMO_DIR, IFlow, error_document

# Exit codes
SUCCESS = 0
NUMERICAL_FAILURE = 1
USAGE_ERROR = 2

def setup_logging() -> None:
  if os.getenv('__IFLOW_QUIET__'):
    level = logging.WARNING
  elif os.getenv('__IFLOW_DEBUG__'):
    level = logging.DEBUG
  else:
    level = logging.INFO
  handler = logging.StreamHandler(sys.stderr)
  handler.setFormatter(logging.Formatter('IFLOW: %(message)s'))
  logger = logging.getLogger('iflow')
  logger.handlers.clear()
  logger.addHandler(handler)
  logger.setLevel(level)
  logger.propagate = False

def build_parser() -> argparse.ArgumentParser:
  parser = argparse.ArgumentParser(
      prog='iflow',
      description='Incompressible ideal-fluid simulation with an obstacle-avoidance potential.',
  )
  parser.add_argument('-q', '--quiet', help='be quiet', action='store_true')
  parser.add_argument('--debug', help='print debug information', action='store_true')
  parser.add_argument('-v', '--version', action='version', version=f'IFLOW version {__version__}')
  commands = parser.add_subparsers(dest='command', metavar='command', required=True)

  run = commands.add_parser('run', help='integrate a JSON run configuration')
  run.add_argument('config', help='path to the JSON configuration')

  project = commands.add_parser('project', help='Helmholtz-project a stored vector field')
  project.add_argument('field', help='path to an .iflow vector field')
  project.add_argument('--out', metavar='PATH', help='output field file (default: <stem>.projected.iflow)')
  project.add_argument('--csv', metavar='PATH', help='also write the projected field as CSV')
  project.add_argument('--method', choices=('cg', 'spectral'), default=None)
  project.add_argument('--tolerance', type=float, default=None)

  identities = commands.add_parser('check-identities', help='verify the vector calculus identities')
  identities.add_argument('--trials', type=int, default=1000)
  identities.add_argument('--seed', type=int, default=None)

  demo = commands.add_parser('demo-paper', help='run the 30 x 30, 140-step reference setup')
  demo.add_argument('--out', metavar='DIR', default=None, help=f'output directory (default: {DEMO_DIR})')
  return parser

def _report_run(summary: dict) -> None:
  projected = summary['final_projected']
  print(
      f'{summary["config"]["output"]["directory"]}: {summary["steps"]} steps, t = {summary["t"]:.6g}, '
      f'max speed {projected["max_speed"]:.6g}, divergence {projected["divergence_max"]:.3e}.'
  )

def execute(iflow: IFlow, args: argparse.Namespace) -> int:
  func = iflow.commands[args.command]
  match args.command:
    case 'run':
      _report_run(func(args.config))
    case 'demo-paper':
      _report_run(func(args.out))
    case 'project':
      report = func(args.field, out=args.out, csv=args.csv, method=args.method, tolerance=args.tolerance)
      print(
          f'{report["output"]}: divergence {report["divergence_max"]:.3e}, '
          f'residual {report["residual"]:.3e}, {report["iterations"]} iterations.'
      )
    case 'check-identities':
      report = func(args.trials, args.seed)
      for item, residual in report.max_residual.items():
        print(f'identity {item}: max residual {residual:.3e}')
      if not report.passed:
        print(f'IFLOW: residual above {report.tolerance:.0e}.', file=sys.stderr)
        return NUMERICAL_FAILURE
  return SUCCESS

def main(argv: list[str]=None) -> int:
  try:
    args = build_parser().parse_args(argv)
  except SystemExit as e:
    # --help, --version and usage errors
    return int(e.code or 0)

  if args.quiet:
    os.environ['__IFLOW_QUIET__'] = '1'
  if args.debug:
    os.environ['__IFLOW_DEBUG__'] = '1'
  setup_logging()

  try:
    return execute(IFlow(), args)
  except IFlowNumericalError as e:
    print(f'IFLOW: {e}', file=sys.stderr)
    print(json.dumps(error_document(e)), file=sys.stderr)
    return NUMERICAL_FAILURE
  except IFlowIdentityError as e:
    print(f'IFLOW: {e}', file=sys.stderr)
    return NUMERICAL_FAILURE
  except (IFlowError, OSError) as e:
    print(f'IFLOW: {e}', file=sys.stderr)
    return USAGE_ERROR

if __name__ == "__main__":
  sys.exit(main())
