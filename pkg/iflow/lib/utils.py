import logging
import math
import os
import sys
import time

sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from enum import Enum
from functools import wraps
from typing import Any

from iflow.lib.exception import IFlowValidationError

logger = logging.getLogger(__name__)

def performance_measurement(_func=None, *, message: str='Executed'):
  '''
  Time the decorated call.
  When the first argument owns a '_perf_info' dict, the elapsed time
  is stored there under 'message'.
  '''
  def decorator(func):
    @wraps(func)
    def wrapper(*args, **kwargs):
      t1 = time.perf_counter()
      result = func(*args, **kwargs)
      d = time.perf_counter() - t1
      if args and hasattr(args[0], '_perf_info'):
        args[0]._perf_info[message] = d
      logger.debug('%s: %.4fs.', message, d)
      return result
    return wrapper
  return decorator(_func) if _func is not None else decorator

def spinner():
  chars = 10 * '|' + 10 * '/' + 10 * '-' + 10 * '\\'
  while True:
    for c in chars:
      yield c

def is_real(value: Any) -> bool:
  ''' JSON-style number: int or float, never bool. '''
  return isinstance(value, (int, float)) and not isinstance(value, bool)

def require_real(value: Any, key: str, minimum: float=None, strict: bool=True) -> float:
  '''
  Return 'value' as a finite float.
  With 'minimum', require value > minimum ('strict') or value >= minimum.
  '''
  if not is_real(value) or not math.isfinite(value):
    raise IFlowValidationError(f'Error: `{key}` must be a finite number: `{value}`.', key=key)
  if minimum is not None:
    if strict and not value > minimum:
      raise IFlowValidationError(f'Error: `{key}` must be greater than {minimum}: `{value}`.', key=key)
    if not strict and not value >= minimum:
      raise IFlowValidationError(f'Error: `{key}` must be at least {minimum}: `{value}`.', key=key)
  return float(value)

def require_int(value: Any, key: str, minimum: int=None) -> int:
  if isinstance(value, bool) or not isinstance(value, int):
    raise IFlowValidationError(f'Error: `{key}` must be an integer: `{value}`.', key=key)
  if minimum is not None and value < minimum:
    raise IFlowValidationError(f'Error: `{key}` must be at least {minimum}: `{value}`.', key=key)
  return value

def require_bool(value: Any, key: str) -> bool:
  if not isinstance(value, bool):
    raise IFlowValidationError(f'Error: `{key}` must be a boolean: `{value}`.', key=key)
  return value

def coerce_enum(value: Any, enum: type[Enum], key: str) -> Enum:
  if isinstance(value, enum):
    return value
  try:
    return enum(value)
  except ValueError:
    raise IFlowValidationError(
        f'Error: `{value}`, invalid `{key}`.'
        f'\nAvailable values: {", ".join(str(e.value) for e in enum)}',
        key=key
    )
