import math
import os
import sys

sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

class IFlowError(Exception):
  pass

class IFlowGridError(IFlowError):
  pass

class IFlowFieldError(IFlowError):
  def __init__(self, message: str, node: tuple[int, int]=None):
    super().__init__(message)
    self.node = node

class IFlowNumericalError(IFlowError):
  def details(self) -> dict:
    return {}

class IFlowNonConvergenceError(IFlowNumericalError):
  def __init__(self, message: str, residual: float, iterations: int):
    super().__init__(message)
    self.residual = residual
    self.iterations = iterations

  def details(self) -> dict:
    return {'residual': self.residual, 'iterations': self.iterations}

class IFlowDivergedStateError(IFlowNumericalError):
  def __init__(self, message: str, max_speed: float, t: float):
    super().__init__(message)
    self.max_speed = max_speed
    self.t = t

  def details(self) -> dict:
    # JSON has no inf/nan.
    speed = self.max_speed if math.isfinite(self.max_speed) else None
    return {'max_speed': speed, 't': self.t}

class IFlowDegenerateQuadError(IFlowError):
  def __init__(self, message: str, quad: tuple[int, int]=None):
    super().__init__(message)
    self.quad = quad

class IFlowParseError(IFlowError):
  def __init__(self, message: str, line: int=None, column: int=None):
    super().__init__(message)
    self.line = line
    self.column = column

class IFlowValidationError(IFlowError):
  def __init__(self, message: str, key: str=None):
    super().__init__(message)
    self.key = key

class IFlowFormatError(IFlowError):
  pass

class IFlowIdentityError(IFlowError):
  def __init__(self, message: str, point=None, mismatch: float=None):
    super().__init__(message)
    self.point = point
    self.mismatch = mismatch
