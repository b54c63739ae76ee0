import csv
import json
import logging
import os
import sys

import numpy as np

sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from pathlib import Path

from iflow.lib.exception import IFlowFieldError, IFlowFormatError, IFlowGridError
from iflow.lib.grid import GridSpec, ScalarField, VectorField
from iflow.lib.ops import divergence

logger = logging.getLogger(__name__)

# Field file:
# IFLOW1 KIND N LENGTH\n PAYLOAD
#
# KIND    = scalar | vector
# N       = points per axis
# LENGTH  = domain extent, Python repr (round-trips exactly)
# PAYLOAD = N*N little-endian float64, row-major over (i, j);
#           vector fields store u then v.

MAGIC = 'IFLOW1'
KINDS = {'scalar': 1, 'vector': 2}
DTYPE = np.dtype('<f8')

# Divergence spans below this render as flat mid-gray.
FLAT_SPAN = 1e-8
FLAT_GRAY = 128

def _components(field: ScalarField | VectorField) -> tuple[str, list[np.ndarray]]:
  if isinstance(field, ScalarField):
    return 'scalar', [field.values]
  if isinstance(field, VectorField):
    return 'vector', [field.u, field.v]
  raise IFlowFormatError(f'Error: cannot write `{type(field).__name__}`.')

def encode_field(field: ScalarField | VectorField) -> bytes:
  kind, arrays = _components(field)
  header = f'{MAGIC} {kind} {field.spec.n} {field.spec.length!r}\n'.encode('ascii')
  return header + b''.join(np.ascontiguousarray(a, dtype=DTYPE).tobytes() for a in arrays)

def decode_field(data: bytes) -> ScalarField | VectorField:
  eol = data.find(b'\n')
  if eol < 0:
    raise IFlowFormatError('Error: missing field header.')
  try:
    magic, kind, n, length = data[:eol].decode('ascii').split(' ')
    n, length = int(n), float(length)
  except (UnicodeDecodeError, ValueError):
    raise IFlowFormatError(f'Error: malformed field header: `{data[:min(eol, 64)]!r}`.')
  if magic != MAGIC:
    raise IFlowFormatError(f'Error: bad magic: `{magic}`.')
  if kind not in KINDS:
    raise IFlowFormatError(f'Error: `{kind}`, unknown field kind.')
  try:
    spec = GridSpec(n, length)
  except IFlowGridError as e:
    raise IFlowFormatError(f'Error: bad field geometry: {e}')

  payload = data[eol + 1:]
  expected = KINDS[kind] * n * n * DTYPE.itemsize
  if len(payload) != expected:
    raise IFlowFormatError(
        f'Error: payload has {len(payload)} bytes, header announces {expected} ({kind}, n = {n}).'
    )
  arrays = np.frombuffer(payload, dtype=DTYPE).reshape(KINDS[kind], n, n)
  try:
    if kind == 'scalar':
      return ScalarField(spec, arrays[0])
    return VectorField(spec, arrays[0], arrays[1])
  except IFlowFieldError as e:
    raise IFlowFormatError(f'Error: bad field payload: {e}')

def write_field(field: ScalarField | VectorField, path: str | Path) -> None:
  with open(path, 'wb') as f:
    f.write(encode_field(field))
  logger.debug('wrote %s', path)

def read_field(path: str | Path) -> ScalarField | VectorField:
  with open(path, 'rb') as f:
    data = f.read()
  try:
    return decode_field(data)
  except IFlowFormatError as e:
    raise IFlowFormatError(f'{path}: {e}')

def write_csv(field: ScalarField | VectorField, path: str | Path) -> None:
  ''' One row per node: i, j, x, y and the component values. '''
  kind, arrays = _components(field)
  names = ['value'] if kind == 'scalar' else ['u', 'v']
  dx = field.spec.dx
  with open(path, 'w', newline='') as f:
    writer = csv.writer(f)
    writer.writerow(['i', 'j', 'x', 'y', *names])
    for i in range(field.spec.n):
      for j in range(field.spec.n):
        writer.writerow([i, j, repr(i * dx), repr(j * dx), *(repr(float(a[i, j])) for a in arrays)])

def _gray(values: np.ndarray) -> tuple[np.ndarray, float, float]:
  lo, hi = float(values.min()), float(values.max())
  if hi - lo <= FLAT_SPAN:
    return np.full(values.shape, FLAT_GRAY, dtype=np.uint8), lo, hi
  scaled = np.rint((values - lo) / (hi - lo) * 255.0)
  return np.clip(scaled, 0, 255).astype(np.uint8), lo, hi

def write_divergence_image(v: VectorField, path: str | Path) -> dict:
  '''
  Write div(v) as a binary PGM (y axis up), linearly mapped from its
  [min, max] to [0, 255], and a JSON sidecar with the range.
  Return the sidecar content.
  '''
  path = Path(path)
  # Image rows run top to bottom: row 0 is j = n - 1.
  image, lo, hi = _gray(divergence(v).values.T[::-1])
  n = v.spec.n
  with open(path, 'wb') as f:
    f.write(f'P5\n{n} {n}\n255\n'.encode('ascii'))
    f.write(np.ascontiguousarray(image).tobytes())

  sidecar = {'field': 'divergence', 'n': n, 'min': lo, 'max': hi, 'flat': hi - lo <= FLAT_SPAN}
  write_json(sidecar, path.with_suffix('.json'))
  return sidecar

def read_pgm(path: str | Path) -> np.ndarray:
  ''' Load a binary PGM written by write_divergence_image. '''
  with open(path, 'rb') as f:
    data = f.read()
  parts = data.split(b'\n', 3)
  if len(parts) != 4 or parts[0] != b'P5':
    raise IFlowFormatError(f'{path}: Error: not a binary PGM.')
  width, height = (int(x) for x in parts[1].split())
  pixels = np.frombuffer(parts[3], dtype=np.uint8)
  if pixels.size != width * height:
    raise IFlowFormatError(f'{path}: Error: truncated PGM.')
  return pixels.reshape(height, width)

def write_json(obj, path: str | Path) -> None:
  with open(path, 'w', encoding='utf-8') as f:
    json.dump(obj, f, indent=2)
    f.write('\n')

class JsonlWriter:
  ''' Append one JSON document per line. '''
  def __init__(self, path: str | Path):
    self.path = path
    self._f = None

  def __enter__(self):
    self._f = open(self.path, 'w', encoding='utf-8')
    return self

  def __exit__(self, *exc):
    self._f.close()
    self._f = None

  def write(self, obj) -> None:
    self._f.write(json.dumps(obj) + '\n')
    self._f.flush()
