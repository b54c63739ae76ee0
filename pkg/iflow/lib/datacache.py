import os
import sys

sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from dataclasses import dataclass
from typing import Any

@dataclass
class IFlowCacheEntry:
  data: Any
  hits: int

class IFlowCache:
  ''' Process-wide cache for grid-derived constants (spectral symbols...). '''
  __cache: dict = {}

  def write(self, key: tuple, data: Any) -> None:
    if key in self.__cache:
      return
    self.__cache[key] = IFlowCacheEntry(data, 0)

  def read(self, key: tuple) -> Any | None:
    entry = self.__cache.get(key)
    if entry:
      entry.hits += 1
      return entry.data
    return None

  def get_key_hits(self, key: tuple) -> int:
    entry = self.__cache.get(key)
    return entry.hits if entry else 0
