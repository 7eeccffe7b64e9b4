import csv
import hashlib
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields, is_dataclass
from fractions import Fraction
from typing import Any, Callable, Iterable, List, Optional, Sequence, TypeVar

import numpy as np

from core.config import THREADS

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class KahanSum:
    """Neumaier-compensated accumulator for real or complex terms"""

    __slots__ = ("_re", "_re_c", "_im", "_im_c", "_complex")

    def __init__(self):
        self._re = self._re_c = 0.0
        self._im = self._im_c = 0.0
        self._complex = False

    def add(self, value) -> None:
        if isinstance(value, complex):
            self._complex = True
            self._re, self._re_c = _neumaier_step(self._re, self._re_c, value.real)
            self._im, self._im_c = _neumaier_step(self._im, self._im_c, value.imag)
        else:
            self._re, self._re_c = _neumaier_step(self._re, self._re_c, float(value))

    @property
    def value(self):
        re = self._re + self._re_c
        if self._complex:
            return complex(re, self._im + self._im_c)
        return re


def _neumaier_step(total: float, comp: float, value: float):
    t = total + value
    if abs(total) >= abs(value):
        comp += (total - t) + value
    else:
        comp += (value - t) + total
    return t, comp


def parallel_map(func: Callable[[T], R], items: Sequence[T], threads: Optional[int] = None) -> List[R]:
    """Map over items with a thread pool capped by BRATTELI_SPECTRA_THREADS; keeps input order"""
    workers = max(1, min(threads or THREADS, len(items) or 1))
    if workers == 1 or len(items) < 2:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def digest_files(paths: Iterable[str]) -> str:
    """SHA-256 over the bytes of the given input files"""
    sha = hashlib.sha256()
    for path in paths:
        with open(path, "rb") as handle:
            sha.update(handle.read())
    return sha.hexdigest()


def jsonable(obj: Any) -> Any:
    """Convert library values into JSON-compatible structures"""
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, int):
        return obj
    if isinstance(obj, float):
        if math.isnan(obj) or math.isinf(obj):
            return str(obj)
        return obj
    if isinstance(obj, complex):
        return {"re": jsonable(obj.real), "im": jsonable(obj.imag)}
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, np.generic):
        return jsonable(obj.item())
    if isinstance(obj, np.ndarray):
        return [jsonable(x) for x in obj.tolist()]
    if hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict())
    if is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: jsonable(getattr(obj, f.name)) for f in fields(obj) if f.repr}
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj, key=str) if isinstance(obj, (set, frozenset)) else obj
        return [jsonable(x) for x in items]
    return str(obj)


def rows_to_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """Render rows as CSV text with a header line"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_csv_cell(cell) for cell in row])
    return buffer.getvalue()


def _csv_cell(cell: Any) -> Any:
    if isinstance(cell, float):
        return repr(cell)
    if isinstance(cell, complex):
        return f"{cell.real!r}{cell.imag:+.17g}j"
    return cell


def cauchy_differences(values: Sequence[complex], window: int) -> List[float]:
    """Absolute consecutive differences over the last `window` entries"""
    tail = list(values)[-window:]
    return [abs(b - a) for a, b in zip(tail, tail[1:])]


def aitken_extrapolate(values: Sequence[float]) -> Optional[float]:
    """Aitken delta-squared on the last three terms; None when the denominator vanishes"""
    if len(values) < 3:
        return None
    x0, x1, x2 = values[-3], values[-2], values[-1]
    denom = (x2 - x1) - (x1 - x0)
    if denom == 0 or not math.isfinite(denom):
        return None
    return x2 - (x2 - x1) ** 2 / denom
