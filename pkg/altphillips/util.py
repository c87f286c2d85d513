import csv
from io import StringIO
from pathlib import Path
from typing import Iterable, Optional, Sequence, TextIO, Union

import numpy as np
from more_itertools import pairwise

PathLike = Union[str, Path, None]


def serialize_text(text: str, path: PathLike = None) -> Optional[str]:
    """Writes `text` to `path`, or returns it if `path` is `None`.

    Args:
        text: The serialized representation
        path: File path, if `None` is provided the text is returned

    Returns:
        If `path` is None, then `text` is returned
    """
    if path is None:
        return text
    elif isinstance(path, str):
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    elif isinstance(path, Path):
        with path.open("w", encoding="utf-8", newline="") as f:
            f.write(text)
    else:
        raise TypeError(f"`path` needs to be one of [str, None, Path], but was <{type(path)}>")


def rows_to_csv(header: Sequence[str], rows: Iterable[Sequence], out: Optional[TextIO] = None) -> Optional[str]:
    """Renders `rows` below `header` as CSV in the unix dialect.

    Floats are written with `repr` so that a re-read yields bit-identical values.
    """
    target = StringIO() if out is None else out

    csv_writer = csv.writer(target, dialect=csv.unix_dialect)
    csv_writer.writerow(header)
    for row in rows:
        csv_writer.writerow([_render_cell(v) for v in row])

    if out is None:
        return target.getvalue()
    return None


def _render_cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    return str(value)


def is_strictly_decreasing(values: Iterable[float]) -> bool:
    return all(b < a for a, b in pairwise(values))


def is_nonincreasing(values: Iterable[float], rel_tol: float = 0.0) -> bool:
    return all(b <= a + rel_tol * abs(a) for a, b in pairwise(values))


def least_squares_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Slope of the least-squares line through the points (x, y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2:
        raise ValueError("A slope needs at least two points")
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)
