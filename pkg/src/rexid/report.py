"""Small reporting utilities: Wilson intervals, CSV emission, atomic writes."""
from __future__ import annotations

import os
import tempfile
from math import sqrt
from pathlib import Path
from typing import Iterable, Sequence

__all__ = ["wilson_lower", "format_number", "write_csv", "atomic_write_text"]

Z95 = 1.959963984540054  # two-sided 95% normal quantile


def wilson_lower(successes: int, trials: int, z: float = Z95) -> float:
    """Wilson score lower confidence bound on a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    if not 0 <= successes <= trials:
        raise ValueError("successes out of range")
    phat = successes / trials
    z2 = z * z
    centre = phat + z2 / (2.0 * trials)
    margin = z * sqrt(phat * (1.0 - phat) / trials + z2 / (4.0 * trials * trials))
    return max(0.0, (centre - margin) / (1.0 + z2 / trials))


def format_number(x) -> str:
    """Fixed 12-significant-digit decimal rendering for CSV cells."""
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    xf = float(x)
    if xf != xf:
        return "nan"
    if xf in (float("inf"), float("-inf")):
        return "inf" if xf > 0 else "-inf"
    return f"{xf:.12g}"


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a temp file + rename so readers never see partial output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence],
              preamble: Sequence[str] = ()) -> None:
    """CSV with optional '#'-prefixed preamble lines and fixed number rendering."""
    lines = [f"# {line}" for line in preamble]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(format_number(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")
