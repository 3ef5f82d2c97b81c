"""Reader and writer for the plain-text ``wff1`` field format.

A file is one header line::

    wff1 <d> <n_blocks> <M> <L> <real|complex>

followed by whitespace-separated values in row-major order. ``n_blocks`` is
1 for one-particle fields and ``N`` for configuration fields. Complex values
are stored as interleaved ``re im`` pairs. Values are written with 17
significant digits so a round trip is exact.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import WavemargError
from .grid import GridSpec, make_grid

MAGIC = "wff1"
_PER_LINE = 8


class FieldFormatError(WavemargError, ValueError):
    """The file is not a well-formed ``wff1`` field."""


@dataclass(frozen=True)
class WffHeader:
    d: int
    n_blocks: int
    M: int
    L: float
    kind: str

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.M,) * (self.d * self.n_blocks)

    def grid(self, N: int | None = None) -> GridSpec:
        """Grid matching the header; ``N`` is required for one-particle files."""
        n = self.n_blocks if self.n_blocks > 1 else N
        if n is None:
            raise FieldFormatError("one-particle field: particle count must be given")
        return make_grid(self.d, n, self.L, self.M)


def write_wff(path, values, d: int, L: float) -> None:
    values = np.asarray(values)
    if values.ndim % d:
        raise FieldFormatError(f"array with {values.ndim} axes is not a multiple of d={d}")
    M = values.shape[0]
    if any(s != M for s in values.shape):
        raise FieldFormatError(f"non-uniform shape {values.shape}")
    kind = "complex" if np.iscomplexobj(values) else "real"
    flat = values.ravel()
    if kind == "complex":
        flat = np.column_stack([flat.real, flat.imag]).ravel()
    nums = [format(float(v), ".17g") for v in flat]
    lines = [f"{MAGIC} {d} {values.ndim // d} {M} {L!r} {kind}"]
    for i in range(0, len(nums), _PER_LINE):
        lines.append(" ".join(nums[i:i + _PER_LINE]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_wff(path) -> tuple[WffHeader, np.ndarray]:
    text = Path(path).read_text()
    head, _, body = text.partition("\n")
    parts = head.split()
    if len(parts) != 6 or parts[0] != MAGIC:
        raise FieldFormatError(f"{path}: bad header {head!r}")
    try:
        header = WffHeader(int(parts[1]), int(parts[2]), int(parts[3]), float(parts[4]), parts[5])
    except ValueError as exc:
        raise FieldFormatError(f"{path}: bad header {head!r}") from exc
    if header.kind not in ("real", "complex"):
        raise FieldFormatError(f"{path}: unknown kind {header.kind!r}")
    data = np.array(body.split(), dtype=float)
    count = int(np.prod(header.shape))
    expected = count * (2 if header.kind == "complex" else 1)
    if data.size != expected:
        raise FieldFormatError(f"{path}: expected {expected} values, found {data.size}")
    if header.kind == "complex":
        data = data[0::2] + 1j * data[1::2]
    return header, data.reshape(header.shape)
