"""Periodic grids, unitary transforms and Fourier multipliers.

Everything downstream lives on the torus ``[0, length)^n`` sampled with ``M``
points per axis.  Frequencies are the integer vectors of the half-open box
``[-M/2, M/2)^n``; arrays in frequency space are stored in numpy FFT order, so
index 0 is the constant mode and the Nyquist row carries the frequency
``-M/2``.
"""

from __future__ import annotations

import csv
import struct
import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.fft as sfft

__all__ = [
    "Grid",
    "Field",
    "Spectrum",
    "Symbol",
    "make_grid",
    "forward_transform",
    "inverse_transform",
    "apply_multiplier",
    "sample_symbol",
    "write_field",
    "read_field",
    "write_field_csv",
]

# Symbols are materialized at once only up to this many grid points.
DENSE_LIMIT = 32**4

_MAGIC = b"LACF"
_HEADER = struct.Struct("<4sIId")


@dataclass(frozen=True)
class Grid:
    """Uniform periodic sampling of ``[0, length)^dim`` with ``side`` points per axis."""

    dim: int
    side: int
    length: float = 1.0

    def __post_init__(self):
        if not 1 <= self.dim <= 4:
            raise ValueError(f"dim must be in 1..4, got {self.dim}")
        if self.side < 4 or self.side & (self.side - 1):
            raise ValueError(f"side must be a power of two >= 4, got {self.side}")
        if not self.length > 0:
            raise ValueError("length must be positive")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.side,) * self.dim

    @property
    def size(self) -> int:
        return self.side**self.dim

    @property
    def spacing(self) -> float:
        return self.length / self.side

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def depth(self) -> int:
        """Number of dyadic levels along one axis (``log2(side)``)."""
        return self.side.bit_length() - 1

    def axis_frequencies(self) -> np.ndarray:
        """Integer frequencies along one axis, in FFT order."""
        return np.fft.fftfreq(self.side, d=1.0 / self.side).astype(np.int64)

    def frequencies(self) -> np.ndarray:
        """All frequency vectors, shape ``shape + (dim,)``, FFT order."""
        k = self.axis_frequencies()
        mesh = np.meshgrid(*([k] * self.dim), indexing="ij")
        return np.stack(mesh, axis=-1)

    def coordinates(self) -> np.ndarray:
        """Physical sample positions, shape ``shape + (dim,)``."""
        x = np.arange(self.side) * self.spacing
        mesh = np.meshgrid(*([x] * self.dim), indexing="ij")
        return np.stack(mesh, axis=-1)

    def frequency_index(self, xi) -> tuple[int, ...]:
        """Array index of the integer frequency vector ``xi``."""
        xi = tuple(int(v) for v in xi)
        if len(xi) != self.dim:
            raise ValueError("frequency vector has wrong length")
        half = self.side // 2
        if any(not -half <= v < half for v in xi):
            raise IndexError(f"frequency {xi} outside [-{half}, {half})^{self.dim}")
        return tuple(v % self.side for v in xi)


def make_grid(dim: int, side: int, length: float = 1.0) -> Grid:
    return Grid(dim, side, float(length))


@dataclass(frozen=True)
class Field:
    """Complex samples of a function on a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} samples, got {v.size}")
        v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def norm(self) -> float:
        """Discrete L2 norm (counting measure)."""
        return float(np.linalg.norm(self.values))

    def __add__(self, other: "Field") -> "Field":
        _same_grid(self.grid, other.grid)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        _same_grid(self.grid, other.grid)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, c) -> "Field":
        return Field(self.grid, self.values * c)

    __rmul__ = __mul__

    def abs(self) -> np.ndarray:
        return np.abs(self.values)


@dataclass(frozen=True)
class Spectrum:
    """Unitary DFT coefficients of a field, FFT order."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex).reshape(self.grid.shape)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def at(self, xi) -> complex:
        return complex(self.coeffs[self.grid.frequency_index(xi)])

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))


def _same_grid(a: Grid, b: Grid):
    if a != b:
        raise ValueError(f"grid mismatch: {a} vs {b}")


def forward_transform(f: Field) -> Spectrum:
    return Spectrum(f.grid, sfft.fftn(f.values, norm="ortho"))


def inverse_transform(s: Spectrum) -> Field:
    return Field(s.grid, sfft.ifftn(s.coeffs, norm="ortho"))


@dataclass(eq=False)
class Symbol:
    """A Fourier multiplier given by a pure, vectorized evaluator.

    ``evaluator`` receives an array of frequency vectors with the dimension in
    the last axis and returns the symbol values with the leading shape.
    Products of symbols are symbols; sampled arrays are memoized per grid.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    label: str = "symbol"
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __call__(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        return np.asarray(self.evaluator(xi))

    def __mul__(self, other: "Symbol") -> "Symbol":
        if not isinstance(other, Symbol):
            return NotImplemented
        a, b = self, other
        return Symbol(lambda xi: a(xi) * b(xi), f"({a.label})*({b.label})")

    def sample(self, grid: Grid) -> np.ndarray:
        """Symbol values on every grid frequency (FFT order)."""
        with self._lock:
            hit = self._cache.get(grid)
        if hit is not None:
            return hit
        values = sample_symbol(self, grid)
        if grid.size <= DENSE_LIMIT:
            values.setflags(write=False)
            with self._lock:
                self._cache[grid] = values
        return values


def sample_symbol(m: Symbol, grid: Grid) -> np.ndarray:
    """Evaluate ``m`` on the grid, slab by slab along the first axis."""
    k = grid.axis_frequencies()
    if grid.size <= DENSE_LIMIT:
        out = np.asarray(m(grid.frequencies()))
        return np.broadcast_to(out, grid.shape).copy()
    out = np.empty(grid.shape, dtype=complex)
    rest = np.meshgrid(*([k] * (grid.dim - 1)), indexing="ij")
    for i, k0 in enumerate(k):
        xi = np.stack([np.full(rest[0].shape, k0)] + rest, axis=-1)
        out[i] = m(xi)
    if np.all(out.imag == 0):
        out = out.real.copy()
    return out


def apply_multiplier(f: Field, m) -> Field:
    """Field whose spectrum is ``m * spectrum(f)``.

    ``m`` is a :class:`Symbol` or an array already sampled on ``f.grid``.
    """
    values = m.sample(f.grid) if isinstance(m, Symbol) else np.asarray(m)
    if np.any(np.isnan(values)):
        raise ValueError("symbol has NaN values on the grid")
    spec = sfft.fftn(f.values, norm="ortho")
    return Field(f.grid, sfft.ifftn(spec * values, norm="ortho"))


def write_field(path, f: Field):
    """Binary container: header (magic, dim, side, length), then LE complex128."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, f.grid.dim, f.grid.side, f.grid.length))
        fh.write(np.ascontiguousarray(f.values, dtype="<c16").tobytes())


def read_field(path) -> Field:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        magic, dim, side, length = _HEADER.unpack(head)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a field file")
        grid = Grid(dim, side, length)
        data = np.frombuffer(fh.read(), dtype="<c16")
    return Field(grid, data.copy())


def write_field_csv(path, f: Field, max_points: int = 4096):
    """One row per sample: integer index per axis, real part, imaginary part."""
    if f.grid.size > max_points:
        raise ValueError(f"grid too large for CSV export ({f.grid.size} points)")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"i{a}" for a in range(f.grid.dim)] + ["re", "im"])
        for idx in np.ndindex(f.grid.shape):
            v = f.values[idx]
            w.writerow(list(idx) + [repr(float(v.real)), repr(float(v.imag))])
