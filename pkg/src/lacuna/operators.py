"""Spatial-side operators on periodic grids.

Directional Hilbert transforms are multipliers.  Directional averages are
computed as convolutions: the trapezoid rule on the multilinear interpolant
is itself a fixed linear combination of grid values, so each (direction,
radius) pair becomes one FFT multiplier, cached per grid.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.fft as sfft
from scipy import ndimage
from scipy.optimize import linprog

from .grid import Field, Grid, apply_multiplier
from .symbols import halfspace_symbol

__all__ = [
    "SegmentSpec",
    "hilbert_dir",
    "maximal_hilbert",
    "avg_segment",
    "segment_kernel",
    "dyadic_radii",
    "directional_average",
    "maximal_dir",
    "maximal_set",
    "strong_maximal",
    "strong_maximal_sq",
    "strong_maximal_iter",
    "dyadic_expect",
    "martingale_sq",
    "cww_probe",
    "calibrate_cww",
]

# Trapezoid steps per grid cell for line integrals.
SUBSTEPS = 4


@dataclass(frozen=True)
class SegmentSpec:
    center: tuple
    radius: float
    omega: tuple

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "omega", tuple(float(c) for c in self.omega))
        if not self.radius > 0:
            raise ValueError("radius must be positive")


def hilbert_dir(f: Field, omega, convention: str = "indicator") -> Field:
    return apply_multiplier(f, halfspace_symbol(omega, convention))


def maximal_hilbert(f: Field, O, convention: str = "indicator") -> Field:
    """Pointwise ``max_omega |H_omega f|``; the result is real and nonnegative."""
    members = np.atleast_2d(getattr(O, "members", O))
    if len(members) == 0:
        raise ValueError("empty direction set")
    out = None
    for w in members:
        a = np.abs(hilbert_dir(f, w, convention).values)
        out = a if out is None else np.maximum(out, a)
    return Field(f.grid, out)


def _trapezoid(radius: float, h: float):
    steps = max(2, math.ceil(2 * radius * SUBSTEPS / h))
    t = np.linspace(-radius, radius, steps + 1)
    wts = np.full(steps + 1, 1.0 / steps)
    wts[[0, -1]] *= 0.5
    return t, wts


def avg_segment(f: Field, seg: SegmentSpec) -> complex:
    """Mean of ``f`` over the segment, trapezoid rule on the multilinear interpolant."""
    g = f.grid
    t, wts = _trapezoid(seg.radius, g.spacing)
    pts = (np.asarray(seg.center)[:, None] + np.outer(seg.omega, t)) / g.spacing
    re = ndimage.map_coordinates(f.values.real, pts, order=1, mode="grid-wrap")
    im = ndimage.map_coordinates(f.values.imag, pts, order=1, mode="grid-wrap")
    return complex(np.dot(wts, re) + 1j * np.dot(wts, im))


@functools.lru_cache(maxsize=512)
def _segment_multiplier(grid: Grid, omega: tuple, radius: float) -> np.ndarray:
    kern = segment_kernel(grid, omega, radius)
    # correlation with the kernel: (A f)(x) = sum_o k[o] f(x + o)
    m = np.conj(sfft.fftn(kern))
    if np.allclose(m.imag, 0.0, atol=1e-13):
        m = m.real
    m.setflags(write=False)
    return m


def segment_kernel(grid: Grid, omega, radius: float) -> np.ndarray:
    """Grid weights ``k`` with ``avg_segment(f, (x, radius, omega)) = sum_o k[o] f(x + o)``
    for every grid node ``x``."""
    t, wts = _trapezoid(radius, grid.spacing)
    p = np.outer(t, omega) / grid.spacing
    base = np.floor(p)
    frac = p - base
    base = base.astype(np.int64)
    kern = np.zeros(grid.shape)
    n = grid.dim
    for corner in np.ndindex(*(2,) * n):
        c = np.array(corner)
        beta = np.prod(np.where(c == 1, frac, 1.0 - frac), axis=1) * wts
        idx = tuple(((base + c) % grid.side).T)
        np.add.at(kern, idx, beta)
    return kern


def dyadic_radii(grid: Grid) -> list[float]:
    """One cell up to half the period, doubling."""
    return [grid.spacing * 2.0**j for j in range(grid.depth)]


def directional_average(f: Field, omega, radius: float) -> np.ndarray:
    m = _segment_multiplier(f.grid, tuple(float(c) for c in omega), float(radius))
    out = sfft.ifftn(sfft.fftn(f.values) * m)
    return out


def maximal_dir(f: Field, omega, radii: Optional[Sequence[float]] = None) -> Field:
    """``sup_r`` of averages of ``|f|`` along ``omega`` over the radius ladder."""
    radii = dyadic_radii(f.grid) if radii is None else list(radii)
    if not radii:
        raise ValueError("empty radius ladder")
    a = np.abs(f.values)
    spec = sfft.fftn(a)
    key = tuple(float(c) for c in omega)
    out = None
    for r in radii:
        avg = sfft.ifftn(spec * _segment_multiplier(f.grid, key, float(r))).real
        out = avg if out is None else np.maximum(out, avg)
    return Field(f.grid, np.maximum(out, 0.0))


def maximal_set(f: Field, Omega, radii: Optional[Sequence[float]] = None) -> Field:
    members = np.atleast_2d(getattr(Omega, "members", Omega))
    if len(members) == 0:
        raise ValueError("empty direction set")
    out = None
    for w in members:
        v = maximal_dir(f, w, radii).values.real
        out = v if out is None else np.maximum(out, v)
    return Field(f.grid, out)


def _box_mean(a: np.ndarray, s: int, axis: int) -> np.ndarray:
    """Periodic mean over ``[i, i+s)`` along ``axis``, indexed by the lower end ``i``."""
    m = a.shape[axis]
    if s == 1:
        return a
    if s >= m:
        return np.broadcast_to(a.mean(axis=axis, keepdims=True), a.shape)
    ext = np.concatenate([a, np.take(a, range(s - 1), axis=axis)], axis=axis)
    c = np.cumsum(ext, axis=axis)
    zero = np.zeros_like(np.take(c, [0], axis=axis))
    c = np.concatenate([zero, c], axis=axis)
    hi = np.take(c, range(s, s + m), axis=axis)
    lo = np.take(c, range(0, m), axis=axis)
    return (hi - lo) / s


def strong_maximal(f, sides: Optional[Sequence[int]] = None) -> Field:
    """Uncentered strong maximal function over boxes with dyadic side lengths.

    For each side combination the box means are indexed by their lower
    corner; a box contains ``x`` iff its corner lies in ``x - s + 1 .. x``, so
    the sup over those boxes is a separable running max (scipy's positive
    ``origin`` moves the window towards lower indices).
    """
    return Field(f.grid, _strong_max_array(np.abs(f.values), sides))


def _strong_max_array(a: np.ndarray, sides=None) -> np.ndarray:
    side = a.shape[0]
    sides = [2**j for j in range(side.bit_length())] if sides is None else list(sides)
    out = np.zeros_like(a)

    def walk(b, axis, chosen):
        if axis == a.ndim:
            mx = b
            for ax, s in enumerate(chosen):
                if s > 1:
                    mx = ndimage.maximum_filter1d(mx, size=s, axis=ax, mode="wrap",
                                                  origin=(s - 1) // 2)
            np.maximum(out, mx, out=out)
            return
        for s in sides:
            walk(_box_mean(b, s, axis), axis + 1, chosen + [s])

    walk(a, 0, [])
    return out


def strong_maximal_sq(f: Field) -> Field:
    return strong_maximal(strong_maximal(f))


def strong_maximal_iter(f: Field, k: int) -> Field:
    """``k``-fold composition of the strong maximal function."""
    g = f
    for _ in range(k):
        g = strong_maximal(g)
    return g


def dyadic_expect(f: Field, j: int, axis: int = 0) -> Field:
    """Average over the dyadic blocks of length ``period * 2**-j`` along ``axis``."""
    g = f.grid
    if not 0 <= j <= g.depth:
        raise ValueError(f"level {j} outside 0..{g.depth}")
    v = np.moveaxis(f.values, axis, 0)
    blocks = 2**j
    shaped = v.reshape((blocks, g.side // blocks) + v.shape[1:])
    mean = shaped.mean(axis=1, keepdims=True)
    out = np.broadcast_to(mean, shaped.shape).reshape(v.shape)
    return Field(g, np.moveaxis(out, 0, axis))


def martingale_sq(f: Field, axis: int = 0) -> Field:
    """``(sum_j |E_{j+1} f - E_j f|^2)^(1/2)`` over all grid levels."""
    g = f.grid
    acc = np.zeros(g.shape)
    prev = dyadic_expect(f, 0, axis).values
    for j in range(g.depth):
        nxt = dyadic_expect(f, j + 1, axis).values
        acc += np.abs(nxt - prev) ** 2
        prev = nxt
    return Field(g, np.sqrt(acc))


def _cww_measures(g: Field, lam: float, gamma: float, axis: int):
    grid = g.grid
    e = np.zeros(grid.dim)
    e[axis] = 1.0
    osc = np.abs(g.values - dyadic_expect(g, 0, axis).values)
    sq = martingale_sq(g, axis).values
    # radius-zero average included: |g| is the limit of shrinking segment means
    mx = np.maximum(np.abs(g.values), maximal_dir(g, e).values.real)
    lhs = np.count_nonzero((osc > 2 * lam) & (sq <= gamma * lam)) * grid.cell_volume
    base = np.count_nonzero(mx > lam) * grid.cell_volume
    return float(lhs), float(base)


def cww_probe(g: Field, lam: float, gamma: float, axis: int = 0,
              A: float = 1.0, b: float = 1.0):
    """Good-lambda check with unit weight.

    Returns ``(lhs, rhs, violated)`` where ``lhs`` is the measure of
    ``{|g - E_0 g| > 2 lam, Delta g <= gamma lam}`` and
    ``rhs = A exp(-b / gamma**2) |{M_e g > lam}|``.
    """
    if not (lam > 0 and gamma > 0):
        raise ValueError("lambda and gamma must be positive")
    lhs, base = _cww_measures(g, lam, gamma, axis)
    rhs = A * math.exp(-b / gamma**2) * base
    return lhs, rhs, lhs > rhs


def calibrate_cww(samples, axis: int = 0, safety: float = 2.0):
    """Fit ``(A, b)`` as the tightest upper envelope ``log A - b/gamma**2`` of the
    observed log ratios ``lhs/|{M g > lam}|`` (a two-variable LP), then widen
    ``A`` by ``safety``.  ``samples`` is an iterable of ``(g, lam, gamma)``."""
    rows = []
    for g, lam, gamma in samples:
        lhs, base = _cww_measures(g, lam, gamma, axis)
        if lhs > 0 and base > 0:
            rows.append((1.0 / gamma**2, math.log(lhs / base)))
    if not rows:
        return safety, 0.0
    x = np.array(rows)
    # variables (logA, b): minimize sum(logA - b x_i), s.t. logA - b x_i >= y_i, b >= 0
    res = linprog(c=[len(x), -x[:, 0].sum()],
                  A_ub=np.column_stack([-np.ones(len(x)), x[:, 0]]), b_ub=-x[:, 1],
                  bounds=[(None, None), (0, None)], method="highs")
    logA, b = (res.x if res.success else (x[:, 1].max(), 0.0))
    return safety * math.exp(logA), float(b)
