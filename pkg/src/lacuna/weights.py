"""Directional Muckenhoupt constants, Rubio de Francia majorants, weight families.

Segment averages are the same discrete probability measures used by the
directional maximal operator: the trapezoid rule on the multilinear
interpolant puts nonnegative weights summing to one on grid nodes.  Because
every average over a segment uses one such measure, Jensen and Hoelder
inequalities hold exactly for the sampled constants, not only in the limit.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.fft as sfft

from .grid import Field, Grid
from .operators import dyadic_radii, maximal_set, segment_kernel, _segment_multiplier
from .normlab import estimate_maximal_norm

__all__ = [
    "Weight",
    "SegmentFamily",
    "dual_weight",
    "segment_averages",
    "ap_constant",
    "a1_constant",
    "a1_family_constant",
    "RdFResult",
    "rubio_de_francia",
    "maximal_norm_upper_bound",
    "factorization_check",
    "weighted_norm_probe",
    "weight_from_spec",
    "load_weight_family",
    "lp_norm",
]

# Positivity floor for weight samples.
FLOOR = 1e-8


@dataclass(frozen=True)
class Weight:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        v = np.broadcast_to(v, self.grid.shape).copy()
        if not np.all(np.isfinite(v)):
            raise ValueError("weight must be finite")
        if np.any(v <= 0):
            raise ValueError("weight must be positive")
        v = np.maximum(v, FLOOR)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __pow__(self, a: float) -> "Weight":
        return Weight(self.grid, self.values**a)

    def __mul__(self, other: "Weight") -> "Weight":
        return Weight(self.grid, self.values * other.values)


def dual_weight(w: Weight, p: float) -> Weight:
    """``w ** (-1 / (p - 1))``."""
    if not p > 1:
        raise ValueError("dual weight needs p > 1")
    return Weight(w.grid, w.values ** (-1.0 / (p - 1.0)))


@dataclass(frozen=True)
class SegmentFamily:
    """Segments centred on every ``stride``-th node, with the given radii and directions."""

    directions: np.ndarray
    radii: tuple
    stride: int = 1

    @classmethod
    def build(cls, grid: Grid, directions, stride: int = 1, radii=None):
        d = np.atleast_2d(np.asarray(getattr(directions, "members", directions), dtype=float))
        r = tuple(dyadic_radii(grid) if radii is None else radii)
        return cls(d, r, int(stride))

    def restrict(self, idx) -> "SegmentFamily":
        return SegmentFamily(self.directions[list(idx)], self.radii, self.stride)


def _sub(a: np.ndarray, stride: int) -> np.ndarray:
    return a[(slice(None, None, stride),) * a.ndim]


def segment_averages(values: np.ndarray, grid: Grid, omega, radius: float) -> np.ndarray:
    """Segment means of ``values`` centred at every grid node."""
    m = _segment_multiplier(grid, tuple(float(c) for c in omega), float(radius))
    return sfft.ifftn(sfft.fftn(values) * m).real


def _segment_min(values: np.ndarray, grid: Grid, omega, radius: float) -> np.ndarray:
    """Minimum of ``values`` over the nodes charged by each segment measure."""
    kern = segment_kernel(grid, omega, radius)
    offs = np.argwhere(kern > 0)
    out = np.full(grid.shape, np.inf)
    for o in offs:
        out = np.minimum(out, np.roll(values, shift=tuple(-o), axis=tuple(range(grid.dim))))
    return out


def ap_constant(w: Weight, family: SegmentFamily, p: float) -> float:
    """``max_I <w>_I <sigma>_I^(p-1)`` over the family (a lower bound of the sup)."""
    if not p > 1:
        raise ValueError("A_p needs p > 1; use a1_constant for p = 1")
    sig = dual_weight(w, p).values
    best = 0.0
    for om in family.directions:
        for r in family.radii:
            aw = _sub(segment_averages(w.values, w.grid, om, r), family.stride)
            asg = _sub(segment_averages(sig, w.grid, om, r), family.stride)
            best = max(best, float(np.max(aw * asg ** (p - 1.0))))
    return best


def a1_constant(w: Weight, Omega, radii: Optional[Sequence[float]] = None) -> float:
    """``max_x M_Omega w(x) / w(x)`` with centred segments.

    The radius-zero average ``w(x)`` itself is part of the supremum, so the
    result is at least 1 on any grid.
    """
    Mw = np.maximum(w.values, maximal_set(Field(w.grid, w.values), Omega, radii).values.real)
    return float(np.max(Mw / w.values))


def a1_family_constant(w: Weight, family: SegmentFamily) -> float:
    """``max_I <w>_I / min_I w`` over the family, the minimum taken over the nodes
    each segment charges.  This is the form used in factorization arguments."""
    best = 0.0
    for om in family.directions:
        for r in family.radii:
            avg = _sub(segment_averages(w.values, w.grid, om, r), family.stride)
            mn = _sub(_segment_min(w.values, w.grid, om, r), family.stride)
            best = max(best, float(np.max(avg / mn)))
    return best


def lp_norm(f, p: float = 2.0, w: Optional[Weight] = None) -> float:
    a = np.abs(np.asarray(getattr(f, "values", f))) ** p
    if w is not None:
        a = a * w.values
    return float(np.sum(a)) ** (1.0 / p)


def maximal_norm_upper_bound(grid: Grid, Omega, radii: Optional[Sequence[float]] = None) -> float:
    """Certified ``L^2`` bound ``sqrt(max_xi sum_{omega, r} |m_{omega, r}(xi)|^2)``.

    ``sup`` is dominated by the square sum of the averages, whose symbols are
    the ``m_{omega, r}``.
    """
    radii = dyadic_radii(grid) if radii is None else list(radii)
    members = np.atleast_2d(getattr(Omega, "members", Omega))
    acc = np.zeros(grid.shape)
    for om in members:
        for r in radii:
            acc += np.abs(_segment_multiplier(grid, tuple(float(c) for c in om), float(r))) ** 2
    return math.sqrt(float(acc.max()))


@dataclass
class RdFResult:
    majorant: Field
    tail: np.ndarray
    norm: float
    terms: int


def rubio_de_francia(g, Omega, norm: float, K: int = 20, radii=None) -> RdFResult:
    """``E_K g = sum_{k=0}^K M^(k) g / (2^k norm^k)`` with its exact tail term.

    By sublinearity ``M(E_K g) <= 2 norm E_K g + tail`` pointwise, where
    ``tail = M^(K+1) g / (2^K norm^K)``.
    """
    if not norm > 0:
        raise ValueError("norm estimate must be positive")
    vals = np.asarray(getattr(g, "values", g))
    if np.iscomplexobj(vals):
        if np.any(vals.imag != 0):
            raise ValueError("g must be real and nonnegative")
        vals = vals.real
    if np.any(vals < 0):
        raise ValueError("g must be nonnegative")
    grid = g.grid
    term = vals.astype(float)
    acc = term.copy()
    for k in range(1, K + 1):
        term = maximal_set(Field(grid, term), Omega, radii).values.real
        acc = acc + term / (2.0 * norm) ** k
    nxt = maximal_set(Field(grid, term), Omega, radii).values.real
    tail = nxt / (2.0**K * norm**K)
    return RdFResult(Field(grid, acc), tail, float(norm), K)


def factorization_check(w: Weight, u: Weight, p: float, p0: float,
                        family: SegmentFamily, rtol: float = 1e-10) -> dict:
    """Sampled check of the factorization inequalities.

    For ``p <= p0`` the weight ``v = w u^(p - p0)`` satisfies
    ``[v]_{A_p0} <= [w]_{A_p} [u]_{A_1}^(p0 - p)``; for ``p > p0``,
    ``v = w^((p0-1)/(p-1)) u^((p-p0)/(p-1))`` satisfies
    ``[v]_{A_p0} <= [w]_{A_p}^((p0-1)/(p-1)) [u]_{A_1}^((p-p0)/(p-1))``.
    ``[.]_{A_1}`` is :func:`a1_family_constant` and ``[w]_{A_1}`` replaces
    ``[w]_{A_p}`` when ``p = 1``.  The dict also carries the variant with the
    ``A_1`` factor to the first power (``literal``).
    """
    if not (p >= 1 and p0 > 1):
        raise ValueError("need p >= 1 and p0 > 1")
    u1 = a1_family_constant(u, family)
    wp = a1_family_constant(w, family) if p == 1 else ap_constant(w, family, p)
    if p <= p0:
        v = Weight(w.grid, w.values * u.values ** (p - p0))
        rhs = wp * u1 ** (p0 - p)
        literal = wp * u1
    else:
        a, b = (p0 - 1) / (p - 1), (p - p0) / (p - 1)
        v = Weight(w.grid, w.values**a * u.values**b)
        rhs = wp**a * u1**b
        literal = wp**a * wp**b
    lhs = ap_constant(v, family, p0)
    return {"lhs": lhs, "rhs": rhs, "ok": lhs <= rhs * (1 + rtol),
            "literal_rhs": literal, "literal_ok": lhs <= literal * (1 + rtol),
            "A_p": wp, "A_1": u1}


def weighted_norm_probe(Omega, p: float, w: Weight, family: Optional[SegmentFamily] = None,
                        radii=None, iters: int = 30, restarts: int = 2, seed: int = 0):
    """``(||M_Omega||_{L^2(w)} lower estimate, [w]_{A_p^Omega} sampled)``."""
    if p != 2:
        raise NotImplementedError("the norm estimator handles p = 2 only")
    grid = w.grid
    radii = dyadic_radii(grid) if radii is None else list(radii)
    members = np.atleast_2d(getattr(Omega, "members", Omega))
    ops = [_segment_multiplier(grid, tuple(float(c) for c in om), float(r))
           for om in members for r in radii]

    def nonneg(rng):
        # positive kernels: the norm is attained on nonnegative functions
        return rng.random(grid.shape)

    rep = estimate_maximal_norm(ops, grid, iters=iters, restarts=restarts, seed=seed,
                                weight=w.values, init=nonneg)
    fam = family if family is not None else SegmentFamily.build(grid, members, stride=1,
                                                                radii=radii)
    return rep.estimate, ap_constant(w, fam, p)


def weight_from_spec(grid: Grid, spec: dict) -> Weight:
    """Weight from a JSON-style spec.

    ``{"kind": "power", "params": {"a": .., "axis": 0}}`` gives
    ``(1 + |sin 2 pi x_axis|)^a``; ``{"kind": "step", "params": {"K": .., "axis": 0}}``
    is 1 on the lower half period and ``K`` on the upper; ``{"kind":
    "custom-grid", "params": {"values": [...]}}`` takes samples verbatim.
    """
    kind, prm = spec.get("kind"), spec.get("params", {})
    x = grid.coordinates() / grid.length
    if kind == "power":
        t = x[..., int(prm.get("axis", 0))]
        return Weight(grid, (1.0 + np.abs(np.sin(2 * np.pi * t))) ** float(prm["a"]))
    if kind == "step":
        t = x[..., int(prm.get("axis", 0))]
        return Weight(grid, np.where(t < 0.5, 1.0, float(prm["K"])))
    if kind == "custom-grid":
        return Weight(grid, np.asarray(prm["values"], dtype=float).reshape(grid.shape))
    raise ValueError(f"unknown weight kind {kind!r}")


def load_weight_family(path, grid: Grid) -> list[Weight]:
    with open(path) as fh:
        doc = json.load(fh)
    specs = doc if isinstance(doc, list) else doc.get("weights", [doc])
    return [weight_from_spec(grid, s) for s in specs]


def write_probe_csv(path, rows, header):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for r in rows:
            wr.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in r])
