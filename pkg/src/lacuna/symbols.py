"""Multiplier symbols: half-spaces, angular cutoffs, wedges, Littlewood-Paley.

All cutoffs are built from one smooth ramp ``s`` which is exactly 0 for
``x <= 0`` and exactly 1 for ``x >= 1``, so every support statement below is
checkable with exact equality on sampled frequencies.

The angular cutoffs of a coordinate pair ``sigma = (j, k)`` are functions of
the scaled quotient ``x = 2**ell * xi_j / xi_k``:

* ``phi_plus`` is 0 for ``x <= -(n+1)`` and 1 for ``x >= -n``;
* ``phi_minus`` is 1 for ``x <= -1/(2n)`` and 0 for ``x >= -1/(2(n+1))``;
* on ``xi_k == 0`` the limits ``kappa_plus = 1`` and ``kappa_minus = 0`` are used.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from math import comb
from typing import Iterable, Mapping, Optional

import numpy as np
from scipy.special import expit

from .grid import Grid, Symbol

__all__ = [
    "ramp",
    "phi_plus",
    "phi_minus",
    "CutoffProfile",
    "WedgeSpec",
    "halfspace_symbol",
    "wedge_contains",
    "scaled_quotient",
    "kappa",
    "compose_K",
    "outer_eps_symbol",
    "lp_p",
    "lp_q",
    "lp_symbols",
    "project_symbol",
    "derivative_bound_probe",
    "overlap_count",
    "write_symbol_slice",
]

EPS_KINDS = ("+", "-", "o")


def ramp(x) -> np.ndarray:
    """C-infinity monotone ramp, 0 on ``x <= 0`` and 1 on ``x >= 1``."""
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 1.0, 1.0, 0.0)
    mid = (x > 0.0) & (x < 1.0)
    if np.any(mid):
        t = x[mid]
        out[mid] = expit(1.0 / (1.0 - t) - 1.0 / t)
    return out


def phi_plus(x, n: int) -> np.ndarray:
    return ramp(np.asarray(x, dtype=float) + (n + 1))


def phi_minus(x, n: int) -> np.ndarray:
    a, b = 0.5 / n, 0.5 / (n + 1)
    return 1.0 - ramp((np.asarray(x, dtype=float) + a) / (a - b))


@dataclass(frozen=True)
class CutoffProfile:
    kind: str
    n: int

    def __post_init__(self):
        if self.kind not in ("plus", "minus"):
            raise ValueError("kind must be 'plus' or 'minus'")

    def __call__(self, x):
        return phi_plus(x, self.n) if self.kind == "plus" else phi_minus(x, self.n)

    @property
    def transition(self) -> tuple[float, float]:
        if self.kind == "plus":
            return (-(self.n + 1.0), -float(self.n))
        return (-0.5 / self.n, -0.5 / (self.n + 1))


@dataclass(frozen=True)
class WedgeSpec:
    """``Psi_{sigma, ell, gamma}``; ``gamma = n`` is the core wedge, ``n+1`` the widened one."""

    sigma: tuple[int, int]
    ell: int
    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        object.__setattr__(self, "sigma", tuple(int(s) for s in self.sigma))

    @classmethod
    def core(cls, sigma, ell, n):
        return cls(sigma, ell, n)

    @classmethod
    def widened(cls, sigma, ell, n):
        return cls(sigma, ell, n + 1)


def halfspace_symbol(omega, convention: str = "indicator") -> Symbol:
    """``sign(xi . omega)`` or ``1_{(0, inf)}(xi . omega)``; 0 on the hyperplane.

    A dot product is treated as zero when it is below the rounding error of
    its own summation, so exactly orthogonal integer frequencies are caught.
    """
    w = np.asarray(omega, dtype=float)
    if convention not in ("sign", "indicator"):
        raise ValueError("convention must be 'sign' or 'indicator'")
    tol = 4 * len(w) * np.finfo(float).eps

    def ev(xi):
        terms = xi * w
        dot = terms.sum(axis=-1)
        dot = np.where(np.abs(dot) <= tol * np.abs(terms).sum(axis=-1), 0.0, dot)
        s = np.sign(dot)
        return s if convention == "sign" else (s > 0).astype(float)

    return Symbol(ev, f"H[{convention}]({np.array2string(w, precision=4)})")


def scaled_quotient(xi, sigma, ell: int):
    """``(2**ell * xi_j / xi_k, xi_k != 0)`` with 0 where ``xi_k == 0``."""
    xi = np.asarray(xi, dtype=float)
    a, b = xi[..., sigma[0]], xi[..., sigma[1]]
    nz = b != 0
    q = np.divide(a, b, out=np.zeros(np.broadcast(a, b).shape), where=nz)
    with np.errstate(over="ignore"):
        return np.ldexp(q, int(ell)), nz


def wedge_contains(xi, spec: WedgeSpec) -> np.ndarray:
    """Membership in ``Psi_{sigma, ell, gamma}`` (vectorized over leading axes)."""
    x, nz = scaled_quotient(xi, spec.sigma, spec.ell)
    return nz & (-x >= 0.5 / spec.gamma) & (-x < spec.gamma)


def _kappa_eval(xi, sigma, ell, eps, n):
    x, nz = scaled_quotient(xi, sigma, ell)
    if eps == "+":
        return np.where(nz, phi_plus(x, n), 1.0)
    if eps == "-":
        return np.where(nz, phi_minus(x, n), 0.0)
    return np.where(nz, phi_plus(x, n) * phi_minus(x, n), 0.0)


def _eps(e) -> str:
    e = {"∘": "o", "circ": "o", "0": "o", "plus": "+", "minus": "-"}.get(e, e)
    if e not in EPS_KINDS:
        raise ValueError(f"unknown cutoff kind {e!r}")
    return e


def kappa(sigma, ell: int, eps: str, n: int) -> Symbol:
    """Angular cutoff ``kappa^eps_{sigma, ell}`` in ambient dimension ``n``."""
    sigma = tuple(int(s) for s in sigma)
    eps = _eps(eps)
    return Symbol(lambda xi: _kappa_eval(xi, sigma, ell, eps, n),
                  f"kappa{eps}{sigma}@{ell}")


def compose_K(U: Iterable, cell: Mapping, eps=None, n: Optional[int] = None) -> Symbol:
    """Product of ``kappa^{eps_sigma}_{sigma, cell[sigma]}`` over ``sigma`` in ``U``.

    ``eps`` maps pairs to ``'+'``, ``'-'`` or ``'o'``; omitted means all ``'o'``.
    ``n`` defaults to one more than the largest coordinate index in the cell.
    """
    U = [tuple(s) for s in U]
    if not U:
        raise ValueError("U must be nonempty")
    if n is None:
        n = 1 + max(max(s) for s in cell)
    eps = {s: "o" for s in U} if eps is None else {tuple(k): _eps(v) for k, v in dict(eps).items()}
    parts = [(s, int(cell[s]), eps[s]) for s in U]

    def ev(xi):
        out = 1.0
        for s, l, e in parts:
            out = out * _kappa_eval(xi, s, l, e, n)
        return np.asarray(out)

    tag = ",".join(f"{s}{e}{l}" for s, l, e in parts)
    return Symbol(ev, f"K[{tag}]")


def outer_eps_symbol(cell: Mapping, eps: Mapping, n: int) -> Symbol:
    """``prod_sigma (1 - kappa^{eps_sigma}_{sigma, ell_sigma})`` over the whole cell."""
    parts = [(tuple(s), int(l), _eps(eps[tuple(s)])) for s, l in cell.items()]

    def ev(xi):
        out = 1.0
        for s, l, e in parts:
            out = out * (1.0 - _kappa_eval(xi, s, l, e, n))
        return np.asarray(out)

    return Symbol(ev, "T_eps")


def lp_p(r) -> np.ndarray:
    """Littlewood-Paley bump supported in ``1/2 < |r| < 2``; dyadic dilates sum to 1."""
    a = np.abs(np.asarray(r, dtype=float))
    return ramp(2.0 * (a - 0.5)) - ramp(a - 1.0)


def lp_q(r) -> np.ndarray:
    """Bump supported in ``1/4 < |r| < 4`` and equal to 1 on ``[1/2, 2]``."""
    a = np.abs(np.asarray(r, dtype=float))
    return ramp(4.0 * (a - 0.25)) * (1.0 - ramp((a - 2.0) / 2.0))


def lp_symbols():
    return lp_p, lp_q


def project_symbol(t: float, axis: int, kind: str = "P") -> Symbol:
    """``xi -> p(2**-t xi_axis)`` (kind ``'P'``) or the same with ``q`` (``'Q'``)."""
    if kind not in ("P", "Q"):
        raise ValueError("kind must be 'P' or 'Q'")
    prof = lp_p if kind == "P" else lp_q
    scale = 2.0 ** (-t)
    return Symbol(lambda xi: prof(scale * xi[..., axis]), f"{kind}[{t}]@{axis}")


def _central_diff(f, x, axis, order, h):
    """Order-``order`` central difference along coordinate ``axis`` with per-point step ``h``."""
    acc = 0.0
    for j in range(order + 1):
        y = x.copy()
        y[:, axis] += (order / 2.0 - j) * h
        acc = acc + (-1) ** j * comb(order, j) * f(y)
    return acc / h**order


def derivative_bound_probe(symbol: Symbol, sigma, ell: int, samples: int = 2000,
                           n: int = 3, max_order: int = 4, rel_step: float = 2e-3,
                           rng=None, xs=None) -> float:
    """Max of ``|xi_j|^a |xi_k|^b |d^a_j d^b_k kappa|`` over sampled frequencies.

    Samples are drawn so that the scaled quotient covers both transition
    intervals of the cutoffs (plus a margin); steps are relative to each
    coordinate, so the probe is invariant under ``ell -> ell + c`` up to
    rounding.  ``xs`` overrides the sampled quotients.
    """
    rng = np.random.default_rng(rng)
    j, k = sigma
    if xs is None:
        xs = np.concatenate([
            rng.uniform(-(n + 1.5), -(n - 0.5), samples // 2),
            -np.exp(rng.uniform(np.log(0.4 / (n + 1)), np.log(0.6 / n), samples - samples // 2)),
        ])
    xs = np.asarray(xs, dtype=float)
    xi = np.zeros((len(xs), n))
    xk = -np.exp(rng.uniform(0.0, 3.0, len(xs)))
    xi[:, k] = xk
    xi[:, j] = np.ldexp(xs * xk, -int(ell))
    for c in range(n):
        if c not in (j, k):
            xi[:, c] = rng.normal(size=len(xs))
    best = 0.0
    for a1, a2 in itertools.product(range(max_order + 1), repeat=2):
        if a1 + a2 == 0 or a1 + a2 > max_order:
            continue
        hj = rel_step * np.abs(xi[:, j])
        hk = rel_step * np.abs(xi[:, k])

        def fj(y, _a2=a2):
            if _a2 == 0:
                return symbol(y)
            return _central_diff(symbol, y, k, _a2, hk)

        d = fj(xi) if a1 == 0 else _central_diff(fj, xi, j, a1, hj)
        val = np.abs(xi[:, j]) ** a1 * np.abs(xi[:, k]) ** a2 * np.abs(d)
        best = max(best, float(np.max(val)))
    return best


def overlap_count(ratio: float, n: int, ell_range=range(-80, 80)) -> int:
    """Number of widened wedges ``Psi~_{sigma, ell}`` containing a point with
    ``-xi_j/xi_k = ratio``."""
    xi = np.array([[-ratio, 1.0]])
    return sum(bool(wedge_contains(xi, WedgeSpec((0, 1), l, n + 1))[0]) for l in ell_range)


def write_symbol_slice(path, symbol: Symbol, grid: Grid, axes=(0, 1)):
    """CSV heatmap ``(xi_a, xi_b, re, im)`` on the plane through the origin spanned by ``axes``."""
    k = grid.axis_frequencies()
    k = np.sort(k)
    A, B = np.meshgrid(k, k, indexing="ij")
    xi = np.zeros(A.shape + (grid.dim,))
    xi[..., axes[0]] = A
    xi[..., axes[1]] = B
    vals = np.broadcast_to(symbol(xi), A.shape).astype(complex)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"xi{axes[0]}", f"xi{axes[1]}", "re", "im"])
        for a, b, v in zip(A.ravel(), B.ravel(), vals.ravel()):
            w.writerow([int(a), int(b), repr(float(v.real)), repr(float(v.imag))])
