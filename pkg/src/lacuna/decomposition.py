"""Inner/outer split of the directional Hilbert transform and its checks.

Cells are :class:`~lacuna.directions.CellIndex` maps over 0-based pairs.
Directions are taken in the open positive orthant (all coordinates > 0).
"""

from __future__ import annotations

import csv
import itertools
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .directions import CellIndex, cell_of, pairs
from .grid import Field, Grid, apply_multiplier
from .operators import strong_maximal_iter, strong_maximal_sq
from .symbols import (WedgeSpec, compose_K, halfspace_symbol, kappa, outer_eps_symbol,
                      project_symbol, wedge_contains)

__all__ = [
    "nonempty_subsets",
    "check_inclusion",
    "inclusion_exclusion_residual",
    "split_residual",
    "outer_support_check",
    "represent_terms",
    "represent_bound_check",
    "calibrate_represent",
    "proof_constant",
    "choose_upsilon",
    "octant_of_spectrum",
    "annular_bound_check",
    "annular_bound_general",
    "spanning_and_cycles",
    "write_violations",
]


def nonempty_subsets(items: Sequence) -> list[tuple]:
    items = list(items)
    return [c for r in range(1, len(items) + 1) for c in itertools.combinations(items, r)]


def _check_cell(omega, cell) -> CellIndex:
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("direction must lie in the open positive orthant")
    actual = cell_of(omega)
    if cell is None:
        return actual
    if CellIndex(cell) != actual:
        raise ValueError(f"direction lies in cell {actual}, not {CellIndex(cell)}")
    return actual


def check_inclusion(omega, cell: Optional[Mapping], grid: Grid) -> np.ndarray:
    """Grid frequencies of the cone ``C_omega`` that miss every core wedge.

    ``C_omega = {|xi . omega| < max_j |omega_j xi_j| / n}``; the return value
    is an ``(k, n)`` integer array of violations (empty when the inclusion
    holds).
    """
    cell = _check_cell(omega, cell)
    w = np.asarray(omega, dtype=float)
    n = grid.dim
    xi = grid.frequencies().reshape(-1, n).astype(float)
    eta = xi * w
    in_cone = np.abs(eta.sum(axis=1)) < np.abs(eta).max(axis=1) / n
    covered = np.zeros(len(xi), dtype=bool)
    for s, l in cell.items():
        covered |= wedge_contains(xi, WedgeSpec(s, l, n))
    return xi[in_cone & ~covered].astype(np.int64)


def _kappa_o_stack(cell: Mapping, grid: Grid) -> dict:
    n = grid.dim
    return {s: kappa(s, l, "o", n).sample(grid) for s, l in cell.items()}


def inclusion_exclusion_residual(cell: Mapping, grid: Grid) -> float:
    """``max |1 - sum_U (-1)^(#U+1) prod_U kappa_o - prod_Sigma (1 - kappa_o)|`` on the grid."""
    k = _kappa_o_stack(cell, grid)
    sig = list(k)
    total = np.zeros(grid.shape)
    for U in nonempty_subsets(sig):
        total += (-1) ** (len(U) + 1) * np.prod([k[s] for s in U], axis=0)
    rest = np.prod([1.0 - k[s] for s in sig], axis=0)
    return float(np.max(np.abs(1.0 - total - rest)))


def split_residual(f: Field, omega, cell: Optional[Mapping] = None) -> float:
    """Relative L2 error of ``H f = sum_U (-1)^(#U+1) H K_U f + T f`` (sign convention)."""
    cell = _check_cell(omega, cell)
    g = f.grid
    H = halfspace_symbol(omega, "sign").sample(g)
    k = _kappa_o_stack(cell, g)
    lhs = apply_multiplier(f, H).values
    rhs = np.zeros(g.shape, dtype=complex)
    for U in nonempty_subsets(list(k)):
        KU = np.prod([k[s] for s in U], axis=0)
        rhs += (-1) ** (len(U) + 1) * apply_multiplier(f, H * KU).values
    m = H * np.prod([1.0 - k[s] for s in k], axis=0)
    rhs += apply_multiplier(f, m).values
    return float(np.linalg.norm(lhs - rhs) / max(np.linalg.norm(lhs), 1e-300))


def outer_support_check(omega, cell: Optional[Mapping], grid: Grid) -> dict:
    """For every ``eps`` in ``{+,-}^Sigma``: number of nonzero grid frequencies in
    ``supp prod_sigma (1 - kappa^eps)`` that meet ``C_omega`` or the hyperplane
    ``xi . omega = 0``.  All counts zero means ``sign(omega . xi)`` is locally
    constant on each support, so the outer symbol is smooth there."""
    cell = _check_cell(omega, cell)
    n = grid.dim
    xi = grid.frequencies().reshape(-1, n).astype(float)
    eta = xi * np.asarray(omega)
    nonzero = np.any(xi != 0, axis=1)
    bad = np.abs(eta.sum(axis=1)) < np.abs(eta).max(axis=1) / n
    out = {}
    sig = list(cell)
    for signs in itertools.product("+-", repeat=len(sig)):
        eps = dict(zip(sig, signs))
        supp = outer_eps_symbol(cell, eps, n)(xi) != 0
        out[signs] = int(np.count_nonzero(supp & nonzero & bad))
    return out


def represent_terms(f: Field, omega, cell: Optional[Mapping] = None,
                    reference=None) -> tuple[np.ndarray, np.ndarray]:
    """``(lhs, bracket)`` of the pointwise representation bound.

    ``lhs = |H_omega f|`` (sign convention) and
    ``bracket = |f| + sup_U |H_omega K_U f| + sup_{eps, U} |K^eps_U f|``.
    With ``reference`` (a fixed direction of the same cell) the outer terms
    are replaced by ``|H_ref f|`` and ``sup |H_ref K^eps_U f|``, the variant
    in which the sign of the outer symbol is carried by a cell-wide
    Hilbert transform.
    """
    cell = _check_cell(omega, cell)
    g = f.grid
    n = g.dim
    H = halfspace_symbol(omega, "sign").sample(g)
    lhs = np.abs(apply_multiplier(f, H).values)
    sig = list(cell)
    R = 1.0 if reference is None else halfspace_symbol(reference, "sign").sample(g)
    first = np.abs(apply_multiplier(f, R).values)
    inner = np.zeros(g.shape)
    for U in nonempty_subsets(sig):
        KU = compose_K(U, cell, None, n).sample(g)
        inner = np.maximum(inner, np.abs(apply_multiplier(f, H * KU).values))
    outer = np.zeros(g.shape)
    for U in nonempty_subsets(sig):
        for signs in itertools.product("+-", repeat=len(U)):
            K = compose_K(U, cell, dict(zip(U, signs)), n).sample(g)
            outer = np.maximum(outer, np.abs(apply_multiplier(f, R * K).values))
    return lhs, first + inner + outer


def proof_constant(n: int) -> int:
    """Constant obtained by following the split term by term:
    ``(2^s - 1)`` inner terms plus ``2^s`` outer groups of ``2^s`` terms each."""
    s = len(pairs(n))
    return (2**s - 1) + 2**s * 2**s


def represent_bound_check(f: Field, omega, C: float, cell: Optional[Mapping] = None,
                          reference=None) -> Field:
    """Margin field ``C * bracket - |H_omega f|``; nonnegative where the bound holds."""
    lhs, bracket = represent_terms(f, omega, cell, reference)
    return Field(f.grid, C * bracket - lhs)


def calibrate_represent(fields: Iterable[Field], omega, cell=None, reference=None,
                        safety: float = 1.0) -> float:
    """Smallest ``C`` that makes every training margin nonnegative, times ``safety``."""
    worst = 0.0
    for f in fields:
        lhs, bracket = represent_terms(f, omega, cell, reference)
        scale = max(float(np.abs(f.values).max()), 1e-300)
        ratio = lhs / np.maximum(bracket, 1e-14 * scale)
        worst = max(worst, float(ratio.max()))
    return safety * worst


def octant_of_spectrum(f: Field, rel: float = 1e-12) -> tuple[int, ...]:
    """Sign pattern of the open octant holding the spectrum of ``f``."""
    g = f.grid
    c = np.abs(np.fft.fftn(f.values, norm="ortho"))
    live = c > rel * max(float(c.max()), 1e-300)
    if not np.any(live):
        return (1,) * g.dim
    xi = g.frequencies()[live]
    signs = np.sign(xi)
    if np.any(signs == 0) or np.any(signs != signs[0]):
        raise ValueError("spectrum is not confined to one open octant")
    return tuple(int(v) for v in signs[0])


def choose_upsilon(U, eps: Mapping, Q: Sequence[int]):
    """Axis for the Littlewood-Paley projection, following the case analysis.

    Returns ``(upsilon, reduced_U, vanishes)``.  Pairs whose coordinates share
    a sign on ``Q`` act as 1 (``+``) or 0 (``-``) there, so they are removed
    first; ``vanishes`` is true when one of them carries ``-``.  With one pair
    left ``upsilon = sigma(1)``; with two, the common coordinate.  If every
    pair was removed the operator is the identity on ``Q`` and ``upsilon``
    is the first coordinate of the first pair.
    """
    U = [tuple(s) for s in U]
    same = [s for s in U if Q[s[0]] * Q[s[1]] > 0]
    if any(eps[s] == "-" for s in same):
        return U[0][0], [], True
    if len(U) < 3:
        # one or two pairs: the choice does not depend on Q
        V = U
    else:
        V = [s for s in U if s not in same]
    if len(V) == 0:
        return U[0][0], [], False
    if len(V) == 1:
        return V[0][0], V, False
    common = set(V[0]).intersection(*V[1:])
    if len(V) != 2 or not common:
        raise ValueError(f"no common coordinate in {V}")
    return min(common), V, False


def annular_bound_check(f: Field, U, eps: Mapping, t: float, Q=None,
                        cell: Optional[Mapping] = None, upsilon: Optional[int] = None,
                        msq: Optional[np.ndarray] = None, ell_shift: int = 0) -> dict:
    """Worst pointwise ratio ``|K^eps_U P_t f| / (M_s^2 P_t f + floor)`` for ``n = 3``.

    ``Q`` defaults to the octant of the spectrum of ``f`` (checked).  ``cell``
    defaults to all zeros; ``ell_shift`` is added to every entry.  ``msq``
    may pass a precomputed ``M_s^2 P_t f`` for the chosen ``upsilon``.
    """
    g = f.grid
    if g.dim != 3:
        raise ValueError("the annular estimate is stated for n = 3")
    actual = octant_of_spectrum(f)
    if Q is None:
        Q = actual
    elif tuple(Q) != actual and np.any(np.abs(f.values) > 0):
        raise ValueError(f"spectrum lies in octant {actual}, not {tuple(Q)}")
    U = [tuple(s) for s in U]
    eps = {tuple(k): v for k, v in dict(eps).items()}
    if cell is None:
        cell = {s: 0 for s in pairs(3)}
    cell = {tuple(s): int(l) + ell_shift for s, l in dict(cell).items()}
    ups, reduced, vanishes = choose_upsilon(U, eps, Q)
    if upsilon is not None:
        ups = upsilon
    ft = apply_multiplier(f, project_symbol(t, ups, "P"))
    Kf = apply_multiplier(ft, compose_K(U, cell, eps, 3))
    if msq is None:
        msq = strong_maximal_sq(ft).values.real
    floor = 1e-14 * max(float(np.abs(f.values).max()), 1e-300)
    num = np.abs(Kf.values)
    ratio = float(np.max(num / (msq + floor)))
    return {"ratio": ratio, "upsilon": ups, "vanishes": vanishes,
            "reduced": reduced, "lhs_max": float(num.max()),
            "proj_norm": ft.norm()}


def annular_bound_general(f: Field, U, eps: Mapping, ts: Mapping,
                          cell: Optional[Mapping] = None) -> dict:
    """General-``n`` variant: project along every axis of a minimum spanning set
    of ``U`` and compare with the ``n``-fold strong maximal function."""
    g = f.grid
    n = g.dim
    U = [tuple(s) for s in U]
    _, span = spanning_and_cycles(U, n)
    if cell is None:
        cell = {s: 0 for s in pairs(n)}
    ft = f
    for v in span:
        ft = apply_multiplier(ft, project_symbol(ts.get(v, 0), v, "P"))
    Kf = apply_multiplier(ft, compose_K(U, cell, eps, n))
    Mn = strong_maximal_iter(ft, n).values.real
    floor = 1e-14 * max(float(np.abs(f.values).max()), 1e-300)
    return {"ratio": float(np.max(np.abs(Kf.values) / (Mn + floor))), "spanning": span}


def spanning_and_cycles(U, n: Optional[int] = None):
    """``(has_odd_cycle, spanning)`` for the graph with edge set ``U``.

    Odd cycles are detected by 2-colouring; ``spanning`` is a minimum vertex
    cover found by exhaustive search over vertex subsets (0-based labels).
    """
    U = [tuple(s) for s in U]
    if n is None:
        n = 1 + max((max(s) for s in U), default=-1)
    adj = {v: set() for v in range(n)}
    for a, b in U:
        adj[a].add(b)
        adj[b].add(a)
    colour: dict = {}
    odd = False
    for start in range(n):
        if start in colour:
            continue
        colour[start] = 0
        stack = [start]
        while stack:
            v = stack.pop()
            for w in adj[v]:
                if w not in colour:
                    colour[w] = 1 - colour[v]
                    stack.append(w)
                elif colour[w] == colour[v]:
                    odd = True
    for r in range(n + 1):
        for cover in itertools.combinations(range(n), r):
            cs = set(cover)
            if all(a in cs or b in cs for a, b in U):
                return odd, cover
    return odd, tuple(range(n))


def write_violations(path, violations: np.ndarray):
    violations = np.atleast_2d(violations)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"xi{j}" for j in range(violations.shape[1])] if violations.size else ["xi"])
        for row in violations:
            w.writerow([int(v) for v in row])
