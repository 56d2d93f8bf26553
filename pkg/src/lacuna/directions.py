"""Direction sets, lacunary dissections, sectors and cells.

Sectors use the dyadic sequence ``theta_l = 2**-l``: for a coordinate pair
``sigma = (j, k)`` a direction lies in sector ``l`` when

    2**-(l+1) <= |omega_k| / |omega_j| < 2**-l.

Pairs are 0-based tuples ``(j, k)`` with ``j < k``.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import warnings
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "DirectionSet",
    "Dissection",
    "CellIndex",
    "BoundaryWarning",
    "pairs",
    "unit",
    "canonical_basis",
    "carbery_set",
    "nsw_set",
    "lacunary2d",
    "uniform_set",
    "sector_of",
    "cell_of",
    "verify_lacunary",
    "gap_basis_provider",
    "write_direction_set",
    "read_direction_set",
    "write_cell_table",
]

# Relative distance to a dyadic band edge below which the sector is flagged.
GUARD = 1e-12


class BoundaryWarning(UserWarning):
    """A ratio sits within the guard band of a dyadic sector boundary."""


def pairs(d: int) -> list[tuple[int, int]]:
    """The index set Sigma(d) of coordinate pairs ``(j, k)``, ``j < k``."""
    return list(itertools.combinations(range(d), 2))


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    nrm = np.linalg.norm(v)
    if not nrm > 0 or not np.isfinite(nrm):
        raise ValueError(f"cannot normalize {v}")
    return v / nrm


def canonical_basis(n: int) -> np.ndarray:
    return np.eye(n)


def _dedupe(vectors: np.ndarray) -> np.ndarray:
    out, seen = [], set()
    for v in vectors:
        key = tuple(np.round(v, 12))
        if key not in seen:
            seen.add(key)
            out.append(v)
    return np.array(out)


@dataclass(frozen=True)
class DirectionSet:
    """Finite sequence of unit vectors, with optional dissection metadata."""

    members: np.ndarray
    claimed_order: Optional[int] = None
    basis: Optional[np.ndarray] = None

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.members, dtype=float))
        if m.size and not np.allclose(np.linalg.norm(m, axis=1), 1.0, atol=1e-12):
            raise ValueError("members must be unit vectors")
        m.setflags(write=False)
        object.__setattr__(self, "members", m)
        if self.basis is not None:
            b = np.asarray(self.basis, dtype=float)
            if not np.allclose(b @ b.T, np.eye(len(b)), atol=1e-12):
                raise ValueError("basis is not orthonormal")
            object.__setattr__(self, "basis", b)

    @property
    def dims(self) -> int:
        return self.members.shape[1]

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, i):
        return self.members[i]

    def subset(self, idx) -> "DirectionSet":
        return DirectionSet(self.members[list(idx)], self.claimed_order, self.basis)

    def head(self, count: int) -> "DirectionSet":
        return DirectionSet(self.members[:count], self.claimed_order, self.basis)

    def with_basis_members(self) -> "DirectionSet":
        """Copy that also contains the basis vectors as members."""
        b = self.basis if self.basis is not None else canonical_basis(self.dims)
        return DirectionSet(_dedupe(np.vstack([self.members, b])),
                            self.claimed_order, self.basis)


class CellIndex(Mapping):
    """The cell address ``sigma -> l_sigma``, total over Sigma(d)."""

    def __init__(self, entries: Mapping):
        self._entries = {tuple(s): int(l) for s, l in dict(entries).items()}

    def __getitem__(self, sigma):
        return self._entries[tuple(sigma)]

    def __iter__(self):
        return iter(self._entries)

    def __len__(self):
        return len(self._entries)

    def __hash__(self):
        return hash(tuple(sorted(self._entries.items())))

    def __eq__(self, other):
        if not isinstance(other, Mapping):
            return NotImplemented
        return dict(self) == {tuple(k): v for k, v in other.items()}

    def __repr__(self):
        body = ", ".join(f"{s}: {l}" for s, l in sorted(self._entries.items()))
        return f"CellIndex({{{body}}})"

    def shifted(self, delta: int) -> "CellIndex":
        return CellIndex({s: l + delta for s, l in self._entries.items()})

    def as_tuple(self) -> tuple[int, ...]:
        return tuple(l for _, l in sorted(self._entries.items()))


@dataclass(frozen=True)
class Dissection:
    """Lacunary dissection determined by an orthonormal basis (rows)."""

    basis: np.ndarray = field(default=None)

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ValueError("basis must be a square matrix of row vectors")
        if not np.allclose(b @ b.T, np.eye(len(b)), atol=1e-12):
            raise ValueError("basis is not orthonormal")
        object.__setattr__(self, "basis", b)

    @classmethod
    def canonical(cls, d: int) -> "Dissection":
        return cls(np.eye(d))

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def sigma_set(self) -> list[tuple[int, int]]:
        return pairs(self.dim)

    @staticmethod
    def theta(ell: int) -> float:
        return 2.0 ** (-ell)


def _band(ratio: np.ndarray) -> np.ndarray:
    """Exact dyadic band of positive ratios: ``2**-(l+1) <= r < 2**-l``."""
    mant, expo = np.frexp(ratio)
    near = (np.abs(mant - 0.5) < GUARD) & (mant != 0.5)
    near |= np.abs(mant - 1.0) < GUARD
    if np.any(near):
        warnings.warn("ratio within guard band of a dyadic sector boundary",
                      BoundaryWarning, stacklevel=3)
    return -expo


def sector_of(omega, sigma, basis=None) -> int:
    """Sector index ``l`` of ``omega`` for the pair ``sigma``."""
    omega = np.asarray(omega, dtype=float)
    b = np.eye(len(omega)) if basis is None else np.asarray(basis, dtype=float)
    j, k = sigma
    oj, ok = abs(omega @ b[j]), abs(omega @ b[k])
    if oj == 0 or ok == 0:
        raise ValueError(f"direction lies on a coordinate hyperplane for pair {sigma}")
    return int(_band(np.array(ok / oj)))


def cell_of(omega, dissection: Optional[Dissection] = None) -> CellIndex:
    omega = np.asarray(omega, dtype=float)
    if dissection is None:
        dissection = Dissection.canonical(len(omega))
    return CellIndex({s: sector_of(omega, s, dissection.basis)
                      for s in dissection.sigma_set})


def _sectors(members: np.ndarray, sigma, basis) -> dict:
    """Group member indices by sector; hyperplane members go to key ``None``."""
    j, k = sigma
    oj = np.abs(members @ basis[j])
    ok = np.abs(members @ basis[k])
    flat = (oj <= 1e-15) | (ok <= 1e-15)
    groups: dict = {}
    if np.any(~flat):
        ell = _band(ok[~flat] / oj[~flat])
        for i, l in zip(np.flatnonzero(~flat), ell):
            groups.setdefault(int(l), []).append(int(i))
    if np.any(flat):
        groups[None] = [int(i) for i in np.flatnonzero(flat)]
    return groups


BasisProvider = Callable[[np.ndarray, int], np.ndarray]


def verify_lacunary(dset, L: int, basis=None,
                    basis_provider: Optional[BasisProvider] = None):
    """Check lacunarity of order ``L`` against supplied bases.

    At every recursion level the sub-collection is dissected with the basis
    returned by ``basis_provider(members, level)`` (default: ``basis`` at
    every level, canonical if omitted).  Order 0 means at most one direction.

    Returns ``(ok, witness)``; on failure ``witness`` describes the first
    sector that could not be certified.
    """
    members = dset.members if isinstance(dset, DirectionSet) else np.atleast_2d(dset)
    n = members.shape[1]
    top = np.eye(n) if basis is None else np.asarray(basis, dtype=float)
    if basis_provider is None:
        basis_provider = lambda _m, _lvl: top  # noqa: E731
    return _verify(members, L, basis_provider, 0)


def _verify(members, L, provider, level):
    # A pair whose dissection keeps the whole set in one sector gives no
    # information (its sector is the set itself), so it is skipped; the set
    # fails if no pair splits it.
    if len(members) <= 1:
        return True, None
    if L <= 0:
        return False, {"level": level, "members": members.copy(),
                       "reason": "more than one direction at order 0"}
    b = provider(members, level)
    split = False
    for sigma in pairs(len(b)):
        groups = _sectors(members, sigma, b)
        if len(groups) == 1:
            continue
        split = True
        for ell, idx in groups.items():
            ok, wit = _verify(members[idx], L - 1, provider, level + 1)
            if not ok:
                if wit.get("sigma") is None:
                    wit = dict(wit, sigma=sigma, ell=ell)
                return False, wit
    if not split:
        return False, {"level": level, "members": members.copy(),
                       "reason": "no pair of the basis separates these directions"}
    return True, None


def gap_basis_provider(members: np.ndarray, level: int) -> np.ndarray:
    """2D provider: canonical basis on top, then rotate ``e1`` onto the
    member of smallest angle (the accumulation point of the sector)."""
    if level == 0:
        return np.eye(2)
    angles = np.arctan2(members[:, 1], members[:, 0])
    a = members[int(np.argmin(angles))]
    return np.array([[a[0], a[1]], [-a[1], a[0]]])


def carbery_set(n: int, exponents) -> DirectionSet:
    """Normalized ``(2**k_1, ..., 2**k_n)`` over ``k`` in ``exponents**n``."""
    ks = sorted(set(int(k) for k in exponents))
    if not ks:
        raise ValueError("exponent range is empty")
    if max(abs(k) for k in ks) > 1000:
        raise ValueError("exponent range too wide: normalization underflows")
    raw = [np.ldexp(1.0, np.array(k)) for k in itertools.product(ks, repeat=n)]
    vecs = _dedupe(np.array([unit(v) for v in raw]))
    return DirectionSet(vecs, claimed_order=n - 1, basis=np.eye(n))


def nsw_set(lam: float, alphas, count: int) -> DirectionSet:
    """Normalized ``(lam**(k a_1), ..., lam**(k a_n))`` for ``k = 1..count``."""
    if not 0 < lam < 1:
        raise ValueError("lambda must lie in (0, 1)")
    alphas = np.asarray(alphas, dtype=float)
    if np.any(alphas <= 0) or count < 1:
        raise ValueError("alphas must be positive and count >= 1")
    logs = np.outer(np.arange(1, count + 1), alphas) * math.log(lam)
    # scale each row by its largest entry before exponentiating
    logs -= logs.max(axis=1, keepdims=True)
    vecs = np.exp(logs)
    if np.any(vecs == 0):
        raise ValueError("underflow: k*alpha too large for double precision")
    vecs = _dedupe(vecs / np.linalg.norm(vecs, axis=1, keepdims=True))
    return DirectionSet(vecs, basis=np.eye(len(alphas)))


def _subtree(L: int, a: float, width: float, depth: int) -> list[float]:
    """Angles of an order-``L`` set that contains ``a`` and accumulates at it
    from above, confined to ``[a, a + width)``.

    Relative to a basis with ``e1`` at angle ``a`` the ``j``-th child anchor
    has ratio ``1.5 * 2**-j * R`` (``R`` a power of two), the log-middle of
    its dyadic band, and its own subtree stays below ratio ``1.9 * 2**-j * R``.
    """
    out = [a]
    if L == 0:
        return out
    R = 2.0 ** (math.floor(math.log2(math.tan(width))) - 1)
    for j in range(1, depth + 1):
        lo = math.atan(1.5 * R * 2.0**-j)
        hi = math.atan(1.9 * R * 2.0**-j)
        out += _subtree(L - 1, a + lo, hi - lo, depth)
    return out


def lacunary2d(L: int, depth: int) -> DirectionSet:
    """Lacunary set of order ``L`` in the open first quadrant of the plane.

    Order 1 has slopes ``2**-k``, ``k = 1..depth``.  Order ``L`` attaches to
    each of these an order ``L-1`` subtree accumulating at it from above and
    lying inside its canonical sector; deeper levels repeat the scheme in the
    basis rotated onto the anchor, which :func:`gap_basis_provider` supplies.
    """
    if L < 0:
        raise ValueError("order must be nonnegative")
    if L == 0:
        return DirectionSet(np.array([unit([1.0, 0.5])]), claimed_order=0, basis=np.eye(2))
    vecs = []
    for k in range(1, depth + 1):
        anchor = unit([1.0, 2.0**-k])
        vecs.append(anchor)
        lo = math.atan(2.0**-k)
        width = math.atan(1.9 * 2.0**-k) - lo
        for ang in _subtree(L - 1, lo, width, depth)[1:]:
            vecs.append(np.array([math.cos(ang), math.sin(ang)]))
    vecs = np.array(vecs)
    order = np.argsort(-np.arctan2(vecs[:, 1], vecs[:, 0]), kind="stable")
    return DirectionSet(vecs[order], claimed_order=L, basis=np.eye(2))


def uniform_set(N: int) -> DirectionSet:
    """``N`` equispaced directions on the open quarter arc: angles ``j*pi/(2(N+1))``."""
    if N < 1:
        raise ValueError("N must be positive")
    ang = np.arange(1, N + 1) * (math.pi / 2) / (N + 1)
    return DirectionSet(np.column_stack([np.cos(ang), np.sin(ang)]), basis=np.eye(2))


def write_direction_set(path, dset: DirectionSet):
    basis = dset.basis if dset.basis is not None else np.eye(dset.dims)
    doc = {
        "dims": dset.dims,
        "order": dset.claimed_order,
        "basis": basis.tolist(),
        "members": dset.members.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


def read_direction_set(path) -> DirectionSet:
    with open(path) as fh:
        doc = json.load(fh)
    members = np.array(doc["members"], dtype=float).reshape(-1, doc["dims"])
    return DirectionSet(members, doc.get("order"), np.array(doc["basis"]))


def write_cell_table(path, dset: DirectionSet, dissection: Optional[Dissection] = None):
    if dissection is None:
        b = dset.basis if dset.basis is not None else np.eye(dset.dims)
        dissection = Dissection(b)
    sig = dissection.sigma_set
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"w{i}" for i in range(dset.dims)]
                   + [f"l_{j}{k}" for j, k in sig])
        for v in dset.members:
            cell = cell_of(v, dissection)
            w.writerow([repr(float(c)) for c in v] + [cell[s] for s in sig])
