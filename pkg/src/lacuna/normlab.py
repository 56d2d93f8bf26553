"""Lower-bound estimation of L2 norms of maximal multiplier operators.

A maximal operator ``f -> sup_k |T_k f|`` over Fourier multipliers ``T_k`` is
estimated by alternating maximization.  Freezing the pointwise argmax
selection ``s(x)`` gives a linear operator ``S f(x) = (T_{s(x)} f)(x)``; one
power step on ``S* S`` followed by reselection never decreases the ratio
``|| sup_k |T_k f| || / ||f||``, and the final value is recomputed from the
stored witness, so every reported estimate is attained.
"""

from __future__ import annotations

import csv
import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.fft as sfft

from .directions import CellIndex, DirectionSet, cell_of, pairs, unit
from .grid import Field, Grid, Symbol
from .symbols import halfspace_symbol, kappa

__all__ = [
    "BudgetExceeded",
    "NormReport",
    "GrowthTable",
    "raw_frequencies",
    "sample_ops",
    "maximal_ratio",
    "estimate_maximal_norm",
    "brute_force_selection_norm",
    "hilbert_family",
    "fit_growth",
    "growth_experiment",
    "theta_probe",
    "counterexample_build",
    "quadrant_annulus_mask",
    "outer_factor_ops",
    "model_outer_norm",
    "two_sided_2d_probe",
    "tensor_consistency",
    "write_growth_csv",
    "plot_growth_svg",
]


class BudgetExceeded(RuntimeError):
    """A combinatorial or runtime budget would be exceeded."""


@dataclass
class NormReport:
    estimate: float
    witness: np.ndarray
    subset: Optional[DirectionSet]
    iterations: int
    restarts: int
    seed: int
    grid: object
    trace: list = field(default_factory=list)

    def witness_field(self) -> Field:
        if not isinstance(self.grid, Grid):
            raise TypeError("witness lives on a raw shape, not a Grid")
        return Field(self.grid, self.witness)


@dataclass
class GrowthTable:
    N: list
    estimates: list
    fits: dict
    reports: list = field(default_factory=list, repr=False)

    def rows(self):
        for i, (n, e) in enumerate(zip(self.N, self.estimates)):
            yield n, e, {k: v["residuals"][i] for k, v in self.fits.items()}


def _shape_of(grid) -> tuple:
    return grid.shape if isinstance(grid, Grid) else tuple(grid)


def raw_frequencies(shape) -> np.ndarray:
    """Integer frequency vectors for an arbitrary shape, FFT order, last axis = dim."""
    axes = [np.fft.fftfreq(m, d=1.0 / m) for m in shape]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def sample_ops(ops, grid) -> list[np.ndarray]:
    """Sampled multiplier arrays, deduplicated (first occurrence kept)."""
    shape = _shape_of(grid)
    out, seen = [], set()
    for m in ops:
        if isinstance(m, Symbol):
            a = m.sample(grid) if isinstance(grid, Grid) else m(raw_frequencies(shape))
        else:
            a = np.asarray(m)
        a = np.broadcast_to(a, shape)
        if np.any(~np.isfinite(a)):
            raise ValueError("multiplier has non-finite values")
        key = np.ascontiguousarray(a, dtype=complex).tobytes()
        if key not in seen:
            seen.add(key)
            out.append(a)
    if not out:
        raise ValueError("empty operator family")
    return out


def _wnorm(f, w):
    a = np.abs(f) ** 2
    return math.sqrt(float(np.sum(a if w is None else a * w)))


def _sweep(mults, fhat):
    """``max_k |T_k f|`` and its argmax (lowest index on ties)."""
    best = sel = None
    for k, m in enumerate(mults):
        v = np.abs(sfft.ifftn(m * fhat, norm="ortho"))
        if best is None:
            best, sel = v, np.zeros(v.shape, dtype=np.int32)
        else:
            up = v > best
            best = np.where(up, v, best)
            sel[up] = k
    return best, sel


def maximal_ratio(ops, witness, grid=None, weight=None, domain=None) -> float:
    """``|| sup_k |T_k P f| ||_w / ||f||_w`` with ``P`` the optional domain projection."""
    f = np.asarray(witness, dtype=complex)
    mults = sample_ops(ops, grid if grid is not None else f.shape)
    fhat = sfft.fftn(f, norm="ortho")
    if domain is not None:
        fhat = fhat * domain
    best, _ = _sweep(mults, fhat)
    return _wnorm(best, weight) / _wnorm(f, weight)


def _frozen_apply(mults, fhat, sel):
    out = np.zeros(sel.shape, dtype=complex)
    for k, m in enumerate(mults):
        mask = sel == k
        if np.any(mask):
            out[mask] = sfft.ifftn(m * fhat, norm="ortho")[mask]
    return out


def _frozen_adjoint(mults, g, sel, domain):
    acc = np.zeros(sel.shape, dtype=complex)
    for k, m in enumerate(mults):
        mask = sel == k
        if np.any(mask):
            acc += np.conj(m) * sfft.fftn(np.where(mask, g, 0), norm="ortho")
    if domain is not None:
        acc = acc * domain
    return acc


# Grids up to this many points get the dense selection search.
POLISH_POINTS = 64
# Two-site moves are added when points * operators is at most this.
PAIR_MOVES = 32


def _dense_ops(mults, shape):
    P = int(np.prod(shape))
    eye = np.eye(P).reshape((P,) + tuple(shape))
    out = []
    for m in mults:
        cols = sfft.ifftn(m * sfft.fftn(eye, axes=range(1, eye.ndim), norm="ortho"),
                          axes=range(1, eye.ndim), norm="ortho").reshape(P, P)
        out.append(cols.T)
    return np.array(out)


def _polish(mults, shape, f, sel, ratio):
    """Hill-climb over single-site selection changes using dense frozen norms,
    then return the top right singular vector and the maximal-operator ratio."""
    dense = _dense_ops(mults, shape)
    P, K = dense.shape[1], len(mults)
    rows = np.arange(P)
    s = sel.ravel().copy()
    cur = np.linalg.norm(dense[s, rows, :], 2)
    singles = [(x, k) for x in range(P) for k in range(K)]
    moves = [(m,) for m in singles]
    if P * K <= PAIR_MOVES:
        moves += [(a, b) for a, b in itertools.combinations(singles, 2) if a[0] != b[0]]
    improved = True
    while improved:
        improved = False
        for mv in moves:
            if all(s[x] == k for x, k in mv):
                continue
            t = s.copy()
            for x, k in mv:
                t[x] = k
            v = np.linalg.norm(dense[t, rows, :], 2)
            if v > cur * (1 + 1e-12):
                s, cur, improved = t, v, True
    _, _, vh = np.linalg.svd(dense[s, rows, :])
    g = vh[0].conj().reshape(shape)
    best, _ = _sweep(mults, sfft.fftn(g, norm="ortho"))
    new = _wnorm(best, None) / _wnorm(g, None)
    return (g, new) if new > ratio else (f, ratio)


def estimate_maximal_norm(ops, grid, p: int = 2, iters: int = 60, restarts: int = 4,
                          seed: int = 0, weight=None, domain=None, warm_start=(),
                          tol: float = 1e-6, subset: Optional[DirectionSet] = None,
                          init: Optional[Callable] = None,
                          polish: bool = True) -> NormReport:
    """Alternating-maximization lower bound for ``|| f -> sup_k |T_k f| ||``.

    Parameters
    ----------
    ops : sequence of Symbol or array
        Multipliers ``T_k``; arrays must already be sampled in FFT order.
    grid : Grid or shape tuple
        Raw shapes allow tiny non-power-of-two grids for oracle comparisons.
    weight : array, optional
        Positive weight ``w``; norms are those of ``L^2(w)`` and the frozen
        adjoint is ``W^-1 S^H W``.
    domain : bool array, optional
        Frequency mask restricting the search to spectra inside it.
    warm_start : sequence of arrays
        Extra starting fields tried before the random restarts.
    init : callable, optional
        ``init(rng) -> spatial array`` replacing the default random start.
    polish : bool
        On grids of at most ``POLISH_POINTS`` points, finish every restart
        with a single-site selection search on dense frozen operators.
    """
    if p != 2:
        raise NotImplementedError("only p = 2 is supported")
    shape = _shape_of(grid)
    mults = sample_ops(ops, grid)
    w = None if weight is None else np.asarray(weight, dtype=float)
    D = None if domain is None else np.asarray(domain, dtype=bool)
    if D is not None and not np.any(D):
        raise ValueError("empty frequency domain")
    if D is not None and w is not None:
        raise NotImplementedError("domain restriction is only supported without a weight")
    ss = np.random.SeedSequence(seed)
    starts = [np.asarray(s, dtype=complex) for s in warm_start]
    rngs = [np.random.default_rng(c) for c in ss.spawn(restarts)]

    def random_start(rng):
        if init is not None:
            return np.asarray(init(rng), dtype=complex)
        z = rng.normal(size=shape) + 1j * rng.normal(size=shape)
        return sfft.ifftn(z, norm="ortho")

    best_val, best_f, best_trace, total_iters = -1.0, None, [], 0
    for r in range(len(starts) + restarts):
        f = starts[r] if r < len(starts) else random_start(rngs[r - len(starts)])
        fhat = sfft.fftn(f, norm="ortho")
        if D is not None:
            fhat = fhat * D
        f = sfft.ifftn(fhat, norm="ortho")
        nf = _wnorm(f, w)
        if nf == 0:
            continue
        f, fhat = f / nf, fhat / nf
        val, sel = _sweep(mults, fhat)
        ratio = _wnorm(val, w)
        trace = [ratio]
        for _ in range(iters):
            total_iters += 1
            Sf = _frozen_apply(mults, fhat, sel)
            g = Sf if w is None else Sf * w
            ghat = _frozen_adjoint(mults, g, sel, D)
            h = sfft.ifftn(ghat, norm="ortho")
            if w is not None:
                h = h / w
                ghat = sfft.fftn(h, norm="ortho")
            nh = _wnorm(h, w)
            if nh == 0:
                break
            f, fhat = h / nh, ghat / nh
            val, sel = _sweep(mults, fhat)
            new = _wnorm(val, w)
            trace.append(new)
            done = abs(new - ratio) <= tol * max(ratio, 1e-300)
            ratio = new
            if done:
                break
        if polish and int(np.prod(shape)) <= POLISH_POINTS and w is None and D is None:
            f, ratio = _polish(mults, shape, f, sel, ratio)
            trace.append(ratio)
        if ratio > best_val:
            best_val, best_f, best_trace = ratio, f, trace
    if best_f is None:
        raise ValueError("no admissible starting field")
    est = maximal_ratio(mults, best_f, shape, w, D)
    return NormReport(est, best_f, subset, total_iters, restarts, seed,
                      grid, best_trace)


def brute_force_selection_norm(ops, grid, budget: int = 10**6, weight=None) -> float:
    """Exact norm by enumerating every selection ``x -> k`` on a tiny grid."""
    shape = _shape_of(grid)
    mults = sample_ops(ops, grid)
    P = int(np.prod(shape))
    K = len(mults)
    if K**P > budget:
        raise BudgetExceeded(f"{K}^{P} selections exceed budget {budget}")
    eye = np.eye(P).reshape((P,) + shape)
    dense = []
    for m in mults:
        cols = [sfft.ifftn(m * sfft.fftn(e, norm="ortho"), norm="ortho").ravel() for e in eye]
        dense.append(np.array(cols).T)
    dense = np.array(dense)
    if weight is not None:
        sw = np.sqrt(np.asarray(weight, dtype=float).ravel())
        dense = sw[None, :, None] * dense / sw[None, None, :]
    rows = np.arange(P)
    best = 0.0
    for s in itertools.product(range(K), repeat=P):
        S = dense[list(s), rows, :]
        best = max(best, float(np.linalg.norm(S, 2)))
    return best


def hilbert_family(dset, convention: str = "indicator") -> list[Symbol]:
    members = getattr(dset, "members", dset)
    return [halfspace_symbol(w, convention) for w in members]


def fit_growth(N, y) -> dict:
    """Least-squares fits ``y ~ c sqrt(log N)`` and ``y ~ c log N`` (through the origin)."""
    N = np.asarray(N, dtype=float)
    y = np.asarray(y, dtype=float)
    out = {}
    for name, x in (("sqrtlog", np.sqrt(np.log(N))), ("log", np.log(N))):
        c = float(np.dot(x, y) / np.dot(x, x)) if np.dot(x, x) > 0 else float("nan")
        res = y - c * x
        out[name] = {"c": c, "residuals": res.tolist(), "rss": float(np.dot(res, res))}
    return out


def growth_experiment(generator: Callable[[int], DirectionSet], Ns: Sequence[int],
                      grid: Grid, convention: str = "indicator", iters: int = 40,
                      restarts: int = 3, seed: int = 0, progress=None) -> GrowthTable:
    """Norm estimates of the maximal Hilbert transform over nested sets ``O_N``.

    Each size is warm-started from the previous witness, so with nested
    sets the column is nondecreasing.
    """
    Ns = list(Ns)
    if any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise ValueError("N list must be strictly increasing")
    reps, ests, prev = [], [], None
    for i, N in enumerate(Ns):
        dset = generator(N)
        ops = hilbert_family(dset, convention)
        rep = estimate_maximal_norm(ops, grid, iters=iters, restarts=restarts,
                                    seed=seed + i, warm_start=() if prev is None else (prev,),
                                    subset=dset)
        prev = rep.witness
        reps.append(rep)
        ests.append(rep.estimate)
        if progress:
            progress(N, rep.estimate)
    return GrowthTable(Ns, ests, fit_growth(Ns, ests), reps)


def theta_probe(Omega: DirectionSet, grid: Grid, N: int, weight=None, samples: int = 8,
                iters: int = 30, restarts: int = 2, seed: int = 0,
                convention: str = "indicator") -> float:
    """Max over sampled ``N``-subsets of weighted L2 norm estimates (lower bound)."""
    rng = np.random.default_rng(seed)
    size = min(N, len(Omega))
    combos = list(itertools.combinations(range(len(Omega)), size))
    if len(combos) > samples:
        pick = rng.choice(len(combos), size=samples, replace=False)
        combos = [combos[i] for i in sorted(pick)]
    best = 0.0
    for j, idx in enumerate(combos):
        sub = Omega.subset(idx)
        rep = estimate_maximal_norm(hilbert_family(sub, convention), grid, iters=iters,
                                    restarts=restarts, seed=seed + j, weight=weight)
        best = max(best, rep.estimate)
    return best


def counterexample_build(d: int, N: int):
    """Directions, cell list and tensor-factor specs of the ``2d``-dimensional example.

    Coordinates (1-based ``k``): ``x_{2k-1} = 2**(-2kN)``,
    ``x_{2k} = 2**(-2kN - m_k)``, ``m_k = 1..N``.  Returns
    ``(DirectionSet, list[CellIndex], list[dict])``; the cells are computed
    with :func:`cell_of` on the normalized directions.

    The ratios are exact powers of two, which sit on the closed end of the
    half-open sectors, so ``l_{(2k-1, 2k)} = m_k - 1`` and
    ``l_{(2k-1, 2k+1)} = 2N - 1``.
    """
    if d < 1 or N < 1:
        raise ValueError("need d >= 1 and N >= 1")
    if N <= 10 * d:
        warnings.warn(f"N = {N} is below the asymptotic regime N > 10 d", stacklevel=2)
    if 2 * d * N + N > 1000:
        raise ValueError("exponents underflow double precision")
    n = 2 * d
    vecs, cells, idx = [], [], []
    for ms in itertools.product(range(1, N + 1), repeat=d):
        x = np.empty(n)
        for k in range(1, d + 1):
            x[2 * k - 2] = 2.0 ** (-2 * k * N)
            x[2 * k - 1] = 2.0 ** (-2 * k * N - ms[k - 1])
        w = x / np.linalg.norm(x)
        vecs.append(w)
        cells.append(cell_of(w))
        idx.append(ms)
    for ms, c in zip(idx, cells):
        ok = all(c[(2 * k - 2, 2 * k - 1)] == ms[k - 1] - 1 for k in range(1, d + 1))
        ok &= all(c[(2 * k - 2, 2 * k)] == 2 * N - 1 for k in range(1, d))
        if not ok:
            raise RuntimeError(f"direction {ms} landed in unexpected cell {c}")
    specs = [{"pair": (2 * k - 2, 2 * k - 1), "quadrant": (1, -1),
              "annulus_log2": (-3 * k, -(3 * k - 1)), "ells": list(range(1, N + 1))}
             for k in range(1, d + 1)]
    return DirectionSet(np.array(vecs), basis=np.eye(n)), cells, specs


def quadrant_annulus_mask(grid: Grid, r_min: float = 1.0, r_max: Optional[float] = None):
    """Frequencies with ``xi_1 > 0 > xi_2`` and ``r_min <= |xi| < r_max``."""
    xi = grid.frequencies().astype(float)
    r = np.linalg.norm(xi, axis=-1)
    r_max = grid.side / 2 if r_max is None else r_max
    return (xi[..., 0] > 0) & (xi[..., 1] < 0) & (r >= r_min) & (r < r_max)


def _centered(ells, n: int, center: bool):
    ells = list(ells)
    if not center:
        return ells
    # anisotropic dilation xi_1 -> 2**a xi_1 maps ell to ell - a and leaves norms unchanged
    shift = int(round(np.mean(ells))) - int(round(math.log2(n + 0.5)))
    return [l - shift for l in ells]


def outer_factor_ops(N: int, n: int, center: bool = True) -> list[Symbol]:
    """``1 - kappa^+_{(1,2), m}`` for ``m = 1..N`` in ambient dimension ``n``."""
    ops = []
    for m in _centered(range(1, N + 1), n, center):
        k = kappa((0, 1), m, "+", n)
        ops.append(Symbol(lambda xi, k=k: 1.0 - k(xi), f"1-{k.label}"))
    return ops


def model_outer_norm(d: int, N: int, grid2d: Grid, iters: int = 40, restarts: int = 3,
                     seed: int = 0, center: bool = True, warm_start=(),
                     return_report: bool = False):
    """Product over the ``d`` factors of the 2D norm of
    ``f -> sup_m |(Id - K^+_{(1,2), m}) f|`` with spectra in ``Q_{(1,2)}``.

    All factors are the same operator up to dilation, so one 2D estimate is
    computed and raised to the power ``d``.
    """
    ops = outer_factor_ops(N, 2 * d, center)
    rep = estimate_maximal_norm(ops, grid2d, iters=iters, restarts=restarts, seed=seed,
                                domain=quadrant_annulus_mask(grid2d), warm_start=warm_start)
    val = rep.estimate**d
    return (val, rep) if return_report else val


def two_sided_2d_probe(N: int, grid: Grid, eps: str = "+", iters: int = 40,
                       restarts: int = 3, seed: int = 0, center: bool = True,
                       warm_start=()):
    """``(estimate, estimate / sqrt(log N), report)`` for ``sup_l |K^eps_{(1,2), l} f|``."""
    ops = [kappa((0, 1), l, eps, 2) for l in _centered(range(1, N + 1), 2, center)]
    rep = estimate_maximal_norm(ops, grid, iters=iters, restarts=restarts, seed=seed,
                                domain=quadrant_annulus_mask(grid), warm_start=warm_start)
    scale = math.sqrt(math.log(N)) if N > 1 else float("nan")
    return rep.estimate, rep.estimate / scale, rep


def tensor_consistency(N: int = 4, side: int = 16, seed: int = 0, center: bool = True):
    """Compare factor-wise and direct evaluation on a rank-one field in 4D.

    Returns ``(direct, factorwise)``: the L2 norm of
    ``sup_{m1, m2} |(Id - K_{(1,2), m1})(Id - K_{(3,4), m2}) (f1 x f2)|`` on the
    ``side**4`` grid, and the product of the two 2D norms of the factor sups.
    """
    rng = np.random.default_rng(seed)
    g2 = Grid(2, side)
    g4 = Grid(4, side)
    mask = quadrant_annulus_mask(g2)
    fs = []
    for _ in range(2):
        z = (rng.normal(size=g2.shape) + 1j * rng.normal(size=g2.shape)) * mask
        fs.append(sfft.ifftn(z, norm="ortho"))
    ops = sample_ops(outer_factor_ops(N, 4, center), g2)
    fac = 1.0
    for f in fs:
        best, _ = _sweep(ops, sfft.fftn(f, norm="ortho"))
        fac *= np.linalg.norm(best)
    F = np.einsum("ab,cd->abcd", fs[0], fs[1])
    Fh = sfft.fftn(F, norm="ortho")
    direct = None
    for a in ops:
        for b in ops:
            m = a[:, :, None, None] * b[None, None, :, :]
            v = np.abs(sfft.ifftn(m * Fh, norm="ortho"))
            direct = v if direct is None else np.maximum(direct, v)
    return float(np.linalg.norm(direct)), float(fac)


def write_growth_csv(path, table: GrowthTable):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["N", "estimate", "resid_sqrtlog", "resid_log"])
        for n, e, res in table.rows():
            w.writerow([n, f"{e:.12g}", f"{res['sqrtlog']:.12g}", f"{res['log']:.12g}"])


def plot_growth_svg(path, table: GrowthTable, title: str = "norm growth"):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    N = np.asarray(table.N, dtype=float)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.semilogx(N, table.estimates, "o", label="estimate")
    grid = np.geomspace(max(N.min(), 1.5), N.max(), 100)
    ax.semilogx(grid, table.fits["sqrtlog"]["c"] * np.sqrt(np.log(grid)), "-",
                label="c sqrt(log N)")
    ax.semilogx(grid, table.fits["log"]["c"] * np.log(grid), "--", label="c log N")
    ax.set_xlabel("N")
    ax.set_ylabel("norm estimate")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
