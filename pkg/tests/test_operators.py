import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lacuna.directions import uniform_set, unit
from lacuna.grid import Field, make_grid
from lacuna.operators import (SegmentSpec, avg_segment, calibrate_cww, cww_probe, directional_average,
                              dyadic_expect, dyadic_radii, hilbert_dir, martingale_sq,
                              maximal_dir, maximal_hilbert, maximal_set, segment_kernel,
                              strong_maximal, strong_maximal_iter, strong_maximal_sq)


def rand_field(rng, g, complex_=False):
    v = rng.normal(size=g.shape)
    if complex_:
        v = v + 1j * rng.normal(size=g.shape)
    return Field(g, v)


def test_hilbert_e1_matches_row_oracle(rng):
    g = make_grid(2, 16)
    f = rand_field(rng, g, True)
    got = hilbert_dir(f, [1.0, 0.0]).values
    # oracle: 1D DFT along axis 0, keep positive frequencies
    c = np.fft.fft(f.values, axis=0)
    k = np.fft.fftfreq(16, 1 / 16)
    want = np.fft.ifft(c * (k > 0)[:, None], axis=0)
    assert np.max(np.abs(got - want)) < 1e-12


def test_maximal_hilbert_examples(rng):
    g = make_grid(2, 4)
    f = rand_field(rng, g, True)
    a, b = unit([1, 2]), unit([2, -1])
    assert np.allclose(maximal_hilbert(f, [a]).values, np.abs(hilbert_dir(f, a).values))
    both = maximal_hilbert(f, [a, b]).values
    want = np.maximum(np.abs(hilbert_dir(f, a).values), np.abs(hilbert_dir(f, b).values))
    assert np.allclose(both, want)
    big = maximal_hilbert(f, [a, b, unit([1, 1])]).values
    assert np.all(big >= both - 1e-15)
    with pytest.raises(ValueError):
        maximal_hilbert(f, np.zeros((0, 2)))


def test_avg_segment_examples():
    g = make_grid(2, 16)
    assert avg_segment(Field(g, np.full(g.shape, 3.0)), SegmentSpec((0.3, 0.2), 0.2, (0.6, 0.8))) == pytest.approx(3.0)
    x = g.coordinates()
    lin = Field(g, x[..., 0] + 2 * x[..., 1])
    # linear along omega inside one period: midpoint value
    v = avg_segment(lin, SegmentSpec((0.5, 0.25), 0.1, (0.6, 0.8)))
    assert v.real == pytest.approx(0.5 + 0.5, abs=1e-12)
    g1 = make_grid(1, 64)
    s = Field(g1, np.sin(2 * np.pi * g1.coordinates()[..., 0]))
    assert abs(avg_segment(s, SegmentSpec((0.0,), 0.25, (1.0,)))) < 1e-15
    with pytest.raises(ValueError):
        SegmentSpec((0, 0), 0.0, (1, 0))


def test_kernel_matches_direct_segment(rng):
    g = make_grid(2, 16)
    f = rand_field(rng, g, True)
    om = unit([0.3, 0.7])
    r = 3 * g.spacing
    conv = directional_average(f, om, r)
    for idx in [(0, 0), (5, 11), (15, 3)]:
        seg = SegmentSpec(np.array(idx) * g.spacing, r, om)
        assert abs(conv[idx] - avg_segment(f, seg)) < 1e-13
    k = segment_kernel(g, om, r)
    assert np.all(k >= 0) and k.sum() == pytest.approx(1.0, abs=1e-14)


def test_maximal_dir_examples():
    g = make_grid(2, 64)
    one = Field(g, np.ones(g.shape))
    assert np.allclose(maximal_set(one, uniform_set(3)).values, 1.0)
    imp = np.zeros(g.shape)
    imp[0, 0] = 1.0
    r = 16 * g.spacing
    # smallest radius reaching past the support of the interpolated impulse
    radii = dyadic_radii(g) + [r + g.spacing]
    v = maximal_dir(Field(g, imp), [1.0, 0.0], radii).values.real
    # interpolant of an impulse integrates to one cell along the line
    want = g.spacing / (2 * r)
    assert abs(v[16, 0] - want) <= 0.1 * want


def test_maximal_dominates_smallest_average(rng):
    g = make_grid(2, 16)
    f = rand_field(rng, g)
    om = unit([1, 3])
    small = np.abs(directional_average(Field(g, np.abs(f.values)), om, g.spacing))
    assert np.all(maximal_dir(f, om).values >= small - 1e-14)


def _brute_strong(a):
    m = a.shape[0]
    sides = [2**j for j in range(m.bit_length())]
    out = np.zeros_like(a)
    for s0, s1 in itertools.product(sides, repeat=2):
        for i0, i1 in itertools.product(range(m), repeat=2):
            ix = np.ix_([(i0 + t) % m for t in range(min(s0, m))],
                        [(i1 + t) % m for t in range(min(s1, m))])
            mean = a[ix].mean()
            for t0 in range(min(s0, m)):
                for t1 in range(min(s1, m)):
                    p = ((i0 + t0) % m, (i1 + t1) % m)
                    out[p] = max(out[p], mean)
    return out


def test_strong_maximal_brute_force(rng):
    g = make_grid(2, 8)
    f = rand_field(rng, g)
    got = strong_maximal(f).values
    assert np.max(np.abs(got - _brute_strong(np.abs(f.values)))) < 1e-12


def test_strong_maximal_basic(rng):
    g = make_grid(3, 8)
    f = rand_field(rng, g)
    assert np.allclose(strong_maximal(Field(g, np.ones(g.shape))).values, 1.0)
    m1 = strong_maximal(f).values
    assert np.all(m1 >= np.abs(f.values))
    assert np.allclose(strong_maximal_sq(f).values, strong_maximal_iter(f, 2).values)
    assert np.all(strong_maximal_iter(f, 2).values >= m1 - 1e-14)


def test_dyadic_expectations(rng):
    g = make_grid(2, 16)
    c = Field(g, np.full(g.shape, 2.5))
    assert np.allclose(dyadic_expect(c, 2).values, 2.5)
    assert np.allclose(martingale_sq(c).values, 0)
    f = rand_field(rng, g)
    for j, k in [(1, 3), (3, 1), (2, 2)]:
        a = dyadic_expect(dyadic_expect(f, j), k).values
        assert np.allclose(a, dyadic_expect(f, min(j, k)).values)
    lhs = np.sum(np.abs(f.values - dyadic_expect(f, 0).values) ** 2)
    rhs = np.sum(martingale_sq(f).values ** 2)
    assert abs(lhs - rhs) <= 1e-10 * lhs
    assert np.array_equal(dyadic_expect(f, g.depth).values, f.values)
    with pytest.raises(ValueError):
        dyadic_expect(f, 9)


def _bandlimited(rng, g, K=6):
    c = np.zeros(g.shape, complex)
    c[:K, :K] = rng.normal(size=(K, K)) + 1j * rng.normal(size=(K, K))
    v = np.fft.ifftn(c).real
    return Field(g, v / np.abs(v).max())


def test_cww_constant_and_calibrated(rng):
    g = make_grid(2, 32)
    lhs, rhs, bad = cww_probe(Field(g, np.ones(g.shape)), 0.5, 1.0)
    assert lhs == 0 and not bad
    train = [(_bandlimited(rng, g), lam, gam) for lam in (0.1, 0.5, 1.0)
             for gam in (0.5, 1.0, 2.0) for _ in range(4)]
    A, b = calibrate_cww(train)
    held = [(_bandlimited(rng, g), lam, gam) for _ in range(100)
            for lam, gam in [(float(rng.choice([0.1, 0.5, 1.0])), float(rng.choice([0.5, 1.0, 2.0])))]]
    viol = sum(cww_probe(f, lam, gam, A=A, b=b)[2] for f, lam, gam in held)
    assert viol == 0
    with pytest.raises(ValueError):
        cww_probe(held[0][0], -1, 1)


def test_cww_set_inclusion(rng):
    # lhs is a subset of {M g > lam} for any gamma
    g = make_grid(2, 32)
    for _ in range(10):
        f = _bandlimited(rng, g)
        lhs, rhs, _ = cww_probe(f, 0.3, 1e6, A=1.0, b=0.0)
        assert lhs <= rhs
