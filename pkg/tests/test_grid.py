import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lacuna.grid import (Field, Symbol, apply_multiplier, forward_transform, inverse_transform,
                         make_grid, read_field, write_field, write_field_csv)
from lacuna.symbols import halfspace_symbol


def test_make_grid_examples():
    g = make_grid(2, 8, 1.0)
    assert g.size == 64
    k = g.axis_frequencies()
    assert k.min() == -4 and k.max() == 3
    assert sorted(make_grid(1, 4).axis_frequencies()) == [-2, -1, 0, 1]
    assert make_grid(3, 16).size == 4096


@pytest.mark.parametrize("dim,side", [(0, 8), (5, 4), (2, 6), (2, 12)])
def test_make_grid_rejects(dim, side):
    with pytest.raises(ValueError):
        make_grid(dim, side)


def test_zero_index_is_constant_mode():
    g = make_grid(2, 8)
    s = forward_transform(Field(g, np.ones(g.shape)))
    assert abs(s.coeffs.flat[0]) == pytest.approx(8.0)
    assert np.allclose(s.coeffs.flat[1:], 0, atol=1e-13)


def test_impulse_flat_spectrum():
    g = make_grid(2, 8)
    v = np.zeros(g.shape)
    v[0, 0] = 1
    c = forward_transform(Field(g, v)).coeffs
    assert np.allclose(np.abs(c), np.abs(c.flat[0]))


def test_naive_dft_oracle(rng):
    g = make_grid(1, 8)
    f = rng.normal(size=8) + 1j * rng.normal(size=8)
    n = np.arange(8)
    naive = np.array([np.sum(f * np.exp(-2j * np.pi * k * n / 8)) for k in range(8)]) / np.sqrt(8)
    got = forward_transform(Field(g, f)).coeffs
    assert np.max(np.abs(got - naive)) < 1e-12


@settings(max_examples=40, deadline=None)
@given(side=st.sampled_from([4, 8, 16, 32]), dim=st.integers(1, 2),
       seed=st.integers(0, 2**31))
def test_plancherel_and_roundtrip(side, dim, seed):
    r = np.random.default_rng(seed)
    g = make_grid(dim, side)
    f = Field(g, r.normal(size=g.shape) + 1j * r.normal(size=g.shape))
    s = forward_transform(f)
    assert abs(s.norm() - f.norm()) <= 1e-10 * f.norm()
    back = inverse_transform(s)
    assert np.linalg.norm(back.values - f.values) <= 1e-10 * np.linalg.norm(f.values)


def test_multiplier_identity_zero_and_projection(rng):
    g = make_grid(2, 16)
    f = Field(g, rng.normal(size=g.shape))
    one = Symbol(lambda xi: np.ones(xi.shape[:-1]))
    zero = Symbol(lambda xi: np.zeros(xi.shape[:-1]))
    assert np.allclose(apply_multiplier(f, one).values, f.values, atol=1e-12)
    assert np.all(apply_multiplier(f, zero).values == 0)
    h = halfspace_symbol([0.6, 0.8])
    once = apply_multiplier(f, h)
    twice = apply_multiplier(once, h)
    assert np.max(np.abs(once.values - twice.values)) < 1e-12


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_composition_equals_product(seed):
    r = np.random.default_rng(seed)
    g = make_grid(2, 8)
    f = Field(g, r.normal(size=g.shape))
    a, b = r.normal(size=2), r.normal(size=2)
    m1 = Symbol(lambda xi: np.cos(xi @ a))
    m2 = Symbol(lambda xi: np.sin(xi @ b) + 2)
    lhs = apply_multiplier(apply_multiplier(f, m1), m2)
    rhs = apply_multiplier(f, m1 * m2)
    assert np.max(np.abs(lhs.values - rhs.values)) < 1e-10


def test_nan_symbol_rejected():
    g = make_grid(1, 8)
    bad = Symbol(lambda xi: np.full(xi.shape[:-1], np.nan))
    with pytest.raises(ValueError):
        apply_multiplier(Field(g, np.ones(8)), bad)


def test_field_io_roundtrip(tmp_path, rng):
    g = make_grid(2, 8, 2.0)
    f = Field(g, rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape))
    write_field(tmp_path / "f.lacf", f)
    h = read_field(tmp_path / "f.lacf")
    assert h.grid == g
    assert np.array_equal(h.values, f.values)
    write_field_csv(tmp_path / "f.csv", f)
    assert (tmp_path / "f.csv").read_text().count("\n") == 65


def test_field_shape_mismatch():
    with pytest.raises(ValueError):
        Field(make_grid(2, 8), np.zeros((4, 4)))
