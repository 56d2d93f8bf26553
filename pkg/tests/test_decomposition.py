import itertools

import numpy as np
import pytest

from lacuna.directions import cell_of, pairs, unit
from lacuna.grid import Field, make_grid
from lacuna.decomposition import (annular_bound_check, annular_bound_general, calibrate_represent,
                                  check_inclusion, choose_upsilon, inclusion_exclusion_residual,
                                  nonempty_subsets, octant_of_spectrum, outer_support_check,
                                  proof_constant, represent_bound_check, represent_terms,
                                  spanning_and_cycles, split_residual, write_violations)


def _positive_dirs(rng, n, k):
    return [unit(v) for v in np.abs(rng.normal(size=(k, n))) + 1e-2]


def test_nonempty_subsets():
    assert len(nonempty_subsets(pairs(3))) == 7
    assert len(nonempty_subsets(pairs(4))) == 63


def test_inclusion_2d_and_3d(rng):
    w = unit([1, 1])
    assert len(check_inclusion(w, cell_of(w), make_grid(2, 32))) == 0
    g = make_grid(3, 16)
    for w in _positive_dirs(rng, 3, 100):
        assert len(check_inclusion(w, None, g)) == 0


def test_inclusion_rejects_wrong_cell():
    w = unit([1, 1])
    with pytest.raises(ValueError):
        check_inclusion(w, {(0, 1): 3}, make_grid(2, 8))
    with pytest.raises(ValueError):
        check_inclusion(unit([1, -1]), None, make_grid(2, 8))


def test_inclusion_exclusion(rng):
    assert inclusion_exclusion_residual({(0, 1): 2}, make_grid(2, 32)) == 0.0
    g3 = make_grid(3, 16)
    for _ in range(5):
        cell = {s: int(rng.integers(-3, 4)) for s in pairs(3)}
        assert inclusion_exclusion_residual(cell, g3) < 1e-12
    cell = {s: int(rng.integers(-2, 3)) for s in pairs(4)}
    assert inclusion_exclusion_residual(cell, make_grid(4, 8)) < 1e-12


def test_split_and_outer_support(rng):
    g = make_grid(3, 16)
    f = Field(g, rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape))
    for w in _positive_dirs(rng, 3, 5):
        assert split_residual(f, w) < 1e-12
        counts = outer_support_check(w, None, g)
        assert len(counts) == 8 and all(v == 0 for v in counts.values())


def test_represent_zero_field():
    g = make_grid(2, 16)
    m = represent_bound_check(Field(g, np.zeros(g.shape)), unit([1, 0.3]), 5.0)
    assert np.all(m.values == 0)


def test_represent_single_wedge_frequency():
    # a frequency inside the core wedge of the cell: K_sigma acts as identity
    g = make_grid(2, 32)
    w = unit([1, 0.3])
    l = cell_of(w)[(0, 1)]
    xi = np.array([-3.0, 8.0])
    x = g.coordinates()
    f = Field(g, np.exp(2j * np.pi * (x @ xi)))
    lhs, br = represent_terms(f, w)
    assert np.all(lhs <= br + 1e-12)


def test_literal_representation_fails_pointwise():
    # kappa is even under xi -> -xi while sign(omega . xi) is odd: cos has both
    g = make_grid(2, 32)
    x = g.coordinates()
    f = Field(g, np.cos(2 * np.pi * (12 * x[..., 0] - x[..., 1])))
    w = unit([1, 0.3])
    lhs, br = represent_terms(f, w)
    assert np.max(lhs / np.maximum(br, 1e-14)) > 1e10
    lhs, br = represent_terms(f, w, reference=unit([1, 0.4]))
    assert np.max(lhs / br) < 1


def _bandlimited3(rng, g, K=6):
    c = np.zeros(g.shape, complex)
    idx = np.r_[0:K, -K:0]
    c[np.ix_(idx, idx, idx)] = rng.normal(size=(2 * K,) * 3) + 1j * rng.normal(size=(2 * K,) * 3)
    return Field(g, np.fft.ifftn(c))


def test_represent_calibration_protocol(rng):
    g = make_grid(3, 16)
    w, ref = unit([1.0, 0.55, 0.3]), unit([1.0, 0.6, 0.33])
    assert cell_of(w) == cell_of(ref)
    fs = [_bandlimited3(rng, g) for _ in range(50)]
    C = calibrate_represent(fs[:10], w, reference=ref, safety=1.25)
    assert C <= proof_constant(3)
    for f in fs[10:]:
        assert represent_bound_check(f, w, C, reference=ref).values.real.min() >= 0


def test_proof_constant():
    assert proof_constant(2) == 1 + 4
    assert proof_constant(3) == 7 + 64


def test_choose_upsilon_cases():
    eps = {(0, 1): "+", (0, 2): "-", (1, 2): "+"}
    assert choose_upsilon([(0, 1)], eps, (1, 1, 1))[0] == 0
    assert choose_upsilon([(0, 1), (0, 2)], eps, (1, 1, 1))[0] == 0
    # three pairs, a minus on a same-sign pair: the operator vanishes
    _, _, van = choose_upsilon(list(eps), eps, (1, 1, -1))
    assert not van
    _, _, van = choose_upsilon(list(eps), eps, (1, -1, 1))
    assert van
    ups, red, van = choose_upsilon(list(eps), {s: "+" for s in eps}, (1, -1, 1))
    assert not van and len(red) == 2 and ups in red[0] and ups in red[1]


def _octant_field(rng, g, Q):
    xi = g.frequencies()
    mask = np.all(np.sign(xi) == np.array(Q), axis=-1)
    c = (rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape)) * mask
    return Field(g, np.fft.ifftn(c, norm="ortho"))


def test_octant_detection(rng):
    g = make_grid(3, 8)
    assert octant_of_spectrum(_octant_field(rng, g, (1, -1, 1))) == (1, -1, 1)
    with pytest.raises(ValueError):
        octant_of_spectrum(Field(g, rng.normal(size=g.shape)))


def test_annular_trivial_cases(rng):
    g = make_grid(3, 16)
    f = _octant_field(rng, g, (1, 1, 1))
    # projection band beyond the grid
    r = annular_bound_check(f, [(0, 1)], {(0, 1): "+"}, t=12)
    assert r["ratio"] == 0
    U = pairs(3)
    r = annular_bound_check(f, U, {(0, 1): "-", (0, 2): "+", (1, 2): "+"}, t=2)
    assert r["vanishes"] and r["lhs_max"] < 1e-12
    with pytest.raises(ValueError):
        annular_bound_check(Field(make_grid(2, 8), np.ones((8, 8))), U, {}, 0)


def test_annular_single_pair_stable_in_t(rng):
    g = make_grid(3, 32)
    f = _octant_field(rng, g, (1, -1, 1))
    ratios = [annular_bound_check(f, [(1, 2)], {(1, 2): "+"}, t)["ratio"] for t in range(0, 5)]
    ratios = [r for r in ratios if r > 0]
    assert len(ratios) >= 4 and max(ratios) / min(ratios) < 2


def test_annular_general_runs(rng):
    g = make_grid(2, 16)
    f = Field(g, rng.normal(size=g.shape))
    out = annular_bound_general(f, [(0, 1)], {(0, 1): "+"}, {0: 2})
    assert out["spanning"] == (0,) and out["ratio"] >= 0


def test_spanning_examples():
    odd, _ = spanning_and_cycles([(0, 1), (1, 2), (0, 2)])
    assert odd
    odd, span = spanning_and_cycles([(0, 1), (2, 3)], 4)
    assert not odd and len(span) == 2
    assert len(spanning_and_cycles([(1, 2)], 3)[1]) == 1


def test_spanning_exhaustive_sigma4():
    sig = pairs(4)
    for r in range(len(sig) + 1):
        for U in itertools.combinations(sig, r):
            odd, span = spanning_and_cycles(U, 4)
            if not odd:
                assert len(span) <= 2
            assert all(a in span or b in span for a, b in U)


def test_write_violations(tmp_path):
    write_violations(tmp_path / "v.csv", np.array([[1, -2, 3]]))
    assert (tmp_path / "v.csv").read_text().splitlines()[1] == "1,-2,3"
