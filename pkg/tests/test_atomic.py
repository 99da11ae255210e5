import numpy as np
import pytest

from sparsedom.atomic import atomic_decomposition, c_dim, level_sets, verify_atomic, whitney
from sparsedom.cz import measured_sq_constant
from sparsedom.dyadic_core import DyadicCube, peetre_square_fn, random_test_function, root_cube


@pytest.mark.parametrize("n,d,kind", [(32, 1, 0), (64, 1, 1), (16, 2, 2), (16, 2, 3)])
def test_reconstruction_and_lemmas(n, d, kind):
    rng = np.random.default_rng(n + kind)
    s0 = root_cube(n, d)
    f = random_test_function(rng, n, d, kind)
    dec = atomic_decomposition(f, s0, 1.5)
    assert np.abs(dec.reconstruct() - f).max() <= 1e-10 * np.abs(f).max()
    recs = verify_atomic(dec, measured_sq_constant(1.5, n, d), seed=kind)
    assert all(r.passed for r in recs), [r for r in recs if not r.passed]


def test_subcube_support():
    rng = np.random.default_rng(5)
    s0 = DyadicCube((16,), 4)
    f = random_test_function(rng, 64, 1, 0) * s0.indicator(64)
    dec = atomic_decomposition(f, s0, 1.2)
    assert np.allclose(dec.reconstruct(), f, atol=1e-12)


def test_level_sets_nested():
    rng = np.random.default_rng(6)
    s0 = root_cube(32, 1)
    ls = level_sets(peetre_square_fn(random_test_function(rng, 32, 1), s0), s0)
    for mu in list(ls.mus)[1:]:
        assert not np.any(ls.omega[mu] & ~ls.omega[mu - 1])
        assert np.all(ls.omega_tilde[mu] >= ls.omega[mu])
        if ls.omega[mu].any():
            assert ls.omega_tilde[mu].sum() <= c_dim(1) * ls.omega[mu].sum()


def test_whitney_tiles_and_separates():
    om = np.zeros((32, 32), dtype=bool)
    om[4:20, 6:30] = True
    fam = whitney(om, 1.0, 12.0, root_cube(32, 2))
    lab = fam.labels(32)
    assert np.array_equal(lab >= 0, om)
    assert sum(q.volume for q in fam.cubes) == om.sum()
    for q, dist, forced in zip(fam.cubes, fam.dist, fam.forced):
        assert forced or dist >= q.diam


def test_whitney_rejects_bad_constant():
    with pytest.raises(ValueError):
        whitney(np.ones(8, dtype=bool), 0.5, 4.0, root_cube(8, 1))
