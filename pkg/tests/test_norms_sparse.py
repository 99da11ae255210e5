import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparsedom.dyadic_core import DyadicCube, random_test_function
from sparsedom.multiplier_ops import (
    PAIR,
    PhysicalGrid,
    chi_bump,
    constant,
    oscillatory,
    piece_kernel,
)
from sparsedom.norms_sparse import (
    NormEstimate,
    RadialKernel,
    SparseFamily,
    akl,
    akl_table,
    brute_lambda_star,
    carleson_sums,
    conjugate,
    greedy_lambda_star,
    grid_akl,
    holder_lift,
    lambda_double_star,
    mpq_norm,
    sparse_form,
    young_exponent,
)


def _sym(seed, n=64, d=1):
    rng = np.random.default_rng(seed)
    return np.fft.fftn(rng.normal(size=(n,) * d) * np.exp(-0.2 * np.arange(n) ** 2 if d == 1 else 0))


def test_conjugate_and_young():
    assert conjugate(1) == np.inf and conjugate(np.inf) == 1 and conjugate(4 / 3) == pytest.approx(4)
    assert young_exponent(1, 3) == pytest.approx(3)
    assert young_exponent(2, np.inf) == 2
    assert young_exponent(1.5, 3) == pytest.approx(1.5)


def test_exact_cases():
    s = _sym(0)
    e = mpq_norm(s, 2, 2)
    assert e.exact and e.lower == pytest.approx(np.abs(s).max())
    K = np.fft.ifft(s)
    e = mpq_norm(s, 1, 3)
    assert e.exact and e.lower == pytest.approx(np.sum(np.abs(K) ** 3) ** (1 / 3))
    e = mpq_norm(s, 1.5, np.inf)
    assert e.exact and e.lower == pytest.approx(np.sum(np.abs(K) ** 3) ** (1 / 3))


@pytest.mark.parametrize("p,q", [(2, 2), (1, 2), (1.5, np.inf)])
def test_probe_path_recovers_exact_values(p, q):
    s = _sym(3)
    exact = mpq_norm(s, p, q).lower
    probe = mpq_norm(s, p, q, shortcuts=False)
    assert probe.lower <= exact * (1 + 1e-12)
    assert probe.lower >= 0.95 * exact


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.floats(1.0, 2.0), st.floats(0.0, 1.0))
def test_lower_never_exceeds_young(seed, p, t):
    q = p + t * 4
    e = mpq_norm(_sym(seed, 32), p, q, budget=16, steps=5)
    assert 0 <= e.lower <= e.upper * (1 + 1e-12)


def test_norm_estimate_validates():
    with pytest.raises(ValueError):
        NormEstimate(2.0, 1.0, "probe", "young")
    with pytest.raises(ValueError):
        mpq_norm(_sym(0), 3, 2)


def test_grid_akl_matches_direct_piece():
    n, d = 128, 1
    m = oscillatory(2.0, 0.5)
    for k, ell in [(-3, 1), (-2, 3), (-1, 2)]:
        direct = np.abs(np.fft.fftn(piece_kernel(m, n, d, k, ell - k))).max()
        est = grid_akl(m, n, d, k, ell, 2, 2, 2)
        assert est.lower == pytest.approx(direct, rel=1e-10)


def test_akl_weight_and_table():
    m = constant(1.0)
    a1 = akl(m, 0, 2, 1.0, 2.0, 2.0, d=1)
    a2 = akl(m, 0, 2, 2.0, 2.0, 2.0, d=1)
    assert a1.lower == pytest.approx(a2.lower * 2.0 ** (2 * 0.5))
    with pytest.raises(ValueError):
        akl(m, 0, 1, 2.0, 1.5, 2.0, d=1)
    tab = akl_table(m, [0], 1, 2, 2, 2, d=1)
    assert tab.to_csv().splitlines()[0] == "k,ell,lower,upper,method_lower,method_upper"
    assert len(tab.entries) == 2


def test_radial_kernel_matches_fft():
    prof = lambda rho: chi_bump((1 - np.asarray(rho)) / 0.25) * PAIR.phi(rho)
    K = RadialKernel(prof, 0.875, 1.125, 40.0)
    # the slowly decaying kernel needs a wide box before periodic images fade
    g = PhysicalGrid(1024, 2, 0.5)
    w = g.omega_abs()
    fft_k = g.kernel(prof(w)).real
    r = g.radius()
    sel = r < 30
    assert np.abs(K(r[sel]) - fft_k[sel]).max() < 2e-5 * np.abs(fft_k).max()


def test_sparse_form_hand_value():
    f1 = np.array([1.0, 3.0, 0, 0, 0, 0, 0, 0])
    f2 = np.array([2.0, 2.0, 0, 0, 0, 0, 0, 0])
    q = DyadicCube((0,), 1)
    assert sparse_form([q], f1, f2, 1, 1) == pytest.approx(2 * 2 * 2)
    assert sparse_form([q], f1, f2, 2, 1) == pytest.approx(2 * np.sqrt(5) * 2)


def test_carleson_and_family():
    cubes = [DyadicCube((0,), 2), DyadicCube((0,), 1), DyadicCube((0,), 0)]
    sums = carleson_sums(cubes)
    assert sums[cubes[0]] == 4 + 2 + 1
    assert SparseFamily(tuple(cubes), 0.5).is_packed()
    assert not SparseFamily(tuple(cubes), 0.6).is_packed()


def test_dp_equals_brute_force_small():
    rng = np.random.default_rng(0)
    for s in range(20):
        f1 = random_test_function(rng, 8, 1, s % 4)
        f2 = random_test_function(rng, 8, 1, (s + 1) % 4)
        val, fam = greedy_lambda_star(f1, f2, 1.5, 1.2, 0.5)
        assert fam.is_packed()
        assert val == pytest.approx(sparse_form(fam, f1, f2, 1.5, 1.2))
        assert val == pytest.approx(brute_lambda_star(f1, f2, 1.5, 1.2, 0.5), rel=1e-9)


def test_brute_force_guard():
    with pytest.raises(ValueError):
        brute_lambda_star(np.ones(32), np.ones(32), 1, 1, 0.5)


def test_lambda_double_star_stays_in_s0():
    rng = np.random.default_rng(4)
    s0 = DyadicCube((16,), 4)
    f1 = random_test_function(rng, 64, 1) * s0.indicator(64)
    f2 = random_test_function(rng, 64, 1) * s0.dilate_mask(3, 64, periodic=True)
    val, fam = lambda_double_star(f1, f2, s0, 1.5, 1.3)
    assert val > 0 and fam.is_packed()
    assert all(s0.contains(q) for q in fam.cubes)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.floats(1.0, 2.0), st.floats(0.0, 3.0))
def test_holder_lift(seed, p, t):
    q = p + t
    rng = np.random.default_rng(seed)
    cubes = [DyadicCube((0,), 3), DyadicCube((8,), 2), DyadicCube((16,), 4)]
    pieces = []
    for c in cubes:
        f = np.zeros(32, dtype=complex)
        f[c.slices] = rng.normal(size=c.side) * np.exp(rng.normal())
        pieces.append((c, f))
    lhs, rhs = holder_lift(pieces, p, q)
    assert lhs <= rhs * (1 + 1e-12)


def test_identity_pieces_decay_in_the_tail():
    # the smooth cutoff's kernel decays slowly at first; the fast regime starts near ell = 8
    vals = [akl(constant(1.0), 0, ell, 2, 2, 2, d=1).lower for ell in range(8, 12)]
    assert all(a >= 4 * b for a, b in zip(vals, vals[1:]))
