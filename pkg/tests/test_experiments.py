import numpy as np
import pytest

from sparsedom.dyadic_core import DyadicCube
from sparsedom.experiments import (
    ExperimentConfig,
    exp_single_scale,
    exp_sparse_ratio,
    exp_stationary_phase,
    fit_exponent,
    parse_config_text,
    run_experiment,
)
from sparsedom.multiplier_ops import frequency_levels, apply_truncated, oscillatory


def test_fit_exact_power():
    f = fit_exponent([(x, x**2) for x in (1, 2, 4, 8, 16)])
    assert f.slope == pytest.approx(2.0) and f.residual == pytest.approx(0, abs=1e-12)
    assert fit_exponent([(x, 3.0) for x in (1, 2, 3, 4)]).slope == pytest.approx(0, abs=1e-12)


def test_fit_noisy_power():
    rng = np.random.default_rng(0)
    xs = 2.0 ** np.arange(1, 12)
    f = fit_exponent([(x, x**1.5 * (1 + 0.05 * rng.uniform(-1, 1))) for x in xs])
    assert abs(f.slope - 1.5) < 0.05
    assert f.residual > 0


def test_fit_rejects_bad_input():
    with pytest.raises(ValueError):
        fit_exponent([(1, 1), (2, 2), (3, 3)])
    with pytest.raises(ValueError):
        fit_exponent([(1, 1), (2, 0), (3, 3), (4, 4)])


def test_config_parsing():
    cfg = parse_config_text("a = 2\n# note\nt=4,8,16\ncoeffs=-1:1,0:0.5\nq=inf\nname=foo\n")
    assert cfg == {"a": 2, "t": [4, 8, 16], "coeffs": {-1: 1, 0: 0.5}, "q": np.inf, "name": "foo"}
    with pytest.raises(ValueError):
        parse_config_text("no equals sign")


def test_parameter_validation():
    with pytest.raises(ValueError):
        exp_stationary_phase(ExperimentConfig("stationary_phase", {"a": 1.0, "b": 0.0}))
    with pytest.raises(ValueError):
        exp_stationary_phase(ExperimentConfig("stationary_phase", {"t": [2, 4, 8]}))
    with pytest.raises(ValueError):
        exp_stationary_phase(ExperimentConfig("stationary_phase", {"t": [2.0**e for e in range(10, 15)]}))
    with pytest.raises(ValueError):
        run_experiment("sparse_ratio", {"b": 1.5})
    with pytest.raises(ValueError):
        run_experiment("radial_bump", {"delta": 2.0**-20})
    with pytest.raises(ValueError):
        run_experiment("necessity", {"N1": [2, 4]})
    with pytest.raises(ValueError):
        run_experiment("unknown")


def test_stationary_phase_small():
    r = run_experiment("stationary_phase", {"a": 2, "b": 0, "t": [4, 8, 16, 32, 64]})
    assert abs(r.fits["peak"].slope + 1.0) < 0.15
    assert r.csv().startswith("param,value\n")


def test_single_scale_zero_symbol():
    r = exp_single_scale(ExperimentConfig("single_scale", {"symbol": "zero", "J": 7, "seeds": 2}))
    assert all(row[3] == 0 for row in r.rows)


def test_single_scale_bounded():
    r = run_experiment("single_scale", {"J": 9, "seeds": 3})
    ratios = [row[3] for row in r.rows]
    assert max(ratios) < 10 * min(ratios)


def test_sparse_ratio_frequency_disjoint_f2():
    # every band piece vanishes at frequency zero, so a constant f2 pairs to zero
    n, d = 256, 1
    F = frequency_levels(n, d)
    s0 = DyadicCube((64,), 6)
    f1 = np.random.default_rng(0).normal(size=n) * s0.indicator(n)
    tf = apply_truncated(f1, oscillatory(2.0, 0.5).on_grid(n, d, 64.0), 2, 6, F)
    f2 = np.ones(n)
    assert np.linalg.norm(tf) > 0
    assert abs(np.sum(tf * f2)) <= 1e-12 * np.linalg.norm(tf) * np.sqrt(n)


def test_sparse_ratio_small_runs_and_is_deterministic():
    params = {"J": 9, "N2": 7, "spans": [0, 2], "seeds": 2, "ell_max": 3, "budget": 8}
    a = run_experiment("sparse_ratio", params, seed=5).csv()
    b = run_experiment("sparse_ratio", params, seed=5).csv()
    assert a == b
    assert "lower estimates" in a


def test_radial_knee_tracks_delta():
    r = run_experiment("radial_bump", {"delta": [2.0**-5, 2.0**-6, 2.0**-7]})
    offsets = [r.summary[f"knee_offset_delta{2.0**-e:g}"] for e in (5, 6, 7)]
    # knee at 2^ell ~ C / delta: a fixed offset from log2(1/delta)
    assert len(set(offsets)) == 1 and 0 < offsets[0] <= 6
    for f in r.fits.values():
        assert abs(f.slope + 0.5) < 0.15


def test_necessity_second_branch():
    r = run_experiment("necessity", {"N1": [2, 4, 6, 8], "N2": [3, 5, 7, 9], "min_sep": 0.5, "pairs": ["2/2", "1/2"]})
    for key in ("N2_p2_q2", "N2_p1_q2"):
        assert abs(r.fits[key].slope - r.expected[key]) < 0.1
