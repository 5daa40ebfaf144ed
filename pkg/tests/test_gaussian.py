import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from selfsim import _kernels
from selfsim.errors import NumericalGuardError
from selfsim.gaussian import (atomic_mixing_limit, covariance, exp_prime, exp_truncation_bound,
                              lattice_pair_sinc_mean, mixing_diagnostic, quantize_half,
                              quantized_covariance, sample_paths, sample_process,
                              spectral_selfsim_test)
from selfsim.lift import LiftSpec, build_sigma, standard_lift
from selfsim.measures import LINE, AtomicMeasure, GridDensity, pushforward
from selfsim.riesz import RieszSpec

TWO_ATOMS = AtomicMeasure(((-1.0, 0.5), (1.0, 0.5)))


def bimodal(n=4096, sd=0.3, window=(-8.0, 8.0)):
    f = lambda x: np.exp(-0.5 * ((np.abs(x) - 1) / sd) ** 2)
    return GridDensity.from_function(LINE, window, n, f).normalized()


def uniform_pm1(n=1 << 14):
    return GridDensity.uniform(-1.0, 1.0, LINE, (-2.0, 2.0), n, trapezoid=True)


# --- exp' ----------------------------------------------------------------------

def test_exp_two_atoms_oracle():
    f = TWO_ATOMS.rasterize(LINE, (-4.0, 4.0), 256)
    ex = exp_prime(f, 2)
    w = ex.sum.weights()
    at = lambda x: w[np.isclose(ex.sum.nodes, x)][0]
    assert at(0.0) == pytest.approx(0.25, abs=1e-15)
    assert at(2.0) == pytest.approx(0.125, abs=1e-15)
    assert at(1.0) == pytest.approx(0.5, abs=1e-15)
    sq = ex.terms[1].weights()
    assert sq[np.isclose(ex.sum.nodes, -2.0)][0] == pytest.approx(0.125, abs=1e-15)


def test_exp_mass_and_symmetry():
    ex = exp_prime(bimodal(), 12)
    partial = math.fsum(1 / math.factorial(p) for p in range(1, 13))
    assert abs(ex.sum.mass - partial) < 1e-8
    assert 0 <= math.e - 1 - ex.sum.mass <= ex.truncation_bound + 1e-8
    v = ex.sum.values
    assert np.array_equal(v, v[ex.sum.mirror_index()])
    assert len(ex.terms) == 12
    for p, t in enumerate(ex.terms, start=1):
        assert t.mass == pytest.approx(1 / math.factorial(p), rel=1e-9)


def test_truncation_bound():
    assert exp_truncation_bound(12) == pytest.approx(math.e - math.fsum(
        1 / math.factorial(p) for p in range(13)), rel=1e-6)
    assert exp_truncation_bound(12) < 5e-10


def test_exp_window_guard():
    with pytest.raises(NumericalGuardError, match="convolution window truncation"):
        exp_prime(bimodal(), 4, window=(-2.0, 2.0))


def test_exp_input_checks():
    with pytest.raises(TypeError):
        exp_prime(TWO_ATOMS, 3)
    with pytest.raises(ValueError):
        exp_prime(bimodal(256), 0)


# --- covariance -------------------------------------------------------------------

def test_covariance_closed_forms():
    ts = np.array([0.0, math.pi / 2, math.pi])
    assert np.allclose(covariance(TWO_ATOMS, ts), np.cos(ts), atol=1e-15)
    assert covariance(uniform_pm1(), math.pi) == pytest.approx(0.0, abs=1e-8)
    assert covariance(uniform_pm1(), 0.0) == pytest.approx(1.0, abs=1e-12)


def test_covariance_of_sigma_measure():
    spec = LiftSpec(RieszSpec.factorial(3), 2, 3, 64)
    sigma = build_sigma(standard_lift(spec))
    assert covariance(sigma, 0.0) == pytest.approx(sigma.mass, rel=1e-12)
    r = covariance(sigma, np.linspace(0, 20, 50))
    assert np.all(np.abs(r) <= sigma.mass + 1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-20, 20), min_size=2, max_size=8))
def test_covariance_positive_definite(times):
    sigma = bimodal(1024)
    t = np.asarray(times)
    r = covariance(sigma, (t[:, None] - t[None, :]).ravel()).reshape(len(t), len(t))
    assert np.linalg.eigvalsh(r).min() > -1e-8


@pytest.mark.parametrize("s", [0.5, 2.0, -3.0])
def test_covariance_scaling_law(s):
    sigma = bimodal(2048)
    scaled = pushforward(sigma, "scale", s)
    for t in (0.3, 1.1, 4.0):
        assert covariance(scaled, t) == pytest.approx(covariance(sigma, s * t), abs=1e-7)


# --- mixing ------------------------------------------------------------------------

def test_mixing_examples():
    assert mixing_diagnostic(TWO_ATOMS, 100 * math.pi) == pytest.approx(0.5, abs=1e-3)
    assert atomic_mixing_limit(TWO_ATOMS) == 0.5
    assert mixing_diagnostic(uniform_pm1(4096), 1000.0) < 0.01
    with pytest.raises(ValueError):
        mixing_diagnostic(TWO_ATOMS, 0.0)


def test_mixing_matches_quadrature():
    sigma = bimodal(512)
    T = 30.0
    t = np.linspace(0, T, 200001)
    r2 = covariance(sigma, t) ** 2
    quad = integrate.trapezoid(r2, t) / T
    assert mixing_diagnostic(sigma, T) == pytest.approx(quad, abs=1e-8)


@pytest.mark.parametrize("T", [0.5, 30.0, 1000.0])
def test_lattice_mixing_matches_pairwise(T):
    for sigma in (bimodal(1024), uniform_pm1(1024)):
        pair = _kernels.pair_sinc_mean(sigma.nodes, sigma.weights(), T)
        assert lattice_pair_sinc_mean(sigma, T) == pytest.approx(pair, rel=1e-9, abs=1e-13)


def test_mixing_doubling_never_increases_uniform():
    sigma = uniform_pm1(4096)
    vals = [mixing_diagnostic(sigma, T) for T in (10.0, 20.0, 40.0, 80.0, 160.0, 320.0)]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


# --- simulation -----------------------------------------------------------------

def test_constant_path_for_zero_frequency():
    delta = AtomicMeasure(((0.0, 1.0),))
    p = sample_process(delta, np.linspace(0, 10, 11), 16, seed=3)
    assert np.all(p.values == p.values[0])


def test_process_reproducible_and_shapes():
    t = np.linspace(0, 5, 21)
    a = sample_process(bimodal(1024), t, 64, seed=9)
    b = sample_process(bimodal(1024), t, 64, seed=9)
    assert np.array_equal(a.values, b.values)
    assert a.values.shape == t.shape and a.mode_count == 64


def test_paths_independent_of_workers():
    t = np.linspace(0, 3, 7)
    a = sample_paths(bimodal(1024), t, 64, 5, 3000, workers=1)
    b = sample_paths(bimodal(1024), t, 64, 5, 3000, workers=4)
    assert np.array_equal(a, b)
    one = sample_process(bimodal(1024), t, 64, 5, path=2017).values
    assert np.array_equal(a[2017], one)


def test_variance_and_lag_pi():
    N = 10_000
    X = sample_paths(TWO_ATOMS, np.array([0.0, math.pi]), 16, 21, N)
    var = np.mean(X[:, 0] ** 2)
    assert abs(var - 1.0) < 3 * math.sqrt(2 / N)
    cov = np.mean(X[:, 0] * X[:, 1])
    assert abs(cov + 1.0) < 4 * math.sqrt(2 / N)


def test_sampling_preconditions():
    with pytest.raises(ValueError):
        sample_process(TWO_ATOMS, [0.0], 8, 1)
    with pytest.raises(ValueError):
        sample_process(AtomicMeasure(((-1.0, 1.0), (1.0, 1.0))), [0.0], 16, 1)
    with pytest.warns(RuntimeWarning):
        sample_process(uniform_pm1(4096), np.array([0.0, 500.0]), 16, 1)


def test_quantization_preserves_mass_and_covariance():
    sigma = bimodal(4096)
    f, w, w0, width = quantize_half(sigma, 512)
    assert 2 * w.sum() + w0 == pytest.approx(1.0, rel=1e-12)
    t = np.linspace(0, 5, 9)
    assert np.allclose(quantized_covariance(sigma, 512, t), covariance(sigma, t), atol=1e-4)


# --- self-similarity ----------------------------------------------------------

def test_selfsim_identity():
    r = spectral_selfsim_test(bimodal(), 1.0, P_max=4)
    assert r["affinity_sigma"] == pytest.approx(1.0, abs=1e-12)
    assert r["affinity_exp"] == pytest.approx(1.0, abs=1e-12)


def test_selfsim_narrow_bump_disjoint():
    narrow = bimodal(4096, sd=0.02)
    r = spectral_selfsim_test(narrow, 2.0, P_max=3)
    assert r["affinity_sigma"] < 1e-6


def test_selfsim_reciprocal_symmetry():
    sigma = bimodal(1 << 14)
    ex = exp_prime(sigma, 6).sum
    for s in (1.5, 2.0):
        a = spectral_selfsim_test(sigma, s, exp_sum=ex)
        b = spectral_selfsim_test(sigma, 1 / s, exp_sum=ex)
        c = spectral_selfsim_test(sigma, -s, exp_sum=ex)
        assert abs(a["affinity_sigma"] - b["affinity_sigma"]) < 1e-6
        assert a == c
    with pytest.raises(ValueError):
        spectral_selfsim_test(sigma, 0.0)


def test_selfsim_window_guard():
    u = GridDensity.uniform(-1.0, 1.0, LINE, (-2.0, 2.0), 1024)
    with pytest.raises(NumericalGuardError, match="scaled measure leaves the window"):
        spectral_selfsim_test(u, 2.5, P_max=1)
