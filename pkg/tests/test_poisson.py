import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from selfsim.errors import NumericalGuardError
from selfsim.measures import LINE, LOGPOS, AtomicMeasure, GridDensity
from selfsim.poisson import (MEMBER, NOT_MEMBER, AtomicKappa, Box, GridKappa, LebesgueKappa,
                             LogNormalKappa, PointConfig, ProductFlowSpec,
                             QuasiInvarianceError, UniformKappa, Window, apply_flow,
                             circular_distance, conjugacy_errors, count_law_rows, count_matrix,
                             cylinder_verify, kappa_from_json, kappa_group_test,
                             orthogonality_report, poisson_pmf, poisson_verify_simple,
                             q_preservation_pvalue, q_transform, sample_poisson, tau_spectral)

LOGN = LogNormalKappa(0.0, 1.0)
DELTA1 = AtomicKappa(AtomicMeasure(((1.0, 1.0),)))


def spec_for(kappa, s=(0.5, 4.0), y=(0.0, 1.0), L=1.0):
    return ProductFlowSpec(kappa, Window(s, y, L))


# --- kappa ------------------------------------------------------------------------

def test_kappa_masses():
    assert LOGN.mass(1.0, math.inf) == pytest.approx(0.5)
    assert UniformKappa(1, 3).mass(0.0, 2.0) == pytest.approx(0.5)
    assert DELTA1.mass(0.5, 2.0) == 1.0 and DELTA1.mass(1.5, 2.0) == 0.0
    assert LebesgueKappa().mass(1.0, 3.5) == 2.5
    grid = GridDensity.from_function(LOGPOS, (-8.0, 8.0), 4096,
                                     lambda t: np.exp(-0.5 * t * t)).normalized()
    gk = GridKappa(grid)
    assert gk.mass(0.0, math.inf) == pytest.approx(1.0, rel=1e-12)
    assert gk.mass(1.0, math.inf) == pytest.approx(0.5, abs=1e-3)


def test_kappa_json():
    for obj in ({"type": "lognormal", "mu": 0.5, "sd": 2.0}, {"type": "uniform", "a": 1, "b": 2},
                {"type": "atoms", "atoms": [[1.0, 0.5], [2.0, 0.5]]}):
        k = kappa_from_json(obj)
        assert kappa_from_json(k.to_json()).to_json() == k.to_json()
    assert kappa_from_json({"type": "delta", "s": 2.0}).mass(1.5, 2.5) == 1.0
    with pytest.raises(ValueError):
        kappa_from_json({"type": "cauchy"})


def test_kappa_sampling_respects_range():
    rng = np.random.default_rng(0)
    for k in (LOGN, UniformKappa(1, 3), LebesgueKappa()):
        s = k.sample(rng, 2000, 1.5, 2.5)
        assert np.all((s >= 1.5) & (s < 2.5))
    s = LOGN.sample(rng, 100_000, 0.0, math.inf)
    assert abs(np.mean(np.log(s))) < 0.02


# --- sampling and the flow ------------------------------------------------------

def test_zero_mass_window_is_empty():
    sp = spec_for(UniformKappa(1, 2), s=(3.0, 4.0))
    for seed in range(20):
        assert len(sample_poisson(sp, seed)) == 0


def test_sample_reproducible_and_inside():
    sp = spec_for(LOGN, y=(0.0, 5.0))
    a, b = sample_poisson(sp, 11), sample_poisson(sp, 11)
    assert np.array_equal(a.points, b.points)
    assert a.inside_window()
    assert sp.intensity() == pytest.approx(LOGN.mass(0.5, 4.0) * 5.0)


def test_count_zero_frequency_unit_mass():
    sp = ProductFlowSpec(DELTA1, Window((0.5, 2.0), (0.0, 1.0), 1.0))
    N = 100_000
    c = count_matrix(sp, [sp.window.box()], N, seed=5)[0, 0]
    p0 = math.exp(-1)
    assert abs(np.mean(c == 0) - p0) < 3 * math.sqrt(p0 * (1 - p0) / N)
    sp2 = ProductFlowSpec(DELTA1, Window((0.5, 2.0), (0.0, 2.0), 1.0))
    c2 = count_matrix(sp2, [sp2.window.box()], N, seed=6)[0, 0]
    p3 = math.exp(-2) * 8 / 6
    assert p3 == pytest.approx(0.18045, abs=1e-5)
    assert abs(np.mean(c2 == 3) - p3) < 3 * math.sqrt(p3 * (1 - p3) / N)


def test_apply_flow_examples():
    sp = spec_for(LOGN, s=(1.0, 3.0))
    cfg = PointConfig([[2.0, 0.0, 0.1]], sp.window)
    assert np.allclose(apply_flow(sp, 0.3, cfg).points, [[2.0, 0.0, 0.7]], atol=1e-15)
    c = sample_poisson(spec_for(LOGN, y=(0, 20)), 3)
    assert np.array_equal(apply_flow(sp, 0.0, c).points, c.points)


def test_flow_group_law_exact_rationals():
    # exact arithmetic check of (z + s t1 + s t2) mod L
    L = Fraction(1)
    for s, z, t1, t2 in [(Fraction(3, 2), Fraction(1, 10), Fraction(2, 7), Fraction(5, 3)),
                         (Fraction(7, 4), Fraction(9, 10), Fraction(-11, 5), Fraction(1, 9))]:
        step = lambda zz, t: (zz + s * t) % L
        assert step(step(z, t2), t1) == step(z, t1 + t2)


@settings(max_examples=50, deadline=None)
@given(st.floats(-50, 50), st.floats(-50, 50), st.integers(0, 10 ** 6))
def test_flow_group_law_float(t1, t2, seed):
    sp = spec_for(LOGN, y=(0.0, 3.0))
    c = sample_poisson(sp, seed)
    a = apply_flow(sp, t1, apply_flow(sp, t2, c)).points
    b = apply_flow(sp, t1 + t2, c).points
    assert np.array_equal(a[:, :2], b[:, :2])
    scale = 1 + np.abs(c.points[:, 0]) * (abs(t1) + abs(t2))
    assert np.all(circular_distance(a[:, 2], b[:, 2], 1.0) <= 1e-12 * scale)


def test_component_separation():
    # a single point only moves in z, at speed s; periods L/s differ by s
    sp = spec_for(LOGN, L=2.0)
    for s in (0.5, 1.0, 2.5):
        cfg = PointConfig([[s, 0.3, 0.0]], sp.window)
        for t in (0.1, 0.7, 1.3):
            p = apply_flow(sp, t, cfg).points[0]
            assert p[0] == s and p[1] == 0.3
            assert p[2] == pytest.approx((s * t) % 2.0, abs=1e-15)
        period = apply_flow(sp, 2.0 / s, cfg).points[0, 2]
        assert circular_distance(period, 0.0, 2.0) < 1e-14


def test_counts_independent_of_workers():
    sp = spec_for(UniformKappa(1, 3), s=(0.5, 4.0), y=(0.0, 2.0))
    K, K2 = Box((1, 2), (0, 1), (0, 1)), Box((2, 3), (0, 1), (0.2, 0.7))
    a = count_matrix(sp, [K, K2], 10_000, 3, (0.0, 0.4), workers=1)
    b = count_matrix(sp, [K, K2], 10_000, 3, (0.0, 0.4), workers=3)
    assert np.array_equal(a, b)


# --- cylinder laws --------------------------------------------------------------

def test_count_law_rows_tail():
    rows = count_law_rows(np.zeros(10_000, dtype=np.int64), 1.0, 3, "K")
    tail = rows[-1]
    assert tail["check_name"] == "c1_tail" and tail["theoretical"] < 1e-7
    assert tail["empirical"] == 0.0 and tail["pass"]
    assert rows[0]["empirical"] == 1.0 and not rows[0]["pass"]


def test_cylinder_verify_rejects_bad_input():
    sp = spec_for(UniformKappa(1, 3))
    K = Box((1, 2), (0, 1), (0, 1))
    with pytest.raises(ValueError):
        cylinder_verify(sp, K, Box((1.5, 2.5), (0, 1), (0, 1)), 10_000, 1)
    with pytest.raises(ValueError):
        cylinder_verify(sp, K, Box((2, 3), (0, 1), (0, 1)), 100, 1)


def test_cylinder_verify_passes():
    sp = spec_for(UniformKappa(1, 3), s=(0.5, 4.0), y=(0.0, 2.0))
    K, K2 = Box((1, 2), (0, 2), (0, 1)), Box((2, 3), (0, 2), (0, 1))
    rows = cylinder_verify(sp, K, K2, 100_000, 17, j_max=8)
    assert all(r["pass"] for r in rows)
    checks = {r["check_name"] for r in rows}
    assert checks == {"c1_count_law", "c1_tail", "c2_covariance", "c2_independence",
                      "flow_invariance_gof"}


def test_simple_verify_shape():
    rows = poisson_verify_simple(1, 4, 100_000, 7)
    assert len(rows) == 5
    assert [r["theoretical"] for r in rows] == [poisson_pmf(1, j) for j in range(5)]
    assert all(r["pass"] for r in rows)


# --- Q ------------------------------------------------------------------------------

def test_q_identity_and_ratio():
    sp = spec_for(LOGN, y=(0.0, 3.0))
    c = sample_poisson(sp, 2)
    assert np.array_equal(q_transform(sp, 1.0, c).points, c.points)
    # D = d kappa / d(kappa o h) at s=1, h=e for the standard lognormal
    assert LOGN.ratio(np.array([1.0]), math.e)[0] == pytest.approx(math.exp(0.5), rel=1e-14)
    t = np.linspace(-3, 3, 13)
    closed = LOGN.ratio(np.exp(t), 2.0)
    generic = super(LogNormalKappa, LOGN).ratio(np.exp(t), 2.0)
    assert np.allclose(closed, generic, rtol=1e-12)


def test_q_inverse_composes_to_identity():
    sp = spec_for(LOGN, y=(0.0, 3.0))
    c = sample_poisson(sp, 4)
    for h in (0.3, 1.7, 5.0):
        back = q_transform(sp, 1 / h, q_transform(sp, h, c)).points
        assert np.allclose(back, c.points, rtol=1e-10, atol=1e-10)


def test_q_undefined_ratio_raises():
    cfg = PointConfig([[1.5, 0.5, 0.0]], Window((1.0, 2.0), (0.0, 1.0)))
    sp = ProductFlowSpec(UniformKappa(1, 2), cfg.window)
    with pytest.raises(QuasiInvarianceError):
        q_transform(sp, 1.5, cfg)
    sp = ProductFlowSpec(DELTA1, cfg.window)
    with pytest.raises(QuasiInvarianceError):
        q_transform(sp, 2.0, PointConfig([[1.0, 0.5, 0.0]], cfg.window))
    with pytest.raises(ValueError):
        q_transform(sp, -1.0, cfg)


def test_conjugacy_small_suite():
    sp = spec_for(LOGN, s=(1e-3, 1e3))
    err = conjugacy_errors(sp, 200, seed=8)
    assert np.all(err["conjugacy"] <= 1e-12)
    assert np.all(err["inverse"] <= 1e-10)


@pytest.mark.parametrize("h", [math.exp(0.5), math.exp(-0.5)])
def test_q_preserves_measure(h):
    assert q_preservation_pvalue(LOGN, h, 100_000, seed=13) > 1e-3


def test_q_with_wrong_density_ratio_is_detected():
    # the reciprocal ratio d(kappa o h)/d kappa does not preserve kappa x Lebesgue
    class Flipped(LogNormalKappa):
        def ratio(self, s, h):
            return 1.0 / LogNormalKappa.ratio(self, s, h)
    assert q_preservation_pvalue(Flipped(0.0, 1.0), math.exp(0.5), 100_000, seed=13) < 1e-6


# --- kappa quasi-invariance ------------------------------------------------------

def test_kappa_group_examples():
    r = kappa_group_test(DELTA1, 2.0)
    assert r["verdict"] == NOT_MEMBER and not r["support_match"] and r["affinity"] == 0
    r = kappa_group_test(UniformKappa(1, 2), 1.5)
    assert r["verdict"] == NOT_MEMBER and not r["support_match"]
    r = kappa_group_test(LOGN, math.e)
    assert r["verdict"] == MEMBER
    assert r["affinity"] == pytest.approx(math.exp(-1 / 8), abs=1e-4)
    assert kappa_group_test(DELTA1, 1.0)["verdict"] == MEMBER
    with pytest.raises(ValueError):
        kappa_group_test(LOGN, 0.0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 20.0))
def test_lognormal_accepts_every_h(h):
    r = kappa_group_test(LOGN, h, grid_count=1 << 12)
    assert r["verdict"] == MEMBER
    assert r["affinity"] == pytest.approx(math.exp(-math.log(h) ** 2 / 8), abs=1e-4)


def test_grid_kappa_group():
    grid = GridDensity.uniform(0.0, 1.0, LOGPOS, (-2.0, 2.0), 1024)
    gk = GridKappa(grid)
    r = kappa_group_test(gk, math.exp(0.5))
    assert not r["support_match"] and r["verdict"] == NOT_MEMBER
    assert r["affinity"] == pytest.approx(math.sqrt(0.5 * 0.5) * 1.0, abs=2e-2)
    smooth = GridKappa(GridDensity.from_function(LOGPOS, (-10.0, 10.0), 4096,
                                                 lambda t: np.exp(-0.5 * t * t) + 1e-3))
    assert kappa_group_test(smooth, 2.0)["verdict"] == MEMBER


# --- tau -------------------------------------------------------------------------------

def test_tau_identity_for_delta():
    g = GridDensity.uniform(-1.0, 1.0, LINE, (-2.0, 2.0), 1024)
    assert np.array_equal(tau_spectral(g, DELTA1, [1.0]).values, g.values)
    atoms = AtomicMeasure(((1.0, 1.0),))
    t = tau_spectral(atoms, DELTA1, [1.0], (0.0, 2.0), 256)
    assert t.weights()[128] == 1.0


def test_tau_atom_uniform_kappa():
    nodes = 1.0 + np.arange(1025) / 1024
    tau = tau_spectral(AtomicMeasure(((1.0, 1.0),)), UniformKappa(1, 2), nodes, (0.0, 4.0), 4096)
    ref = GridDensity.uniform(1.0, 2.0, LINE, (0.0, 4.0), 4096, trapezoid=True)
    assert abs(tau.mass - 1.0) < 1e-6
    assert tau.dx * np.sum(np.abs(tau.values - ref.values)) < 1e-6


def test_tau_mass_is_product():
    g = GridDensity.uniform(-1.0, 1.0, LINE, (-16.0, 16.0), 4096)
    nodes = np.exp(np.linspace(-1.5, 1.5, 31))
    tau = tau_spectral(g, LOGN, nodes)
    assert tau.mass == pytest.approx(g.mass * LOGN.quadrature_weights(nodes).sum(), rel=1e-6)


def test_tau_guards():
    g = GridDensity.uniform(-1.0, 1.0, LINE, (-2.0, 2.0), 1024)
    with pytest.raises(ValueError):
        tau_spectral(g, UniformKappa(1, 2), [0.5, 1.5])
    with pytest.raises(NumericalGuardError):
        tau_spectral(g, UniformKappa(1, 3), [1.0, 2.0, 3.0])


def test_orthogonality_report():
    g = GridDensity.from_function(LINE, (-8.0, 8.0), 4096,
                                  lambda x: np.exp(-0.5 * ((np.abs(x) - 1) / 0.02) ** 2))
    rep = dict(orthogonality_report(g.normalized(), [1.0, 2.0]))
    assert rep[1.0] == pytest.approx(1.0, abs=1e-12)
    assert rep[2.0] < 1e-6
    atoms = AtomicMeasure(((-1.0, 0.5), (1.0, 0.5)))
    assert dict(orthogonality_report(atoms, [2.0]))[2.0] == 0.0


def test_lebesgue_base():
    sp = ProductFlowSpec.lebesgue_base((1.0, 3.0), L=2.0)
    assert sp.improper and sp.intensity() == pytest.approx(4.0)
    cfg = sample_poisson(sp, 5)
    assert np.all(cfg.inside_window())
    with pytest.raises(ValueError):
        kappa_group_test(sp.kappa, 2.0)
