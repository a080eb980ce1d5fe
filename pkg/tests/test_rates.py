"""Signal/noise quantities against closed forms and brute-force oracles."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from mlsbm.model import ModelParams
from mlsbm.rates import (global_snr, individual_snr_J, info_curve, j_rho,
                         layer_info, minimize_global_snr,
                         minimize_individual_snr, psi_star, rate_report)


def random_pq(rng, L):
    p = rng.uniform(0.05, 0.95, size=L)
    q = p * rng.uniform(0.05, 0.9, size=L)
    return p, q


# ---------------------------------------------------------------------------
# noise level J

def test_j_rho_frozen_value():
    assert j_rho(0.25) == pytest.approx(0.14384103622589045, abs=1e-15)
    assert j_rho(0.5 - 1e-12) == pytest.approx(0.0, abs=1e-9)


def test_j_rho_floor_and_validation():
    assert math.isinf(j_rho(0.0))
    assert math.isinf(j_rho(1e-8))
    assert math.isfinite(j_rho(1.1e-8))
    with pytest.raises(ValueError):
        j_rho(-0.1)
    with pytest.raises(ValueError):
        j_rho(1.0)


@given(st.floats(1e-6, 0.4999))
@settings(max_examples=100, deadline=None)
def test_j_rho_matches_direct_formula(rho):
    assert j_rho(rho) == pytest.approx(oracles.j_noise(rho), rel=1e-14)
    assert j_rho(rho) > 0.0


# ---------------------------------------------------------------------------
# per-layer signal strength I_t

def test_layer_info_exact_zero_at_endpoints():
    for p, q in [(0.5, 0.1), (0.999, 0.001), (0.2, 0.19)]:
        assert layer_info(p, q, 0.0) == 0.0
        assert layer_info(p, q, 1.0) == 0.0


def test_layer_info_symmetry_and_interior_max():
    ts = np.linspace(0.0, 1.0, 1001)
    for p, q in [(0.5, 0.1), (0.9, 0.3), (0.05, 0.01)]:
        vals = info_curve([p], [q], ts)[:, 0]
        assert np.allclose(vals, vals[::-1], atol=1e-12)
        assert np.argmax(vals) == 500
        assert vals[500] > 0.0


def test_layer_info_small_probability_approximation():
    # at sparse p, q the peak approaches the Hellinger-style limit
    p, q = 1e-3, 5e-4
    ratio = layer_info(p, q, 0.5) / (math.sqrt(p) - math.sqrt(q)) ** 2
    assert 0.99 <= ratio <= 1.01


def test_layer_info_rejects_t_out_of_range():
    with pytest.raises(ValueError):
        layer_info(0.5, 0.1, -0.1)
    with pytest.raises(ValueError):
        layer_info(0.5, 0.1, 1.5)


@given(st.floats(0.02, 0.98), st.floats(0.01, 0.9), st.floats(0.0, 1.0))
@settings(max_examples=200, deadline=None)
def test_layer_info_matches_oracle_and_is_nonnegative(p, frac, t):
    q = p * frac
    got = layer_info(p, q, t)
    assert got >= 0.0
    if 0.0 < t < 1.0:
        assert got == pytest.approx(max(0.0, oracles.info_term(p, q, t)),
                                    rel=1e-12, abs=1e-14)


@given(st.floats(0.05, 0.95), st.floats(0.05, 0.85))
@settings(max_examples=100, deadline=None)
def test_layer_info_concave_on_grid(p, frac):
    q = p * frac
    ts = np.linspace(0.0, 1.0, 201)
    vals = info_curve([p], [q], ts)[:, 0]
    second = vals[:-2] - 2 * vals[1:-1] + vals[2:]
    assert np.all(second <= 1e-10)


def test_info_curve_matches_layer_info_per_entry():
    rng = np.random.default_rng(0)
    p, q = random_pq(rng, 4)
    ts = np.array([0.0, 0.21, 0.5, 0.77, 1.0])
    grid = info_curve(p, q, ts)
    assert grid.shape == (5, 4)
    for i, t in enumerate(ts):
        for ell in range(4):
            assert grid[i, ell] == pytest.approx(
                layer_info(p[ell], q[ell], t), rel=1e-12, abs=1e-14)


# ---------------------------------------------------------------------------
# conjugate psi*

def test_psi_star_edge_cases():
    p = np.array([0.5, 0.4])
    q = np.array([0.1, 0.05])
    assert psi_star((), 3.0, 10, p, q) == (3.0, 1.0)
    assert psi_star((), -3.0, 10, p, q) == (0.0, 0.0)
    assert psi_star((0, 1), -math.inf, 10, p, q) == (0.0, 0.0)


def test_psi_star_zero_argument_exact_identity():
    p = np.array([0.5, 0.4, 0.3])
    q = np.array([0.1, 0.05, 0.2])
    n = 8
    val, t = psi_star((0, 2), 0.0, n, p, q)
    assert t == 0.5
    expected = (n / 2) * (layer_info(0.5, 0.1, 0.5) + layer_info(0.3, 0.2, 0.5))
    assert val == pytest.approx(expected, rel=1e-14)


def test_psi_star_matches_dense_grid_oracle():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(40):
        L = int(rng.integers(1, 5))
        p, q = random_pq(rng, L)
        n = int(rng.integers(4, 60))
        S = tuple(ell for ell in range(L) if rng.random() < 0.7)
        rho = rng.uniform(0.05, 0.45)
        a = -2.0 * j_rho(rho)
        got, t_star = psi_star(S, a, n, p, q)
        ref = oracles.psi_star_grid(S, a, n, p, q, points=100001)
        scale = max(abs(ref), 1e-12)
        worst = max(worst, abs(got - ref) / scale)
        assert 0.0 <= t_star <= 1.0
        assert got >= ref - 1e-12  # golden keeps the best evaluated point
    assert worst < 1e-9


def test_psi_star_matches_continuous_optimizer():
    rng = np.random.default_rng(12)
    for _ in range(25):
        L = int(rng.integers(1, 4))
        p, q = random_pq(rng, L)
        n = int(rng.integers(4, 50))
        S = tuple(range(L))
        a = float(rng.uniform(-3.0, 3.0))
        got, _ = psi_star(S, a, n, p, q)
        ref = oracles.psi_star_opt(S, a, n, p, q)
        assert got == pytest.approx(ref, rel=1e-9, abs=1e-11)


@given(st.integers(2, 40), st.floats(0.02, 0.45), st.floats(0.1, 0.9),
       st.floats(0.05, 0.9))
@settings(max_examples=150, deadline=None)
def test_psi_star_bracket_at_minus_two_J(n, rho, p0, frac):
    # max(0, -J + m I_{1/2}) <= psi*(-2J) <= m I_{1/2}
    q0 = p0 * frac
    J = j_rho(rho)
    top = psi_star((0,), 0.0, n, [p0], [q0])[0]
    val, t_star = psi_star((0,), -2.0 * J, n, [p0], [q0])
    assert val <= top + 1e-12
    assert val >= max(0.0, top - J) - 1e-12
    assert 0.0 <= t_star <= 0.5 + 1e-9


# ---------------------------------------------------------------------------
# parity-structured exponents

def test_global_snr_matches_oracle_random():
    rng = np.random.default_rng(3)
    for _ in range(60):
        L = int(rng.integers(1, 6))
        p, q = random_pq(rng, L)
        n = int(rng.integers(4, 80))
        rho = rng.uniform(0.02, 0.48)
        S = tuple(ell for ell in range(L) if rng.random() < 0.5)
        got = global_snr(S, n, rho, p, q)
        ref = oracles.snr_global(S, n, rho, p, q)
        assert got == pytest.approx(ref, rel=1e-10, abs=1e-12)
        gotJ = individual_snr_J(S, n, rho, p, q)
        refJ = oracles.snr_individual_J(S, n, rho, p, q)
        assert gotJ == pytest.approx(refJ, rel=1e-10, abs=1e-12)


def test_snr_noiseless_parity_infinities():
    p = np.array([0.5, 0.4, 0.3])
    q = np.array([0.1, 0.05, 0.2])
    # rho at the floor: any nonempty complement costs infinite J
    assert math.isinf(global_snr((0, 1), 10, 0.0, p, q))
    assert math.isfinite(global_snr((0, 1, 2), 10, 0.0, p, q))
    assert math.isinf(individual_snr_J((0,), 10, 0.0, p, q))
    assert individual_snr_J((), 10, 0.0, p, q) == 0.0


def test_minimizers_match_brute_force_enumeration():
    rng = np.random.default_rng(21)
    for _ in range(15):
        L = int(rng.integers(2, 7))
        p, q = random_pq(rng, L)
        n = int(rng.integers(4, 60))
        rho = rng.uniform(0.02, 0.48)
        got_val, got_set = minimize_global_snr(n, rho, p, q)
        ref_val, ref_set = oracles.brute_min_global(n, rho, p, q)
        assert got_val == pytest.approx(ref_val, rel=1e-9)
        assert oracles.snr_global(got_set, n, rho, p, q) == pytest.approx(
            ref_val, rel=1e-9)
        ell = int(rng.integers(0, L))
        vi, Si, Ji = minimize_individual_snr(ell, n, rho, p, q)
        rv, rS, rJ = oracles.brute_min_individual(ell, n, rho, p, q)
        assert ell in Si
        assert vi == pytest.approx(rv, rel=1e-9)
        assert Ji == pytest.approx(rJ, rel=1e-9)
        assert oracles.snr_global(Si, n, rho, p, q) == pytest.approx(
            rv, rel=1e-9)


def test_minimize_individual_validates_layer_index():
    with pytest.raises(ValueError):
        minimize_individual_snr(3, 10, 0.1, [0.5], [0.1])


def test_rate_report_coherent():
    params = ModelParams(n=20, L=4, rho=0.2,
                         p=np.array([0.5, 0.4, 0.3, 0.6]),
                         q=np.array([0.1, 0.05, 0.2, 0.3]))
    rep = rate_report(params)
    assert rep.m == 10.0
    assert rep.J_rho == pytest.approx(j_rho(0.2), rel=1e-15)
    ref_val, _ = oracles.brute_min_global(20, 0.2, params.p, params.q)
    assert rep.global_snr_min == pytest.approx(ref_val, rel=1e-9)
    parity = (params.L - len(rep.global_argmin)) % 2
    assert rep.global_complement_parity == ("even" if parity == 0 else "odd")
    assert rep.global_exponent == pytest.approx(math.exp(-rep.global_snr_min))
    assert len(rep.per_layer) == 4
    for ell, layer in enumerate(rep.per_layer):
        assert layer.layer == ell
        assert ell in layer.argmin_set
        assert layer.exponent == pytest.approx(
            math.exp(-layer.snr_min) + math.exp(-layer.J_single))
        # individual minimum can never beat the unconstrained global minimum
        assert layer.snr_min >= rep.global_snr_min - 1e-9
