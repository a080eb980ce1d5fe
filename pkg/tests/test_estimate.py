"""Moment and plug-in edge-probability estimators."""

import logging
import math

import numpy as np
import pytest

from mlsbm.estimate import (ProbEstimates, moment_p_hat, plugin_pq,
                            separated_pq)
from mlsbm.model import (ModelParams, MultilayerGraph, balanced_assignment,
                         experiment_params, marginal_blend, sample_imlsbm)

CLIP = 1e-12


def graph_from_dense(*layers):
    return MultilayerGraph.from_dense([np.asarray(A, float) for A in layers])


def complete_graph(n):
    A = np.ones((n, n)) - np.eye(n)
    return A


# ---------------------------------------------------------------------------
# moment estimator

def test_moment_empty_layer_clips_low():
    g = graph_from_dense(np.zeros((6, 6)))
    assert moment_p_hat(g)[0] == CLIP


def test_moment_complete_layer_clips_high():
    # n=4: 2*6/(8-4) = 3, clipped into the unit interval
    g = graph_from_dense(complete_graph(4))
    assert moment_p_hat(g)[0] == 1.0 - CLIP


def test_moment_direct_arithmetic():
    A = np.zeros((5, 5))
    A[0, 1] = A[1, 0] = 1.0
    A[2, 4] = A[4, 2] = 1.0
    A[1, 3] = A[3, 1] = 1.0
    g = graph_from_dense(A)
    assert moment_p_hat(g)[0] == pytest.approx(2 * 3 / (0.5 * 25 - 5),
                                               rel=1e-15)


def test_moment_rejects_tiny_n():
    g = graph_from_dense(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        moment_p_hat(g)


def test_moment_is_conservative_overestimate_on_model():
    # sparse balanced layers: the mean lands between the blended intra
    # probability and twice it, and matches the exact expectation
    params = experiment_params(1000, 4, 2.0, scaling="intermediate")
    params_rho = ModelParams(n=1000, L=4, rho=0.1, p=params.p, q=params.q)
    z = balanced_assignment(1000)
    tilde_p, tilde_q = marginal_blend(params_rho.p, params_rho.q, 0.1)
    n = 1000
    n_plus = int((z == 1).sum())
    intra_pairs = n_plus * (n_plus - 1) // 2 + (n - n_plus) * (n - n_plus - 1) // 2
    inter_pairs = n_plus * (n - n_plus)
    denom = 0.5 * n * n - n
    exact_mean = 2 * (tilde_p[0] * intra_pairs + tilde_q[0] * inter_pairs) / denom
    draws = []
    for r in range(5):
        rec = sample_imlsbm(params_rho, z, 100 + r)
        draws.extend(moment_p_hat(rec.graph).tolist())
    mean_hat = float(np.mean(draws))
    # per-layer sd of the estimator from the binomial edge count
    pbar = (tilde_p[0] * intra_pairs + tilde_q[0] * inter_pairs) / (intra_pairs + inter_pairs)
    sd = 2 * math.sqrt((intra_pairs + inter_pairs) * pbar * (1 - pbar)) / denom
    se = sd / math.sqrt(len(draws))
    assert abs(mean_hat - exact_mean) <= 4 * se
    assert mean_hat >= tilde_p[0] * (1 - 1e-3)
    assert mean_hat <= 2 * tilde_p[0]


# ---------------------------------------------------------------------------
# plug-in estimator

def test_plugin_perfect_blocks():
    z = balanced_assignment(8)
    A = (z[:, None] == z[None, :]).astype(float)
    np.fill_diagonal(A, 0.0)
    g = graph_from_dense(A)
    est = plugin_pq(g, z)
    assert est.p_hat[0] == 1.0 - CLIP
    assert est.q_hat[0] == CLIP
    assert not est.fallback
    assert est.swapped == ()


def test_plugin_sign_flip_invariant():
    params = ModelParams(n=40, L=3, rho=0.1, p=np.full(3, 0.4),
                         q=np.full(3, 0.1))
    z = balanced_assignment(40)
    rec = sample_imlsbm(params, z, 3)
    a = plugin_pq(rec.graph, z)
    b = plugin_pq(rec.graph, -z)
    assert np.array_equal(a.p_hat, b.p_hat)
    assert np.array_equal(a.q_hat, b.q_hat)


def test_plugin_single_node_cluster_falls_back():
    z = np.array([1] + [-1] * 7, dtype=np.int8)
    A = complete_graph(8)
    g = graph_from_dense(A)
    est = plugin_pq(g, z)
    assert est.fallback
    assert est.p_hat[0] == moment_p_hat(g)[0]
    assert est.q_hat[0] == 1.0 - CLIP  # overall edge frequency, clipped


def test_plugin_exact_frequencies_small_case():
    z = np.array([1, 1, -1, -1], dtype=np.int8)
    A = np.zeros((4, 4))
    A[0, 1] = A[1, 0] = 1.0  # intra
    A[0, 2] = A[2, 0] = 1.0  # inter
    A[1, 3] = A[3, 1] = 1.0  # inter
    g = graph_from_dense(A)
    est = plugin_pq(g, z)
    assert est.p_hat[0] == pytest.approx(1 / 2, rel=1e-15)  # 1 of 2 intra pairs
    assert est.q_hat[0] == pytest.approx(2 / 4, rel=1e-15)  # 2 of 4 inter pairs


def test_plugin_swaps_inverted_layers(caplog):
    z = np.array([1, 1, -1, -1], dtype=np.int8)
    A = np.zeros((4, 4))
    for i in (0, 1):
        for j in (2, 3):
            A[i, j] = A[j, i] = 1.0  # all inter, no intra
    g = graph_from_dense(A)
    with caplog.at_level(logging.WARNING, logger="mlsbm.estimate"):
        est = plugin_pq(g, z)
    assert est.swapped == (0,)
    assert est.p_hat[0] > est.q_hat[0]
    assert est.p_hat[0] == 1.0 - CLIP
    assert any("swap" in rec.message for rec in caplog.records)


def test_plugin_true_labels_beat_random_labels():
    n, c = 200, 5.0
    dense = math.log(n) / n
    params = ModelParams(n=n, L=1, rho=0.0, p=np.array([c * dense]),
                         q=np.array([dense]))
    z = balanced_assignment(n)
    rng = np.random.default_rng(0)
    err_true = []
    err_rand = []
    for r in range(20):
        rec = sample_imlsbm(params, z, 500 + r)
        z_rand = rng.permutation(z)
        err_true.append(abs(plugin_pq(rec.graph, z).p_hat[0] - params.p[0]))
        err_rand.append(abs(plugin_pq(rec.graph, z_rand).p_hat[0] - params.p[0]))
    assert np.mean(err_true) < np.mean(err_rand)


def test_plugin_consistent_at_scale():
    # single dense layer, no label noise: plug-in with the true labels is
    # within 3 standard errors of the truth on the replication mean
    n = 1000
    params = ModelParams(n=n, L=1, rho=0.0, p=np.array([0.05]),
                         q=np.array([0.02]))
    z = balanced_assignment(n)
    intra_pairs = 2 * (500 * 499 // 2)
    inter_pairs = 500 * 500
    reps = 200
    p_draws = np.empty(reps)
    q_draws = np.empty(reps)
    for r in range(reps):
        rec = sample_imlsbm(params, z, 7000 + r)
        est = plugin_pq(rec.graph, z)
        p_draws[r] = est.p_hat[0]
        q_draws[r] = est.q_hat[0]
    se_p = math.sqrt(0.05 * 0.95 / intra_pairs / reps)
    se_q = math.sqrt(0.02 * 0.98 / inter_pairs / reps)
    assert abs(p_draws.mean() - 0.05) <= 3 * se_p
    assert abs(q_draws.mean() - 0.02) <= 3 * se_q


# ---------------------------------------------------------------------------
# estimate containers

def test_estimates_validate_shapes():
    with pytest.raises(ValueError):
        ProbEstimates(p_hat=np.array([0.5, 0.4]), q_hat=np.array([0.1]))


def test_estimates_from_params_fills_blends():
    params = ModelParams(n=10, L=2, rho=0.2, p=np.array([0.5, 0.4]),
                         q=np.array([0.1, 0.2]))
    est = ProbEstimates.from_params(params)
    tp, tq = marginal_blend(params.p, params.q, 0.2)
    assert np.allclose(est.tilde_p, tp, atol=1e-15)
    assert np.allclose(est.tilde_q, tq, atol=1e-15)
    assert np.array_equal(est.p_hat, params.p)


def test_separated_pq_nudges_ties():
    est = ProbEstimates(p_hat=np.array([0.3, 0.2]), q_hat=np.array([0.3, 0.1]))
    p, q = separated_pq(est)
    assert p[0] > q[0]
    assert p[0] == pytest.approx(0.3, rel=1e-6)
    assert p[1] == 0.2 and q[1] == 0.1


def test_separated_pq_keeps_separated_pairs():
    est = ProbEstimates(p_hat=np.array([0.5]), q_hat=np.array([0.1]))
    p, q = separated_pq(est)
    assert p[0] == 0.5 and q[0] == 0.1
