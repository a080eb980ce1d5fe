"""Stage II/III: node-wise MAP refinement of an initial assignment.

For node i and layer ell, the local objective of declaring global label
s_star and layer label s_ell against a reference assignment z_tilde is

    f(s_star, s_ell) = log((1-rho)/rho) * 1{s_ell = s_star}
                     + sum over j != i with z_tilde_j = s_ell of
                       [log(p(1-q)/(q(1-p))) * A_ij + log((1-p)/(1-q))].

The joint maximization over (s_star, s_1..s_L) decouples: for each s_star
pick the best s_ell per layer, then pick the better s_star.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (NS_LEAVE_ONE_OUT, MultilayerGraph, as_assignment,
                    derive_seed)
from .spectral import initialize_from_matrix, weighted_adjacency

_PROB_CLIP = 1e-12


@dataclass(frozen=True)
class RefineConfig:
    """Refinement inputs: per-layer edge probabilities and the flip rate.

    rho_input is a tunable hyperparameter, not necessarily the true rho. At
    or below rho_floor the refinement runs in its maximum-likelihood form:
    layer labels are forced equal to the global label.
    """

    p: np.ndarray
    q: np.ndarray
    rho_input: float
    rho_floor: float = 1e-8
    mode: str = "generic"

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        if self.p.shape != self.q.shape or self.p.ndim != 1:
            raise ValueError("p and q must be equal-length vectors")
        if np.any(self.p <= self.q):
            raise ValueError("refinement requires p > q in every layer")
        if not (0.0 <= self.rho_input < 0.5):
            raise ValueError(f"rho_input must be in [0, 1/2), got {self.rho_input}")

    @property
    def forced_mle(self) -> bool:
        """True when rho_input is at or below the floor: s_ell := s_star."""
        return self.rho_input <= self.rho_floor

    def log_terms(self):
        """(edge weight a, count penalty b, agreement bonus r) after guards."""
        pc = np.minimum(self.p, 1.0 - _PROB_CLIP)
        qc = np.maximum(self.q, _PROB_CLIP)
        a = np.log(pc * (1.0 - qc) / (qc * (1.0 - pc)))
        b = np.log((1.0 - pc) / (1.0 - qc))
        rho = max(self.rho_input, self.rho_floor)
        r = float(np.log((1.0 - rho) / rho))
        return a, b, r


@dataclass(frozen=True)
class DetectionResult:
    """Global and per-layer estimated assignments plus diagnostics.

    per_node_scores column ell < L holds the achieved per-layer objective at
    node i; column L holds the total. aligned is False if any orientation
    reconciliation ended in an exact tie.
    """

    z_star_hat: np.ndarray
    z_layer_hat: np.ndarray  # (L, n) int8
    per_node_scores: np.ndarray  # (n, L+1)
    aligned: bool = True


def map_objective(i: int, ell: int, s_star: int, s_ell: int, z_tilde,
                  graph: MultilayerGraph, config: RefineConfig) -> float:
    """Exact local objective value (rho clamped to the floor)."""
    z_tilde = np.asarray(z_tilde)
    a, b, r = config.log_terms()
    A = graph.layer(ell)
    mask = z_tilde == s_ell
    mask[i] = False
    val = r * (1.0 if s_ell == s_star else 0.0)
    val += a[ell] * float(A[i, mask].sum()) + b[ell] * float(mask.sum())
    return float(val)


def _layer_evidence(z_tilde: np.ndarray, graph: MultilayerGraph,
                    config: RefineConfig):
    """Edge-and-count evidence for every node and layer at once.

    Returns (e_plus, e_minus), each (n, L): the sum over j != i on the +1
    (resp. -1) side of z_tilde of a*A_ij + b.
    """
    a, b, _ = config.log_terms()
    n, L = graph.n, graph.L
    plus = (z_tilde == 1).astype(float)
    minus = 1.0 - plus
    cnt_plus = plus.sum() - plus  # excludes the node itself
    cnt_minus = minus.sum() - minus
    e_plus = np.empty((n, L))
    e_minus = np.empty((n, L))
    for ell in range(L):
        A = graph.layer(ell)
        e_plus[:, ell] = a[ell] * (A @ plus) + b[ell] * cnt_plus
        e_minus[:, ell] = a[ell] * (A @ minus) + b[ell] * cnt_minus
    return e_plus, e_minus


def _decide(e_plus: np.ndarray, e_minus: np.ndarray, r: float, forced: bool):
    """Decoupled argmax from per-layer evidence rows.

    e_plus/e_minus are (n, L). Returns (s_star (n,), s_layers (n, L),
    scores (n, L+1)). Ties go to s_star = +1 and s_ell = s_star.
    """
    if forced:
        tot_plus = e_plus.sum(axis=1)
        tot_minus = e_minus.sum(axis=1)
        s_star = np.where(tot_plus >= tot_minus, 1, -1).astype(np.int8)
        s_layers = np.repeat(s_star[:, None], e_plus.shape[1], axis=1)
        layer_scores = np.where((s_star == 1)[:, None], e_plus, e_minus) + r
    else:
        # best per-layer value for each hypothetical global label
        best_if_plus = np.maximum(e_plus + r, e_minus)
        best_if_minus = np.maximum(e_minus + r, e_plus)
        tot_plus = best_if_plus.sum(axis=1)
        tot_minus = best_if_minus.sum(axis=1)
        s_star = np.where(tot_plus >= tot_minus, 1, -1).astype(np.int8)
        take_plus = np.where((s_star == 1)[:, None],
                             e_plus + r >= e_minus,   # tie keeps s_ell = s_star
                             e_plus > e_minus + r)
        s_layers = np.where(take_plus, 1, -1).astype(np.int8)
        bonus = r * (s_layers == s_star[:, None])
        layer_scores = np.where(take_plus, e_plus, e_minus) + bonus
    scores = np.empty((e_plus.shape[0], e_plus.shape[1] + 1))
    scores[:, :-1] = layer_scores
    scores[:, -1] = layer_scores.sum(axis=1)
    return s_star, s_layers, scores


def refine_node(i: int, z_tilde, graph: MultilayerGraph,
                config: RefineConfig) -> tuple[int, np.ndarray]:
    """Refined (global label, per-layer labels) for one node."""
    z_tilde = np.asarray(z_tilde)
    a, b, r = config.log_terms()
    mask_plus = z_tilde == 1
    mask_plus = mask_plus.copy()
    mask_plus[i] = False
    mask_minus = z_tilde == -1
    mask_minus = mask_minus.copy()
    mask_minus[i] = False
    e_plus = np.empty((1, graph.L))
    e_minus = np.empty((1, graph.L))
    for ell in range(graph.L):
        row = graph.layer(ell)[i]
        e_plus[0, ell] = a[ell] * row[mask_plus].sum() + b[ell] * mask_plus.sum()
        e_minus[0, ell] = a[ell] * row[mask_minus].sum() + b[ell] * mask_minus.sum()
    s_star, s_layers, _ = _decide(e_plus, e_minus, r, config.forced_mle)
    return int(s_star[0]), s_layers[0]


def refine_generic(z_init, graph: MultilayerGraph,
                   config: RefineConfig) -> DetectionResult:
    """One refinement pass of every node against the fixed initializer."""
    z_init = as_assignment(z_init, graph.n)
    _, _, r = config.log_terms()
    e_plus, e_minus = _layer_evidence(z_init, graph, config)
    s_star, s_layers, scores = _decide(e_plus, e_minus, r, config.forced_mle)
    return DetectionResult(z_star_hat=s_star, z_layer_hat=s_layers.T.copy(),
                           per_node_scores=scores, aligned=True)


def make_loo_spectral_init(graph: MultilayerGraph, omega, p,
                           gamma: float = 5.0, restarts: int = 10,
                           seed: int = 0):
    """Leave-one-out initializer factory for refine_provable.

    The returned callable maps a node index i to the spectral assignment of
    the graph with node i removed (length n-1, ordered by the surviving
    node indices). The aggregated matrix is built once; each call removes one
    row/column and runs trim -> eigenpairs -> 2-means with a per-i stream.
    """
    A_bar = weighted_adjacency(graph, omega)

    def init_without(i: int) -> np.ndarray:
        keep = np.arange(graph.n) != i
        sub = A_bar[np.ix_(keep, keep)]
        seed_i = derive_seed(seed, NS_LEAVE_ONE_OUT, i)
        return initialize_from_matrix(sub, omega, p, gamma=gamma,
                                      restarts=restarts, seed=seed_i)

    return init_without


def refine_provable(graph: MultilayerGraph, config: RefineConfig,
                    init_fn) -> DetectionResult:
    """Leave-one-out refinement with orientation alignment.

    Stage I runs init_fn(i) on the graph without node i; Stage II refines
    coordinate i against that initializer, which also fills the missing slot
    of the global and per-layer vectors; Stage III reconciles the n separate
    orientations against the i = 0 solution by maximal set overlap. An exact
    overlap tie picks +1 and clears the aligned flag.
    """
    n, L = graph.n, graph.L
    a, b, r = config.log_terms()
    # (L, n, n) uint8 keeps the incident-edge rows cheap to slice n times
    adj = np.stack([graph.layer(ell, dtype=np.uint8) for ell in range(L)])

    Z_star = np.empty((n, n), dtype=np.int8)  # row i: extended z-tilde^(*, -i)
    slot_layers = np.empty((n, L), dtype=np.int8)  # row i: layer labels at i
    scores = np.empty((n, L + 1))
    for i in range(n):
        keep = np.arange(n) != i
        z_sub = init_fn(i)
        zf = np.empty(n, dtype=np.int8)
        zf[keep] = as_assignment(z_sub, n - 1)
        zf[i] = 0  # placeholder, ignored by the masks below
        plus = (zf == 1).astype(np.float64)
        minus = (zf == -1).astype(np.float64)
        incident = adj[:, i, :].astype(np.float64)  # (L, n)
        e_plus = (a * (incident @ plus) + b * plus.sum())[None, :]
        e_minus = (a * (incident @ minus) + b * minus.sum())[None, :]
        s_star, s_layers, sc = _decide(e_plus, e_minus, r, config.forced_mle)
        zf[i] = s_star[0]
        Z_star[i] = zf
        slot_layers[i] = s_layers[0]
        scores[i] = sc[0]

    # Stage III: align every orientation against the i = 0 solution
    z_star_hat = np.empty(n, dtype=np.int8)
    z_layer_hat = np.empty((L, n), dtype=np.int8)
    aligned = True
    z_star_hat[0] = Z_star[0, 0]
    z_layer_hat[:, 0] = slot_layers[0]
    ref_star = Z_star[0]
    ref_layers = np.repeat(ref_star[None, :], L, axis=0)
    ref_layers[:, 0] = slot_layers[0]
    for i in range(1, n):
        own = Z_star[i]
        mask = own == own[i]
        c_plus = int(((ref_star == 1) & mask).sum())
        c_minus = int(((ref_star == -1) & mask).sum())
        if c_plus == c_minus:
            z_star_hat[i] = 1
            aligned = False
        else:
            z_star_hat[i] = 1 if c_plus > c_minus else -1

        own_layers = np.repeat(own[None, :], L, axis=0)
        own_layers[:, i] = slot_layers[i]
        mask_l = own_layers == slot_layers[i][:, None]
        c_plus_l = ((ref_layers == 1) & mask_l).sum(axis=1)
        c_minus_l = ((ref_layers == -1) & mask_l).sum(axis=1)
        ties = c_plus_l == c_minus_l
        if np.any(ties):
            aligned = False
        z_layer_hat[:, i] = np.where(c_plus_l >= c_minus_l, 1, -1)

    return DetectionResult(z_star_hat=z_star_hat, z_layer_hat=z_layer_hat,
                           per_node_scores=scores, aligned=aligned)
