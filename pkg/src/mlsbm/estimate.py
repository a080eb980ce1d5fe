"""Edge-probability estimation from observed layers.

Two stages. The moment estimator reads p off raw edge counts, scaling the
pooled edge frequency by a denominator of roughly half the pair count; in a
balanced two-block layer the result lands near p + q, a deliberate
overestimate of p that errs on the side of caution. The plug-in estimator
then averages edge indicators over intra-cluster and inter-cluster pairs of
a working assignment, recovering p and q separately.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .model import MultilayerGraph, as_assignment, marginal_blend

_PROB_CLIP = 1e-12

logger = logging.getLogger(__name__)


def _clip(v) -> np.ndarray:
    return np.clip(np.asarray(v, dtype=float), _PROB_CLIP, 1.0 - _PROB_CLIP)


@dataclass(frozen=True)
class ProbEstimates:
    """Per-layer edge-probability estimates with diagnostics.

    p_hat >= q_hat holds entrywise after construction: inverted layers are
    swapped and logged, with their indices recorded in `swapped`. tilde_p and
    tilde_q are the label-noise-blended marginal probabilities, filled only
    when built from known parameters. fallback marks estimates that could not
    use the cluster structure.
    """

    p_hat: np.ndarray
    q_hat: np.ndarray
    tilde_p: np.ndarray | None = None
    tilde_q: np.ndarray | None = None
    swapped: tuple = ()
    fallback: bool = False

    def __post_init__(self):
        p = _clip(self.p_hat)
        q = _clip(self.q_hat)
        if p.shape != q.shape or p.ndim != 1:
            raise ValueError("p_hat and q_hat must be equal-length vectors")
        inverted = p < q
        if np.any(inverted):
            idx = tuple(int(i) for i in np.where(inverted)[0])
            logger.warning("intra/inter estimates inverted in layers %s; "
                           "swapping", idx)
            p, q = np.where(inverted, q, p), np.where(inverted, p, q)
            object.__setattr__(self, "swapped",
                               tuple(sorted(set(self.swapped) | set(idx))))
        object.__setattr__(self, "p_hat", p)
        object.__setattr__(self, "q_hat", q)

    @classmethod
    def from_params(cls, params) -> "ProbEstimates":
        """Known-parameter estimates with the marginal blends filled in."""
        tp, tq = marginal_blend(params.p, params.q, params.rho)
        return cls(p_hat=_clip(params.p), q_hat=_clip(params.q),
                   tilde_p=tp, tilde_q=tq)


def moment_p_hat(graph: MultilayerGraph) -> np.ndarray:
    """Per-layer moment estimate 2 * edge count / (0.5 n^2 - n), clipped."""
    n = graph.n
    if n < 3:
        raise ValueError(f"moment estimator needs n >= 3, got {n}")
    denom = 0.5 * n * n - n
    counts = np.array([graph.edge_count(ell) for ell in range(graph.L)],
                      dtype=float)
    return _clip(2.0 * counts / denom)


def plugin_pq(graph: MultilayerGraph, z) -> ProbEstimates:
    """Intra- and inter-cluster edge frequencies under a working assignment.

    Both clusters of z must have at least two nodes; otherwise the intra mean
    is undefined and the estimate falls back to the moment value for p_hat
    and the overall edge frequency for q_hat, with the fallback flag set.
    """
    z = as_assignment(z, graph.n)
    n = graph.n
    n_plus = int((z == 1).sum())
    n_minus = n - n_plus
    npairs = n * (n - 1) // 2
    if min(n_plus, n_minus) < 2:
        logger.warning("cluster sizes (%d, %d) too small for plug-in "
                       "estimates; falling back to pooled moments",
                       n_plus, n_minus)
        counts = np.array([graph.edge_count(ell) for ell in range(graph.L)],
                          dtype=float)
        return ProbEstimates(p_hat=moment_p_hat(graph),
                             q_hat=_clip(counts / npairs), fallback=True)
    intra_pairs = n_plus * (n_plus - 1) // 2 + n_minus * (n_minus - 1) // 2
    inter_pairs = n_plus * n_minus
    p_hat = np.empty(graph.L)
    q_hat = np.empty(graph.L)
    for ell in range(graph.L):
        edges = graph.edge_list(ell)
        if edges.shape[0]:
            intra = int((z[edges[:, 0]] == z[edges[:, 1]]).sum())
        else:
            intra = 0
        inter = edges.shape[0] - intra
        p_hat[ell] = intra / intra_pairs
        q_hat[ell] = inter / inter_pairs
    return ProbEstimates(p_hat=_clip(p_hat), q_hat=_clip(q_hat))


def separated_pq(est: ProbEstimates, margin: float = 1e-9):
    """(p, q) from estimates with p nudged strictly above q where they tie.

    Downstream log-ratio weights require p > q in every layer; a tied layer
    carries no signal, so the nudge leaves its weight at essentially zero.
    """
    q = est.q_hat
    p = np.maximum(est.p_hat, np.minimum(q * (1.0 + margin) + 1e-300,
                                         1.0 - _PROB_CLIP / 2.0))
    return p, q
