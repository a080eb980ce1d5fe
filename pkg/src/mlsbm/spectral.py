"""Stage I: spectral initialization of the global assignment.

Pipeline: aggregate the layers into a weighted adjacency matrix, zero out
rows/columns of nodes whose weighted degree exceeds a threshold, extract the
two leading eigenvectors by blocked subspace iteration, and split the rows of
the embedding with a deterministic 2-means.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import NS_EIGEN, NS_KMEANS, MultilayerGraph, substream


class ConvergenceError(RuntimeError):
    """Iterative solver failed to reach tolerance; carries the last residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


def uniform_weights(L: int) -> np.ndarray:
    if L < 1:
        raise ValueError("L must be positive")
    return np.full(L, 1.0 / L)


def variance_weights(p_hat) -> np.ndarray:
    """Weights proportional to 1/p_hat, normalized to sum one."""
    p_hat = np.asarray(p_hat, dtype=float)
    if np.any(p_hat <= 0):
        raise ValueError("p_hat entries must be positive")
    w = 1.0 / p_hat
    return w / w.sum()


def stdev_weights(p_hat) -> np.ndarray:
    """Weights proportional to 1/sqrt(p_hat), normalized to sum one."""
    p_hat = np.asarray(p_hat, dtype=float)
    if np.any(p_hat <= 0):
        raise ValueError("p_hat entries must be positive")
    w = 1.0 / np.sqrt(p_hat)
    return w / w.sum()


def weighted_adjacency(graph: MultilayerGraph, omega) -> np.ndarray:
    """A_bar = sum_ell omega_ell * A^(ell)."""
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (graph.L,):
        raise ValueError(f"omega must have length L={graph.L}")
    A_bar = np.zeros((graph.n, graph.n))
    for ell in range(graph.L):
        A_bar += omega[ell] * graph.layer(ell)
    return A_bar


@dataclass(frozen=True)
class TrimReport:
    trimmed_nodes: tuple
    threshold: float
    degrees: np.ndarray


def trim(A_bar: np.ndarray, omega, p, gamma: float) -> tuple[np.ndarray, TrimReport]:
    """Zero rows/columns of nodes with weighted degree above gamma*n*sum(w*p).

    Single pass: the threshold is computed once from the input matrix and no
    re-trimming happens on the survivors.
    """
    if gamma <= 1:
        raise ValueError(f"gamma must exceed 1, got {gamma}")
    omega = np.asarray(omega, dtype=float)
    p = np.asarray(p, dtype=float)
    n = A_bar.shape[0]
    threshold = gamma * n * float(np.dot(omega, p))
    degrees = A_bar.sum(axis=1)
    cut = np.where(degrees > threshold)[0]
    trimmed = A_bar.copy()
    trimmed[cut, :] = 0.0
    trimmed[:, cut] = 0.0
    return trimmed, TrimReport(trimmed_nodes=tuple(int(i) for i in cut),
                               threshold=threshold, degrees=degrees)


@dataclass(frozen=True)
class SpectralEmbedding:
    U: np.ndarray  # n x 2, orthonormal columns
    eigenvalues: np.ndarray  # the two selected eigenvalues
    iterations: int
    residual: float
    degenerate: bool = False


def top2_eigenpairs(M: np.ndarray, tol: float = 1e-8, max_iter: int = 10_000,
                    seed: int = 0, largest: str = "abs",
                    start: np.ndarray | None = None) -> SpectralEmbedding:
    """Two leading eigenpairs of a symmetric matrix by subspace iteration.

    largest="abs" selects the pairs of largest |eigenvalue| (the natural
    ordering of the iteration); largest="algebraic" selects the largest
    eigenvalues by value, implemented by iterating on M + sigma*I with sigma
    an upper bound on |lambda_min| (the 2-norm), which makes the matrix
    positive semidefinite without reordering eigenvectors. Rayleigh-Ritz
    extraction; converged when both residuals ||M u - lambda u|| fall below
    tol * ||M||_F.

    The block starts at two columns. A +a/-a eigenvalue pair straddling the
    block boundary cannot be represented by two columns and stalls the
    residual, so after 300 unconverged sweeps the block widens to eight
    columns, whose Ritz step separates signed pairs exactly.

    start overrides the random start block (used for warm starts); it must be
    an n x 2 array.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if M.shape != (n, n) or n < 2:
        raise ValueError("M must be square with n >= 2")
    fro = float(np.linalg.norm(M))
    if fro == 0.0:
        # zero matrix: any orthonormal pair works; fixed canonical choice
        U = np.zeros((n, 2))
        U[0, 0] = 1.0
        U[1, 1] = 1.0
        return SpectralEmbedding(U=U, eigenvalues=np.zeros(2), iterations=0,
                                 residual=0.0, degenerate=True)
    if largest == "abs":
        shift = 0.0
    elif largest == "algebraic":
        shift = spectral_norm(M, tol=1e-6, max_iter=max_iter, seed=seed) \
            + 1e-6 * fro
    else:
        raise ValueError(f"unknown selection mode {largest!r}")

    if start is not None:
        Q = np.array(start, dtype=float)
        if Q.shape != (n, 2):
            raise ValueError("start block must be n x 2")
    else:
        Q = substream(seed, NS_EIGEN).standard_normal((n, 2))
    Q, _ = np.linalg.qr(Q)

    def ritz(Q):
        B = Q.T @ (M @ Q)
        B = (B + B.T) / 2.0
        vals, vecs = np.linalg.eigh(B)
        if largest == "abs":
            order = np.argsort(-np.abs(vals))[:2]
        else:
            order = np.argsort(-vals)[:2]
        U = Q @ vecs[:, order]
        res = np.linalg.norm(M @ U - U * vals[order], axis=0)
        return U, vals[order], float(res.max())

    widen_at = min(300, max_iter)
    wide = min(n, 8)
    residual = np.inf
    for it in range(1, max_iter + 1):
        Z = M @ Q + shift * Q
        Q, _ = np.linalg.qr(Z)
        if it % 5 == 0 or it == max_iter or it == widen_at:
            U, lam, residual = ritz(Q)
            if residual <= tol * fro:
                return SpectralEmbedding(U=U, eigenvalues=lam,
                                         iterations=it, residual=residual)
        if it == widen_at and Q.shape[1] < wide:
            pad = substream(seed, NS_EIGEN, 1).standard_normal(
                (n, wide - Q.shape[1]))
            Q, _ = np.linalg.qr(np.hstack((Q, pad)))
    raise ConvergenceError(
        f"subspace iteration did not converge in {max_iter} sweeps "
        f"(residual {residual:.3e}, tol {tol * fro:.3e})", residual)


def spectral_norm(M: np.ndarray, tol: float = 1e-8, max_iter: int = 10_000,
                  seed: int = 0) -> float:
    """||M||_2 for symmetric M via power iteration on M @ (M @ v).

    Squaring the matrix avoids sign oscillation when the extreme eigenvalues
    come in near +-lambda pairs.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if not np.any(M):
        return 0.0
    rng = substream(seed, NS_EIGEN, 1 << 20)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    last = 0.0
    for _ in range(max_iter):
        w = M @ (M @ v)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0
        v = w / norm_w
        est = np.sqrt(norm_w)  # Rayleigh quotient of M^2 at unit v is ||w||
        if abs(est - last) <= tol * max(est, 1.0):
            return float(est)
        last = est
    return float(last)


@dataclass(frozen=True)
class KMeansResult:
    assignment: np.ndarray  # +-1 labels, +1 for the lexicographically smaller centroid
    centroids: np.ndarray  # 2 x d
    objective: float
    restarts_used: int
    degenerate: bool = False


def _lloyd(X: np.ndarray, centers: np.ndarray, max_sweeps: int = 100):
    """Standard Lloyd iterations from given centers; ties go to cluster 0."""
    labels = None
    for _ in range(max_sweeps):
        d0 = ((X - centers[0]) ** 2).sum(axis=1)
        d1 = ((X - centers[1]) ** 2).sum(axis=1)
        new_labels = (d1 < d0).astype(np.int8)  # strict: ties stay at 0
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for k in (0, 1):
            mask = labels == k
            if mask.any():
                centers[k] = X[mask].mean(axis=0)
            else:
                # empty cluster: reseed at the point farthest from the other center
                far = int(np.argmax(((X - centers[1 - k]) ** 2).sum(axis=1)))
                centers[k] = X[far]
    d0 = ((X - centers[0]) ** 2).sum(axis=1)
    d1 = ((X - centers[1]) ** 2).sum(axis=1)
    labels = (d1 < d0).astype(np.int8)
    objective = float(np.minimum(d0, d1).sum())
    return labels, centers, objective


def approx_kmeans2(U: np.ndarray, restarts: int = 10, seed: int = 0) -> KMeansResult:
    """2-means on the rows of U: k-means++ seeding plus Lloyd, best of restarts.

    Deterministic given seed: restart r draws from its own sub-stream, the
    best objective wins (first such restart on exact ties), clusters are then
    renumbered so cluster +1 has the lexicographically smaller centroid, and
    equidistant points go to the lower cluster index.
    """
    X = np.asarray(U, dtype=float)
    n = X.shape[0]
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    if n < 2 or np.allclose(X, X[0], rtol=0.0, atol=0.0):
        # all points identical: one empty cluster, flagged
        return KMeansResult(assignment=np.ones(n, dtype=np.int8),
                            centroids=np.vstack((X[0], X[0])) if n else np.zeros((2, 2)),
                            objective=0.0, restarts_used=0, degenerate=True)

    best = None
    for r in range(restarts):
        rng = substream(seed, NS_KMEANS, r)
        first = int(rng.integers(n))
        d2 = ((X - X[first]) ** 2).sum(axis=1)
        total = d2.sum()
        if total <= 0.0:
            second = int(rng.integers(n))  # degenerate spread; arbitrary second
        else:
            second = int(rng.choice(n, p=d2 / total))
        centers = np.vstack((X[first], X[second])).astype(float)
        labels, centers, objective = _lloyd(X, centers)
        if best is None or objective < best[2]:
            best = (labels, centers, objective, r + 1)

    labels, centers, objective, used = best
    # renumber so the lexicographically smaller centroid is cluster 0 (+1 side)
    if tuple(centers[1]) < tuple(centers[0]):
        centers = centers[::-1].copy()
    d0 = ((X - centers[0]) ** 2).sum(axis=1)
    d1 = ((X - centers[1]) ** 2).sum(axis=1)
    labels = (d1 < d0).astype(np.int8)
    objective = float(np.minimum(d0, d1).sum())
    assignment = np.where(labels == 0, 1, -1).astype(np.int8)
    return KMeansResult(assignment=assignment, centroids=centers,
                        objective=objective, restarts_used=used)


def spectral_initialize(graph: MultilayerGraph, omega, p, gamma: float = 5.0,
                        restarts: int = 10, seed: int = 0, tol: float = 1e-8,
                        max_iter: int = 10_000, return_details: bool = False):
    """Initial global assignment: trim -> top-2 eigenvectors -> 2-means."""
    A_bar = weighted_adjacency(graph, omega)
    return initialize_from_matrix(A_bar, omega, p, gamma=gamma, restarts=restarts,
                                  seed=seed, tol=tol, max_iter=max_iter,
                                  return_details=return_details)


def initialize_from_matrix(A_bar: np.ndarray, omega, p, gamma: float = 5.0,
                           restarts: int = 10, seed: int = 0, tol: float = 1e-8,
                           max_iter: int = 10_000, return_details: bool = False):
    """Same as spectral_initialize but on a pre-aggregated weighted adjacency."""
    tau, report = trim(A_bar, omega, p, gamma)
    embedding = top2_eigenpairs(tau, tol=tol, max_iter=max_iter, seed=seed)
    km = approx_kmeans2(embedding.U, restarts=restarts, seed=seed)
    if return_details:
        return km.assignment, (report, embedding, km)
    return km.assignment
