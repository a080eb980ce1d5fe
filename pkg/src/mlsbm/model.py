"""Model parameters, assignments, multilayer graphs, and the hierarchical sampler.

The generative model: a global assignment z_star in {+1, -1}^n; for each layer
ell, every node keeps its global label with probability 1 - rho and flips it
otherwise; edges within layer ell are independent Bernoulli(p_ell) between
equal layer labels and Bernoulli(q_ell) otherwise, undirected, no self loops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_MASK64 = (1 << 64) - 1

# namespaces for sub-stream derivation, see substream()
NS_LAYER = 1
NS_EIGEN = 2
NS_KMEANS = 3
NS_LEAVE_ONE_OUT = 4
NS_BASELINE = 5


def _mix64(x: int) -> int:
    """splitmix64 finalizer; a 64-bit avalanche hash."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(seed: int, namespace: int, index: int = 0) -> int:
    """64-bit sub-seed: seed XOR mix64(namespace * 2^32 + index)."""
    return (int(seed) ^ _mix64((namespace << 32) + index)) & _MASK64


def substream(seed: int, namespace: int, index: int = 0) -> np.random.Generator:
    """Derive an independent random stream from a base seed.

    The stream key is derive_seed(seed, namespace, index), feeding a
    counter-based Philox generator. Streams for distinct (namespace, index)
    pairs are independent, so per-layer or per-node work can run in parallel
    and still produce output identical to a sequential run.
    """
    return np.random.Generator(np.random.Philox(key=derive_seed(seed, namespace, index)))


@dataclass(frozen=True)
class ModelParams:
    """Full parameterization: node count, layer count, flip probability,
    per-layer edge probabilities, and the balance bound (validated only)."""

    n: int
    L: int
    rho: float
    p: np.ndarray
    q: np.ndarray
    beta: float = 1.0
    layer_groups: tuple | None = None  # optional per-layer group labels

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "L", int(self.L))
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "beta", float(self.beta))
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if self.L < 1:
            raise ValueError(f"L must be >= 1, got {self.L}")
        if not (0.0 <= self.rho < 0.5):
            raise ValueError(f"rho must be in [0, 1/2), got {self.rho}")
        if self.p.shape != (self.L,) or self.q.shape != (self.L,):
            raise ValueError("p and q must be length-L vectors")
        if np.any(self.p <= 0) or np.any(self.p > 1):
            raise ValueError("p entries must lie in (0, 1]")
        if np.any(self.q < 0) or np.any(self.q >= 1):
            raise ValueError("q entries must lie in [0, 1)")
        if np.any(self.p <= self.q):
            bad = int(np.argmax(self.p <= self.q))
            raise ValueError(f"p must exceed q in every layer; layer {bad} has "
                             f"p={self.p[bad]}, q={self.q[bad]}")
        if self.beta < 1.0:
            raise ValueError(f"beta must be >= 1, got {self.beta}")
        if self.layer_groups is not None and len(self.layer_groups) != self.L:
            raise ValueError("layer_groups must have one label per layer")


def as_assignment(z, n: int | None = None) -> np.ndarray:
    """Validate and return a +-1 labeling as an int8 array."""
    z = np.asarray(z)
    if z.ndim != 1:
        raise ValueError("assignment must be one-dimensional")
    if n is not None and z.shape[0] != n:
        raise ValueError(f"assignment length {z.shape[0]} != n={n}")
    out = z.astype(np.int8)
    if not np.array_equal(out, z) or not np.all(np.abs(out) == 1):
        raise ValueError("assignment entries must be exactly +1 or -1")
    return out


def balanced_assignment(n: int) -> np.ndarray:
    """First floor(n/2) nodes labeled +1, the rest -1."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    z = np.full(n, -1, dtype=np.int8)
    z[: n // 2] = 1
    return z


class MultilayerGraph:
    """L undirected simple graphs on a shared node set.

    Each layer is stored as the bit-packed upper triangle of its adjacency
    matrix; dense symmetric matrices are expanded on demand.
    """

    def __init__(self, n: int, packed: list[np.ndarray]):
        self.n = int(n)
        self.L = len(packed)
        self._packed = packed
        self._iu = np.triu_indices(self.n, k=1)
        self._npairs = self.n * (self.n - 1) // 2

    @classmethod
    def from_dense(cls, layers) -> "MultilayerGraph":
        layers = [np.asarray(A) for A in layers]
        n = layers[0].shape[0]
        iu = np.triu_indices(n, k=1)
        packed = []
        for A in layers:
            if A.shape != (n, n):
                raise ValueError("all layers must be n x n")
            if np.any(A != A.T):
                raise ValueError("layer adjacency must be symmetric")
            if np.any(np.diag(A) != 0):
                raise ValueError("layer adjacency must have zero diagonal")
            vals = A[iu]
            if not np.all((vals == 0) | (vals == 1)):
                raise ValueError("layer adjacency must be binary")
            packed.append(np.packbits(vals.astype(bool)))
        return cls(n, packed)

    @classmethod
    def from_upper(cls, n: int, upper_rows: list[np.ndarray]) -> "MultilayerGraph":
        """Build from boolean vectors over the i<j pairs in row-major order."""
        npairs = n * (n - 1) // 2
        packed = []
        for v in upper_rows:
            if v.shape != (npairs,):
                raise ValueError("upper-triangle vector has wrong length")
            packed.append(np.packbits(v.astype(bool)))
        return cls(n, packed)

    def upper(self, ell: int) -> np.ndarray:
        """Boolean vector of the layer's upper-triangle entries (i<j order)."""
        return np.unpackbits(self._packed[ell], count=self._npairs).astype(bool)

    def layer(self, ell: int, dtype=np.float64) -> np.ndarray:
        """Dense symmetric adjacency matrix of one layer."""
        A = np.zeros((self.n, self.n), dtype=dtype)
        vals = self.upper(ell)
        A[self._iu] = vals
        A[(self._iu[1], self._iu[0])] = vals
        return A

    def edge_count(self, ell: int) -> int:
        return int(self.upper(ell).sum())

    def edge_list(self, ell: int) -> np.ndarray:
        """(m, 2) array of edges i<j."""
        mask = self.upper(ell)
        return np.column_stack((self._iu[0][mask], self._iu[1][mask]))


@dataclass(frozen=True)
class SampleRecord:
    """One Monte-Carlo draw: parameters, truth, graph, and the seed used."""

    params: ModelParams
    z_star: np.ndarray
    z_layers: np.ndarray  # (L, n) int8
    graph: MultilayerGraph
    seed: int
    flip_counts: np.ndarray  # per-layer count of nodes with flipped labels


def sample_imlsbm(params: ModelParams, z_star, seed: int) -> SampleRecord:
    """Draw one instance of the model.

    Layer ell consumes only its own sub-stream (namespace NS_LAYER, index
    ell), so the draw is reproducible regardless of any parallel schedule.
    Within a layer the order is: n flip indicators, then the n(n-1)/2
    upper-triangle edge indicators.
    """
    z_star = as_assignment(z_star, params.n)
    n, L = params.n, params.L
    iu = np.triu_indices(n, k=1)
    z_layers = np.empty((L, n), dtype=np.int8)
    uppers = []
    flip_counts = np.empty(L, dtype=np.int64)
    for ell in range(L):
        rng = substream(seed, NS_LAYER, ell)
        flips = rng.random(n) < params.rho
        z_ell = np.where(flips, -z_star, z_star).astype(np.int8)
        z_layers[ell] = z_ell
        flip_counts[ell] = int(flips.sum())
        same = z_ell[iu[0]] == z_ell[iu[1]]
        thresh = np.where(same, params.p[ell], params.q[ell])
        uppers.append(rng.random(iu[0].shape[0]) < thresh)
    graph = MultilayerGraph.from_upper(n, uppers)
    return SampleRecord(params=params, z_star=z_star, z_layers=z_layers,
                        graph=graph, seed=int(seed), flip_counts=flip_counts)


def experiment_params(n: int, L: int, c: float,
                      scaling: str = "strong-mix") -> ModelParams:
    """Layer probabilities for the simulation designs.

    strong-mix splits layers into three groups: weak layers 0..floor(0.3L)-1
    with p = c/(nL), q = 1/(nL); intermediate layers up to floor(0.95L)-1 with
    p = c*log(n)/(nL), q = log(n)/(nL); strong layers (the rest) with
    p = c*log(n)/n, q = log(n)/n. "weak" and "intermediate" apply the matching
    formula to every layer.
    """
    if c <= 1:
        raise ValueError(f"c must exceed 1, got {c}")
    logn = math.log(n)
    p = np.empty(L)
    q = np.empty(L)
    if scaling == "strong-mix":
        k1 = int(0.3 * L)
        k2 = int(0.95 * L)
        groups = ["weak"] * k1 + ["intermediate"] * (k2 - k1) + ["strong"] * (L - k2)
        for ell, g in enumerate(groups):
            if g == "weak":
                p[ell], q[ell] = c / (n * L), 1.0 / (n * L)
            elif g == "intermediate":
                p[ell], q[ell] = c * logn / (n * L), logn / (n * L)
            else:
                p[ell], q[ell] = c * logn / n, logn / n
    elif scaling == "weak":
        p[:], q[:] = c / (n * L), 1.0 / (n * L)
        groups = ["weak"] * L
    elif scaling == "intermediate":
        p[:], q[:] = c * logn / (n * L), logn / (n * L)
        groups = ["intermediate"] * L
    else:
        raise ValueError(f"unknown scaling {scaling!r}")
    if np.any(p >= 1.0):
        raise ValueError("computed edge probability reaches 1; shrink c or grow n")
    return ModelParams(n=n, L=L, rho=0.0, p=p, q=q, layer_groups=tuple(groups))


def write_instance(record: SampleRecord, path) -> None:
    """Serialize one instance as plain text.

    Header `n L rho seed`; per layer a `layer ell p q` line followed by one
    `i j` line per edge (0-based, i<j); then a `z_star` line and one
    `z_layer ell` line per layer, each carrying n +-1 tokens.
    """
    params = record.params
    lines = [f"{params.n} {params.L} {float(params.rho)!r} {record.seed}"]
    for ell in range(params.L):
        lines.append(f"layer {ell} {float(params.p[ell])!r} "
                     f"{float(params.q[ell])!r}")
        for i, j in record.graph.edge_list(ell):
            lines.append(f"{i} {j}")
    lines.append("z_star " + " ".join(f"{v:+d}" for v in record.z_star))
    for ell in range(params.L):
        lines.append(f"z_layer {ell} "
                     + " ".join(f"{v:+d}" for v in record.z_layers[ell]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_instance(path) -> SampleRecord:
    """Parse a file produced by write_instance."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    head = lines[0].split()
    n, L, rho, seed = int(head[0]), int(head[1]), float(head[2]), int(head[3])
    p = np.empty(L)
    q = np.empty(L)
    iu = np.triu_indices(n, k=1)
    flat = np.zeros((n, n), dtype=np.int64)
    flat[iu] = np.arange(iu[0].shape[0])
    uppers = [np.zeros(iu[0].shape[0], dtype=bool) for _ in range(L)]
    z_star = None
    z_layers = np.empty((L, n), dtype=np.int8)
    seen_layers = set()
    ell = -1
    for ln in lines[1:]:
        parts = ln.split()
        if parts[0] == "layer":
            ell = int(parts[1])
            p[ell], q[ell] = float(parts[2]), float(parts[3])
            seen_layers.add(ell)
        elif parts[0] == "z_star":
            z_star = np.array([int(t) for t in parts[1:]], dtype=np.int8)
        elif parts[0] == "z_layer":
            z_layers[int(parts[1])] = [int(t) for t in parts[2:]]
        else:
            i, j = int(parts[0]), int(parts[1])
            if not 0 <= i < j < n:
                raise ValueError(f"bad edge line {ln!r} in {path}")
            uppers[ell][flat[i, j]] = True
    if z_star is None or len(seen_layers) != L:
        raise ValueError(f"incomplete instance file {path}")
    params = ModelParams(n=n, L=L, rho=rho, p=p, q=q)
    graph = MultilayerGraph.from_upper(n, uppers)
    flips = np.array([(z_layers[l] != z_star).sum() for l in range(L)])
    return SampleRecord(params=params, z_star=as_assignment(z_star, n),
                        z_layers=z_layers, graph=graph, seed=seed,
                        flip_counts=flips)


def marginal_blend(p, q, rho: float) -> tuple[np.ndarray, np.ndarray]:
    """Marginal edge probabilities once layer labels are integrated out.

    A pair with equal global labels connects with probability
    p - 2(p-q)rho(1-rho); an unequal pair with q + 2(p-q)rho(1-rho).
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    shift = 2.0 * (p - q) * rho * (1.0 - rho)
    return p - shift, q + shift
