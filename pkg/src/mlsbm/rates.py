"""Signal-strength and noise-level quantities, and the parity-structured
minimization of the error exponents they induce.

Per layer, the tilted signal strength is

    I_t = -log[(p^(1-t) q^t + (1-p)^(1-t) (1-q)^t)
               (p^t q^(1-t) + (1-p)^t (1-q)^(1-t))],

concave on [0,1], zero at the endpoints, maximal at t = 1/2. The label-noise
level is J = -log 2 sqrt(rho(1-rho)). For a layer subset S, with m = n/2,

    psi_S*(a) = sup_{t in [0,1]} a t + m * sum_{l in S} I_t^(l),

and the two exponent families are parity-dispatched combinations of |S^c| J
(or |S| J) with psi_S*(0) or psi_S*(-2J).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_PROB_CLIP = 1e-12
RHO_FLOOR = 1e-8
GOLDEN_TOL = 1e-10
DEFAULT_T_GRID = 2001
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _clamp_pq(p, q):
    p = np.minimum(np.asarray(p, dtype=float), 1.0 - _PROB_CLIP)
    q = np.maximum(np.asarray(q, dtype=float), _PROB_CLIP)
    return p, q


def layer_info(p: float, q: float, t: float) -> float:
    """Signal strength I_t of a single layer; exactly 0 at t in {0, 1}."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    if t == 0.0 or t == 1.0:
        return 0.0
    pc, qc = _clamp_pq(p, q)
    A = pc ** (1.0 - t) * qc ** t + (1.0 - pc) ** (1.0 - t) * (1.0 - qc) ** t
    B = pc ** t * qc ** (1.0 - t) + (1.0 - pc) ** t * (1.0 - qc) ** (1.0 - t)
    return max(0.0, -(math.log(A) + math.log(B)))


def info_curve(p, q, ts) -> np.ndarray:
    """I_t for vectors of layers and grid points; shape (len(ts), L)."""
    p, q = _clamp_pq(p, q)
    ts = np.asarray(ts, dtype=float)
    t = ts[:, None]
    lp, lq = np.log(p), np.log(q)
    l1p, l1q = np.log1p(-p), np.log1p(-q)
    A = np.exp((1.0 - t) * lp + t * lq) + np.exp((1.0 - t) * l1p + t * l1q)
    B = np.exp(t * lp + (1.0 - t) * lq) + np.exp(t * l1p + (1.0 - t) * l1q)
    out = -(np.log(A) + np.log(B))
    out[ts == 0.0] = 0.0
    out[ts == 1.0] = 0.0
    return np.maximum(out, 0.0)


def j_rho(rho: float) -> float:
    """Noise level of the label sampling; +inf at rho <= floor, 0 at 1/2."""
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    if rho <= RHO_FLOOR:
        return math.inf
    return -math.log(2.0 * math.sqrt(rho * (1.0 - rho)))


def _golden_max(f, lo: float, hi: float, tol: float = GOLDEN_TOL):
    """Golden-section maximization of a concave function on [lo, hi].

    Returns (t_best, f_best) over every point evaluated, so the value never
    undershoots the final bracket's samples.
    """
    evals = [(lo, f(lo)), (hi, f(hi))]
    x1 = hi - _INVPHI * (hi - lo)
    x2 = lo + _INVPHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    evals.append((x1, f1))
    evals.append((x2, f2))
    while hi - lo > tol:
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INVPHI * (hi - lo)
            f2 = f(x2)
            evals.append((x2, f2))
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INVPHI * (hi - lo)
            f1 = f(x1)
            evals.append((x1, f1))
    mid = 0.5 * (lo + hi)
    evals.append((mid, f(mid)))
    return max(evals, key=lambda e: e[1])


def _subset_indices(S, L: int) -> np.ndarray:
    S = tuple(S)
    if not S:
        return np.empty(0, dtype=int)
    idx = np.unique(np.asarray(S, dtype=int))
    if idx[0] < 0 or idx[-1] >= L:
        raise ValueError(f"subset indices out of range for L={L}")
    return idx


def psi_star(S, a: float, n: int, p, q,
             tol: float = GOLDEN_TOL) -> tuple[float, float]:
    """Convex conjugate sup_t a t + (n/2) sum_{l in S} I_t; returns (value, t).

    a = 0 is answered by the exact identity (value (n/2) sum I_{1/2} at
    t = 1/2); a = -inf degenerates to (0, 0); an empty S gives max(a, 0).
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    idx = _subset_indices(S, p.shape[0])
    if idx.size == 0:
        return (max(a, 0.0), 1.0 if a > 0.0 else 0.0)
    if a == -math.inf:
        return (0.0, 0.0)
    m = n / 2.0
    pS, qS = p[idx], q[idx]
    if a == 0.0:
        val = m * float(info_curve(pS, qS, [0.5])[0].sum())
        return (val, 0.5)

    def g(t: float) -> float:
        return a * t + m * float(info_curve(pS, qS, [t])[0].sum())

    t_best, f_best = _golden_max(g, 0.0, 1.0, tol)
    return (float(f_best), float(t_best))


def global_snr(S, n: int, rho: float, p, q) -> float:
    """Exponent I_S: |S^c| J + psi_S*(0) if |S^c| even, else
    (|S^c|+1) J + psi_S*(-2J). Infinite when rho <= floor and S != [L]."""
    p = np.asarray(p, dtype=float)
    L = p.shape[0]
    idx = _subset_indices(S, L)
    k = L - idx.size
    J = j_rho(rho)
    if k % 2 == 0:
        head = 0.0 if k == 0 else k * J
        if math.isinf(head):
            return math.inf
        return head + psi_star(idx, 0.0, n, p, q)[0]
    if math.isinf(J):
        return math.inf
    return (k + 1) * J + psi_star(idx, -2.0 * J, n, p, q)[0]


def individual_snr_J(S, n: int, rho: float, p, q) -> float:
    """Exponent J_S: same dispatch as global_snr but on the parity of |S|."""
    p = np.asarray(p, dtype=float)
    idx = _subset_indices(S, p.shape[0])
    s = idx.size
    J = j_rho(rho)
    if s % 2 == 0:
        head = 0.0 if s == 0 else s * J
        if math.isinf(head):
            return math.inf
        return head + psi_star(idx, 0.0, n, p, q)[0]
    if math.isinf(J):
        return math.inf
    return (s + 1) * J + psi_star(idx, -2.0 * J, n, p, q)[0]


def _even_branch_candidates(H: np.ndarray, J: float, forced: int | None):
    """Optimal even-|S^c| sets from the separable rule plus a parity toggle.

    Each free layer prefers min(J, H_l): in S when H_l < J. If the resulting
    |S^c| is odd, toggling the free layer with the smallest |H_l - J| gap is
    exactly optimal; near-tied toggles are all returned.
    """
    L = H.shape[0]
    free = np.ones(L, dtype=bool)
    if forced is not None:
        free[forced] = False
    in_S = H < J
    if forced is not None:
        in_S[forced] = True
    k = int(L - in_S.sum())
    base = frozenset(np.where(in_S)[0].tolist())
    if k % 2 == 0:
        return [base]
    gaps = np.where(free, np.abs(H - J), math.inf)
    if not free.any():
        return []
    lo = gaps.min()
    cand = []
    order = np.argsort(gaps)
    near = [int(j) for j in order[:3] if math.isfinite(gaps[j])]
    near += [int(j) for j in np.where(gaps <= lo * (1.0 + 1e-9) + 1e-300)[0]]
    for j in dict.fromkeys(near):
        cand.append(base ^ frozenset([j]))
    return cand


def _parity_candidates(H: np.ndarray, J: float, target_odd: bool,
                       forced: int | None, max_enum: int = 12):
    """Candidate argmin sets near a separable solution at one t.

    Layers within a small relative window of the H = J tie are enumerated
    both ways; clearly-preferring layers are fixed; parity is repaired by the
    cheapest clear-layer toggles when no enumerated combination lands on the
    target parity of |S^c|.
    """
    L = H.shape[0]
    scale = max(float(J) if math.isfinite(J) else 0.0, float(H.max()), 1e-300)
    eps = 1e-7 * scale
    free = np.ones(L, dtype=bool)
    if forced is not None:
        free[forced] = False
    gap = H - J
    amb = free & (np.abs(gap) <= eps)
    amb_idx = np.where(amb)[0]
    if amb_idx.size > max_enum:
        keep = amb_idx[np.argsort(np.abs(gap[amb_idx]))[:max_enum]]
        amb[:] = False
        amb[keep] = True
        amb_idx = keep
    clear_in = free & ~amb & (gap < 0)
    clear_free = np.where(free & ~amb)[0]
    clear_gaps = np.abs(gap[clear_free])
    toggle_order = clear_free[np.argsort(clear_gaps)]

    base = set(np.where(clear_in)[0].tolist())
    if forced is not None:
        base.add(forced)
    out = set()
    for bits in range(1 << amb_idx.size):
        S = set(base)
        for pos, j in enumerate(amb_idx):
            if bits >> pos & 1:
                S.add(int(j))
        k = L - len(S)
        if (k % 2 == 1) == target_odd:
            out.add(frozenset(S))
        else:
            if toggle_order.size:
                lo = np.abs(gap[toggle_order[0]])
                for j in toggle_order[:3]:
                    out.add(frozenset(S ^ {int(j)}))
                for j in toggle_order:
                    if np.abs(gap[j]) <= lo * (1.0 + 1e-9) + 1e-300:
                        out.add(frozenset(S ^ {int(j)}))
                    else:
                        break
    return out


def _min_snr(n: int, rho: float, p: np.ndarray, q: np.ndarray,
             t_grid: int, forced: int | None = None):
    """min over subsets (containing `forced` if given) of global_snr.

    Even-parity side is exactly separable. The odd side equals a concave
    sup over t of a separable parity-repaired minimum (swept on a grid and
    polished by golden section); argmin sets are then re-derived at the
    maximizing t and every candidate is re-evaluated exactly.
    """
    L = p.shape[0]
    m = n / 2.0
    J = j_rho(rho)
    if math.isinf(J):
        S = tuple(range(L))
        return global_snr(S, n, rho, p, q), S
    if t_grid < 3:
        raise ValueError("t_grid too small")

    H_half = m * info_curve(p, q, [0.5])[0]
    candidates = set(_even_branch_candidates(H_half, J, forced))
    candidates.add(frozenset(range(L)))  # always-valid fallback, |S^c| = 0

    free = np.ones(L, dtype=bool)
    if forced is not None:
        free[forced] = False

    def sweep_values(Hmat: np.ndarray, t_arr: np.ndarray) -> np.ndarray:
        """-2Jt + J + separable min with |S^c| forced odd, per grid row."""
        contrib = np.where(free, np.minimum(Hmat, J), Hmat).sum(axis=1)
        in_S = Hmat < J
        if forced is not None:
            in_S[:, forced] = True
        k = L - in_S.sum(axis=1)
        gaps = np.where(free, np.abs(Hmat - J), math.inf).min(axis=1)
        repair = np.where(k % 2 == 1, 0.0, gaps)
        inner = contrib + repair
        out = -2.0 * J * t_arr + J + inner
        out[~np.isfinite(inner)] = -math.inf  # no odd-parity set exists
        return out

    ts = np.linspace(0.0, 1.0, t_grid)
    Hg = m * info_curve(p, q, ts)
    g_vals = sweep_values(Hg, ts)

    if np.any(np.isfinite(g_vals)):
        i_star = int(np.argmax(g_vals))

        def g(t: float) -> float:
            Hrow = m * info_curve(p, q, [t])
            return float(sweep_values(Hrow, np.array([t]))[0])

        lo = ts[max(0, i_star - 1)]
        hi = ts[min(t_grid - 1, i_star + 1)]
        t_star, _ = _golden_max(g, lo, hi, GOLDEN_TOL)
        for t_probe in {float(t_star), float(ts[i_star])}:
            Hrow = m * info_curve(p, q, [t_probe])[0]
            candidates |= _parity_candidates(Hrow, J, True, forced)

    best_val, best_S = math.inf, None
    for S in sorted(candidates, key=lambda s: tuple(sorted(s))):
        val = global_snr(tuple(sorted(S)), n, rho, p, q)
        if val < best_val:
            best_val, best_S = val, tuple(sorted(S))
    return best_val, best_S


def minimize_global_snr(n: int, rho: float, p, q,
                        t_grid: int = DEFAULT_T_GRID) -> tuple[float, tuple]:
    """(min over all subsets S of I_S, an argmin set)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return _min_snr(n, rho, p, q, t_grid, forced=None)


def minimize_individual_snr(ell: int, n: int, rho: float, p, q,
                            t_grid: int = DEFAULT_T_GRID):
    """(min over S containing ell of I_S, argmin set, J_{ell}) for one layer."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if not 0 <= ell < p.shape[0]:
        raise ValueError(f"layer index {ell} out of range")
    val, S = _min_snr(n, rho, p, q, t_grid, forced=ell)
    J_ell = individual_snr_J((ell,), n, rho, p, q)
    return val, S, J_ell


@dataclass(frozen=True)
class PerLayerRate:
    layer: int
    snr_min: float
    argmin_set: tuple
    J_single: float
    exponent: float  # exp(-snr_min) + exp(-J_single)


@dataclass(frozen=True)
class RateReport:
    n: int
    L: int
    rho: float
    J_rho: float
    m: float
    global_snr_min: float
    global_argmin: tuple
    global_complement_parity: str  # parity of |S^c| at the global argmin
    global_exponent: float
    per_layer: tuple


def rate_report(params, t_grid: int = DEFAULT_T_GRID) -> RateReport:
    """All rate quantities for one parameterization."""
    n, L = params.n, params.L
    p = np.asarray(params.p, dtype=float)
    q = np.asarray(params.q, dtype=float)
    rho = params.rho
    g_val, g_set = _min_snr(n, rho, p, q, t_grid, forced=None)
    per = []
    for ell in range(L):
        v, S, J_ell = minimize_individual_snr(ell, n, rho, p, q, t_grid)
        per.append(PerLayerRate(layer=ell, snr_min=v, argmin_set=S,
                                J_single=J_ell,
                                exponent=math.exp(-v) + math.exp(-J_ell)))
    parity = "even" if (L - len(g_set)) % 2 == 0 else "odd"
    return RateReport(n=n, L=L, rho=rho, J_rho=j_rho(rho), m=n / 2.0,
                      global_snr_min=g_val, global_argmin=g_set,
                      global_complement_parity=parity,
                      global_exponent=math.exp(-g_val), per_layer=tuple(per))
