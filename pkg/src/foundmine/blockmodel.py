"""Bernoulli latent block model fitted by block classification-EM.

Rows and columns of a binary matrix are hard-assigned to r x k clusters
by alternating reassignment sweeps: rows to the cluster maximizing their
complete-data log-likelihood contribution given the column assignment,
columns likewise given rows, then block parameters refreshed from the
new partition. Empty clusters are reseeded with the single worst-fitting
row or column. The number of clusters is selected by the integrated
complete likelihood over a grid.

Parameter estimates are clipped into [eps, 1 - eps] during fitting so
pure blocks keep a finite likelihood; the ICL score itself is computed
from unclipped block means under the 0 * log 0 = 0 convention, so only
the partition matters to model selection.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from foundmine._rng import mix64
from foundmine.errors import DimensionError, ValidationError

log = logging.getLogger(__name__)


@dataclass
class LbmConfig:
    n_restarts: int = 20
    max_sweeps: int = 100
    param_floor: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.param_floor < 0.5):
            raise ValidationError(
                f"param_floor must lie in (0, 0.5), got {self.param_floor}"
            )
        if self.n_restarts < 1:
            raise ValidationError("need at least one restart")
        if self.max_sweeps < 1:
            raise ValidationError("need at least one sweep")


@dataclass
class LbmFit:
    """Hard co-clustering of a binary matrix."""

    r: int
    k: int
    z: np.ndarray  # row assignments, length I
    w: np.ndarray  # column assignments, length Q
    alpha: np.ndarray  # r x k clipped block means
    pi: np.ndarray  # row mixing proportions
    rho: np.ndarray  # column mixing proportions
    loglik: float  # complete-data log-likelihood at the clipped parameters
    icl: float
    converged: bool
    n_sweeps: int
    trace: list = field(default_factory=list)  # log-likelihood after each sweep
    reseeds: int = 0
    grid_scores: list | None = None  # populated by select_blocks
    overridden: bool = False

    @property
    def row_order(self) -> np.ndarray:
        """Row permutation grouping clusters contiguously."""
        return np.argsort(self.z, kind="stable")

    @property
    def col_order(self) -> np.ndarray:
        return np.argsort(self.w, kind="stable")

    def sorted_view(self, X: np.ndarray) -> np.ndarray:
        """The input matrix re-sorted into homogeneous blocks."""
        X = _as_binary(X)
        return X[self.row_order][:, self.col_order]


def _as_binary(X) -> np.ndarray:
    X = np.asarray(X)
    if X.ndim != 2:
        raise DimensionError(f"expected a 2-d binary matrix, got shape {X.shape}")
    vals = np.unique(X)
    if not np.isin(vals, (0, 1)).all():
        raise ValidationError("matrix entries must be 0/1")
    return X.astype(np.float64)


def _params_from(Xf, z, w, r, k, eps):
    """Clipped block means and mixing proportions for a partition."""
    I, Q = Xf.shape
    Z1 = np.zeros((I, r))
    Z1[np.arange(I), z] = 1.0
    W1 = np.zeros((Q, k))
    W1[np.arange(Q), w] = 1.0
    nz = Z1.sum(axis=0)
    nw = W1.sum(axis=0)
    ones = Z1.T @ Xf @ W1
    sizes = np.outer(nz, nw)
    with np.errstate(invalid="ignore", divide="ignore"):
        alpha = np.where(sizes > 0, ones / np.maximum(sizes, 1), 0.5)
    alpha = np.clip(alpha, eps, 1.0 - eps)
    pi = nz / I
    rho = nw / Q
    return alpha, pi, rho, nz, nw


def _complete_loglik(Xf, z, w, alpha, pi, rho):
    I, Q = Xf.shape
    nz = np.bincount(z, minlength=len(pi)).astype(np.float64)
    nw = np.bincount(w, minlength=len(rho)).astype(np.float64)
    Z1 = np.zeros((I, len(pi)))
    Z1[np.arange(I), z] = 1.0
    W1 = np.zeros((Q, len(rho)))
    W1[np.arange(Q), w] = 1.0
    ones = Z1.T @ Xf @ W1
    sizes = np.outer(nz, nw)
    mix = float(np.sum(nz[nz > 0] * np.log(pi[nz > 0]))) + float(
        np.sum(nw[nw > 0] * np.log(rho[nw > 0]))
    )
    bern = float(
        np.sum(ones * np.log(alpha) + (sizes - ones) * np.log1p(-alpha))
    )
    return mix + bern


def _fix_empty(assign, scores, n_clusters):
    """Move the worst-fitting item into each empty cluster; returns count."""
    moved = 0
    counts = np.bincount(assign, minlength=n_clusters)
    contrib = scores[np.arange(len(assign)), assign]
    for g in range(n_clusters):
        if counts[g] > 0:
            continue
        movable = counts[assign] > 1
        if not movable.any():
            break
        cand = np.where(movable)[0]
        worst = cand[np.argmin(contrib[cand])]
        counts[assign[worst]] -= 1
        assign[worst] = g
        counts[g] += 1
        moved += 1
    return moved


def _cem_once(Xf, r, k, cfg: LbmConfig, restart: int):
    I, Q = Xf.shape
    rng = np.random.default_rng(mix64(cfg.seed, r, k, restart))
    z = rng.permutation(I).astype(np.int64) % r
    w = rng.permutation(Q).astype(np.int64) % k
    eps = cfg.param_floor

    alpha, pi, rho, _, _ = _params_from(Xf, z, w, r, k, eps)
    trace = []
    reseeds = 0
    converged = False
    sweeps = 0
    for sweeps in range(1, cfg.max_sweeps + 1):
        La = np.log(alpha)
        Lb = np.log1p(-alpha)

        # Row step given (w, alpha, pi).
        A = La[:, w]  # r x Q
        B = Lb[:, w]
        row_scores = Xf @ (A - B).T + B.sum(axis=1) + np.log(pi)
        z_new = np.argmax(row_scores, axis=1).astype(np.int64)
        reseeds += _fix_empty(z_new, row_scores, r)

        # Column step given (z_new, alpha, rho).
        Az = La[z_new, :]  # I x k
        Bz = Lb[z_new, :]
        col_scores = Xf.T @ (Az - Bz) + Bz.sum(axis=0) + np.log(rho)
        w_new = np.argmax(col_scores, axis=1).astype(np.int64)
        reseeds += _fix_empty(w_new, col_scores, k)

        unchanged = np.array_equal(z_new, z) and np.array_equal(w_new, w)
        z, w = z_new, w_new
        alpha, pi, rho, _, _ = _params_from(Xf, z, w, r, k, eps)
        trace.append(_complete_loglik(Xf, z, w, alpha, pi, rho))
        if unchanged:
            converged = True
            break

    return LbmFit(
        r=r,
        k=k,
        z=z,
        w=w,
        alpha=alpha,
        pi=pi,
        rho=rho,
        loglik=trace[-1],
        icl=float("nan"),
        converged=converged,
        n_sweeps=sweeps,
        trace=trace,
        reseeds=reseeds,
    )


def fit_lbm(X, r: int, k: int, cfg: LbmConfig | None = None) -> LbmFit:
    """Best-of-restarts CEM fit with ``r`` row and ``k`` column clusters."""
    cfg = cfg or LbmConfig()
    Xf = _as_binary(X)
    I, Q = Xf.shape
    if not (1 <= r <= I):
        raise DimensionError(f"need 1 <= r <= I, got r={r}, I={I}")
    if not (1 <= k <= Q):
        raise DimensionError(f"need 1 <= k <= Q, got k={k}, Q={Q}")

    best = None
    for restart in range(cfg.n_restarts):
        fit = _cem_once(Xf, r, k, cfg, restart)
        if best is None or fit.loglik > best.loglik:
            best = fit
    best.icl = icl_score(best, Xf)
    return best


def icl_score(fit: LbmFit, X) -> float:
    """Integrated complete likelihood of the fitted partition.

    Complete-data log-likelihood at the unclipped block means (with
    0 * log 0 = 0) minus the BIC-style penalty
    ((r-1)/2) log I + ((k-1)/2) log Q + (rk/2) log(IQ).
    """
    Xf = _as_binary(X)
    I, Q = Xf.shape
    if len(fit.z) != I or len(fit.w) != Q:
        raise DimensionError(
            f"fit for ({len(fit.z)}, {len(fit.w)}) does not match matrix ({I}, {Q})"
        )
    r, k = fit.r, fit.k
    nz = np.bincount(fit.z, minlength=r).astype(np.float64)
    nw = np.bincount(fit.w, minlength=k).astype(np.float64)
    Z1 = np.zeros((I, r))
    Z1[np.arange(I), fit.z] = 1.0
    W1 = np.zeros((Q, k))
    W1[np.arange(Q), fit.w] = 1.0
    ones = Z1.T @ Xf @ W1
    sizes = np.outer(nz, nw)
    zeros = sizes - ones

    def xlogy(x, y):
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = x[pos] * np.log(y[pos])
        return out

    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(sizes > 0, ones / np.maximum(sizes, 1), 0.0)
        bern = xlogy(ones, means).sum() + xlogy(zeros, 1.0 - means).sum()
    mix = xlogy(nz, nz / I).sum() + xlogy(nw, nw / Q).sum()
    penalty = (
        0.5 * (r - 1) * np.log(I)
        + 0.5 * (k - 1) * np.log(Q)
        + 0.5 * r * k * np.log(I * Q)
    )
    return float(mix + bern - penalty)


def select_blocks(
    X,
    r_range,
    k_range,
    cfg: LbmConfig | None = None,
    n_jobs: int = 1,
) -> LbmFit:
    """Fit every (r, k) in the grid and return the fit with maximal ICL.

    The full grid of scores is attached to the returned fit for
    reporting. Grid cells draw seeds mixed per (r, k, restart), so the
    result is independent of evaluation order and thread count.
    """
    cfg = cfg or LbmConfig()
    r_values = sorted(set(int(v) for v in r_range))
    k_values = sorted(set(int(v) for v in k_range))
    if not r_values or not k_values:
        raise ValidationError("cluster ranges must be non-empty")
    Xf = _as_binary(X)
    cells = [(r, k) for r in r_values for k in k_values]

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            fits = list(pool.map(lambda rk: fit_lbm(Xf, rk[0], rk[1], cfg), cells))
    else:
        fits = [fit_lbm(Xf, r, k, cfg) for r, k in cells]

    best = None
    for fit in fits:
        if best is None or fit.icl > best.icl:
            best = fit
    best.grid_scores = [(f.r, f.k, f.icl) for f in fits]
    log.info("selected (r=%d, k=%d) with ICL %.3f", best.r, best.k, best.icl)
    return best


def apply_column_overrides(fit: LbmFit, X, groups: list) -> LbmFit:
    """Manually split listed column index groups into fresh clusters.

    Supports the post-hoc editorial move of carving a set of columns out
    of their fitted clusters; parameters and ICL are recomputed for the
    edited partition.
    """
    Xf = _as_binary(X)
    w = fit.w.copy()
    k = fit.k
    for group in groups:
        idx = np.asarray(sorted(set(int(i) for i in group)), dtype=np.int64)
        if idx.size == 0:
            continue
        if idx.min() < 0 or idx.max() >= len(w):
            raise ValidationError(f"override column index out of range: {group}")
        w[idx] = k
        k += 1
    # Drop any cluster ids emptied by the overrides and relabel densely.
    used = np.unique(w)
    remap = {int(old): new for new, old in enumerate(used)}
    w = np.array([remap[int(v)] for v in w], dtype=np.int64)
    k = len(used)
    eps = 1e-6
    alpha, pi, rho, _, _ = _params_from(Xf, fit.z, w, fit.r, k, eps)
    edited = LbmFit(
        r=fit.r,
        k=k,
        z=fit.z.copy(),
        w=w,
        alpha=alpha,
        pi=pi,
        rho=rho,
        loglik=_complete_loglik(Xf, fit.z, w, alpha, pi, rho),
        icl=float("nan"),
        converged=fit.converged,
        n_sweeps=fit.n_sweeps,
        trace=list(fit.trace),
        reseeds=fit.reseeds,
        grid_scores=fit.grid_scores,
        overridden=True,
    )
    edited.icl = icl_score(edited, Xf)
    return edited
