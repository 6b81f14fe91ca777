"""Gaussian affinity graphs on point clouds and their normalized transition operators.

The affinity between samples is the ambient Gaussian kernel
W_ij = sigma^(-d) * (4*pi)^(-d/2) * exp(-||x_i - x_j||^2 / (4*sigma^2)),
self-loops included, so one application of the row-normalized transition
matrix approximates the heat semigroup at time sigma^2. Two normalizations
are exposed as matrix-free matvecs: P = D^-1 W and the density-corrected
P~ = D_s^-1 W D^-1 with s = W D^-1 1, which cancels a non-uniform sampling
density to leading order.

Determinism contract: every matvec uses a fixed per-row accumulation order
(einsum for dense, CSR row loops for sparse), so results are bit-identical
regardless of how many threads the numeric backend is allowed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist, squareform

AUTO = "auto"
DENSE = "dense"
TRUNCATED = "truncated"

# Largest N built dense when truncation is "auto"; dense is the trusted oracle
# at desk scale, sparse enables larger sweeps.
DENSE_LIMIT = 4000


class GraphConnectivityError(ValueError):
    """A truncated affinity graph left some vertex with no neighbors."""


@dataclass(frozen=True)
class KernelConfig:
    """Bandwidth and storage policy of the affinity kernel.

    ``sigma`` is the kernel bandwidth in ambient length units and
    ``intrinsic_dim`` the manifold dimension d entering the sigma^(-d)
    normalization. ``truncation`` is "dense", "truncated" (drop pairs beyond
    cutoff_multiplier * sigma; the relative kernel value there is at most
    exp(-m_c^2/4), hence m_c >= 6), or "auto" (dense up to N = 4000).
    """

    sigma: float
    intrinsic_dim: int
    truncation: str = AUTO
    cutoff_multiplier: float = 8.0

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if self.intrinsic_dim < 1:
            raise ValueError(f"intrinsic_dim must be >= 1, got {self.intrinsic_dim}")
        if self.truncation not in (AUTO, DENSE, TRUNCATED):
            raise ValueError(f"unknown truncation mode {self.truncation!r}")
        if not self.cutoff_multiplier >= 6.0:
            raise ValueError(
                f"cutoff_multiplier must be >= 6 (kernel tail below 1e-3 of the "
                f"diagonal), got {self.cutoff_multiplier}"
            )

    @property
    def epsilon(self) -> float:
        """Diffusion time of one transition step, sigma^2."""
        return self.sigma**2

    @property
    def amplitude(self) -> float:
        """Kernel value at zero distance, sigma^(-d) (4 pi)^(-d/2)."""
        d = self.intrinsic_dim
        return self.sigma ** (-d) * (4.0 * np.pi) ** (-d / 2.0)


@dataclass
class GraphOperators:
    """Affinity matrix W with its degree vector D and right-normalizer s.

    W is dense (ndarray) or sparse CSR; D_i = sum_j W_ij > 0; s = W (D^-1 1).
    Immutable by convention after construction. The transition matrices
    P = D^-1 W and P~ = D_s^-1 W D^-1 are never materialized here; use
    apply_P / apply_Ptilde, or transition_dense for small-N oracles.
    """

    W: object
    D: np.ndarray
    s: np.ndarray
    config: KernelConfig

    @property
    def n_points(self) -> int:
        return self.D.shape[0]

    @classmethod
    def from_affinity(cls, W, config: KernelConfig) -> "GraphOperators":
        """Derive D and s from a symmetric nonnegative affinity matrix."""
        if sparse.issparse(W):
            D = np.asarray(W.sum(axis=1)).ravel()
        else:
            D = np.einsum("ij->i", W)
        if np.any(D <= 0.0):
            bad = int(np.argmax(D <= 0.0))
            raise GraphConnectivityError(f"vertex {bad} has nonpositive degree")
        s = _apply_W(W, 1.0 / D)
        if np.any(s <= 0.0):
            bad = int(np.argmax(s <= 0.0))
            raise GraphConnectivityError(f"vertex {bad} has nonpositive normalizer s")
        return cls(W, D, s, config)


def _apply_W(W, v: np.ndarray) -> np.ndarray:
    # einsum keeps the dense matvec single-threaded with a fixed per-row
    # accumulation order; CSR matvec is a sequential per-row loop in C
    if sparse.issparse(W):
        return W @ v
    return np.einsum("ij,j->i", W, v)


def _check_vector(ops: GraphOperators, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (ops.n_points,):
        raise ValueError(f"vector must have shape ({ops.n_points},), got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    return v


def build_affinity(cloud, config: KernelConfig) -> GraphOperators:
    """Build W, D, s for a point cloud.

    Dense mode evaluates the kernel on every unordered pair (pdist computes
    each squared distance once as an exact sum of squared differences, and the
    symmetrized square form is exactly symmetric). Truncated mode stores only
    pairs within cutoff_multiplier * sigma, plus all self-loops; D and s come
    from the stored entries.

    Raises GraphConnectivityError when truncation leaves a vertex with no
    off-diagonal entry (the graph is disconnected at this cutoff), naming the
    isolated index.
    """
    if config.intrinsic_dim != cloud.manifold.dim:
        raise ValueError(
            f"config.intrinsic_dim = {config.intrinsic_dim} does not match the "
            f"manifold dimension {cloud.manifold.dim}"
        )
    n = cloud.n_points
    mode = config.truncation
    if mode == AUTO:
        mode = DENSE if n <= DENSE_LIMIT else TRUNCATED
    resolved = replace(config, truncation=mode)
    amp = resolved.amplitude
    inv_4eps = 1.0 / (4.0 * resolved.epsilon)

    if mode == DENSE:
        sq = squareform(pdist(cloud.points, "sqeuclidean"))
        W = amp * np.exp(-sq * inv_4eps)
    else:
        cutoff = resolved.cutoff_multiplier * resolved.sigma
        tree = cKDTree(cloud.points)
        pairs = tree.query_pairs(cutoff, output_type="ndarray")
        diffs = cloud.points[pairs[:, 0]] - cloud.points[pairs[:, 1]]
        sq = np.einsum("pi,pi->p", diffs, diffs)
        vals = amp * np.exp(-sq * inv_4eps)
        idx = np.arange(n)
        rows = np.concatenate([pairs[:, 0], pairs[:, 1], idx])
        cols = np.concatenate([pairs[:, 1], pairs[:, 0], idx])
        data = np.concatenate([vals, vals, np.full(n, amp)])
        W = sparse.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()
        stored_per_row = np.diff(W.indptr)
        if np.any(stored_per_row <= 1):
            bad = int(np.argmax(stored_per_row <= 1))
            raise GraphConnectivityError(
                f"vertex {bad} has no neighbor within cutoff {cutoff:.6g} "
                f"(graph disconnected at this truncation)"
            )
    return GraphOperators.from_affinity(W, resolved)


def apply_P(ops: GraphOperators, v) -> np.ndarray:
    """One step of the row-stochastic transition P = D^-1 W, as D^-1 (W v)."""
    v = _check_vector(ops, v)
    return _apply_W(ops.W, v) / ops.D


def apply_Ptilde(ops: GraphOperators, v) -> np.ndarray:
    """One step of the density-corrected transition P~ = D_s^-1 W D^-1."""
    v = _check_vector(ops, v)
    return _apply_W(ops.W, v / ops.D) / ops.s


def transition_dense(ops: GraphOperators, mode: str = "plain") -> np.ndarray:
    """Materialize P ("plain") or P~ ("density_corrected") as a dense matrix.

    Memory-guarded oracle for small N; rejects N > 4096.
    """
    n = ops.n_points
    if n > 4096:
        raise ValueError(f"transition_dense is limited to N <= 4096, got N = {n}")
    W = ops.W.toarray() if sparse.issparse(ops.W) else np.array(ops.W)
    if mode == "plain":
        return W / ops.D[:, None]
    if mode == "density_corrected":
        return (W / ops.D[None, :]) / ops.s[:, None]
    raise ValueError(f"unknown transition mode {mode!r}")


_TRIPLET_DTYPE = np.dtype([("i", "<u4"), ("j", "<u4"), ("value", "<f8")])


def dump_affinity(ops: GraphOperators, path) -> None:
    """Write W as little-endian (i: u32, j: u32, value: f64) triplets.

    Entries appear in stored order (row-major). A JSON sidecar at
    ``path + ".json"`` records N, sigma, intrinsic dimension, truncation mode
    and the entry count. Intended for diagnostics at small N; dense graphs
    dump all N^2 entries.
    """
    W = ops.W
    if sparse.issparse(W):
        coo = W.tocoo()
        order = np.lexsort((coo.col, coo.row))
        i, j, vals = coo.row[order], coo.col[order], coo.data[order]
    else:
        i, j = np.divmod(np.arange(W.size, dtype=np.int64), W.shape[1])
        vals = np.asarray(W).ravel()
    out = np.empty(vals.size, dtype=_TRIPLET_DTYPE)
    out["i"] = i
    out["j"] = j
    out["value"] = vals
    out.tofile(path)
    sidecar = {
        "n_points": ops.n_points,
        "sigma": ops.config.sigma,
        "intrinsic_dim": ops.config.intrinsic_dim,
        "truncation": ops.config.truncation,
        "cutoff_multiplier": ops.config.cutoff_multiplier,
        "entry_count": int(vals.size),
    }
    with open(str(path) + ".json", "w") as handle:
        json.dump(sidecar, handle, indent=2, sort_keys=True)
        handle.write("\n")
