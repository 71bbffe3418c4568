"""
Inverse-distance spatial weights blocked by industry.

Two firms are neighbours only when they share an industry code at the
chosen level.  Rows are normalized to sum to one; a firm with no neighbour
keeps an all-zero row.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .data import BlockLevel

__all__ = ["EARTH_RADIUS_KM", "D_MIN_KM", "great_circle_km", "pairwise_km",
           "SpatialWeights", "build_weights", "weights_from_dense",
           "row_normalize"]

EARTH_RADIUS_KM = 6371.0088
D_MIN_KM = 0.001


def great_circle_km(a, b, radius=EARTH_RADIUS_KM):
    """Haversine distance in km between ``a`` and ``b`` given as (lon, lat) degrees.

    Broadcasts over leading dimensions.
    """
    a = np.radians(np.asarray(a, dtype=float))
    b = np.radians(np.asarray(b, dtype=float))
    dlon = b[..., 0] - a[..., 0]
    dlat = b[..., 1] - a[..., 1]
    h = (np.sin(dlat / 2) ** 2
         + np.cos(a[..., 1]) * np.cos(b[..., 1]) * np.sin(dlon / 2) ** 2)
    return 2 * radius * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def pairwise_km(coords, radius=EARTH_RADIUS_KM):
    """Dense (m, m) haversine distance matrix for an (m, 2) lon/lat array."""
    coords = np.asarray(coords, dtype=float)
    return great_circle_km(coords[:, None, :], coords[None, :, :], radius)


def row_normalize(matrix):
    """Scale each row of a sparse matrix to unit sum; zero rows stay zero."""
    m = sparse.csr_matrix(matrix, dtype=float)
    sums = np.asarray(m.sum(axis=1)).ravel()
    scale = np.divide(1.0, sums, out=np.zeros_like(sums), where=sums != 0)
    return sparse.diags(scale) @ m


@dataclass(frozen=True)
class SpatialWeights:
    """Row-normalized weight matrix with its industry-block partition.

    ``blocks`` is a tuple of index arrays partitioning ``0..n-1``; W has no
    entry across blocks.  Firms without any neighbour form singleton blocks
    and are listed in ``isolated``.
    """
    matrix: sparse.csr_matrix
    blocks: tuple
    block_level: BlockLevel | None = None
    d_min_km: float = D_MIN_KM
    row_normalized: bool = True

    @property
    def n(self):
        return self.matrix.shape[0]

    @property
    def isolated(self):
        sums = np.asarray(abs(self.matrix).sum(axis=1)).ravel()
        return np.flatnonzero(sums == 0)

    @property
    def nnz(self):
        return self.matrix.nnz

    def toarray(self):
        return self.matrix.toarray()

    def dense_blocks(self):
        """Yield ``(index, dense_block)`` for every block."""
        W = self.matrix
        for idx in self.blocks:
            yield idx, W[idx][:, idx].toarray()

    @cached_property
    def partition(self):
        """``(singletons, [(index, dense_block), ...])`` for blockwise solves.

        Singleton blocks (isolated firms with a zero diagonal) are pooled into
        one index array since ``I - rho W`` is the identity there.
        """
        single, multi = [], []
        for idx, block in self.dense_blocks():
            if len(idx) == 1 and block[0, 0] == 0:
                single.append(idx)
            else:
                multi.append((idx, block))
        single = np.concatenate(single) if single else np.array([], dtype=int)
        return single, multi

    def triplets(self):
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return coo.row[order], coo.col[order], coo.data[order]

    def to_csv(self, path):
        """Dump as ``i,j,weight`` rows for outside inspection."""
        rows, cols, vals = self.triplets()
        with open(path, "w") as fh:
            fh.write("i,j,weight\n")
            for i, j, v in zip(rows, cols, vals):
                fh.write(f"{i},{j},{float(v)!r}\n")

    def metadata(self):
        return {
            "block_level": None if self.block_level is None else self.block_level.value,
            "d_min_km": self.d_min_km,
            "n": int(self.n),
            "nnz": int(self.nnz),
            "n_blocks": len(self.blocks),
            "isolated_rows": int(len(self.isolated)),
        }


def _partition(labels):
    labels = np.asarray(labels)
    _, inverse = np.unique(labels, return_inverse=True)
    order = np.argsort(inverse, kind="stable")
    splits = np.flatnonzero(np.diff(inverse[order])) + 1
    return [np.sort(g) for g in np.split(order, splits)]


def build_weights(records, block_level, d_min_km=D_MIN_KM, coords=None,
                  labels=None, radius_km=EARTH_RADIUS_KM):
    """Build W for ``records`` (any objects with ``lon``, ``lat``, ``industry``).

    Raw weights are ``1 / max(d_ij, d_min_km)`` for same-block pairs.
    Distances are only computed inside blocks.  ``coords`` and ``labels``
    may be passed directly instead of records.
    """
    if d_min_km <= 0:
        raise ValueError("d_min_km must be positive")
    level = BlockLevel.coerce(block_level)
    if coords is None:
        coords = np.array([(r.lon, r.lat) for r in records], dtype=float)
    if labels is None:
        labels = [r.industry.at(level.value) for r in records]
    coords = np.asarray(coords, dtype=float)
    n = len(coords)
    if n < 1:
        raise ValueError("need at least one record")

    rows, cols, vals, blocks = [], [], [], []
    for idx in _partition(labels):
        if len(idx) == 1:
            blocks.append(idx)
            continue
        d = np.maximum(pairwise_km(coords[idx], radius_km), d_min_km)
        inv = 1.0 / d
        np.fill_diagonal(inv, 0.0)
        inv /= inv.sum(axis=1, keepdims=True)
        ii, jj = np.nonzero(inv)
        rows.append(idx[ii])
        cols.append(idx[jj])
        vals.append(inv[ii, jj])
        blocks.append(idx)
    if rows:
        rows, cols, vals = map(np.concatenate, (rows, cols, vals))
    matrix = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    matrix.sort_indices()
    return SpatialWeights(matrix, tuple(blocks), level, d_min_km)


def weights_from_dense(W, normalize=False, block_level=None):
    """Wrap an explicit matrix; blocks are the connected components of W."""
    m = sparse.csr_matrix(np.asarray(W, dtype=float))
    if normalize:
        m = sparse.csr_matrix(row_normalize(m))
    m.eliminate_zeros()
    _, comp = csgraph.connected_components(m, directed=True, connection="weak")
    sums = np.asarray(m.sum(axis=1)).ravel()
    unit = bool(np.all((sums == 0) | (np.abs(sums - 1) < 1e-12)))
    return SpatialWeights(m, tuple(_partition(comp)), block_level,
                          row_normalized=unit)
