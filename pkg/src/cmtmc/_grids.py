"""Quadrature node placement and trapezoid weights shared across modules."""

from __future__ import annotations

import numpy as np

from .errors import DomainError

# Nodes closer than this (in years) are merged into one grid point.
_MERGE_TOL = 1e-9


def quadrature_nodes(t_start: float, t_end: float, step: float) -> np.ndarray:
    """Uniform nodes t_start, t_start+step, ... with a final partial panel.

    The last node is always exactly t_end.
    """
    if step <= 0.0:
        raise DomainError(f"quadrature step must be positive, got {step}")
    if t_end < t_start:
        raise DomainError(f"empty interval [{t_start}, {t_end}]")
    if t_end == t_start:
        return np.array([t_start])
    n_full = int(np.floor((t_end - t_start) / step + _MERGE_TOL))
    nodes = t_start + step * np.arange(n_full + 1)
    if t_end - nodes[-1] > _MERGE_TOL:
        nodes = np.append(nodes, t_end)
    else:
        nodes[-1] = t_end
    return nodes


def trapezoid_weights(nodes: np.ndarray) -> np.ndarray:
    """Composite trapezoid weights: integral(f) ~= sum(w * f(nodes))."""
    nodes = np.asarray(nodes, dtype=float)
    if nodes.size == 1:
        return np.zeros(1)
    w = np.empty_like(nodes)
    w[0] = 0.5 * (nodes[1] - nodes[0])
    w[-1] = 0.5 * (nodes[-1] - nodes[-2])
    w[1:-1] = 0.5 * (nodes[2:] - nodes[:-2])
    return w


def row_sum(a: np.ndarray) -> np.ndarray:
    """Sum over the last axis with a fixed binary-tree order.

    numpy's own reduction may change its accumulation order with the leading
    dimensions, which breaks bit-reproducibility of per-path results across
    block sizes and worker counts. The tree order here depends only on the
    reduced length.
    """
    a = np.asarray(a, dtype=float)
    m = a.shape[-1]
    if m == 0:
        return np.zeros(a.shape[:-1])
    width = 1 << (m - 1).bit_length()
    buf = np.zeros(a.shape[:-1] + (width,))
    buf[..., :m] = a
    while width > 1:
        width //= 2
        buf = buf[..., :width] + buf[..., width:2 * width]
    return buf[..., 0]


def merge_grids(*grids: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Merge several node sets into one sorted grid, deduplicating near-equal
    nodes, and return index arrays locating each input set in the merge.

    Coincident nodes (within 1e-9y) collapse onto the first representative so
    coupon dates landing on quadrature nodes do not create zero-width panels.
    """
    flat = np.concatenate([np.asarray(g, dtype=float) for g in grids])
    order = np.argsort(flat, kind="stable")
    merged: list[float] = []
    assign = np.empty(flat.size, dtype=np.intp)
    for pos in order:
        v = flat[pos]
        if merged and v - merged[-1] <= _MERGE_TOL:
            assign[pos] = len(merged) - 1
        else:
            merged.append(v)
            assign[pos] = len(merged) - 1
    grid = np.array(merged)
    idx_arrays = []
    offset = 0
    for g in grids:
        n = np.asarray(g).size
        idx_arrays.append(assign[offset:offset + n].copy())
        offset += n
    return grid, idx_arrays
