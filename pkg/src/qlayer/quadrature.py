"""Composite Gauss quadrature on tensor grids.

All heavy integrals in the package run on composite 2-point Gauss rules over
explicit cell decompositions (exact for cubics on each cell, error O(h^4)).
Node generators here are the single source of grid layouts so that refinement
(`halve`) and the eigensolver meshes stay consistent.

Sums are plain ``np.sum`` over arrays laid out in a fixed order; with a fixed
grid this is a deterministic pairwise reduction, so repeated runs produce
bit-identical values.
"""
from __future__ import annotations

import numpy as np

# 2-point Gauss-Legendre on [-1, 1]
_GAUSS2_X = np.array([-1.0 / np.sqrt(3.0), 1.0 / np.sqrt(3.0)])
_GAUSS2_W = np.array([1.0, 1.0])


def gauss_points(nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Composite 2-point Gauss points and weights for the cells of `nodes`.

    `nodes` is a strictly increasing 1-D array of cell boundaries; the rule
    returns ``2*(len(nodes)-1)`` points in increasing order with their
    weights.
    """
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 1 or nodes.size < 2:
        raise ValueError("nodes must be a 1-D array with at least 2 entries")
    if np.any(np.diff(nodes) <= 0):
        raise ValueError("nodes must be strictly increasing")
    lo = nodes[:-1]
    h = np.diff(nodes)
    # points per cell: mid + (h/2) * xi
    pts = (lo[:, None] + 0.5 * h[:, None] * (1.0 + _GAUSS2_X[None, :])).ravel()
    wts = (0.5 * h[:, None] * _GAUSS2_W[None, :]).ravel()
    return pts, wts


def halve(nodes: np.ndarray) -> np.ndarray:
    """Insert the midpoint of every cell (one uniform refinement level)."""
    nodes = np.asarray(nodes, dtype=float)
    mids = 0.5 * (nodes[:-1] + nodes[1:])
    out = np.empty(nodes.size + mids.size)
    out[0::2] = nodes
    out[1::2] = mids
    return out


def uniform_nodes(lo: float, hi: float, count: int) -> np.ndarray:
    """`count` equally spaced nodes on [lo, hi]."""
    if count < 2:
        raise ValueError("count must be at least 2")
    return np.linspace(lo, hi, count)


def graded_nodes(lo: float, hi: float, count: int, power: float = 1.6,
                 center: float | None = None) -> np.ndarray:
    """Nodes clustered around `center` (default: interval midpoint).

    The map s -> center + half*sign(s)*|s|^power of a uniform grid on
    [-1, 1]; power 1 reproduces the uniform grid.
    """
    if count < 2:
        raise ValueError("count must be at least 2")
    mid = 0.5 * (lo + hi) if center is None else float(center)
    half_lo, half_hi = mid - lo, hi - mid
    s = np.linspace(-1.0, 1.0, count)
    t = np.sign(s) * np.abs(s) ** power
    nodes = np.where(t < 0, mid + half_lo * t, mid + half_hi * t)
    nodes[0], nodes[-1] = lo, hi
    return nodes


def geometric_nodes(lo: float, hi: float, count: int) -> np.ndarray:
    """Geometrically spaced nodes on [lo, hi] with lo > 0."""
    if lo <= 0:
        raise ValueError("geometric spacing needs lo > 0")
    return np.geomspace(lo, hi, count)


def symmetric_interval_nodes(a: float, count: int) -> np.ndarray:
    """Uniform nodes on (-a, a), symmetric about 0.

    An odd `count` puts a node at 0; either parity keeps the node set (and
    hence the Gauss points) symmetric under u -> -u, so odd-in-u integrands
    cancel exactly in the composite rule.
    """
    return np.linspace(-a, a, count)
