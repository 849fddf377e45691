"""Composite Gauss-Legendre panels and doubling rules used by the
special-function evaluators.

Everything here is deterministic: node layouts depend only on the requested
panel counts, so repeated runs sum in the same order.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import QuadratureError


@lru_cache(maxsize=64)
def _gauss_nodes(n_nodes: int):
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    return x, w


def panel_nodes(a: float, b: float, n_panels: int, n_nodes: int = 16):
    """Nodes and weights of a composite Gauss-Legendre rule on [a, b]."""
    x, w = _gauss_nodes(n_nodes)
    edges = np.linspace(a, b, n_panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def integrate_refining(f, a: float, b: float, *, tol: float = 1e-10,
                       n_panels: int = 16, max_doublings: int = 9):
    """Integrate ``f`` (vectorized) on [a, b], doubling panels until the
    change between successive levels is below ``tol``.

    Returns ``(value, err_estimate)``; raises QuadratureError if the grid
    cap is reached first.
    """
    nodes, weights = panel_nodes(a, b, n_panels)
    prev = float(np.dot(f(nodes), weights))
    for _ in range(max_doublings):
        n_panels *= 2
        nodes, weights = panel_nodes(a, b, n_panels)
        cur = float(np.dot(f(nodes), weights))
        err = abs(cur - prev)
        if err <= tol:
            return cur, err
        prev = cur
    raise QuadratureError(
        f"integral on [{a}, {b}] did not converge to {tol:g}", achieved=err)


def integrate_grid_refining(f, a: float, b: float, *, tol: float = 1e-10,
                            n_panels: int = 16, max_doublings: int = 9):
    """Like :func:`integrate_refining` for an ``f`` returning one row per
    output component, shape (m, n_nodes).  Convergence is in the sup norm
    over components.  Returns ``(values, err_estimate)``.
    """
    nodes, weights = panel_nodes(a, b, n_panels)
    prev = f(nodes) @ weights
    for _ in range(max_doublings):
        n_panels *= 2
        nodes, weights = panel_nodes(a, b, n_panels)
        cur = f(nodes) @ weights
        err = float(np.max(np.abs(cur - prev)))
        if err <= tol:
            return cur, err
        prev = cur
    raise QuadratureError(
        f"grid integral on [{a}, {b}] did not converge to {tol:g}",
        achieved=err)


def trapezoid_doubling(f, a: float, b: float, *, tol: float = 1e-12,
                       n0: int = 64, max_doublings: int = 16):
    """Trapezoid rule with interval doubling; converges geometrically for
    smooth periodic integrands.  Returns ``(value, err_estimate)``.
    """
    n = n0
    x = np.linspace(a, b, n + 1)
    prev = float(np.trapezoid(f(x), x))
    for _ in range(max_doublings):
        n *= 2
        x = np.linspace(a, b, n + 1)
        cur = float(np.trapezoid(f(x), x))
        err = abs(cur - prev)
        if err <= tol:
            return cur, err
        prev = cur
    raise QuadratureError(
        f"trapezoid integral on [{a}, {b}] stalled above {tol:g}",
        achieved=err)
