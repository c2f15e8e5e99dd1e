"""Tensor-product quadrature rules.

Periodic axes use the endpoint-free composite trapezoid rule, which is
spectrally accurate for smooth periodic integrands.  Non-periodic axes use
composite Gauss-Legendre panels.  Reductions use numpy's pairwise
summation, so results are deterministic for a fixed grid.
"""

import numpy as np

__all__ = ["periodic_trapezoid", "gauss_legendre", "composite_gauss_legendre", "axis_rule"]


def periodic_trapezoid(a, b, n):
    """n equispaced nodes on [a,b) with uniform weights (b-a)/n."""
    h = (b - a) / n
    nodes = a + h * np.arange(n)
    return nodes, np.full(n, h)


def gauss_legendre(a, b, n):
    x, w = np.polynomial.legendre.leggauss(n)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * x, half * w


def composite_gauss_legendre(a, b, panels, order):
    """`panels` Gauss-Legendre panels of `order` nodes each."""
    edges = np.linspace(a, b, panels + 1)
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        x, w = gauss_legendre(lo, hi, order)
        nodes.append(x)
        weights.append(w)
    return np.concatenate(nodes), np.concatenate(weights)


def axis_rule(a, b, n, periodic, gl_order=4):
    """Pick the rule for one axis: trapezoid if periodic, panelled GL otherwise.

    For non-periodic axes, n points are laid out as ceil(n / gl_order)
    panels of `gl_order` Gauss nodes.
    """
    if periodic:
        return periodic_trapezoid(a, b, n)
    panels = max(1, int(np.ceil(n / gl_order)))
    return composite_gauss_legendre(a, b, panels, gl_order)


def tensor_nodes(rules):
    """Mesh a list of (nodes, weights) axis rules.

    Returns flattened coordinates, one array per axis, and the flattened
    tensor-product weights.
    """
    node_axes = [r[0] for r in rules]
    weight_axes = [r[1] for r in rules]
    mesh = np.meshgrid(*node_axes, indexing="ij")
    w = weight_axes[0]
    for wa in weight_axes[1:]:
        w = np.multiply.outer(w, wa)
    return [m.reshape(-1) for m in mesh], w.reshape(-1)
