"""Polyline paths, branch bookkeeping, and adaptive quadrature.

All multivaluedness in this package comes from one power ``w = z**alpha``
cut along the negative real axis.  A path is a polyline (a sequence of
complex vertices); each time a segment crosses the cut the branch index
changes by one, with the sign fixed by the convention that points exactly on
the cut belong to the upper side (matching the principal logarithm, for
which ``arg(-1 + 0j) = +pi``).  Crossing from the upper to the lower side is
counterclockwise around the origin and increments the branch.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

MAX_DEPTH = 26


class SegmentNonconvergence(RuntimeError):
    """Adaptive subdivision hit the depth cap before meeting the tolerance."""


def cut_side(z: complex) -> int:
    """+1 on or above the cut line, -1 strictly below."""
    return 1 if z.imag >= 0 else -1


def segment_crossing(za: complex, zb: complex):
    """Branch increment and crossing location for one straight segment.

    Returns ``(delta, t)`` where ``delta`` is -1, 0, or +1 and ``t`` is the
    parameter of the crossing along the segment (None when ``delta == 0``).
    Segments through the origin are rejected.
    """
    sa, sb = cut_side(za), cut_side(zb)
    if sa == sb:
        return 0, None
    t = za.imag / (za.imag - zb.imag)
    x = za.real + t * (zb.real - za.real)
    if abs(x) < 1e-13 and abs(za.imag - zb.imag) > 0:
        raise ValueError(f"path segment {za} -> {zb} passes through the origin")
    if x < 0:
        return (1 if sa > 0 else -1), t
    return 0, None


def branch_along(vertices, start: int = 0):
    """Branch index at each vertex when walking the polyline from ``start``."""
    out = [start]
    n = start
    for za, zb in zip(vertices[:-1], vertices[1:]):
        delta, _ = segment_crossing(za, zb)
        n += delta
        out.append(n)
    return out


def winding_increment(vertices, start: int = 0) -> int:
    """Net branch change over the whole polyline."""
    return branch_along(vertices, start)[-1] - start


# ----------------------------------------------------------------------
# standard loop shapes


def circle(center: complex, radius: float, n: int = 64, t0: float = 0.0):
    """Closed circular polyline with ``n`` segments, starting at angle ``t0``."""
    th = t0 + np.linspace(0.0, 2 * np.pi, n + 1)
    return center + radius * np.exp(1j * th)


def based_loop(base: complex, center: complex, radius: float, n: int = 64):
    """Loop from ``base``: straight to the circle, once around, straight back."""
    dirv = base - center
    if abs(dirv) <= radius:
        raise ValueError("base point lies inside the requested circle")
    t0 = float(np.angle(dirv))
    entry = center + radius * np.exp(1j * t0)
    ring = circle(center, radius, n=n, t0=t0)
    return np.concatenate(([base], ring, [base])) if np.isclose(ring[0], entry) else np.concatenate(
        ([base, entry], ring[1:], [entry, base])
    )


# ----------------------------------------------------------------------
# quadrature


@lru_cache(maxsize=8)
def _gl_nodes(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    # map to [0, 1]
    return (x + 1.0) / 2.0, w / 2.0


def integrate_segment(
    fun, za, zb, branch: int = 0, tol: float = 1e-9, order: int = 16, strict: bool = False
):
    """Adaptive Gauss-Legendre integral of ``fun`` along a straight segment.

    ``fun(zs, branch)`` must be vectorized over ``zs`` and may return either
    scalars or a stack of components in the leading axis.  Subdivision stops
    when halving the panel moves the value by less than
    ``tol * (1 + |value|)`` per panel, so ``tol`` is absolute for O(1)
    integrands and relative for large ones; an additional term proportional
    to the L1 mass of the panel absorbs plain roundoff, which no amount of
    subdivision can beat.  With ``strict`` the depth cap raises
    :class:`SegmentNonconvergence` instead of returning the best sum.
    """
    x, w = _gl_nodes(order)

    def panel(a, b):
        zs = a + (b - a) * x
        vals = np.asarray(fun(zs, branch))
        value = (b - a) * np.tensordot(vals, w, axes=(-1, 0))
        mass = abs(b - a) * float(np.max(np.tensordot(np.abs(vals), w, axes=(-1, 0))))
        return value, mass

    def rec(a, b, whole, tol_here, depth):
        mid = (a + b) / 2
        (left, lmass), (right, rmass) = panel(a, mid), panel(mid, b)
        both = left + right
        err = np.max(np.abs(both - whole))
        # the halved tolerance must not chase the value below roundoff
        eff = max(tol_here, 5e-16)
        if err <= eff * (1.0 + np.max(np.abs(both))) + 1e-16 * (lmass + rmass):
            return both
        if depth >= MAX_DEPTH:
            if strict:
                raise SegmentNonconvergence(
                    f"quadrature on segment {za} -> {zb} stalled at error {err:.3e}"
                )
            return both
        return rec(a, mid, left, tol_here / 2, depth + 1) + rec(
            mid, b, right, tol_here / 2, depth + 1
        )

    first, _ = panel(za, zb)
    return rec(za, zb, first, tol, 0)


def integrate_polyline(
    fun, vertices, start_branch: int = 0, tol: float = 1e-9, order: int = 16, strict: bool = False
):
    """Integrate along a polyline, tracking the branch across the cut.

    Segments are split exactly at cut crossings; the piece before the
    crossing is integrated on the incoming branch and the piece after on the
    updated branch (the integrand of a continued function is continuous
    there by construction).  Returns ``(value, end_branch)``.
    """
    vertices = np.asarray(vertices, dtype=complex)
    n = start_branch
    total = None
    n_seg = max(len(vertices) - 1, 1)
    for za, zb in zip(vertices[:-1], vertices[1:]):
        delta, t = segment_crossing(complex(za), complex(zb))
        if delta == 0:
            piece = integrate_segment(fun, za, zb, n, tol / n_seg, order, strict)
        else:
            zc = za + t * (zb - za)
            piece = integrate_segment(fun, za, zc, n, tol / (2 * n_seg), order, strict)
            n += delta
            piece = piece + integrate_segment(fun, zc, zb, n, tol / (2 * n_seg), order, strict)
        total = piece if total is None else total + piece
    return total, n
