"""Quadratic differentials on the punctured sphere and the residue test.

A metric with cone points ``p_1, ..., p_k`` (counting infinity) can carry an
extra second eigenfunction only if some meromorphic quadratic differential
``sigma`` with at most simple poles at the cones satisfies a residue
condition at every *integer-angle* cone: the residue of ``sigma / df`` must
vanish there.  The space of admissible ``sigma`` has dimension ``k - 3``, so
for three or fewer cones there is nothing to test and extras are impossible.

For one-parameter families with ``k = 4`` the space is one-dimensional;
:func:`find_admissible` scans the parameter, locates minima of the residue
magnitude at a representative integer cone, polishes them, and keeps the
parameters where every integer-cone residue vanishes to tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .algebra import TwistedRational
from .metric import ConicalMetric
from .paths import branch_along, circle

RESIDUE_CHECK_TOL = 1e-8
ACCEPT_TOL = 1e-9


class QuadratureError(RuntimeError):
    """Richardson check between two contour radii failed."""


@dataclass
class QuadDifferential:
    """``sigma = numerator(z) / prod_j (z - pole_j) dz^2`` with simple poles.

    ``numerator`` holds ascending coefficients.  A pole at infinity, when
    allowed, is implicit in the degree bound and needs no bookkeeping.
    """

    numerator: np.ndarray
    poles: tuple

    def __post_init__(self):
        self.numerator = np.atleast_1d(np.asarray(self.numerator, dtype=complex))
        self.poles = tuple(complex(p) for p in self.poles)

    def density(self, z):
        """Value of ``sigma / dz^2`` at ``z`` (vectorized)."""
        zz = np.asarray(z, dtype=complex)
        num = np.polyval(self.numerator[::-1], zz)
        den = np.ones_like(zz)
        for p in self.poles:
            den = den * (zz - p)
        with np.errstate(divide="ignore", invalid="ignore"):
            return num / den

    def scaled(self, lam: complex) -> "QuadDifferential":
        return QuadDifferential(lam * self.numerator, self.poles)

    def to_json(self) -> dict:
        return {
            "numerator": [[c.real, c.imag] for c in self.numerator],
            "poles": [[p.real, p.imag] for p in self.poles],
        }


def basis(finite_points, infinity_is_cone: bool):
    """Monomial basis of admissible quadratic differentials.

    ``finite_points`` are the finite cone positions.  With ``k`` cones in
    total the space is spanned by ``z**j / prod (z - p)`` for
    ``j = 0 .. k-4``; the same degree window keeps infinity regular when it
    is smooth and allows a simple pole there when it is a cone.  Empty for
    ``k <= 3``.
    """
    pts = tuple(complex(p) for p in finite_points)
    k = len(pts) + (1 if infinity_is_cone else 0)
    dim = k - 3
    out = []
    for j in range(max(dim, 0)):
        num = np.zeros(j + 1, dtype=complex)
        num[j] = 1.0
        out.append(QuadDifferential(num, pts))
    return out


def basis_for_metric(metric: ConicalMetric):
    cones = metric.cones
    finite = [c.position for c in cones if not c.at_infinity]
    has_inf = any(c.at_infinity for c in cones)
    return basis(finite, has_inf)


def _circle_values(fun, center: complex, radius: float, n: int):
    """Evaluate ``fun(z, branch)`` around a circle with a continuous branch."""
    verts = circle(center, radius, n=n)
    pts = verts[:-1]
    branches = branch_along([complex(z) for z in verts])[:-1]
    vals = np.empty(n, dtype=complex)
    branches = np.asarray(branches)
    for nb in np.unique(branches):
        mask = branches == nb
        vals[mask] = fun(pts[mask], int(nb))
    return pts, vals


def residue_sigma_over_df(
    sigma: QuadDifferential,
    f: TwistedRational,
    point: complex,
    radius: float | None = None,
    n: int = 2048,
    fprime: TwistedRational | None = None,
    check: bool = True,
) -> complex:
    """Contour residue of ``sigma / df`` at ``point``.

    Trapezoid rule on a circle (spectrally accurate for this geometry) with
    the twist branch tracked continuously.  With ``check=True`` the value is
    recomputed at half the radius and a mismatch beyond
    ``RESIDUE_CHECK_TOL`` raises :class:`QuadratureError`.
    """
    point = complex(point)
    if fprime is None:
        fprime = f.derivative()
    if radius is None:
        # keep the contour clear of the other sigma poles and of the branch
        # point at the origin (unless the residue is taken there)
        others = [q for q in tuple(sigma.poles) + (0j,) if abs(q - point) > 1e-12]
        dmin = min((abs(point - q) for q in others), default=1.0)
        radius = min(0.25, 0.4 * dmin)

    def integrand(zs, nb):
        return sigma.density(zs) / fprime.evaluate(zs, nb)

    def one(r):
        pts, vals = _circle_values(integrand, point, r, n)
        return complex(np.mean(vals * (pts - point)))

    res = one(radius)
    if check:
        res2 = one(radius / 2)
        if abs(res - res2) > RESIDUE_CHECK_TOL * (1 + abs(res2)):
            raise QuadratureError(
                f"residue at {point} unstable: {res} vs {res2} (radius {radius:g})"
            )
        res = res2
    return res


def integer_cone_residues(f: TwistedRational, sigma: QuadDifferential | None = None) -> dict:
    """Residues of ``sigma/df`` at every finite integer-angle cone of ``f``.

    When ``sigma`` is omitted the one-dimensional admissible space is
    required and its basis element (unit leading coefficient) is used.
    """
    metric = ConicalMetric(f)
    cones = metric.cones
    if sigma is None:
        bas = basis_for_metric(metric)
        if len(bas) != 1:
            raise ValueError(
                f"admissible space has dimension {len(bas)}; pass sigma explicitly"
            )
        sigma = bas[0]
    fprime = f.derivative()
    out = []
    for c in cones:
        if c.at_infinity or not c.is_integer or c.position == 0:
            continue
        val = residue_sigma_over_df(sigma, f, c.position, fprime=fprime)
        out.append({"point": c.position, "residue": val})
    return {"sigma": sigma, "residues": out}


def find_admissible(
    family,
    brange,
    samples: int = 241,
    accept: float = ACCEPT_TOL,
    exclude=(0.0, 8.0),
    exclude_tol: float = 1e-6,
    full_output: bool = False,
):
    """Parameters in ``brange`` where all integer-cone residues vanish.

    ``family(b)`` must return a map whose admissible space is
    one-dimensional.  The scan minimizes the residue magnitude at the first
    integer cone (sorted deterministically), polishes each local minimum
    with bounded scalar minimization, and accepts a parameter when every
    integer-cone residue is ``<= accept``.  ``exclude`` lists degenerate
    parameter values to skip.
    """
    lo, hi = float(brange[0]), float(brange[1])

    def first_residue(b):
        if any(abs(b - e) <= exclude_tol for e in exclude):
            return None
        try:
            report = integer_cone_residues(family(float(b)))
        except (QuadratureError, ValueError, ZeroDivisionError, ArithmeticError):
            return None
        if not report["residues"]:
            return None
        return report["residues"][0]["residue"]

    def objective(b):
        r = first_residue(b)
        return np.nan if r is None else abs(r)

    def root_polish(b0):
        """Sharpen a magnitude minimum into a root of the projected residue.

        Near a simple zero the residue moves along a fixed complex direction;
        projecting onto that direction gives a smooth real scalar whose sign
        change brentq can pin far tighter than a golden-section minimum.
        """
        delta = max(1e-6, 1e-9 * abs(b0))
        a, c = b0 - delta, b0 + delta
        ra, rc = first_residue(a), first_residue(c)
        if ra is None or rc is None:
            return b0
        direction = rc - ra
        if abs(direction) == 0:
            return b0
        direction /= abs(direction)

        def proj(b):
            r = first_residue(b)
            if r is None:
                raise ZeroDivisionError
            return (np.conj(direction) * r).real

        try:
            pa, pc = proj(a), proj(c)
            if pa == 0:
                return a
            if pc == 0:
                return c
            if np.sign(pa) != np.sign(pc):
                return float(brentq(proj, a, c, xtol=1e-13, rtol=1e-15))
        except (ZeroDivisionError, ValueError):
            pass
        return b0

    bs = np.linspace(lo, hi, samples)
    vals = np.array([objective(b) for b in bs])
    hits = []
    records = []
    for i in range(samples):
        v = vals[i]
        if not np.isfinite(v):
            continue
        left = vals[i - 1] if i > 0 else np.inf
        right = vals[i + 1] if i < samples - 1 else np.inf
        left = left if np.isfinite(left) else np.inf
        right = right if np.isfinite(right) else np.inf
        if v <= left and v <= right:
            a = bs[max(i - 1, 0)]
            c = bs[min(i + 1, samples - 1)]
            if a == c:
                continue
            res = minimize_scalar(
                lambda x: np.inf if not np.isfinite(objective(x)) else objective(x),
                bounds=(a, c),
                method="bounded",
                options={"xatol": 1e-12},
            )
            b_star = root_polish(float(res.x))
            report = integer_cone_residues(family(b_star))
            resid = [abs(r["residue"]) for r in report["residues"]]
            ok = bool(resid) and max(resid) <= accept
            records.append({"b": b_star, "residuals": resid, "accepted": ok})
            if ok and not any(abs(b_star - h) <= 1e-6 for h in hits):
                hits.append(b_star)
    hits.sort()
    if full_output:
        return hits, {"grid": bs.tolist(), "values": vals.tolist(), "minima": records}
    return hits
