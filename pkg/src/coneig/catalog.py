"""Named example maps used by tests, demos, and the reproduce pipelines.

Two families recur throughout the package:

* ``sqrt_family(b)``: ``f = sqrt(z) (z + 1 - b) / (z + 1)``.  Cone angles
  ``pi`` at 0 and infinity plus two integer cones at the roots of
  ``z^2 + (b+2) z + (1-b)`` (real for b > 0).  Exactly one member admits an
  extra second eigenfunction, ``b = 4`` with map ``sqrt(z)(z-3)/(z+1)``;
  the residue scan in :mod:`coneig.quaddiff` finds it.  That member is twice
  the ``rotsym_family(1/2, 1)`` map, so the extra eigenfunctions can be
  cross-checked in closed form.

* ``rotsym_family(beta, k)``: ``f = z^beta ((k-beta) z^k - (k+beta)) / (z^k + 1)``,
  invariant under the ``k``-fold rotation.  Every member carries the extra
  eigenfunction pair ``Re(h1/h2), Im(h1/h2)`` returned by
  :func:`rotsym_extra`; these are the closed forms that the directrix
  construction in :mod:`coneig.twistor` must reproduce.
"""

from __future__ import annotations

from .algebra import ExpPoly, TwistedRational
from .metric import EigenCandidate


def sqrt_family(b: float) -> TwistedRational:
    """``sqrt(z) (z + 1 - b) / (z + 1)`` as a twisted rational map.

    Degenerate parameters: at ``b = 1`` the numerator root collides with the
    branch point at 0, and at ``b in (0, -8)`` the two integer cones merge.
    """
    alpha = 0.5
    num = ExpPoly(alpha, {(1, 1): 1.0, (0, 1): 1.0 - b})
    den = ExpPoly(alpha, {(1, 0): 1.0, (0, 0): 1.0})
    return TwistedRational(num, den)


def sqrt_family_critical_roots(b: float):
    """Roots of ``z^2 + (b+2) z + (1-b)``, the finite integer cones of the family.

    Sorted by descending real part, so for real ``b > 1`` the first entry is
    the positive root and the second the negative one (which lies on the
    branch cut of ``sqrt``).
    """
    import numpy as np

    roots = [complex(r) for r in np.roots([1.0, b + 2.0, 1.0 - b])]
    roots.sort(key=lambda r: (-r.real, r.imag))
    return roots


def rotsym_family(beta: float, k: int) -> TwistedRational:
    """The k-fold symmetric map ``z^beta ((k-beta) z^k - (k+beta)) / (z^k + 1)``."""
    if not (0 < beta < k):
        raise ValueError("need 0 < beta < k")
    alpha = float(beta)
    num = ExpPoly(alpha, {(k, 1): k - beta, (0, 1): -(k + beta)})
    den = ExpPoly(alpha, {(k, 0): 1.0, (0, 0): 1.0})
    return TwistedRational(num, den)


def rotsym_h1_h2(beta: float, k: int):
    """The two sesquilinear halves of the extra eigenfunction quotient.

    With ``f`` as in :func:`rotsym_family` and ``w = z^beta``:

        h1 = (z^k - 1) conj(z^k + 1)
             + |w|^2 ((k+beta) + (k-beta) z^k) conj((k+beta) - (k-beta) z^k)
        h2 = |z^k + 1|^2 (1 + |f|^2)
           = |z^k + 1|^2 + |w|^2 |(k+beta) - (k-beta) z^k|^2

    Each product is balanced in the twist factor, so ``h1/h2`` is
    single-valued.  Returns ``(num_pairs, den_pairs)`` in the pair format of
    :meth:`coneig.metric.EigenCandidate.from_sesquilinear`.
    """
    alpha = float(beta)

    def poly(c0, ck, b=0):
        return ExpPoly(alpha, {(0, b): c0, (k, b): ck})

    num_pairs = [
        (poly(-1.0, 1.0), poly(1.0, 1.0)),
        (poly(k + beta, k - beta, b=1), poly(k + beta, -(k - beta), b=1)),
    ]
    den_pairs = [
        (poly(1.0, 1.0), poly(1.0, 1.0)),
        (poly(k + beta, -(k - beta), b=1), poly(k + beta, -(k - beta), b=1)),
    ]
    return num_pairs, den_pairs


def rotsym_extra(beta: float, k: int) -> EigenCandidate:
    """The complex extra eigenfunction ``h1/h2`` of the symmetric family."""
    num_pairs, den_pairs = rotsym_h1_h2(beta, k)
    return EigenCandidate.from_sesquilinear(
        num_pairs, den_pairs, label=f"rotsym({beta:g},{k}) extra"
    )


def square_map() -> TwistedRational:
    """``f = z^2``: a smooth degree-2 cover, handy as a trivial-monodromy check."""
    num = ExpPoly(0.0, {(2, 0): 1.0})
    den = ExpPoly(0.0, {(0, 0): 1.0})
    return TwistedRational(num, den)
