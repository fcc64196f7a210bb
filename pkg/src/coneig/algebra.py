"""Exact arithmetic for polynomials twisted by a single branched power.

The objects here are finite sums

    p(z) = sum_j  c_j * z**a_j * w**b_j,      w = z**alpha,

with integer exponents ``a_j`` (possibly negative) and ``b_j``, complex
coefficients, and one real twist exponent ``alpha`` shared by the whole
expression.  On the slit plane (cut along the negative real axis) the
branches of ``w`` are indexed by an integer ``n``:

    w_n(z) = exp(alpha * (Log z + 2*pi*i*n)),

where ``Log`` is the principal logarithm.  Crossing the cut counterclockwise
moves branch ``n`` to ``n + 1``; the analytic continuation of ``p`` once
around the origin multiplies each term by ``exp(2*pi*i*alpha*b_j)``, which is
what :meth:`ExpPoly.branch_shift` implements.

``TwistedRational`` is a quotient of two such sums, kept in a normal form
where the common monomial factor ``z**g_a * w**g_b`` of numerator and
denominator has been cancelled.  No other simplification is performed by the
arithmetic; cancelling matched roots is available separately via
:meth:`TwistedRational.simplify_roots` because it goes through floating
point root finding and is therefore lossy.
"""

from __future__ import annotations

import json
import math
import numbers

import numpy as np

TWO_PI_I = 2j * math.pi

# Roots closer than this are merged into one root with higher multiplicity.
ROOT_CLUSTER_TOL = 1e-7
# Acceptable relative residual |p(root)| / scale after polishing.
ROOT_RESIDUAL_TOL = 1e-10


class PoleError(ZeroDivisionError):
    """Scalar evaluation hit a zero of the denominator."""


def _is_scalar(z) -> bool:
    return isinstance(z, numbers.Number)


class ExpPoly:
    """Sparse sum of terms ``c * z**a * w**b`` with ``w = z**alpha``.

    Terms are stored as a dict mapping ``(a, b)`` to a complex coefficient.
    Exact zeros are dropped on construction.  Addition and multiplication
    require compatible twists: either both operands share ``alpha`` or one
    of them does not involve ``w`` at all (all ``b == 0``), in which case it
    adopts the other's twist.
    """

    __slots__ = ("alpha", "terms")

    def __init__(self, alpha: float, terms=None):
        self.alpha = float(alpha)
        data = {}
        if terms:
            for (a, b), c in (terms.items() if isinstance(terms, dict) else terms):
                c = complex(c)
                if c != 0:
                    key = (int(a), int(b))
                    data[key] = data.get(key, 0j) + c
        self.terms = {k: v for k, v in data.items() if v != 0}

    # ------------------------------------------------------------------
    # constructors

    @classmethod
    def zero(cls, alpha: float) -> "ExpPoly":
        return cls(alpha, {})

    @classmethod
    def constant(cls, alpha: float, c) -> "ExpPoly":
        return cls(alpha, {(0, 0): c})

    @classmethod
    def monomial(cls, alpha: float, a: int = 0, b: int = 0, coeff=1.0) -> "ExpPoly":
        return cls(alpha, {(a, b): coeff})

    @classmethod
    def from_coeffs(cls, alpha: float, coeffs, a0: int = 0, b: int = 0) -> "ExpPoly":
        """Build ``w**b * z**a0 * (coeffs[0] + coeffs[1] z + ...)``."""
        return cls(alpha, {(a0 + j, b): c for j, c in enumerate(coeffs)})

    @classmethod
    def from_roots(cls, alpha: float, roots, leading=1.0, a0: int = 0, b: int = 0) -> "ExpPoly":
        """Monic-times-``leading`` polynomial with the given roots, shifted by a monomial."""
        rts = list(roots)
        coeffs = np.poly(rts)[::-1] if rts else np.array([1.0 + 0j])
        return cls.from_coeffs(alpha, [leading * c for c in coeffs], a0=a0, b=b)

    def copy(self) -> "ExpPoly":
        out = ExpPoly.__new__(ExpPoly)
        out.alpha = self.alpha
        out.terms = dict(self.terms)
        return out

    # ------------------------------------------------------------------
    # predicates and views

    def is_zero(self) -> bool:
        return not self.terms

    def scale(self) -> float:
        """Largest coefficient magnitude (0 for the zero sum)."""
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def uniform_b(self):
        """The common ``w`` exponent if every term shares one, else None."""
        bs = {b for (_, b) in self.terms}
        return bs.pop() if len(bs) == 1 else None

    def exponent_range(self):
        """Min and max of the real exponent ``a + b*alpha`` over the terms."""
        if not self.terms:
            raise ValueError("zero sum has no exponents")
        vals = [a + b * self.alpha for (a, b) in self.terms]
        return min(vals), max(vals)

    def poly_coeffs(self):
        """Return ``(b, a0, coeffs)`` with ``self = w**b * z**a0 * poly(z)``.

        Requires a uniform ``w`` exponent; ``coeffs`` is an ascending complex
        array with ``coeffs[0] != 0``.
        """
        b = self.uniform_b()
        if b is None:
            raise ValueError("terms mix different powers of the twist factor")
        if not self.terms:
            raise ValueError("zero sum has no polynomial part")
        a_min = min(a for (a, _) in self.terms)
        a_max = max(a for (a, _) in self.terms)
        coeffs = np.zeros(a_max - a_min + 1, dtype=complex)
        for (a, _), c in self.terms.items():
            coeffs[a - a_min] = c
        return b, a_min, coeffs

    # ------------------------------------------------------------------
    # arithmetic

    def _coerce(self, other):
        if isinstance(other, ExpPoly):
            return other
        if _is_scalar(other):
            return ExpPoly.constant(self.alpha, other)
        return None

    @staticmethod
    def _join_alpha(p: "ExpPoly", q: "ExpPoly") -> float:
        if p.alpha == q.alpha:
            return p.alpha
        if p.uniform_b() == 0 or p.is_zero():
            return q.alpha
        if q.uniform_b() == 0 or q.is_zero():
            return p.alpha
        raise ValueError(f"incompatible twists {p.alpha} and {q.alpha}")

    def __add__(self, other):
        q = self._coerce(other)
        if q is None:
            return NotImplemented
        alpha = self._join_alpha(self, q)
        terms = dict(self.terms)
        for k, c in q.terms.items():
            terms[k] = terms.get(k, 0j) + c
        return ExpPoly(alpha, terms)

    __radd__ = __add__

    def __neg__(self):
        return ExpPoly(self.alpha, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        q = self._coerce(other)
        if q is None:
            return NotImplemented
        return self + (-q)

    def __rsub__(self, other):
        q = self._coerce(other)
        if q is None:
            return NotImplemented
        return q + (-self)

    def __mul__(self, other):
        q = self._coerce(other)
        if q is None:
            return NotImplemented
        alpha = self._join_alpha(self, q)
        terms = {}
        for (a1, b1), c1 in self.terms.items():
            for (a2, b2), c2 in q.terms.items():
                key = (a1 + a2, b1 + b2)
                terms[key] = terms.get(key, 0j) + c1 * c2
        return ExpPoly(alpha, terms)

    __rmul__ = __mul__

    def shift(self, a: int = 0, b: int = 0) -> "ExpPoly":
        """Multiply by the monomial ``z**a * w**b`` (exponent bookkeeping only)."""
        return ExpPoly(self.alpha, {(aa + a, bb + b): c for (aa, bb), c in self.terms.items()})

    def derivative(self) -> "ExpPoly":
        """d/dz, using d(z**a w**b)/dz = (a + b*alpha) z**(a-1) w**b."""
        terms = {}
        for (a, b), c in self.terms.items():
            factor = a + b * self.alpha
            if factor != 0:
                terms[(a - 1, b)] = terms.get((a - 1, b), 0j) + c * factor
        return ExpPoly(self.alpha, terms)

    def settle(self) -> "ExpPoly":
        """Fold terms whose twist power is trivial into the plain grading.

        When ``alpha * b`` is an integer the factor ``w**b`` equals
        ``z**(alpha*b)`` on every branch, so the term can move to ``b = 0``
        without changing any value.  Products of even powers of a
        half-integer twist then become honest polynomials, which the
        root-based simplifications require.
        """
        out = {}
        for (a, b), c in self.terms.items():
            k = self.alpha * b
            if b and abs(k - round(k)) < 1e-12:
                key = (a + int(round(k)), 0)
            else:
                key = (a, b)
            out[key] = out.get(key, 0j) + c
        return ExpPoly(self.alpha, out)

    def branch_shift(self, n: int) -> "ExpPoly":
        """Analytic continuation ``n`` times counterclockwise around 0."""
        if n == 0:
            return self.copy()
        return ExpPoly(
            self.alpha,
            {(a, b): c * np.exp(TWO_PI_I * self.alpha * b * n) for (a, b), c in self.terms.items()},
        )

    def scale_z(self, lam: complex) -> "ExpPoly":
        """Substitute ``z -> lam*z`` using the principal power ``lam**alpha``.

        The substitution is formal in ``w``: each term picks up the factor
        ``lam**a * (lam**alpha)**b``.  For ``lam`` on the cut the principal
        branch is used, so callers that care should stick to positive ``lam``.
        """
        lam = complex(lam)
        lam_alpha = np.exp(self.alpha * np.log(lam))
        return ExpPoly(
            self.alpha,
            {(a, b): c * lam**a * lam_alpha**b for (a, b), c in self.terms.items()},
        )

    def chop(self, rel_tol: float = 1e-13) -> "ExpPoly":
        """Drop coefficients smaller than ``rel_tol`` times the largest one."""
        s = self.scale()
        if s == 0:
            return self.copy()
        return ExpPoly(self.alpha, {k: c for k, c in self.terms.items() if abs(c) > rel_tol * s})

    # ------------------------------------------------------------------
    # evaluation

    def evaluate(self, z, branch: int = 0):
        """Evaluate on branch ``branch``; accepts scalars or ndarrays.

        ``z == 0`` is outside the domain whenever any exponent is negative or
        fractional; no special handling is attempted.
        """
        scalar = _is_scalar(z)
        zz = np.asarray(z, dtype=complex)
        if not self.terms:
            out = np.zeros_like(zz)
            return complex(out) if scalar else out
        out = np.zeros_like(zz)
        twisted = [(k, c) for k, c in self.terms.items() if k[1]]
        plain = [(k, c) for k, c in self.terms.items() if not k[1]]
        # integer powers are evaluated exactly so that e.g. z + 1 really
        # vanishes at z = -1 (pole detection relies on this)
        for (a, _), c in plain:
            out = out + c * zz**a
        if twisted:
            logz = np.log(zz)
            for (a, b), c in twisted:
                phase = np.exp(TWO_PI_I * self.alpha * b * branch)
                out = out + (c * phase) * zz**a * np.exp((self.alpha * b) * logz)
        return complex(out) if scalar else out

    # ------------------------------------------------------------------

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda kv: (kv[0][0], kv[0][1]))

    def __repr__(self):
        if not self.terms:
            return "ExpPoly(0)"
        bits = []
        for (a, b), c in self.sorted_terms():
            piece = f"({c:.6g})"
            if a:
                piece += f"*z^{a}"
            if b:
                piece += f"*w^{b}"
            bits.append(piece)
        return " + ".join(bits) + f"  [w=z^{self.alpha:g}]"


class TwistedRational:
    """Quotient of two :class:`ExpPoly` values sharing one twist exponent.

    The normal form cancels the largest monomial ``z**g_a * w**g_b`` dividing
    both numerator and denominator.  That operation is exact (integer
    exponent arithmetic only), so serialization round-trips bit for bit.
    """

    __slots__ = ("num", "den")

    def __init__(self, num: ExpPoly, den: ExpPoly, normalize: bool = True):
        if den.is_zero():
            raise ZeroDivisionError("zero denominator")
        alpha = ExpPoly._join_alpha(num, den)
        if num.alpha != alpha:
            num = ExpPoly(alpha, num.terms)
        if den.alpha != alpha:
            den = ExpPoly(alpha, den.terms)
        if normalize and not num.is_zero():
            g_a = min(min(a for (a, _) in num.terms), min(a for (a, _) in den.terms))
            g_b = min(min(b for (_, b) in num.terms), min(b for (_, b) in den.terms))
            if g_a or g_b:
                num = num.shift(-g_a, -g_b)
                den = den.shift(-g_a, -g_b)
        self.num = num
        self.den = den

    @property
    def alpha(self) -> float:
        return self.den.alpha

    @classmethod
    def from_poly(cls, p: ExpPoly) -> "TwistedRational":
        return cls(p, ExpPoly.constant(p.alpha, 1.0), normalize=False)

    @classmethod
    def constant(cls, alpha: float, c) -> "TwistedRational":
        return cls.from_poly(ExpPoly.constant(alpha, c))

    def is_zero(self) -> bool:
        return self.num.is_zero()

    # ------------------------------------------------------------------
    # arithmetic

    def _coerce(self, other):
        if isinstance(other, TwistedRational):
            return other
        if isinstance(other, ExpPoly):
            return TwistedRational.from_poly(other)
        if _is_scalar(other):
            return TwistedRational.constant(self.alpha, other)
        return None

    def __add__(self, other):
        q = self._coerce(other)
        if q is None:
            return NotImplemented
        return TwistedRational(self.num * q.den + q.num * self.den, self.den * q.den)

    __radd__ = __add__

    def __neg__(self):
        return TwistedRational(-self.num, self.den, normalize=False)

    def __sub__(self, other):
        q = self._coerce(other)
        if q is None:
            return NotImplemented
        return self + (-q)

    def __rsub__(self, other):
        q = self._coerce(other)
        if q is None:
            return NotImplemented
        return q + (-self)

    def __mul__(self, other):
        q = self._coerce(other)
        if q is None:
            return NotImplemented
        return TwistedRational(self.num * q.num, self.den * q.den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        q = self._coerce(other)
        if q is None:
            return NotImplemented
        if q.is_zero():
            raise ZeroDivisionError("division by zero map")
        return TwistedRational(self.num * q.den, self.den * q.num)

    def __rtruediv__(self, other):
        q = self._coerce(other)
        if q is None:
            return NotImplemented
        return q / self

    def derivative(self) -> "TwistedRational":
        return TwistedRational(
            self.num.derivative() * self.den - self.num * self.den.derivative(),
            self.den * self.den,
        )

    def branch_shift(self, n: int) -> "TwistedRational":
        return TwistedRational(self.num.branch_shift(n), self.den.branch_shift(n), normalize=False)

    def scale_z(self, lam: complex) -> "TwistedRational":
        return TwistedRational(self.num.scale_z(lam), self.den.scale_z(lam), normalize=False)

    def settle(self) -> "TwistedRational":
        return TwistedRational(self.num.settle(), self.den.settle())

    # ------------------------------------------------------------------

    def evaluate(self, z, branch: int = 0):
        n = self.num.evaluate(z, branch)
        d = self.den.evaluate(z, branch)
        if _is_scalar(z):
            if d == 0:
                raise PoleError(f"denominator vanishes at z={z}")
            return n / d
        with np.errstate(divide="ignore", invalid="ignore"):
            return n / d

    def simplify_roots(self, tol: float = 1e-9) -> "TwistedRational":
        """Cancel numerator/denominator roots that agree within ``tol``.

        Both sides must have uniform ``w`` exponents.  Roots are found with
        the clustering/polishing pass of :func:`poly_roots`, so multiple
        roots are located to full precision and cancel reliably against
        their partners.  The surviving factors are rebuilt from roots, so
        coefficients move by normal floating point error; use only where
        that is acceptable (root analysis, plotting), never on a map that
        will be serialized.
        """
        bn, an, cn = self.num.poly_coeffs()
        bd, ad, cd = self.den.poly_coeffs()
        rn = [list(p) for p in poly_roots(ExpPoly.from_coeffs(0.0, cn))] if len(cn) > 1 else []
        rd = [list(p) for p in poly_roots(ExpPoly.from_coeffs(0.0, cd))] if len(cd) > 1 else []
        kept_d = []
        for r, mult in rd:
            for pair in rn:
                if mult == 0:
                    break
                if pair[1] > 0 and abs(r - pair[0]) <= tol * max(1.0, abs(r)):
                    drop = min(mult, pair[1])
                    pair[1] -= drop
                    mult -= drop
            if mult > 0:
                kept_d.append((r, mult))
        num_roots = [r for r, m in rn for _ in range(m)]
        den_roots = [r for r, m in kept_d for _ in range(m)]
        num = ExpPoly.from_roots(self.alpha, num_roots, leading=cn[-1], a0=an, b=bn)
        den = ExpPoly.from_roots(self.alpha, den_roots, leading=cd[-1], a0=ad, b=bd)
        return TwistedRational(num, den)

    def __repr__(self):
        return f"TwistedRational(({self.num!r}) / ({self.den!r}))"


# ----------------------------------------------------------------------
# root finding


def poly_roots(p: ExpPoly):
    """Roots (with multiplicity) of a plain polynomial ``ExpPoly``.

    Only defined when no term involves the twist factor (every ``b == 0``).
    A factored monomial ``z**a_min`` contributes the root 0 with multiplicity
    ``a_min`` when ``a_min > 0``.  Returns a list of ``(root, multiplicity)``
    pairs sorted by (Re, Im); raises ValueError if a polished root still has
    residual above ``ROOT_RESIDUAL_TOL`` relative to the coefficient scale.
    """
    if any(b for (_, b) in p.terms):
        raise ValueError("poly_roots needs a twist-free polynomial (all b == 0)")
    if p.is_zero():
        raise ValueError("zero polynomial")
    _, a_min, coeffs = p.poly_coeffs()
    pairs = []
    if a_min > 0:
        pairs.append((0j, a_min))
    if len(coeffs) > 1:
        raw = np.roots(coeffs[::-1])
        deriv = np.polyder(coeffs[::-1])
        polished = []
        for r in raw:
            x = r
            for _ in range(12):
                fx = np.polyval(coeffs[::-1], x)
                dfx = np.polyval(deriv, x)
                if dfx == 0:
                    break
                step = fx / dfx
                x -= step
                if abs(step) < 1e-16 * max(1.0, abs(x)):
                    break
            polished.append(x)
        polished.sort(key=lambda v: (v.real, v.imag))
        clusters = []
        for x in polished:
            if clusters and abs(x - clusters[-1][-1]) <= ROOT_CLUSTER_TOL * max(1.0, abs(x)):
                clusters[-1].append(x)
            else:
                clusters.append([x])
        scale = max(abs(c) for c in coeffs)
        for grp in clusters:
            root = complex(np.mean(grp))
            mult = len(grp)
            if mult > 1:
                # the (mult-1)-th derivative has a simple root there; polishing
                # against it recovers full precision for the cluster center
                dm = coeffs[::-1]
                for _ in range(mult - 1):
                    dm = np.polyder(dm)
                dm1 = np.polyder(dm)
                for _ in range(12):
                    v = np.polyval(dm, root)
                    dv = np.polyval(dm1, root)
                    if dv == 0:
                        break
                    root -= v / dv
            bound = ROOT_RESIDUAL_TOL * scale * max(1.0, abs(root)) ** (len(coeffs) - 1)
            resid = abs(np.polyval(coeffs[::-1], root))
            if mult == 1 and resid > bound:
                raise ValueError(f"root {root} failed residual check ({resid:.3e} > {bound:.3e})")
            pairs.append((root, mult))
    pairs.sort(key=lambda rm: (rm[0].real, rm[0].imag))
    return pairs


# ----------------------------------------------------------------------
# serialization


def _terms_to_json(p: ExpPoly):
    return [
        {"a": a, "b": b, "re": c.real, "im": c.imag}
        for (a, b), c in p.sorted_terms()
    ]


def _terms_from_json(alpha, items) -> ExpPoly:
    return ExpPoly(alpha, {(t["a"], t["b"]): complex(t["re"], t["im"]) for t in items})


def to_json(f: TwistedRational) -> dict:
    """JSON-ready dict for a map; exact round trip with :func:`from_json`."""
    return {
        "alpha": f.alpha,
        "num": _terms_to_json(f.num),
        "den": _terms_to_json(f.den),
    }


def from_json(data: dict) -> TwistedRational:
    alpha = float(data["alpha"])
    num = _terms_from_json(alpha, data["num"])
    den = _terms_from_json(alpha, data["den"])
    return TwistedRational(num, den, normalize=False)


def save_map(f: TwistedRational, path) -> None:
    with open(path, "w") as fh:
        json.dump(to_json(f), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_map(path) -> TwistedRational:
    with open(path) as fh:
        return from_json(json.load(fh))
