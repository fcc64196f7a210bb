"""Isotropic curve algebra producing maps with extra eigenfunctions.

The construction lives in C^(2m+1) equipped with the C-bilinear (not
Hermitian) inner product.  A curve xi, polynomial in z except for a single
z^alpha twist, is solved for so that xi and its first m-1 derivatives span
a totally isotropic m-plane Psi(z) at every z.  Fixing an auxiliary
isotropic (m-1)-plane L' transverse to Psi, Gaussian elimination over the
twisted-rational function field yields a distinguished spanning set

    F_j = Eb'_j + G_j + u_j   (j = 1..m-1),      F_m = w + u_m,

where Eb'_j spans the conjugate plane, u_j lies in L', and G_j, w lie in
the 3-dimensional complement V of L' + conj(L').  The vector w is
isotropic, so its stereographic quotient is a developing map of a conical
metric, and the pairings of the G_j against the unit-sphere map are
complex-valued candidates for extra eigenfunctions: m-1 of them, hence
2(m-1) real candidates.

All of the algebra is exact over ExpPoly / TwistedRational; floating point
enters through the solved curve coefficients and the final root-matching
cleanup of the map.
"""

from __future__ import annotations

import numpy as np

from .algebra import ExpPoly, PoleError, TwistedRational, poly_roots
from .metric import (
    ConicalMetric,
    EigenCandidate,
    annulus_grid,
    axis_projection_remainder,
    verify_on_grid,
)
from .weierstrass import boundedness_probe

__all__ = [
    "BilinearSpace",
    "VFunction",
    "DirectrixCurve",
    "IsotropicPlane",
    "SpecialBasis",
    "ConstructionResult",
    "DegenerateFamilyError",
    "PlaneIntersectsError",
    "DegenerateProjectionError",
    "ConstructionError",
    "directrix_family",
    "solve_coefficients",
    "isotropy_verify",
    "default_plane",
    "random_plane",
    "special_basis",
    "limiting_map",
    "extra_eigenfunctions",
    "run_algorithm",
]

SQRT2 = float(np.sqrt(2.0))

# Fixed sample points for zero tests on twisted rationals.  Chosen off the
# real axis and away from |z| = 1 so that monomial families of different
# exponents cannot conspire to vanish at all three simultaneously.
_SAMPLES = (1.17 + 0.43j, 0.71 - 0.89j, 1.53 + 0.21j)


class DegenerateFamilyError(ValueError):
    """The triangular coefficient system has no (unique) solution."""


class PlaneIntersectsError(ValueError):
    """The auxiliary plane meets the curve span; elimination impossible."""


class DegenerateProjectionError(ValueError):
    """The isotropic vector w projects to a constant or undefined map."""


class ConstructionError(RuntimeError):
    """No auxiliary plane in the retry budget produced verified output."""


# ----------------------------------------------------------------------
# the bilinear space and vector-valued functions


class BilinearSpace:
    """Basis bookkeeping for C^(2m+1) with the standard C-bilinear form.

    Label order: index 0 holds the real unit vector e0; for j = 1..m the
    indices 2j-1 and 2j hold the isotropic pair E_j, Eb_j.  The Gram table
    is (e0, e0) = 1, (E_j, Eb_k) = delta_jk, all other basis products 0.
    The underlying real orthonormal basis is e_0 .. e_{2m} with
    E_j = (e_{2j-1} - i e_{2j}) / sqrt(2).
    """

    def __init__(self, m: int):
        if int(m) != m or m < 1:
            raise ValueError(f"m must be a positive integer, got {m!r}")
        self.m = int(m)
        self.dim = 2 * self.m + 1

    def labels(self):
        out = ["e0"]
        for j in range(1, self.m + 1):
            out.extend([f"E{j}", f"Eb{j}"])
        return tuple(out)

    def partner(self, i: int) -> int:
        """Index paired with ``i`` by the Gram table (0 pairs with itself)."""
        if i == 0:
            return 0
        return i + 1 if i % 2 == 1 else i - 1

    def pairing_matrix(self) -> np.ndarray:
        g = np.zeros((self.dim, self.dim))
        for i in range(self.dim):
            g[i, self.partner(i)] = 1.0
        return g

    def real_to_label(self) -> np.ndarray:
        """Row r = label coordinates of the real basis vector e_r."""
        r = np.zeros((self.dim, self.dim), dtype=complex)
        r[0, 0] = 1.0
        for j in range(1, self.m + 1):
            r[2 * j - 1, 2 * j - 1] = 1.0 / SQRT2
            r[2 * j - 1, 2 * j] = 1.0 / SQRT2
            r[2 * j, 2 * j - 1] = 1j / SQRT2
            r[2 * j, 2 * j] = -1j / SQRT2
        return r

    def label_conj(self, vec) -> np.ndarray:
        """Label coordinates of the complex conjugate of a constant vector."""
        vec = np.asarray(vec, dtype=complex)
        out = np.empty_like(vec)
        for i in range(self.dim):
            out[self.partner(i) if i else 0] = np.conj(vec[i])
        return out


def _root_clean(tr: TwistedRational, tol: float = 1e-8) -> TwistedRational:
    """Cancel common num/den polynomial factors found by root matching.

    Fraction arithmetic here normalizes by monomial gcd only, so adding
    two fractions over the same denominator squares that factor.  Cleaning
    after every arithmetic step keeps multiplicities at 2 or less, where
    the root finder's cluster-and-polish pass still locates them to full
    precision; left to pile up, an 8-fold factor scatters its roots by
    ~1e-2 and can never be matched again.

    Matched factors are removed by polynomial division, not by rebuilding
    the survivors from their roots: division leaves the kept coefficients'
    accuracy intact, while a from-roots rebuild injects relative error at
    every pass and the passes are frequent here.
    """
    try:
        bn, an, nc = tr.num.poly_coeffs()
        bd, ad, dc = tr.den.poly_coeffs()
    except ValueError:
        return tr
    if len(nc) <= 1 or len(dc) <= 1:
        return tr
    rn = poly_roots(ExpPoly.from_coeffs(0.0, nc))
    rd = [list(p) for p in poly_roots(ExpPoly.from_coeffs(0.0, dc))]
    common = []
    for r, mult in rn:
        for pair in rd:
            if mult == 0:
                break
            if pair[1] > 0 and abs(r - pair[0]) <= tol * max(1.0, abs(r)):
                drop = min(mult, pair[1])
                common.extend([(r + pair[0]) / 2.0] * drop)
                pair[1] -= drop
                mult -= drop
    if not common:
        return tr
    fac = np.poly(common)
    qn, rem_n = np.polydiv(np.asarray(nc, dtype=complex)[::-1], fac)
    qd, rem_d = np.polydiv(np.asarray(dc, dtype=complex)[::-1], fac)
    scale_n = max(abs(c) for c in nc)
    scale_d = max(abs(c) for c in dc)
    if (rem_n.size and np.max(np.abs(rem_n)) > 1e-7 * scale_n) or (
        rem_d.size and np.max(np.abs(rem_d)) > 1e-7 * scale_d
    ):
        # the match was spurious; cancelling would corrupt the fraction
        return tr
    num = ExpPoly.from_coeffs(tr.alpha, list(qn[::-1]), a0=an, b=bn)
    den = ExpPoly.from_coeffs(tr.alpha, list(qd[::-1]), a0=ad, b=bd)
    return TwistedRational(num, den)


def _tidy_tr(tr: TwistedRational, rel: float = 1e-14) -> TwistedRational:
    """Drop coefficient dust, then clear matched num/den root clusters.

    The cutoff sits two orders above machine cancellation residue but
    well below everything structural; a looser cutoff (1e-12) measurably
    pollutes the small closed-form coefficients of the limiting map.
    """
    num = tr.num.chop(rel)
    den = tr.den.chop(rel)
    if num.is_zero():
        return TwistedRational.constant(tr.alpha, 0.0)
    return _root_clean(TwistedRational(num, den).settle())


def _monic_sqrt(coeffs_desc: np.ndarray):
    """Monic square root of a monic perfect-square coefficient array.

    Solved top down from the leading coefficient; the lower half of the
    square is then recomputed as a consistency check, so a non-square
    input comes back as None instead of garbage.
    """
    n = len(coeffs_desc) - 1
    if n % 2:
        return None
    d = n // 2
    q = np.zeros(d + 1, dtype=complex)
    q[0] = 1.0
    for t in range(1, d + 1):
        acc = sum(q[s] * q[t - s] for s in range(1, t))
        q[t] = (coeffs_desc[t] - acc) / 2.0
    full = np.convolve(q, q)
    if np.max(np.abs(full - coeffs_desc)) > 1e-9 * max(np.max(np.abs(coeffs_desc)), 1.0):
        return None
    return q


def _sampled_mag(tr: TwistedRational) -> float:
    vals = []
    for p in _SAMPLES:
        try:
            vals.append(abs(complex(tr.evaluate(p, 0))))
        except PoleError:
            continue
    return max(vals) if vals else float("inf")


def _tr_vanishes(tr: TwistedRational, scale: float = 1.0) -> bool:
    if tr.is_zero():
        return True
    return _sampled_mag(tr) <= 1e-10 * (scale + 1e-300)


class VFunction:
    """A vector of TwistedRational components in the labeled basis.

    Bilinear products of VFunctions are TwistedRational values computed
    through the Gram table; no conjugation is ever applied to the
    variable z, so products of multivalued components stay exact.
    """

    def __init__(self, space: BilinearSpace, comps):
        comps = tuple(comps)
        if len(comps) != space.dim:
            raise ValueError(f"expected {space.dim} components, got {len(comps)}")
        self.space = space
        self.comps = comps

    @property
    def alpha(self) -> float:
        for c in self.comps:
            if c.alpha:
                return c.alpha
        return 0.0

    @classmethod
    def zero(cls, space: BilinearSpace, alpha: float = 0.0) -> "VFunction":
        return cls(space, [TwistedRational.constant(alpha, 0.0)] * space.dim)

    @classmethod
    def constant(cls, space: BilinearSpace, alpha: float, vec) -> "VFunction":
        vec = np.asarray(vec, dtype=complex)
        return cls(space, [TwistedRational.constant(alpha, complex(c)) for c in vec])

    def __add__(self, other: "VFunction") -> "VFunction":
        return VFunction(self.space, [a + b for a, b in zip(self.comps, other.comps)])

    def __sub__(self, other: "VFunction") -> "VFunction":
        return VFunction(self.space, [a - b for a, b in zip(self.comps, other.comps)])

    def scale(self, s) -> "VFunction":
        """Multiply by a scalar or TwistedRational factor."""
        return VFunction(self.space, [c * s for c in self.comps])

    def derivative(self) -> "VFunction":
        return VFunction(self.space, [c.derivative() for c in self.comps])

    def tidy(self, rel: float = 1e-14) -> "VFunction":
        return VFunction(self.space, [_tidy_tr(c, rel) for c in self.comps])

    def pair(self, other: "VFunction") -> TwistedRational:
        """C-bilinear product via the Gram table.

        Kept exact (no cleanup of the partial sums) so that isotropy
        checks see genuine coefficient cancellation, not a tidied one.
        """
        space = self.space
        out = None
        for i, c in enumerate(self.comps):
            if c.is_zero():
                continue
            d = other.comps[space.partner(i)]
            if d.is_zero():
                continue
            term = c * d
            out = term if out is None else out + term
        if out is None:
            return TwistedRational.constant(self.alpha, 0.0)
        return out

    def pair_const(self, vec) -> TwistedRational:
        """Bilinear product against a constant vector in label coordinates."""
        space = self.space
        vec = np.asarray(vec, dtype=complex)
        out = None
        for i, c in enumerate(self.comps):
            coeff = complex(vec[space.partner(i)])
            if coeff == 0.0 or c.is_zero():
                continue
            term = c * coeff
            out = term if out is None else _tidy_tr(out + term)
        if out is None:
            return TwistedRational.constant(self.alpha, 0.0)
        return out

    def evaluate(self, z, branch: int = 0) -> np.ndarray:
        return np.array([c.evaluate(z, branch) for c in self.comps])

    def __repr__(self):
        live = [i for i, c in enumerate(self.comps) if not c.is_zero()]
        names = self.space.labels()
        return f"VFunction({', '.join(names[i] for i in live) or '0'})"


# ----------------------------------------------------------------------
# the directrix family and its coefficient system


class DirectrixCurve:
    """Parameters and coefficients of the one-twist isotropic curve family.

    The curve has Eb_j-components a_{j-1} z^{j-1} for j <= m-1, an
    Eb_m-component a_alpha z^{m-2+alpha}, an e0-component z^k, an
    E_m-component z^{2k-(m-2+alpha)}, and E_j-components z^{2k-(j-1)};
    the E-side exponents mirror 2k minus the Eb-side ones.  Coefficients
    are None until :func:`solve_coefficients` fills them in.
    """

    def __init__(self, m: int, k: int, alpha: float, coefficients: dict | None = None):
        if int(m) != m or m < 2:
            raise ValueError(f"m must be an integer >= 2, got {m!r}")
        if int(k) != k or k < m - 1:
            raise ValueError(f"k must be an integer >= m-1, got k={k!r} for m={m}")
        alpha = float(alpha)
        if not 0.0 < alpha < k - (m - 2):
            raise ValueError(
                f"alpha must lie strictly between 0 and k-(m-2)={k - (m - 2)}, got {alpha}"
            )
        if abs(alpha - round(alpha)) < 1e-9:
            raise ValueError(f"alpha must not be an integer, got {alpha}")
        self.m = int(m)
        self.k = int(k)
        self.alpha = alpha
        self.coefficients = dict(coefficients) if coefficients is not None else None
        self.space = BilinearSpace(self.m)

    def coefficient_names(self):
        return tuple(f"a{j}" for j in range(self.m - 1)) + ("a_alpha",)

    def skeleton(self):
        """Fixed part and per-unknown basis parts of the curve.

        Every unknown multiplies a pure Eb-side monomial, so products of
        two unknown parts always pair to zero: the isotropy system is
        exactly linear in the coefficients.
        """
        m, k, alpha = self.m, self.k, self.alpha
        space = self.space
        zero = TwistedRational.constant(alpha, 0.0)
        fixed = [zero] * space.dim
        fixed[0] = TwistedRational.from_poly(ExpPoly.monomial(alpha, a=k))
        for j in range(1, m):
            fixed[2 * j - 1] = TwistedRational.from_poly(
                ExpPoly.monomial(alpha, a=2 * k - (j - 1))
            )
        fixed[2 * m - 1] = TwistedRational.from_poly(
            ExpPoly.monomial(alpha, a=2 * k - (m - 2), b=-1)
        )
        parts = []
        for j in range(1, m):
            comp = [zero] * space.dim
            comp[2 * j] = TwistedRational.from_poly(ExpPoly.monomial(alpha, a=j - 1))
            parts.append((f"a{j - 1}", VFunction(space, comp)))
        comp = [zero] * space.dim
        comp[2 * m] = TwistedRational.from_poly(ExpPoly.monomial(alpha, a=m - 2, b=1))
        parts.append(("a_alpha", VFunction(space, comp)))
        return VFunction(space, fixed), parts

    def xi(self) -> VFunction:
        if self.coefficients is None:
            raise ValueError("coefficients not solved yet")
        fixed, parts = self.skeleton()
        out = fixed
        for name, vf in parts:
            out = out + vf.scale(complex(self.coefficients[name]))
        return out

    def psis(self):
        """The spanning set: the curve and its first m-1 derivatives."""
        cur = self.xi()
        out = [cur]
        for _ in range(self.m - 1):
            cur = cur.derivative()
            out.append(cur)
        return out

    def __repr__(self):
        state = "solved" if self.coefficients is not None else "unsolved"
        return f"DirectrixCurve(m={self.m}, k={self.k}, alpha={self.alpha}, {state})"


def directrix_family(m: int, k: int, alpha: float) -> DirectrixCurve:
    """The curve family with unknown coefficients as placeholders."""
    return DirectrixCurve(m, k, alpha, coefficients=None)


def solve_coefficients(curve: DirectrixCurve) -> DirectrixCurve:
    """Impose isotropy of the curve span and solve for the coefficients.

    Each pairing of derivatives (xi^(i), xi^(j)) collapses to a single
    monomial c * z^(2k-i-j) because the exponent pattern balances every
    Gram pair to total exponent 2k; evaluating the pairing at z = 1
    therefore reads off c directly.  One linear equation per index pair
    0 <= i <= j <= m-1, solved by least squares with an exact residual
    check (the system is consistent but deliberately over-determined:
    derivative pairings repeat information).
    """
    fixed, parts = curve.skeleton()
    m = curve.m
    fder = [fixed]
    pder = {name: [vf] for name, vf in parts}
    for _ in range(m - 1):
        fder.append(fder[-1].derivative())
        for name, _ in parts:
            pder[name].append(pder[name][-1].derivative())

    rows, rhs = [], []
    for i in range(m):
        for j in range(i, m):
            row = []
            for name, _ in parts:
                term = pder[name][i].pair(fder[j]) + fder[i].pair(pder[name][j])
                row.append(complex(term.evaluate(1.0, 0)) if not term.is_zero() else 0.0)
            rows.append(row)
            base = fder[i].pair(fder[j])
            rhs.append(-complex(base.evaluate(1.0, 0)) if not base.is_zero() else 0.0)
    a = np.array(rows, dtype=complex)
    b = np.array(rhs, dtype=complex)
    if np.linalg.matrix_rank(a, tol=1e-10) < len(parts):
        raise DegenerateFamilyError(
            f"family degenerate for these (m, k, alpha) = ({curve.m}, {curve.k}, {curve.alpha})"
        )
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    if not np.all(np.isfinite(sol)) or np.linalg.norm(a @ sol - b) > 1e-9 * (
        1.0 + np.linalg.norm(b)
    ):
        raise DegenerateFamilyError(
            f"family degenerate for these (m, k, alpha) = ({curve.m}, {curve.k}, {curve.alpha})"
        )
    coeffs = {name: complex(v) for (name, _), v in zip(parts, sol)}
    return DirectrixCurve(curve.m, curve.k, curve.alpha, coeffs)


def isotropy_verify(curve: DirectrixCurve):
    """Expand all derivative pairings and report the worst coefficient.

    Returns ``(ok, worst)`` where ok means every ExpPoly coefficient of
    every pairing (xi^(i), xi^(j)), 0 <= i, j <= m-1, is at most 1e-12 in
    magnitude.  With solved coefficients the cancellation is exact up to
    a few ulps.
    """
    ders = curve.psis()
    worst = 0.0
    for i in range(curve.m):
        for j in range(i, curve.m):
            tr = ders[i].pair(ders[j])
            if tr.is_zero():
                continue
            tr = tr.settle()
            den = abs(complex(tr.den.evaluate(1.0, 0)))
            for c in tr.num.terms.values():
                worst = max(worst, abs(c) / den)
    return worst <= 1e-12, worst


# ----------------------------------------------------------------------
# auxiliary isotropic planes


class IsotropicPlane:
    """An isotropic (m-1)-plane avoiding the twist pair E_m, Eb_m.

    ``rows`` are label coordinates of a basis E'_1 .. E'_{m-1} normalized
    so that (E'_i, conj E'_j) = delta_ij; ``v_basis`` holds the label
    coordinates of a real orthonormal basis v_1, v_2, v_3 of the
    complement V of the plane plus its conjugate.  The v-ordering fixes
    the stereographic chart of the output map, nothing else.
    """

    def __init__(self, space: BilinearSpace, rows, v_basis, name: str = "plane"):
        rows = np.atleast_2d(np.asarray(rows, dtype=complex))
        v_basis = np.atleast_2d(np.asarray(v_basis, dtype=complex))
        if rows.shape != (space.m - 1, space.dim):
            raise ValueError(f"expected {space.m - 1} rows of length {space.dim}")
        if v_basis.shape != (3, space.dim):
            raise ValueError("v_basis must hold three label-coordinate vectors")
        g = space.pairing_matrix()
        conj_rows = np.array([space.label_conj(r) for r in rows])
        if np.max(np.abs(rows @ g @ rows.T)) > 1e-12:
            raise ValueError("plane is not isotropic")
        if np.max(np.abs(rows @ g @ conj_rows.T - np.eye(space.m - 1))) > 1e-12:
            raise ValueError("plane basis is not normalized against its conjugate")
        if np.max(np.abs(rows[:, space.dim - 2 :])) > 1e-12:
            raise ValueError("plane must avoid the E_m, Eb_m pair")
        for v in v_basis:
            if np.max(np.abs(space.label_conj(v) - v)) > 1e-10:
                raise ValueError("v_basis vectors must be real")
        vg = v_basis @ g @ v_basis.T
        if np.max(np.abs(vg - np.eye(3))) > 1e-10:
            raise ValueError("v_basis must be orthonormal")
        if np.max(np.abs(v_basis @ g @ rows.T)) > 1e-10:
            raise ValueError("v_basis must be orthogonal to the plane")
        self.space = space
        self.rows = rows
        self.v_basis = v_basis
        self.name = name

    def conj_rows(self) -> np.ndarray:
        return np.array([self.space.label_conj(r) for r in self.rows])

    def __repr__(self):
        return f"IsotropicPlane({self.name}, m={self.space.m})"


def default_plane(space: BilinearSpace) -> IsotropicPlane:
    """The rotated-basis plane built from pairs of real basis vectors.

    Row t is (e_p + i e_q)/sqrt(2) for the index pairs (0,2), (1,3),
    (4,5), (6,7), ...; the three leftover real directions, ordered by
    descending index with the second and third negated, form the chart
    basis.  For m = 2 this is the span of (e0 + i e2)/sqrt(2) with chart
    (e4, -e3, -e1); the orientation sends the curve's 0-limit to f = 0
    and lands the m = 2 output on its closed form.
    """
    m = space.m
    r = space.real_to_label()
    pairs = [(0, 2), (1, 3)] + [(2 * t, 2 * t + 1) for t in range(2, m)]
    pairs = pairs[: m - 1]
    rows = [(r[p] + 1j * r[q]) / SQRT2 for p, q in pairs]
    used = {i for pq in pairs for i in pq}
    hi, mid, lo = sorted(set(range(space.dim)) - used, reverse=True)
    v_basis = [r[hi], -r[mid], -r[lo]]
    return IsotropicPlane(space, rows, v_basis, name="default")


def random_plane(space: BilinearSpace, rng) -> IsotropicPlane:
    """A seeded random isotropic plane inside the span of e_0 .. e_{2m-2}.

    Draws a random real orthonormal frame f_1, f_2, ... and uses spans of
    the form f_{2t-1} + i f_{2t}; orthonormality makes the rows isotropic
    and correctly normalized automatically.  The chart basis takes the two
    twist directions e_{2m}, e_{2m-1} and the one leftover frame vector.
    """
    m = space.m
    n = 2 * m - 1
    r = space.real_to_label()
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    frame = [q[:, t] @ r[:n] for t in range(n)]
    rows = [(frame[2 * t] + 1j * frame[2 * t + 1]) / SQRT2 for t in range(m - 1)]
    v_basis = [r[2 * m], r[2 * m - 1], frame[n - 1]]
    return IsotropicPlane(space, rows, v_basis, name="random")


# ----------------------------------------------------------------------
# the elimination


class SpecialBasis:
    """Output of the elimination: F_j = Eb'_j + G_j + u_j and F_m = w + u_m.

    The numerator form of each G_j together with its denominator
    polynomial is kept alongside the assembled fractions, so downstream
    pairings can stay exact instead of stacking equal denominators.
    """

    def __init__(self, plane, F, G, w, u_coords, G_num, dens):
        self.plane = plane
        self.F = list(F)
        self.G = list(G)
        self.w = w
        self.u_coords = [list(row) for row in u_coords]
        self.G_num = list(G_num)
        self.dens = list(dens)

    @property
    def space(self):
        return self.plane.space


def _check_transverse(psis, plane):
    """Reject planes meeting the curve span at samples or the 0/inf limits.

    The 0 and infinity limits of the span are the conjugate pair of
    coordinate planes spanned by the Eb_j respectively E_j, j <= m-1, so
    transversality there is a rank condition on constant matrices.
    """
    space = plane.space
    m = space.m
    for z in _SAMPLES:
        mat = np.vstack([np.array([c.evaluate(z, 0) for c in psi.comps]) for psi in psis])
        mat = np.vstack([mat / max(np.max(np.abs(mat)), 1e-300), plane.rows])
        sv = np.linalg.svd(mat, compute_uv=False)
        if sv[-1] <= 1e-8 * sv[0]:
            raise PlaneIntersectsError(
                f"L' intersects the curve span near z = {z:.3g}; choose another plane"
            )
    for block, side in ((range(1, 2 * m - 2, 2), "infinity"), (range(2, 2 * m - 1, 2), "0")):
        units = np.zeros((m - 1, space.dim), dtype=complex)
        for t, idx in enumerate(block):
            units[t, idx] = 1.0
        mat = np.vstack([plane.rows, units])
        sv = np.linalg.svd(mat, compute_uv=False)
        if sv[-1] <= 1e-8 * sv[0]:
            raise PlaneIntersectsError(
                f"L' meets the curve-span limit at {side}; choose another plane"
            )


def special_basis(psis, plane: IsotropicPlane) -> SpecialBasis:
    """Gauss-Jordan elimination of the conjugate-plane coordinates.

    ``psis`` is the list of m VFunctions spanning the curve's derivative
    flag.  Coordinates along Eb'_j are bilinear pairings against E'_j;
    elimination normalizes them to the identity pattern on the first m-1
    members and to zero on the last.  Pivots are chosen by largest
    sampled magnitude, and a column with no usable pivot means the plane
    meets the span identically.

    The row operations are fraction-free (cross-multiplied polynomial
    combinations); pivot factors accumulate on the rows and are divided
    out only where an output needs it.  Working over fractions instead
    would stack equal denominators at every addition, and the
    root-matching cleanup that untangles such stacks injects rebuild
    noise well above the 1e-8 structure of the limiting map.
    """
    space = plane.space
    m = space.m
    if len(psis) != m:
        raise ValueError(f"expected {m} spanning functions, got {len(psis)}")
    _check_transverse(psis, plane)
    alpha = psis[0].alpha
    zero = TwistedRational.constant(alpha, 0.0)

    work = []
    for psi in psis:
        coords = [psi.pair_const(plane.rows[j]) for j in range(m - 1)]
        work.append([psi, coords])

    for col in range(m - 1):
        mags = [(_sampled_mag(work[r][1][col]), r) for r in range(col, m)]
        best_mag, best = max(mags)
        scale = max(max(best_mag, 1.0), max(_sampled_mag(c) for _, cs in work for c in cs))
        if not np.isfinite(best_mag) or best_mag <= 1e-10 * scale:
            raise PlaneIntersectsError("L' intersects the curve span; choose another plane")
        work[col], work[best] = work[best], work[col]
        pv, pc = work[col]
        piv = pc[col]
        for r in range(m):
            if r == col:
                continue
            rv, rc = work[r]
            factor = rc[col]
            if _tr_vanishes(factor, scale):
                continue
            rv = (rv.scale(piv) - pv.scale(factor)).tidy()
            rc = [_tidy_tr(a * piv - factor * b) for a, b in zip(rc, pc)]
            rc[col] = zero
            work[r] = [rv, rc]

    last_coords = work[m - 1][1]
    if any(not _tr_vanishes(c) for c in last_coords):
        raise PlaneIntersectsError("L' intersects the curve span; choose another plane")

    crows = plane.conj_rows()

    def lprime_part(coords):
        comps = [zero] * space.dim
        for t, c in enumerate(coords):
            if c.is_zero():
                continue
            for idx in range(space.dim):
                entry = complex(plane.rows[t][idx])
                if entry != 0.0:
                    comps[idx] = comps[idx] + c * entry
        return VFunction(space, comps)

    fs, gs, g_nums, dens, u_coords = [], [], [], [], []
    for j in range(m - 1):
        vf, coords = work[j]
        d = coords[j]
        inv = 1.0 / d
        fs.append(vf.scale(inv).tidy())
        ucn = [vf.pair_const(crows[t]) for t in range(m - 1)]
        u_coords.append([_tidy_tr(c * inv) for c in ucn])
        g_num = (vf - VFunction.constant(space, alpha, crows[j]).scale(d) - lprime_part(ucn)).tidy()
        g_nums.append(g_num)
        gs.append(g_num.scale(inv).tidy())
        dens.append(d)
    vf = work[m - 1][0]
    ucn = [vf.pair_const(crows[t]) for t in range(m - 1)]
    u_coords.append(list(ucn))
    w = (vf - lprime_part(ucn)).tidy()
    fs.append(vf)
    return SpecialBasis(plane, fs, gs, w, u_coords, g_nums, dens)


# ----------------------------------------------------------------------
# the limiting map and its eigenfunction candidates


def _chart_reduce(w3: TwistedRational, den: TwistedRational, raw: TwistedRational):
    """Reduced form of w3 / den exploiting den = scalar * d^2.

    The monic square root of the chart denominator gives d; w3 divided
    by it gives the numerator up to constants, which the final sampled
    ratio fixes.  Any failure (odd degree, inexact square root, inexact
    division, non-constant residual ratio) returns None and the caller
    falls back to root matching.
    """
    try:
        b3, a3, nc = w3.num.poly_coeffs()
        bd, ad, dc = den.num.poly_coeffs()
    except ValueError:
        return None
    lead = dc[-1]
    root = _monic_sqrt(np.asarray(dc, dtype=complex)[::-1] / lead)
    if root is None:
        return None
    q, rem = np.polydiv(np.asarray(nc, dtype=complex)[::-1], root)
    if rem.size and np.max(np.abs(rem)) > 1e-8 * np.max(np.abs(nc)):
        return None
    alpha = w3.num.alpha
    # raw = (w3.num * den.den) / (w3.den * den.num) and den.num = lead * root^2,
    # so one factor of root cancels against the divided numerator
    num = ExpPoly.from_coeffs(alpha, list(q[::-1]), a0=a3, b=b3)
    dpoly = ExpPoly.from_coeffs(alpha, list(lead * root[::-1]), a0=ad, b=bd)
    out = TwistedRational(num * den.den, dpoly * w3.den).settle()
    ratios = []
    for z in _SAMPLES:
        try:
            ratios.append(complex(raw.evaluate(z, 0)) / complex(out.evaluate(z, 0)))
        except (PoleError, ZeroDivisionError):
            return None
    mean = np.mean(ratios)
    if abs(mean) < 1e-12 or max(abs(r - mean) for r in ratios) > 1e-8 * abs(mean):
        return None
    return out * mean


def limiting_map(sb: SpecialBasis) -> TwistedRational:
    """Stereographic quotient of the isotropic vector w in the chart basis.

    f = w3 / (w1 - i w2) where wi are the components of w along the real
    chart basis of V; this inverts the usual isotropic direction vector
    ((1 - f^2), i (1 + f^2), 2 f) up to scale.  Because w is isotropic
    (w1^2 + w2^2 + w3^2 = 0), the chart pairings are a common scalar
    times (2 n d, 2 d^2, -2 n^2) for f = n / d, so when the scalar is a
    monomial the reduced denominator is the monic square root of the
    chart denominator and the numerator follows by one exact division.
    That route needs no root finding; a scalar with polynomial content
    (detected by the square-root consistency check) falls back to
    root-matching cancellation.

    No constant renormalization is applied: the eigenfunction components
    G_j live in the same chart, so the map handed to the metric must be
    the chart ratio itself, not a rescaled copy (rescaling f moves the
    metric by a non-isometric Moebius factor and the pairings stop
    solving the eigen-equation).
    """
    v = sb.plane.v_basis
    w1 = _tidy_tr(sb.w.pair_const(v[0]))
    w2 = _tidy_tr(sb.w.pair_const(v[1]))
    w3 = _tidy_tr(sb.w.pair_const(v[2]))
    den = _tidy_tr(w1 - w2 * 1j)
    if _tr_vanishes(den) or _tr_vanishes(w3):
        raise DegenerateProjectionError("degenerate projection: chart denominator vanishes")
    raw = (w3 / den).settle()
    f = _chart_reduce(w3, den, raw)
    if f is None:
        f = _root_clean(_tidy_tr(raw))
    return f


def extra_eigenfunctions(sb: SpecialBasis, f: TwistedRational | None = None):
    """Pair each G_j against the unit-sphere map of the limiting map.

    h_j(z) = sum_i g_j^i(z) phi^i(z) with g_j^i the chart components of
    G_j; the bilinear pairing of two objects with the same monodromy is
    single-valued, which the caller should confirm with a branch test.
    Returns m-1 complex-valued candidates.
    """
    if f is None:
        f = limiting_map(sb)
    metric = ConicalMetric(f)
    v = sb.plane.v_basis
    out = []
    for j, (gnum, den) in enumerate(zip(sb.G_num, sb.dens), start=1):
        inv = 1.0 / den
        comps = [_tidy_tr(gnum.pair_const(v[i]) * inv) for i in range(3)]

        def fn(z, branch=0, _c=comps):
            ph = metric.phi(z, branch)
            return sum(c.evaluate(z, branch) * ph[i] for i, c in enumerate(_c))

        out.append(EigenCandidate(fn, single_valued=True, label=f"extra-{j}"))
    return out


# ----------------------------------------------------------------------
# the full pipeline


class ConstructionResult:
    """Verified output of the construction pipeline."""

    def __init__(self, curve, plane, special, f, eigenfunctions, diagnostics):
        self.curve = curve
        self.plane = plane
        self.special = special
        self.f = f
        self.eigenfunctions = list(eigenfunctions)
        self.diagnostics = dict(diagnostics)

    def __repr__(self):
        return (
            f"ConstructionResult(m={self.curve.m}, k={self.curve.k}, "
            f"alpha={self.curve.alpha}, eigenfunctions={len(self.eigenfunctions)})"
        )


def _exclusion_points(f: TwistedRational, comps) -> list:
    """Finite cone points plus candidate-denominator roots, for grid holes."""
    pts = []
    metric = ConicalMetric(f)
    try:
        pts.extend(complex(p) for p in metric.finite_cone_positions())
    except Exception:
        pts.append(0j)
    for tr in comps:
        try:
            _, _, dc = tr.den.poly_coeffs()
        except ValueError:
            continue
        if len(dc) > 1:
            for root, _ in poly_roots(ExpPoly.from_coeffs(0.0, dc)):
                pts.append(complex(root))
    return pts


def verify_candidates(f, candidates, grid=None, residual_tol=1e-4, h=1e-3):
    """Branch, residual, boundedness, and novelty checks for the candidates.

    Returns a diagnostics dict with ``pass`` set when every complex
    candidate is single-valued, both its real and imaginary parts satisfy
    the eigen-equation on the grid at ``residual_tol`` relative to
    1 + sup, the modulus stays bounded toward 0 and infinity, and the
    residue after projecting onto the axis projections (phi, e_i) keeps
    at least 10 percent of the candidate's norm.
    """
    metric = ConicalMetric(f)
    if grid is None:
        holes = _exclusion_points(f, [])
        grid = annulus_grid(0.55, 2.05, 24, exclude=holes, exclusion_radius=0.12)
    diag = {"pass": True, "candidates": []}
    for cand in candidates:
        entry = {"label": cand.label}
        vals0 = np.array([cand.evaluate(z, 0) for z in _SAMPLES])
        vals1 = np.array([cand.evaluate(z, 1) for z in _SAMPLES])
        entry["branch_gap"] = float(np.max(np.abs(vals0 - vals1)))
        entry["single_valued"] = entry["branch_gap"] <= 1e-8 * (1.0 + np.max(np.abs(vals0)))
        parts = {"re": cand.real(), "im": cand.imag()}
        entry["residuals"] = {}
        entry["bounds"] = {}
        entry["remainders"] = {}
        ok = entry["single_valued"]
        for name, part in parts.items():
            rep = verify_on_grid(part, f, grid, h=h, tol=residual_tol)
            entry["residuals"][name] = rep["max_residual"]
            entry["bounds"][name] = rep["bound"]
            ok = ok and rep["passed"]
            rem = axis_projection_remainder(part, f, grid)
            entry["remainders"][name] = rem
            ok = ok and rem >= 0.1
        probe0 = boundedness_probe(cand, center=0j, r0=0.05, levels=8)
        probe_inf = boundedness_probe(cand, r0=4.0, levels=8, at_infinity=True)
        entry["bounded"] = bool(probe0["bounded"] and probe_inf["bounded"])
        ok = ok and entry["bounded"]
        entry["pass"] = bool(ok)
        diag["candidates"].append(entry)
        diag["pass"] = diag["pass"] and ok
    return diag


def run_algorithm(
    m: int,
    k: int,
    alpha: float,
    Lprime_strategy: str = "default",
    seed: int = 0,
    retries: int = 4,
    grid=None,
    residual_tol: float = 1e-4,
    h: float = 1e-3,
) -> ConstructionResult:
    """Full pipeline: solve the curve, choose a plane, eliminate, verify.

    Strategy "default" tries the rotated-basis plane first and falls back
    to seeded random isotropic planes; "random" skips the default.  Each
    failed attempt (intersection, degenerate projection, or verification
    failure) burns one retry; exhausting the budget raises
    ConstructionError with the per-attempt diagnostics.  m = 2 and m = 3
    are the tested range; larger m is accepted but experimental.
    """
    if Lprime_strategy not in ("default", "random"):
        raise ValueError(f"unknown Lprime_strategy {Lprime_strategy!r}")
    curve = solve_coefficients(directrix_family(m, k, alpha))
    ok, worst = isotropy_verify(curve)
    if not ok:
        raise DegenerateFamilyError(f"isotropy verification failed, worst coefficient {worst:.3e}")
    psis = curve.psis()
    space = curve.space
    rng = np.random.default_rng(seed)

    failures = []
    for attempt in range(retries + 1):
        if attempt == 0 and Lprime_strategy == "default":
            plane = default_plane(space)
        else:
            plane = random_plane(space, rng)
        name = f"{plane.name}#{attempt}"
        try:
            sb = special_basis(psis, plane)
            f = limiting_map(sb)
            candidates = extra_eigenfunctions(sb, f)
            diag = verify_candidates(f, candidates, grid=grid, residual_tol=residual_tol, h=h)
        except (PlaneIntersectsError, DegenerateProjectionError, ValueError, PoleError) as exc:
            failures.append(f"{name}: {exc}")
            continue
        if diag["pass"]:
            diag.update(
                {
                    "attempts": attempt + 1,
                    "plane": name,
                    "isotropy_worst": worst,
                    "coefficients": dict(curve.coefficients),
                }
            )
            return ConstructionResult(curve, plane, sb, f, candidates, diag)
        worst_res = max(
            max(c["residuals"].values()) for c in diag["candidates"] if c["residuals"]
        )
        failures.append(f"{name}: verification failed, worst residual {worst_res:.3e}")
    raise ConstructionError(
        f"no admissible L' found after {retries + 1} attempts: " + "; ".join(failures)
    )
