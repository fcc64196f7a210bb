"""Spherical metrics with conical singularities, built from branched maps.

A map ``f`` (a :class:`~coneig.algebra.TwistedRational`) is treated as a
multivalued meromorphic map to the Riemann sphere.  Pulling back the round
metric gives

    g = 4 |f'|^2 / (1 + |f|^2)^2 |dz|^2,

which has a conical point of angle ``2*pi*beta`` wherever ``f`` branches
with local exponent ``beta``.  Composing with the stereographic chart
produces the unit-sphere map

    phi = (2 Re f, 2 Im f, |f|^2 - 1) / (|f|^2 + 1),

and a function ``u`` solves the eigenvalue problem we care about exactly when

    u_{z zbar} + |phi_z|^2 u = 0,      |phi_z|^2 = 2 |f'|^2 / (1 + |f|^2)^2.

Everything here is written in terms of the numerator/denominator pair
``f = N/D`` and the Wronskian ``W = N'D - ND'`` so that poles of ``f`` are
ordinary points numerically:

    phi          = (2 Re(N conj D), 2 Im(N conj D), |N|^2 - |D|^2) / S,
    phi_z        = (W / S^2) * (conj(D)^2 - conj(N)^2,
                               -i (conj(D)^2 + conj(N)^2),
                               2 conj(N) conj(D)),
    |phi_z|^2    = 2 |W|^2 / S^2,            with  S = |N|^2 + |D|^2.

Eigenfunction candidates carry their own evaluation rule; the closed-form
ones are stored as sesquilinear expressions, i.e. quotients of sums of
``A(z) * conj(B(z))`` with twisted-polynomial ``A, B``, which is exactly the
shape produced both by axis projections of ``phi`` and by the directrix
construction in :mod:`coneig.twistor`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import ExpPoly, TwistedRational, _terms_from_json, _terms_to_json, poly_roots

INTEGER_ANGLE_TOL = 1e-9
SMOOTH_ANGLE_TOL = 1e-9


class UnsupportedMapError(ValueError):
    """The map is outside the family this analysis handles."""


# ----------------------------------------------------------------------
# cone points


@dataclass(frozen=True)
class ConePoint:
    """A conical singularity: ``angle = 2*pi*beta`` at ``position``.

    ``position`` is a finite complex number, or ``None`` for the point at
    infinity.
    """

    position: complex | None
    beta: float

    @property
    def at_infinity(self) -> bool:
        return self.position is None

    @property
    def is_integer(self) -> bool:
        return abs(self.beta - round(self.beta)) <= INTEGER_ANGLE_TOL

    def to_json(self) -> dict:
        pos = "inf" if self.position is None else [self.position.real, self.position.imag]
        return {"position": pos, "beta": self.beta, "integer": bool(self.is_integer)}


def _low_exponent(p: ExpPoly) -> float:
    return p.exponent_range()[0]


def _high_exponent(p: ExpPoly) -> float:
    return p.exponent_range()[1]


def _order_at_origin(f: TwistedRational, tol: float) -> float:
    """Vanishing order of ``f`` at 0 (negative for a pole), via exponents."""
    ord0 = _low_exponent(f.num) - _low_exponent(f.den)
    if abs(ord0) > tol:
        return ord0
    # finite nonzero value; look at f - f(0)
    c = _limit_coeff(f.num, low=True) / _limit_coeff(f.den, low=True)
    g = f.num - c * f.den
    if g.is_zero() or g.chop(1e-12).is_zero():
        raise UnsupportedMapError("map is constant")
    return _low_exponent(g.chop(1e-12)) - _low_exponent(f.den)


def _order_at_infinity(f: TwistedRational, tol: float) -> float:
    """Vanishing order of ``f`` at infinity (negative for a pole)."""
    d = _high_exponent(f.num) - _high_exponent(f.den)
    if abs(d) > tol:
        return -d
    c = _limit_coeff(f.num, low=False) / _limit_coeff(f.den, low=False)
    g = f.num - c * f.den
    if g.is_zero() or g.chop(1e-12).is_zero():
        raise UnsupportedMapError("map is constant")
    return -(_high_exponent(g.chop(1e-12)) - _high_exponent(f.den))


def _limit_coeff(p: ExpPoly, low: bool) -> complex:
    items = sorted(p.terms.items(), key=lambda kv: kv[0][0] + kv[0][1] * p.alpha)
    return items[0][1] if low else items[-1][1]


def cone_points(f: TwistedRational, tol: float = SMOOTH_ANGLE_TOL):
    """Locate the conical points of the pulled-back metric.

    Finite nonzero cones are the roots of the Wronskian ``N'D - ND'`` after
    common numerator/denominator roots have been cancelled; a root of
    multiplicity ``m`` gives angle ``2*pi*(m+1)``.  The points 0 and infinity
    are analyzed through exponent ranges instead, which also captures the
    non-integer angles.  Points with ``beta = 1`` are smooth and omitted.

    Works for maps whose numerator and denominator each involve a single
    power of the twist factor; raises :class:`UnsupportedMapError` otherwise.
    """
    if f.num.uniform_b() is None or f.den.uniform_b() is None:
        raise UnsupportedMapError("cone analysis needs uniform twist grading")
    fs = f.simplify_roots()
    cones = []

    beta0 = abs(_order_at_origin(fs, tol))
    if abs(beta0 - 1) > tol:
        cones.append(ConePoint(0j, float(beta0)))

    wron = fs.num.derivative() * fs.den - fs.num * fs.den.derivative()
    wron = wron.chop(1e-12)
    if wron.is_zero():
        raise UnsupportedMapError("map is constant")
    _, _, coeffs = wron.poly_coeffs()
    if len(coeffs) > 1:
        plain = ExpPoly.from_coeffs(f.alpha, coeffs)
        for root, mult in poly_roots(plain):
            if root == 0:
                continue
            cones.append(ConePoint(complex(root), float(mult + 1)))

    beta_inf = abs(_order_at_infinity(fs, tol))
    if abs(beta_inf - 1) > tol:
        cones.append(ConePoint(None, float(beta_inf)))

    def sort_key(c: ConePoint):
        if c.position == 0:
            return (0, 0.0, 0.0)
        if c.at_infinity:
            return (2, 0.0, 0.0)
        return (1, round(c.position.real, 12), round(c.position.imag, 12))

    cones.sort(key=sort_key)
    return cones


# ----------------------------------------------------------------------
# the metric object


class ConicalMetric:
    """A spherical conical metric together with its defining map.

    Caches the Wronskian so that repeated density/curvature evaluations stay
    cheap and finite across poles of the map.
    """

    def __init__(self, f: TwistedRational, cones=None):
        self.f = f
        self.fprime = f.derivative()
        self._wron = (f.num.derivative() * f.den - f.num * f.den.derivative()).chop(1e-14)
        self._cones = list(cones) if cones is not None else None

    @classmethod
    def from_map(cls, f: TwistedRational) -> "ConicalMetric":
        return cls(f)

    @property
    def alpha(self) -> float:
        return self.f.alpha

    @property
    def cones(self):
        if self._cones is None:
            self._cones = cone_points(self.f)
        return self._cones

    def finite_cone_positions(self):
        return [c.position for c in self.cones if not c.at_infinity]

    # -- pole-free evaluation kernels ----------------------------------

    def _nds(self, z, branch: int = 0):
        n = self.f.num.evaluate(z, branch)
        d = self.f.den.evaluate(z, branch)
        s = np.abs(n) ** 2 + np.abs(d) ** 2
        return n, d, s

    def phi(self, z, branch: int = 0):
        """Unit-sphere image; shape (3,) for scalar ``z``, else (3, ...)."""
        n, d, s = self._nds(z, branch)
        cross = n * np.conj(d)
        out = np.stack(
            [2 * cross.real / s, 2 * cross.imag / s, (np.abs(n) ** 2 - np.abs(d) ** 2) / s]
        )
        return out

    def phi_z(self, z, branch: int = 0):
        """Holomorphic z-derivative of :meth:`phi` (complex, shape (3, ...))."""
        n, d, s = self._nds(z, branch)
        w = self._wron.evaluate(z, branch)
        nb, db = np.conj(n), np.conj(d)
        return (w / s**2) * np.stack([db**2 - nb**2, -1j * (db**2 + nb**2), 2 * nb * db])

    def gradient_norm_sq(self, z, branch: int = 0):
        """|phi_z|^2, the conformal density of the eigenvalue problem."""
        n, d, s = self._nds(z, branch)
        w = self._wron.evaluate(z, branch)
        return 2 * np.abs(w) ** 2 / s**2

    def density(self, z, branch: int = 0):
        """Metric density: ``g = density * |dz|^2``."""
        return 2 * self.gradient_norm_sq(z, branch)

    def to_json(self) -> dict:
        from .algebra import to_json as map_to_json

        return {"map": map_to_json(self.f), "cones": [c.to_json() for c in self.cones]}


def stereographic(f: TwistedRational, z, branch: int = 0):
    """Convenience wrapper: unit-sphere image of ``z`` under the map."""
    return ConicalMetric(f).phi(z, branch)


def metric_density(f: TwistedRational, z, branch: int = 0):
    return ConicalMetric(f).density(z, branch)


def _as_metric(f) -> ConicalMetric:
    return f if isinstance(f, ConicalMetric) else ConicalMetric(f)


# ----------------------------------------------------------------------
# eigenfunction candidates


class EigenCandidate:
    """A candidate eigenfunction plus the rule for evaluating it.

    ``fn(z, branch)`` must accept scalars and ndarrays.  ``single_valued``
    declares whether the value is independent of the branch index; for
    sesquilinear candidates this holds automatically whenever each product
    ``A * conj(B)`` is balanced in the twist factor.
    """

    def __init__(self, fn, single_valued: bool = True, label: str = "", data: dict | None = None):
        self._fn = fn
        self.single_valued = single_valued
        self.label = label
        self._data = data

    def evaluate(self, z, branch: int = 0):
        return self._fn(z, branch)

    __call__ = evaluate

    @classmethod
    def from_sesquilinear(cls, num_pairs, den_pairs, label: str = "") -> "EigenCandidate":
        """Build ``sum A_i conj(B_i) / sum C_j conj(D_j)`` from ExpPoly pairs."""
        num_pairs = [(a, b) for a, b in num_pairs]
        den_pairs = [(c, d) for c, d in den_pairs]

        def fn(z, branch=0):
            num = sum(a.evaluate(z, branch) * np.conj(b.evaluate(z, branch)) for a, b in num_pairs)
            den = sum(c.evaluate(z, branch) * np.conj(d.evaluate(z, branch)) for c, d in den_pairs)
            return num / den

        balanced = all(_twist_balanced(a, b) for a, b in num_pairs + den_pairs)
        data = {
            "kind": "sesquilinear",
            "alpha": num_pairs[0][0].alpha if num_pairs else 0.0,
            "num": [{"A": _terms_to_json(a), "B": _terms_to_json(b)} for a, b in num_pairs],
            "den": [{"A": _terms_to_json(c), "B": _terms_to_json(d)} for c, d in den_pairs],
            "label": label,
        }
        return cls(fn, single_valued=balanced, label=label, data=data)

    @classmethod
    def from_axis(cls, f: TwistedRational, s, label: str = "") -> "EigenCandidate":
        """The projection ``(phi, s)`` of the sphere map onto a fixed vector.

        These solve the eigen-equation wherever defined; they are globally
        single-valued only when ``s`` is fixed by the monodromy, which the
        caller is responsible for knowing.
        """
        s = np.asarray(s, dtype=float)
        metric = ConicalMetric(f)

        def fn(z, branch=0):
            return np.tensordot(s, metric.phi(z, branch), axes=(0, 0))

        return cls(fn, single_valued=False, label=label or "axis-projection")

    def real(self) -> "EigenCandidate":
        return EigenCandidate(
            lambda z, branch=0: np.real(self._fn(z, branch)),
            self.single_valued,
            label=(self.label + ".re") if self.label else "re",
        )

    def imag(self) -> "EigenCandidate":
        return EigenCandidate(
            lambda z, branch=0: np.imag(self._fn(z, branch)),
            self.single_valued,
            label=(self.label + ".im") if self.label else "im",
        )

    def to_json(self) -> dict:
        if self._data is None:
            raise ValueError("only sesquilinear candidates are serializable")
        return dict(self._data)

    @classmethod
    def from_json(cls, data: dict) -> "EigenCandidate":
        if data.get("kind") != "sesquilinear":
            raise ValueError(f"unknown candidate kind {data.get('kind')!r}")
        alpha = float(data["alpha"])
        num_pairs = [
            (_terms_from_json(alpha, t["A"]), _terms_from_json(alpha, t["B"])) for t in data["num"]
        ]
        den_pairs = [
            (_terms_from_json(alpha, t["A"]), _terms_from_json(alpha, t["B"])) for t in data["den"]
        ]
        return cls.from_sesquilinear(num_pairs, den_pairs, label=data.get("label", ""))


def _twist_balanced(a: ExpPoly, b: ExpPoly) -> bool:
    """True when ``A * conj(B)`` is branch-independent (twist powers match)."""
    ba, bb = a.uniform_b(), b.uniform_b()
    if a.is_zero() or b.is_zero():
        return True
    return ba is not None and bb is not None and ba == bb


def _as_eval(u):
    if isinstance(u, EigenCandidate):
        return u.evaluate
    if callable(u):
        return u
    raise TypeError(f"cannot evaluate {type(u).__name__} as an eigenfunction")


# ----------------------------------------------------------------------
# numerical verification


def eigen_residual(u, f, z, h: float = 1e-3, branch: int = 0):
    """Pointwise defect ``|u + u_{z zbar} / |phi_z|^2|`` via a 5-point stencil.

    Vectorized over ``z``.  The stencil assumes ``u`` is evaluable at the
    four shifted points on the same branch; keep grid points a few ``h``
    away from cones and, for branch-sensitive candidates, from the cut.
    """
    metric = _as_metric(f)
    ev = _as_eval(u)
    zz = np.asarray(z, dtype=complex)
    uc = ev(zz, branch)
    lap4 = (
        ev(zz + h, branch)
        + ev(zz - h, branch)
        + ev(zz + 1j * h, branch)
        + ev(zz - 1j * h, branch)
        - 4 * uc
    )
    u_zzb = lap4 / (4 * h * h)
    dens = metric.gradient_norm_sq(zz, branch)
    return np.abs(uc + u_zzb / dens)


def verify_on_grid(u, f, grid, h: float = 1e-3, tol: float = 1e-5, branch: int = 0) -> dict:
    """Max eigen-equation residual over a grid, with a pass verdict.

    Passes when ``max residual <= tol * (1 + sup|u|)`` with the sup taken
    over all stencil evaluations on the grid.
    """
    metric = _as_metric(f)
    ev = _as_eval(u)
    zz = np.asarray(grid, dtype=complex).ravel()
    res = eigen_residual(u, metric, zz, h=h, branch=branch)
    sup = 0.0
    for shift in (0, h, -h, 1j * h, -1j * h):
        sup = max(sup, float(np.max(np.abs(ev(zz + shift, branch)))))
    k = int(np.argmax(res))
    bound = tol * (1.0 + sup)
    return {
        "n_points": int(zz.size),
        "h": h,
        "tol": tol,
        "sup_u": sup,
        "max_residual": float(res[k]),
        "rms_residual": float(np.sqrt(np.mean(res**2))),
        "argmax": [zz[k].real, zz[k].imag],
        "bound": bound,
        "passed": bool(res[k] <= bound),
    }


def axis_projection_remainder(u, f, grid, branch: int = 0) -> float:
    """Relative remainder of ``u`` after removing its best axis-projection part.

    Least-squares fits ``u ~ sum_i c_i (phi, e_i)`` over the grid samples and
    returns ``|u - fit| / |u|`` in the discrete 2-norm.  Values near 0 mean
    ``u`` is (numerically) a projection of the sphere map onto a fixed
    vector; values near 1 mean it is essentially orthogonal to all of them.
    """
    metric = _as_metric(f)
    ev = _as_eval(u)
    zz = np.asarray(grid, dtype=complex).ravel()
    uu = np.real(ev(zz, branch)).astype(float)
    basis = metric.phi(zz, branch)
    coef, *_ = np.linalg.lstsq(basis.T, uu, rcond=None)
    norm_u = float(np.linalg.norm(uu))
    if norm_u == 0.0:
        return 0.0
    return float(np.linalg.norm(uu - basis.T @ coef) / norm_u)


def x_from_u(u, f, z, h: float = 1e-3, branch: int = 0) -> dict:
    """Recover the vector field ``X = u phi + grad-correction`` at ``z``.

    For a genuine eigenfunction the map ``z -> X(z)`` is a branch of a
    vector-valued harmonic-type object whose z-derivative is isotropic and
    parallel to ``conj(phi_z)``; the returned diagnostics quantify both.
    Derivatives of ``u`` use centered differences with the same ``h``.
    """
    metric = _as_metric(f)
    ev = _as_eval(u)

    def X_at(p):
        up = ev(p, branch)
        ux = (ev(p + h, branch) - ev(p - h, branch)) / (2 * h)
        uy = (ev(p + 1j * h, branch) - ev(p - 1j * h, branch)) / (2 * h)
        u_z = (ux - 1j * uy) / 2
        u_zb = (ux + 1j * uy) / 2
        pz = metric.phi_z(p, branch)
        pzb = np.conj(pz)
        dens = metric.gradient_norm_sq(p, branch)
        return np.real(up * metric.phi(p, branch) + (u_z * pzb + u_zb * pz) / dens)

    X = X_at(z)
    Xr, Xl = X_at(z + h), X_at(z - h)
    Xu, Xd = X_at(z + 1j * h), X_at(z - 1j * h)
    X_z = ((Xr - Xl) - 1j * (Xu - Xd)) / (4 * h)
    iso = complex(np.sum(X_z * X_z))
    norm = float(np.sum(np.abs(X_z) ** 2))
    pzb = np.conj(metric.phi_z(z, branch))
    pzb_norm = float(np.sum(np.abs(pzb) ** 2))
    # below this, X_z is dominated by the O(h^2) stencil bias and its
    # direction means nothing
    floor = 50 * h * h * (1.0 + float(np.linalg.norm(X)))
    if np.sqrt(norm) > floor and pzb_norm > 0:
        coef = np.vdot(pzb, X_z) / pzb_norm
        sine = float(np.linalg.norm(X_z - coef * pzb) / np.sqrt(norm))
    else:
        sine = 0.0
    return {
        "X": X,
        "conformal_defect": abs(iso),
        "conformal_defect_rel": abs(iso) / norm if norm > 0 else 0.0,
        "gauss_sine": sine,
    }


# ----------------------------------------------------------------------
# grids


def annulus_grid(
    rmin: float,
    rmax: float,
    n: int,
    exclude=(),
    exclusion_radius: float = 0.05,
    cut_margin: float = 0.0,
):
    """An ``n x n`` polar grid on the annulus, with optional exclusions.

    Angles are staggered so no point lies exactly on the negative real axis.
    ``exclude`` lists centers (finite complex numbers) around which a disc of
    ``exclusion_radius`` is removed; ``cut_margin`` removes a strip around
    the branch cut.
    """
    radii = np.linspace(rmin, rmax, n)
    thetas = -np.pi + (np.arange(n) + 0.5) * (2 * np.pi / n)
    zz = (radii[:, None] * np.exp(1j * thetas[None, :])).ravel()
    keep = np.ones(zz.shape, dtype=bool)
    for c in exclude:
        if c is None:
            continue
        keep &= np.abs(zz - complex(c)) > exclusion_radius
    if cut_margin > 0:
        keep &= ~((zz.real < 0) & (np.abs(zz.imag) < cut_margin))
    return zz[keep]


def grid_from_spec(spec: str, exclude=(), exclusion_radius: float = 0.05, cut_margin: float = 0.0):
    """Parse ``"annulus:rmin:rmax:n"`` into a grid array."""
    parts = spec.split(":")
    if len(parts) != 4 or parts[0] != "annulus":
        raise ValueError(f"unrecognized grid spec {spec!r}; expected annulus:rmin:rmax:n")
    rmin, rmax, n = float(parts[1]), float(parts[2]), int(parts[3])
    if not (0 < rmin < rmax) or n < 2:
        raise ValueError(f"bad annulus parameters in {spec!r}")
    return annulus_grid(rmin, rmax, n, exclude=exclude, exclusion_radius=exclusion_radius, cut_margin=cut_margin)
