"""Rotation monodromy of a branched map, and its reducibility type.

Continuing a map ``f`` along a loop replaces its germ by a Moebius
transformation of itself; for the maps we handle the transformation is a
rotation of the target sphere, represented by

    A = [[alpha, beta], [-conj(beta), conj(alpha)]],   |alpha|^2+|beta|^2 = 1,

modulo overall sign.  ``psu2_to_so3`` converts to an orthogonal 3x3 matrix.
``continue_along`` recovers the element for a concrete polyline loop by
tracking the branch index across the cut and fitting a Moebius map to germ
samples.  ``classify`` assembles loop generators around the cone points of a
metric and reports whether the resulting rotation group is trivial, has a
common fixed axis, or neither.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import TwistedRational
from .metric import ConicalMetric
from .paths import based_loop, winding_increment

UNIT_TOL = 1e-12
FIT_TOL = 1e-8
AXIS_TOL = 1e-8
IDENTITY_TOL = 1e-9


class GermFitError(RuntimeError):
    """Germ samples along the loop did not define a Moebius map."""


class NonRotationError(RuntimeError):
    """The fitted Moebius map is not a rotation of the sphere."""


def _canonical_sign(alpha: complex, beta: complex):
    for v in (alpha.real, alpha.imag, beta.real, beta.imag):
        if abs(v) > 1e-13:
            return (alpha, beta) if v > 0 else (-alpha, -beta)
    return alpha, beta


@dataclass(frozen=True)
class PSU2Element:
    """A sphere rotation ``v -> (alpha v + beta)/(-conj(beta) v + conj(alpha))``.

    Stored with unit norm and a canonical overall sign (the first nonzero
    entry of ``(Re alpha, Im alpha, Re beta, Im beta)`` is positive), so two
    equal rotations compare equal componentwise.
    """

    alpha: complex
    beta: complex

    def __post_init__(self):
        norm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"not close to unit norm: {norm}")
        a, b = self.alpha, self.beta
        if abs(norm - 1.0) > UNIT_TOL:
            s = 1.0 / np.sqrt(norm)
            a, b = a * s, b * s
        a, b = _canonical_sign(complex(a), complex(b))
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    @classmethod
    def identity(cls) -> "PSU2Element":
        return cls(1.0 + 0j, 0j)

    def matrix(self):
        a, b = self.alpha, self.beta
        return np.array([[a, b], [-np.conj(b), np.conj(a)]])

    def compose(self, other: "PSU2Element") -> "PSU2Element":
        m = self.matrix() @ other.matrix()
        return PSU2Element(m[0, 0], m[0, 1])

    def inverse(self) -> "PSU2Element":
        return PSU2Element(np.conj(self.alpha), -self.beta)

    def mobius(self, v):
        a, b = self.alpha, self.beta
        return (a * v + b) / (-np.conj(b) * v + np.conj(a))

    def is_identity(self, tol: float = IDENTITY_TOL) -> bool:
        return abs(self.beta) <= tol and min(abs(self.alpha - 1), abs(self.alpha + 1)) <= tol

    def to_json(self) -> dict:
        return {
            "alpha": [self.alpha.real, self.alpha.imag],
            "beta": [self.beta.real, self.beta.imag],
        }


def psu2_to_so3(elem: PSU2Element):
    """Orthogonal matrix of the rotation, in the fixed convention below."""
    a, b = elem.alpha, elem.beta
    am = a * a - b * b
    ap = a * a + b * b
    return np.array(
        [
            [am.real, ap.imag, -2 * (a * b).real],
            [-am.imag, ap.real, 2 * (a * b).imag],
            [2 * (a * np.conj(b)).real, 2 * (a * np.conj(b)).imag, abs(a) ** 2 - abs(b) ** 2],
        ]
    )


# ----------------------------------------------------------------------
# continuation along loops


def _fit_mobius(f: TwistedRational, z0: complex, dn: int, delta: float, tol: float) -> PSU2Element:
    # The two germs are related by one Moebius map globally, so the sample
    # points may be spread out; wide spacing keeps the fit well conditioned.
    samples = z0 + delta * np.array([0.0, 1.0, 1j, 1 + 1j])
    v = np.array([f.evaluate(complex(p), 0) for p in samples])
    w = np.array([f.evaluate(complex(p), dn) for p in samples])
    scale = max(1.0, float(np.max(np.abs(v))), float(np.max(np.abs(w))))
    rows = np.stack([v, np.ones(4, dtype=complex), -v * w, -w], axis=1)
    rows = rows / np.linalg.norm(rows, axis=1, keepdims=True)
    _, sing, vh = np.linalg.svd(rows)
    if sing[-1] > 1e-8 * sing[0]:
        raise GermFitError(f"germ samples are not Moebius-related (sigma={sing[-1]:.2e})")
    a, b, c, d = np.conj(vh[-1])
    det = a * d - b * c
    if abs(det) < 1e-12:
        raise GermFitError("degenerate Moebius fit")
    m = np.array([[a, b], [c, d]]) / np.sqrt(det)
    uu, _, vv = np.linalg.svd(m)
    unit = uu @ vv
    if np.linalg.norm(m - unit) > tol and np.linalg.norm(m + unit) > tol:
        raise NonRotationError(
            f"monodromy is not unitary within {tol:g} (defect {np.linalg.norm(m - unit):.2e})"
        )
    unit = unit / np.sqrt(np.linalg.det(unit))
    elem = PSU2Element(unit[0, 0], unit[0, 1])
    # confirm against the samples, fourth point included
    pred = elem.mobius(v)
    if np.max(np.abs(pred - w)) > 1e-6 * scale:
        raise GermFitError("fitted rotation does not reproduce the germ samples")
    return elem


def continue_along(
    f: TwistedRational, vertices, tol: float = FIT_TOL, delta: float = 0.35
) -> PSU2Element:
    """Monodromy of ``f`` along a closed polyline starting at ``vertices[0]``.

    The branch index is tracked across the cut; a net change of zero means
    the germ returns unchanged and the element is the identity exactly.
    Otherwise a Moebius map is fitted to four germ samples near the base
    point and projected to a rotation; a projection defect above ``tol``
    raises :class:`NonRotationError`.
    """
    vertices = np.asarray(vertices, dtype=complex)
    if abs(vertices[0] - vertices[-1]) > 1e-12:
        raise ValueError("loop is not closed")
    dn = winding_increment([complex(z) for z in vertices])
    if dn == 0:
        return PSU2Element.identity()
    return _fit_mobius(f, complex(vertices[0]), dn, delta, tol)


def branch_rotation(f: TwistedRational, n: int = 1, z0: complex = 1 + 0.5j) -> PSU2Element:
    """The rotation induced by continuing ``n`` times around the origin."""
    if n == 0:
        return PSU2Element.identity()
    return _fit_mobius(f, z0, n, 0.35, FIT_TOL)


# ----------------------------------------------------------------------
# classification


@dataclass
class MonodromyElement:
    around: complex | None
    radius: float
    psu2: PSU2Element
    so3: np.ndarray = field(repr=False)

    def to_json(self) -> dict:
        pos = "inf" if self.around is None else [self.around.real, self.around.imag]
        return {
            "around": pos,
            "radius": self.radius,
            "psu2": self.psu2.to_json(),
            "so3": [[float(x) for x in row] for row in self.so3],
            "identity": bool(self.psu2.is_identity()),
        }


@dataclass
class MonodromyClassification:
    kind: str
    axis: np.ndarray | None
    elements: list

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "axis": None if self.axis is None else [float(x) for x in self.axis],
            "elements": [e.to_json() for e in self.elements],
        }


_BASE_CANDIDATES = (1 + 0.5j, -0.8 + 1.1j, 1.7 - 0.6j, 0.35 + 1.9j, 2.3 + 1.2j)


def _pick_base(singular):
    best, best_d = _BASE_CANDIDATES[0], -1.0
    for cand in _BASE_CANDIDATES:
        d = min((abs(cand - s) for s in singular), default=10.0)
        if d > best_d:
            best, best_d = cand, d
    return best


def generator_loops(metric: ConicalMetric, base: complex | None = None, n_arc: int = 64):
    """Based loops around the finite cones that generate the monodromy.

    One loop per finite cone, dropping the last when infinity is smooth
    (their product is then redundant).  Radii are ``min(0.1, half the
    distance to the nearest other singular point)``.
    """
    cones = metric.cones
    finite = [c for c in cones if not c.at_infinity]
    has_inf = any(c.at_infinity for c in cones)
    positions = [c.position for c in finite]
    if base is None:
        base = _pick_base(positions + [0j])
    targets = positions if has_inf else positions[:-1]
    loops = []
    for p in targets:
        others = [q for q in positions if q != p] + ([0j] if p != 0 else [])
        dmin = min((abs(p - q) for q in others), default=1.0)
        r = min(0.1, dmin / 2)
        loops.append((p, r, based_loop(base, p, r, n=n_arc)))
    return base, loops


def classify_rotations(matrices, tol: float = AXIS_TOL):
    """Common-axis analysis of a list of orthogonal matrices.

    Returns ``(kind, axis)`` with kind one of ``trivially_reducible``
    (all identity), ``reducible`` (a common unit eigenvector with
    eigenvalue 1), or ``irreducible``.
    """
    mats = [np.asarray(m, dtype=float) for m in matrices]
    if all(np.linalg.norm(m - np.eye(3)) <= tol for m in mats):
        return "trivially_reducible", None
    stacked = np.vstack([m - np.eye(3) for m in mats])
    _, sing, vh = np.linalg.svd(stacked)
    if sing[-1] <= tol * max(1.0, sing[0]):
        axis = vh[-1]
        for x in axis:
            if abs(x) > 1e-12:
                axis = axis if x > 0 else -axis
                break
        return "reducible", axis
    return "irreducible", None


def classify(f, base: complex | None = None, tol: float = AXIS_TOL) -> MonodromyClassification:
    """Monodromy type of the metric defined by ``f``."""
    metric = f if isinstance(f, ConicalMetric) else ConicalMetric(f)
    base, loops = generator_loops(metric, base=base)
    elements = []
    for p, r, loop in loops:
        elem = continue_along(metric.f, loop)
        elements.append(MonodromyElement(p, r, elem, psu2_to_so3(elem)))
    kind, axis = classify_rotations([e.so3 for e in elements], tol=tol)
    return MonodromyClassification(kind, axis, elements)
