"""Tests for the twisted polynomial/rational arithmetic layer."""

from __future__ import annotations

import numpy as np
import pytest

from coneig.algebra import (
    ExpPoly,
    PoleError,
    TwistedRational,
    from_json,
    poly_roots,
    to_json,
)
from coneig.catalog import sqrt_family

RNG_SEED = 20260825


def _random_ep(rng, alpha, n_terms=5, b_range=(-1, 2)):
    terms = {}
    for _ in range(n_terms):
        a = int(rng.integers(-3, 6))
        b = int(rng.integers(b_range[0], b_range[1] + 1))
        terms[(a, b)] = complex(rng.normal(), rng.normal())
    return ExpPoly(alpha, terms)


def _random_points(rng, n=6):
    # keep away from 0 and the cut
    r = rng.uniform(0.3, 2.5, n)
    th = rng.uniform(-2.9, 2.9, n)
    return r * np.exp(1j * th)


def test_ring_laws_random():
    rng = np.random.default_rng(RNG_SEED)
    alpha = 0.37
    for _ in range(25):
        p = _random_ep(rng, alpha)
        q = _random_ep(rng, alpha)
        r = _random_ep(rng, alpha)
        zs = _random_points(rng)
        lhs = ((p + q) * r).evaluate(zs)
        rhs = (p * r).evaluate(zs) + (q * r).evaluate(zs)
        assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12)
        lhs2 = (p * (q * r)).evaluate(zs)
        rhs2 = ((p * q) * r).evaluate(zs)
        assert np.allclose(lhs2, rhs2, rtol=1e-12, atol=1e-12)


def test_product_rule_exact_terms():
    rng = np.random.default_rng(RNG_SEED + 1)
    alpha = 1.5
    for _ in range(10):
        p = _random_ep(rng, alpha)
        q = _random_ep(rng, alpha)
        d1 = (p * q).derivative()
        d2 = p.derivative() * q + p * q.derivative()
        diff = d1 - d2
        assert diff.scale() <= 1e-13 * max(1.0, d1.scale())


def test_derivative_matches_finite_differences():
    rng = np.random.default_rng(RNG_SEED + 2)
    alpha = 0.7
    p = _random_ep(rng, alpha)
    f = TwistedRational(p, _random_ep(rng, alpha) + ExpPoly.constant(alpha, 3.0))
    df = f.derivative()
    h = 1e-6
    for z in _random_points(rng, 5):
        fd = (f.evaluate(z + h) - f.evaluate(z - h)) / (2 * h)
        assert abs(fd - df.evaluate(z)) < 1e-6 * (1 + abs(df.evaluate(z)))


def test_sqrt_family_derivative_closed_form():
    # f = sqrt(z)(z+1-b)/(z+1) has f' = (z^2+(b+2)z+(1-b)) / (2 sqrt(z) (z+1)^2)
    b = 4.0
    f = sqrt_family(b)
    df = f.derivative()
    alpha = 0.5
    num = ExpPoly(alpha, {(2, 0): 1.0, (1, 0): b + 2.0, (0, 0): 1.0 - b})
    den = ExpPoly(alpha, {(0, 1): 2.0}) * ExpPoly(alpha, {(2, 0): 1.0, (1, 0): 2.0, (0, 0): 1.0})
    expected = TwistedRational(num, den)
    rng = np.random.default_rng(RNG_SEED + 3)
    zs = _random_points(rng)
    assert np.allclose(df.evaluate(zs), expected.evaluate(zs), rtol=1e-12, atol=1e-12)


def test_branch_shift_is_continuation():
    rng = np.random.default_rng(RNG_SEED + 4)
    p = _random_ep(rng, 0.41)
    zs = _random_points(rng)
    for n in (-2, -1, 1, 3):
        direct = p.evaluate(zs, branch=n)
        shifted = p.branch_shift(n).evaluate(zs, branch=0)
        assert np.allclose(direct, shifted, rtol=1e-12, atol=1e-12)


def test_twist_power_derivative():
    # d/dz w = alpha w / z
    alpha = 0.8
    w = ExpPoly.monomial(alpha, a=0, b=1)
    dw = w.derivative()
    assert dw.terms == {(-1, 1): pytest.approx(alpha)}


def test_monomial_gcd_normal_form():
    alpha = 0.5
    num = ExpPoly(alpha, {(3, 2): 2.0, (5, 2): -1.0})
    den = ExpPoly(alpha, {(2, 1): 1.0, (4, 1): 4.0})
    f = TwistedRational(num, den)
    assert min(a for (a, _) in f.num.terms) + min(a for (a, _) in f.den.terms) >= 0
    assert min(b for (_, b) in list(f.num.terms) + list(f.den.terms)) == 0
    # the function is unchanged
    g = TwistedRational(num, den, normalize=False)
    z = 1.3 + 0.4j
    assert abs(f.evaluate(z) - g.evaluate(z)) < 1e-14


def test_scale_z_substitution():
    rng = np.random.default_rng(RNG_SEED + 5)
    f = sqrt_family(2.5)
    lam = 0.73
    g = f.scale_z(lam)
    zs = _random_points(rng)
    assert np.allclose(g.evaluate(zs), f.evaluate(lam * zs), rtol=1e-12, atol=1e-12)


def test_poly_roots_with_multiplicity():
    alpha = 0.0
    factors = [(2.0 + 0j, 2), (-1.0 + 0j, 1), (1.0 + 2.0j, 1)]
    p = ExpPoly.constant(alpha, 1.0)
    for root, mult in factors:
        lin = ExpPoly(alpha, {(1, 0): 1.0, (0, 0): -root})
        for _ in range(mult):
            p = p * lin
    found = dict(poly_roots(p))
    assert len(found) == 3
    for root, mult in factors:
        match = min(found, key=lambda r: abs(r - root))
        assert abs(match - root) < 1e-6
        assert found[match] == mult


def test_poly_roots_includes_origin_monomial():
    p = ExpPoly(0.0, {(2, 0): 1.0, (3, 0): -0.5})
    found = dict(poly_roots(p))
    assert found[0j] == 2
    assert any(abs(r - 2.0) < 1e-10 for r in found)


def test_poly_roots_rejects_twisted_input():
    p = ExpPoly(0.5, {(1, 1): 1.0})
    with pytest.raises(ValueError):
        poly_roots(p)


def test_json_round_trip_exact():
    f = sqrt_family(3.7)
    data = to_json(f)
    g = from_json(data)
    assert to_json(g) == data
    assert g.num.terms == f.num.terms
    assert g.den.terms == f.den.terms
    assert g.alpha == f.alpha


def test_scalar_pole_raises():
    f = sqrt_family(1.0)
    with pytest.raises(PoleError):
        f.evaluate(-1.0 + 0j)


def test_array_evaluation_matches_scalars():
    rng = np.random.default_rng(RNG_SEED + 6)
    f = sqrt_family(2.0)
    zs = _random_points(rng, 8)
    arr = f.evaluate(zs, branch=1)
    for z, v in zip(zs, arr):
        assert abs(f.evaluate(complex(z), branch=1) - v) < 1e-13 * (1 + abs(v))


def test_simplify_roots_cancels_common_factor():
    alpha = 0.5
    lin = ExpPoly(alpha, {(1, 0): 1.0, (0, 0): -1.3})
    f = sqrt_family(2.0)
    g = TwistedRational(f.num * lin, f.den * lin, normalize=False).simplify_roots()
    z = 0.9 + 0.2j
    assert abs(g.evaluate(z) - f.evaluate(z)) < 1e-10
    # degree actually dropped
    assert max(a for (a, _) in g.num.terms) == max(a for (a, _) in f.num.terms)


def test_incompatible_twists_rejected():
    p = ExpPoly(0.5, {(0, 1): 1.0})
    q = ExpPoly(0.7, {(0, 1): 1.0})
    with pytest.raises(ValueError):
        _ = p + q
    # but a plain polynomial adopts the other twist
    r = ExpPoly(0.7, {(2, 0): 1.0})
    s = p + r
    assert s.alpha == 0.5
