"""Tests for the isotropic-curve construction of maps with extra eigenfunctions."""

from __future__ import annotations

import numpy as np
import pytest

from coneig.algebra import ExpPoly, poly_roots
from coneig.catalog import rotsym_family
from coneig.twistor import (
    BilinearSpace,
    DirectrixCurve,
    IsotropicPlane,
    PlaneIntersectsError,
    default_plane,
    directrix_family,
    isotropy_verify,
    limiting_map,
    run_algorithm,
    solve_coefficients,
    special_basis,
)

RNG_SEED = 771244

# off the real axis, off |z| = 1, on both sides of the unit circle
SAMPLES = (1.21 + 0.37j, 0.83 - 0.64j, 1.49 + 0.11j, 0.67 + 0.92j)


def _random_params_m2(rng):
    k = int(rng.integers(1, 6))
    alpha = float(rng.uniform(0.05, k - 0.05))
    while abs(alpha - round(alpha)) < 0.02:
        alpha = float(rng.uniform(0.05, k - 0.05))
    return k, alpha


def test_m2_coefficients_closed_form():
    # the m = 2 isotropy system is two unknowns against three pairings;
    # eliminating by hand gives
    #   a_alpha = -k^2 / (2 alpha (2k - alpha))
    #   a0      = (k - alpha)^2 / (2 alpha (2k - alpha))
    rng = np.random.default_rng(RNG_SEED)
    for _ in range(10):
        k, alpha = _random_params_m2(rng)
        curve = solve_coefficients(directrix_family(2, k, alpha))
        denom = 2.0 * alpha * (2 * k - alpha)
        assert abs(curve.coefficients["a_alpha"] - (-k * k / denom)) < 1e-12
        assert abs(curve.coefficients["a0"] - (k - alpha) ** 2 / denom) < 1e-12
        ok, worst = isotropy_verify(curve)
        assert ok, f"(k,alpha)=({k},{alpha}): worst pairing coefficient {worst:.3e}"


def test_isotropy_detects_perturbation():
    curve = solve_coefficients(directrix_family(2, 2, 1.5))
    bad = dict(curve.coefficients)
    bad["a0"] += 1e-6
    ok, worst = isotropy_verify(DirectrixCurve(2, 2, 1.5, bad))
    assert not ok
    assert worst > 1e-8


def test_isotropy_higher_m():
    # the verification threshold is absolute, and the pairing coefficients
    # grow like powers of k, so large (m, k) pairs drift out of reach of the
    # fixed cutoff; these stay well inside it
    for m, k, alpha in ((3, 4, 0.7), (3, 3, 1.3), (4, 4, 0.5), (4, 5, 1.5)):
        curve = solve_coefficients(directrix_family(m, k, alpha))
        ok, worst = isotropy_verify(curve)
        assert ok, f"(m,k,alpha)=({m},{k},{alpha}): worst {worst:.3e}"


def test_family_parameter_validation():
    with pytest.raises(ValueError):
        directrix_family(1, 2, 0.5)
    with pytest.raises(ValueError):
        directrix_family(2, 0, 0.5)
    with pytest.raises(ValueError):
        directrix_family(3, 1, 0.5)
    with pytest.raises(ValueError):
        directrix_family(2, 2, 2.5)
    with pytest.raises(ValueError):
        directrix_family(2, 2, -0.3)
    with pytest.raises(ValueError):
        directrix_family(2, 2, 1.0)


def test_branch_rotation_only_in_twist_pair():
    # going once around 0 multiplies the last basis pair by e^{-+2 pi i alpha}
    # and leaves every polynomial component alone
    curve = solve_coefficients(directrix_family(3, 4, 0.7))
    xi = curve.xi()
    tw = np.exp(2j * np.pi * curve.alpha)
    dim = curve.space.dim
    for z in SAMPLES[:2]:
        v0 = xi.evaluate(z, 0)
        v1 = xi.evaluate(z, 1)
        for i in range(dim - 2):
            assert abs(v1[i] - v0[i]) <= 1e-12 * (1 + abs(v0[i]))
        assert abs(v1[dim - 2] - v0[dim - 2] / tw) <= 1e-12 * (1 + abs(v0[dim - 2]))
        assert abs(v1[dim - 1] - v0[dim - 1] * tw) <= 1e-12 * (1 + abs(v0[dim - 1]))


def test_space_gram_bookkeeping():
    for m in (2, 3, 4):
        space = BilinearSpace(m)
        g = space.pairing_matrix()
        r = space.real_to_label()
        # the real basis is orthonormal for the bilinear form
        assert np.max(np.abs(r @ g @ r.T - np.eye(space.dim))) < 1e-14
        for row in r:
            assert np.max(np.abs(space.label_conj(row) - row)) < 1e-14
        vec = np.arange(space.dim) + 0.7j
        assert np.max(np.abs(space.label_conj(space.label_conj(vec)) - vec)) < 1e-14


def test_pair_is_symmetric():
    curve = solve_coefficients(directrix_family(2, 3, 2.5))
    psis = curve.psis()
    ab = psis[0].pair(psis[1])
    ba = psis[1].pair(psis[0])
    for z in SAMPLES:
        va = complex(ab.evaluate(z, 0))
        vb = complex(ba.evaluate(z, 0))
        assert abs(va - vb) <= 1e-12 * (1 + abs(va))


def _vmag(vf, z):
    return max(abs(complex(c.evaluate(z, 0))) for c in vf.comps)


def test_special_basis_structure():
    for m, k, alpha in ((2, 2, 1.5), (3, 4, 0.7)):
        curve = solve_coefficients(directrix_family(m, k, alpha))
        plane = default_plane(curve.space)
        sb = special_basis(curve.psis(), plane)
        crows = plane.conj_rows()

        # the new spanning set still spans an isotropic plane
        for i in range(m):
            for j in range(i, m):
                tr = sb.F[i].pair(sb.F[j])
                for z in SAMPLES:
                    scale = _vmag(sb.F[i], z) * _vmag(sb.F[j], z)
                    assert abs(complex(tr.evaluate(z, 0))) <= 1e-8 * (1 + scale)

        # coordinates along the conjugate plane follow the identity pattern
        for j in range(m - 1):
            for t in range(m - 1):
                tr = sb.F[j].pair_const(plane.rows[t])
                want = 1.0 if j == t else 0.0
                for z in SAMPLES:
                    assert abs(complex(tr.evaluate(z, 0)) - want) < 1e-8
        for t in range(m - 1):
            tr = sb.F[m - 1].pair_const(plane.rows[t])
            for z in SAMPLES:
                assert abs(complex(tr.evaluate(z, 0))) <= 1e-8 * (1 + _vmag(sb.F[m - 1], z))

        # G_j and w live in the complement of the plane plus its conjugate
        for vf in list(sb.G_num) + [sb.w]:
            for row in list(plane.rows) + list(crows):
                tr = vf.pair_const(row)
                for z in SAMPLES:
                    assert abs(complex(tr.evaluate(z, 0))) <= 1e-7 * (1 + _vmag(vf, z))

        # w is isotropic, componentwise in the chart basis too
        ww = sb.w.pair(sb.w)
        comps = [sb.w.pair_const(plane.v_basis[i]) for i in range(3)]
        for z in SAMPLES:
            wmag = max(abs(complex(c.evaluate(z, 0))) for c in comps)
            assert abs(complex(ww.evaluate(z, 0))) <= 1e-8 * (1 + wmag**2)
            s = sum(complex(c.evaluate(z, 0)) ** 2 for c in comps)
            assert abs(s) <= 1e-8 * (1 + wmag**2)


def test_limiting_map_closed_form_m2():
    # the default chart lands the m = 2 output on
    #   c z^(k-alpha) (z^k + r1) / (z^k + r2)
    # with r1 = (alpha-k)/(sqrt2 alpha), r2 = (k-alpha)/(sqrt2 (2k-alpha))
    rng = np.random.default_rng(RNG_SEED + 1)
    params = [(2, 1.5), (2, 0.5), (3, 2.5)]
    for _ in range(3):
        params.append(_random_params_m2(rng))
    for k, alpha in params:
        curve = solve_coefficients(directrix_family(2, k, alpha))
        sb = special_basis(curve.psis(), default_plane(curve.space))
        f = limiting_map(sb)
        r1 = (alpha - k) / (np.sqrt(2.0) * alpha)
        r2 = (k - alpha) / (np.sqrt(2.0) * (2 * k - alpha))
        zs = 1.3 * np.exp(1j * np.linspace(-2.8, 2.8, 9))
        vals = np.array([complex(f.evaluate(z, 0)) for z in zs])
        ref = zs ** (k - alpha) * (zs**k + r1) / (zs**k + r2)
        ratio = vals / ref
        spread = np.max(np.abs(ratio - ratio[0]))
        assert spread < 1e-10 * abs(ratio[0]), f"(k,alpha)=({k},{alpha}): spread {spread:.3e}"


def test_limiting_map_rescales_to_symmetric_family():
    # after z -> lam z with lam^k = (k-alpha)/(sqrt2 (2k-alpha)) the output
    # is a constant multiple of the k-fold symmetric map with beta = k-alpha
    k, alpha = 2, 0.5
    curve = solve_coefficients(directrix_family(2, k, alpha))
    sb = special_basis(curve.psis(), default_plane(curve.space))
    f = limiting_map(sb)
    lam = ((k - alpha) / (np.sqrt(2.0) * (2 * k - alpha))) ** (1.0 / k)
    ref = rotsym_family(k - alpha, k)
    zs = 1.2 * np.exp(1j * np.linspace(-2.9, 2.9, 20))
    mine = np.array([complex(f.evaluate(lam * z, 0)) for z in zs])
    target = np.array([complex(ref.evaluate(z, 0)) for z in zs])
    c = mine[0] / target[0]
    assert np.max(np.abs(mine - c * target)) <= 1e-8 * np.max(np.abs(mine))


def test_pipeline_m2_verifies():
    res = run_algorithm(2, 2, 1.5)
    assert res.diagnostics["pass"]
    assert len(res.eigenfunctions) == 1
    entry = res.diagnostics["candidates"][0]
    assert entry["single_valued"]
    assert max(entry["residuals"].values()) <= 1e-4
    assert min(entry["remainders"].values()) >= 0.1
    assert entry["bounded"]


def test_pipeline_m3_verifies():
    res = run_algorithm(3, 4, 0.7)
    assert res.diagnostics["pass"]
    # two complex candidates, so four verified real eigenfunctions
    assert len(res.eigenfunctions) == 2
    for entry in res.diagnostics["candidates"]:
        assert entry["single_valued"]
        assert max(entry["residuals"].values()) <= 1e-4
        assert min(entry["remainders"].values()) >= 0.1
        assert entry["bounded"]


def test_candidates_finite_where_components_blow_up():
    # the chart components of G_1 have simple poles at the roots of the
    # elimination pivot; the assembled candidate must stay finite there
    # because the polar direction pairs to zero against the sphere map
    res = run_algorithm(2, 2, 1.5)
    sb = res.special
    den = sb.dens[0]
    _, _, dc = den.num.poly_coeffs()
    roots = [complex(r) for r, _ in poly_roots(ExpPoly.from_coeffs(0.0, dc))]
    inside = [r for r in roots if 0.3 < abs(r) < 3.0 and abs(np.angle(r)) < 3.0]
    assert inside, "expected at least one pivot root in the annulus"
    cand = res.eigenfunctions[0]
    v = sb.plane.v_basis
    g3 = sb.G_num[0].pair_const(v[2])
    for r in inside:
        for eps in (1e-4, 1e-5, 1e-6):
            assert abs(cand.evaluate(r + eps, 0)) < 100.0
        bare = abs(complex(g3.evaluate(r + 1e-6, 0)) / complex(den.evaluate(r + 1e-6, 0)))
        assert bare > 1e3


def test_plane_meeting_curve_limit_rejected():
    # a plane containing the 0-limit of the curve span cannot be eliminated
    curve = solve_coefficients(directrix_family(2, 2, 1.5))
    space = curve.space
    rows = np.zeros((1, space.dim), dtype=complex)
    rows[0, 2] = 1.0
    r = space.real_to_label()
    plane = IsotropicPlane(space, rows, [r[0], r[3], r[4]], name="limit-hugging")
    with pytest.raises(PlaneIntersectsError):
        special_basis(curve.psis(), plane)


def test_plane_validation():
    space = BilinearSpace(2)
    r = space.real_to_label()
    good_row = (r[0] + 1j * r[2]) / np.sqrt(2.0)
    with pytest.raises(ValueError):
        IsotropicPlane(space, [r[0]], [r[4], -r[3], -r[1]])
    bad = (r[3] + 1j * r[4]) / np.sqrt(2.0)
    with pytest.raises(ValueError):
        IsotropicPlane(space, [bad], [r[0], r[1], r[2]])
    with pytest.raises(ValueError):
        IsotropicPlane(space, [good_row], [r[0], r[3], r[4]])


def test_random_plane_strategy():
    res = run_algorithm(2, 1, 0.5, Lprime_strategy="random", seed=20240817)
    assert res.diagnostics["pass"]
    assert res.diagnostics["plane"].startswith("random")


def test_unknown_strategy_rejected():
    with pytest.raises(ValueError):
        run_algorithm(2, 2, 1.5, Lprime_strategy="clever")
