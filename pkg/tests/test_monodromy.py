"""Tests for rotation elements, loop continuation, and classification."""

from __future__ import annotations

import numpy as np
import pytest

from coneig.catalog import rotsym_family, sqrt_family, square_map
from coneig.monodromy import (
    MonodromyClassification,
    PSU2Element,
    branch_rotation,
    classify,
    classify_rotations,
    continue_along,
    psu2_to_so3,
)
from coneig.paths import based_loop, circle, winding_increment

RNG_SEED = 940221


def _random_psu2(rng) -> PSU2Element:
    v = rng.normal(size=4)
    v /= np.linalg.norm(v)
    return PSU2Element(complex(v[0], v[1]), complex(v[2], v[3]))


def test_pinned_matrices():
    assert np.allclose(psu2_to_so3(PSU2Element(1, 0)), np.eye(3), atol=1e-14)
    th = 0.37
    r = psu2_to_so3(PSU2Element(np.exp(1j * th), 0))
    expected = np.array(
        [
            [np.cos(2 * th), np.sin(2 * th), 0.0],
            [-np.sin(2 * th), np.cos(2 * th), 0.0],
            [0.0, 0.0, 1.0],
        ]
    )
    assert np.allclose(r, expected, atol=1e-14)
    assert np.allclose(psu2_to_so3(PSU2Element(0, 1)), np.diag([-1.0, 1.0, -1.0]), atol=1e-14)


def test_homomorphism_and_orthogonality():
    rng = np.random.default_rng(RNG_SEED)
    for _ in range(200):
        a = _random_psu2(rng)
        b = _random_psu2(rng)
        ra, rb = psu2_to_so3(a), psu2_to_so3(b)
        rab = psu2_to_so3(a.compose(b))
        assert np.allclose(rab, ra @ rb, atol=1e-9)
        assert np.allclose(ra @ ra.T, np.eye(3), atol=1e-9)
        assert np.linalg.det(ra) == pytest.approx(1.0, abs=1e-9)


def test_canonical_sign():
    a = PSU2Element(-1j, 0)
    b = PSU2Element(1j, 0)
    assert a.alpha == b.alpha and a.beta == b.beta
    c = PSU2Element(0, -1)
    assert c.beta == 1


def test_compose_inverse():
    rng = np.random.default_rng(RNG_SEED + 1)
    for _ in range(20):
        a = _random_psu2(rng)
        assert a.compose(a.inverse()).is_identity(tol=1e-12)


def test_winding_increment_conventions():
    # counterclockwise loop around the origin crosses the cut once, upward
    loop = circle(0j, 1.0, n=16)
    assert winding_increment([complex(z) for z in loop]) == 1
    loop_cw = loop[::-1]
    assert winding_increment([complex(z) for z in loop_cw]) == -1
    # a loop not enclosing the origin nets zero
    side = circle(2.0 + 0j, 0.5, n=16)
    assert winding_increment([complex(z) for z in side]) == 0


def test_branch_rotation_of_sqrt_map():
    f = sqrt_family(4.0)
    elem = branch_rotation(f, 1)
    # sqrt flips sign after one turn: the half-turn rotation about the axis
    assert elem.alpha == pytest.approx(1j, abs=1e-9)
    assert abs(elem.beta) < 1e-9
    assert np.allclose(psu2_to_so3(elem), np.diag([-1.0, -1.0, 1.0]), atol=1e-9)


def test_continue_along_loops():
    f = sqrt_family(4.0)
    base = 1 + 0.5j
    around_origin = based_loop(base, 0j, 0.1, n=64)
    elem = continue_along(f, around_origin)
    assert np.allclose(psu2_to_so3(elem), np.diag([-1.0, -1.0, 1.0]), atol=1e-9)
    # the integer cones at -3 +- 2 sqrt(3) do not move the germ; the second
    # one sits on the branch cut, so its loop exercises cut crossings
    for p in (-3.0 + 2.0 * np.sqrt(3.0), -3.0 - 2.0 * np.sqrt(3.0)):
        around_cone = based_loop(base, complex(p), 0.1, n=64)
        assert continue_along(f, around_cone).is_identity()
    # two turns around the origin restore the branch
    twice = np.concatenate([around_origin, around_origin[1:]])
    assert continue_along(f, twice).is_identity()


def test_fractional_branch_rotation_angle():
    beta = 0.75
    f = rotsym_family(beta, 2)
    r = psu2_to_so3(branch_rotation(f, 1))
    # rotation about the vertical axis by 2*pi*beta, up to orientation
    assert np.allclose(r @ np.array([0.0, 0.0, 1.0]), [0.0, 0.0, 1.0], atol=1e-9)
    assert r[0, 0] == pytest.approx(np.cos(2 * np.pi * beta), abs=1e-9)
    assert abs(r[0, 1]) == pytest.approx(abs(np.sin(2 * np.pi * beta)), abs=1e-9)


def test_classify_sqrt_family():
    out = classify(sqrt_family(4.0))
    assert isinstance(out, MonodromyClassification)
    assert out.kind == "reducible"
    assert np.allclose(out.axis, [0.0, 0.0, 1.0], atol=1e-9)
    # cones at 0 and -3 +- 2 sqrt(3) are all looped (infinity is also conical)
    assert len(out.elements) == 3
    non_trivial = [e for e in out.elements if not e.psu2.is_identity()]
    assert len(non_trivial) == 1
    assert non_trivial[0].around == 0


def test_classify_trivial_cases():
    assert classify(rotsym_family(1.0, 2)).kind == "trivially_reducible"
    assert classify(square_map()).kind == "trivially_reducible"


def test_classify_rotations_irreducible():
    def rot(axis, angle):
        axis = np.asarray(axis, dtype=float)
        axis /= np.linalg.norm(axis)
        k = np.array(
            [[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]]
        )
        return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)

    kind, axis = classify_rotations([rot([0, 0, 1], 0.7), rot([1, 0, 0], 1.1)])
    assert kind == "irreducible" and axis is None
    kind, axis = classify_rotations([rot([0, 0, 1], 0.7), rot([0, 0, 1], -2.0)])
    assert kind == "reducible"
    assert np.allclose(axis, [0, 0, 1], atol=1e-10)
    kind, _ = classify_rotations([np.eye(3), np.eye(3)])
    assert kind == "trivially_reducible"
