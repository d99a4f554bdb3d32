"""Pinned component values at the canonical points of the worked examples."""

import math

import numpy as np
import pytest

from nullity_lab import ChartPoint, compute_bundle, parse_energy
from nullity_lab.catalog import EXAMPLES
from nullity_lab.nullity import classify_space, integrability_check, nullity_field_membership, nullity_space
from nullity_lab.oracle import fd_partial, riemann_oracle

from .conftest import EX1, EX1_POINT, EX1_SURFACE, EX2, EX2_POINT, EX3, EX3_POINT

C23 = 3 ** (-2 / 3)


@pytest.fixture(scope="module")
def b1():
    return compute_bundle(parse_energy(EX1, 4), EX1_POINT)


@pytest.fixture(scope="module")
def b1s():
    return compute_bundle(parse_energy(EX1, 4), EX1_SURFACE)


def test_example_one_fundamental_form(b1):
    # coefficient of dx1 ^ dy4 is Omega(d/dx1, d/dy4)
    assert b1.omega[0, 7] == pytest.approx(-C23, rel=1e-12)
    assert b1.omega[3, 4] == pytest.approx(-C23, rel=1e-12)


def test_example_one_metric(b1):
    assert b1.g[0, 0] == 0
    assert b1.g[0, 1] == pytest.approx(C23, rel=1e-12)
    fd = fd_partial(parse_energy(EX1, 4), ["y1", "y2"], EX1_POINT).value
    assert fd == pytest.approx(C23, rel=1e-7)


def test_example_one_spray(b1):
    assert b1.spray[1] == pytest.approx(0.75, rel=1e-12)
    assert b1.spray[2] == pytest.approx(0.75, rel=1e-12)
    assert abs(b1.spray[3]) < 1e-14 and abs(b1.spray[0]) < 1e-14


def test_example_one_connection(b1):
    assert b1.gamma[1, 1] == pytest.approx(0.75, rel=1e-12)
    assert b1.gamma[3, 1] == pytest.approx(-0.75, rel=1e-12)


def test_example_one_barthel_curvature(b1):
    assert b1.barthel_curv[1, 1, 2] == pytest.approx(9 / 16, rel=1e-12)


def test_example_two_hv_curvature_printed_sign():
    b = compute_bundle(parse_energy(EX2, 3), EX2_POINT)
    (table, _), = EXAMPLES[2].tables
    assert table.sign * b.curv_P[0, 0, 0, 1] == pytest.approx(3 / 64, rel=1e-12)


def test_example_three_v_curvature():
    b = compute_bundle(parse_energy(EX3, 4), EX3_POINT)
    assert b.curv_Q[2, 0, 0, 2] == pytest.approx(-0.5, rel=1e-12)


def test_example_three_angular_metric():
    b = compute_bundle(parse_energy(EX3, 4), EX3_POINT)
    ell = b.g @ b.y / math.sqrt(2 * b.E)
    assert np.allclose(b.hbar, b.g - np.outer(ell, ell), atol=1e-15)


def test_half_flat_angular_metric():
    b = compute_bundle(parse_energy("(y1^2+y2^2)/2", 2), ChartPoint((0, 0), (1, 0)))
    assert np.allclose(b.hbar, np.diag([0.0, 1.0]), atol=1e-15)


def test_example_one_nullity_at_canonical_points(b1, b1s):
    r = nullity_space(b1, "barthel")
    assert r.mu == 1 and np.allclose(np.abs(r.basis), [[1, 0, 0, 0]], atol=1e-12)
    assert nullity_space(b1s, "barthel").mu == 2
    assert nullity_space(b1s, "R").mu == 1
    assert nullity_field_membership(b1s, "R", [1, 0, 0, 0]) < 1e-9
    assert nullity_field_membership(b1s, "barthel", [0, 1, 0, 0]) > 1e-3
    assert nullity_field_membership(b1s, "P", b1s.y) < 1e-9


def test_example_one_not_riemannian(b1):
    assert abs(b1.cartan_C[1, 1, 1]) > 1e-3
    rep = classify_space(parse_energy(EX1, 4), [EX1_POINT])
    assert not rep["riemannian"].holds


def test_flat_nullity_integrable():
    E = parse_energy("y1^2+y2^2+y3^2", 3)
    pts = [ChartPoint((0, 0, 0), (1, 2, 3)), ChartPoint((0.1, 0, 0), (1, 1, 1))]
    with pytest.warns(UserWarning):
        rep = integrability_check(E, "R", pts)
    assert rep.mu == 3 and rep.integrable


def test_riemann_oracle_identity_and_surrogate_sphere():
    z = ChartPoint((0.3, 0.2), (1.0, 0.5))
    assert np.allclose(riemann_oracle([["1", "0"], ["0", "1"]], z), 0)
    a = [["1", "0"], ["0", "1-x1^2"]]
    riem = riemann_oracle(a, z)
    assert np.abs(riem).max() > 1e-2
    b = compute_bundle(parse_energy("y1^2+(1-x1^2)*y2^2", 2), z)
    assert np.allclose(b.curv_R, np.swapaxes(riem, 2, 3), rtol=1e-6, atol=1e-12)
    riem2 = riemann_oracle([["2", "0"], ["0", "2-2*x1^2"]], z)
    b2 = compute_bundle(parse_energy("2*(y1^2+(1-x1^2)*y2^2)", 2), z)
    assert np.allclose(riem2, riem, atol=1e-12)
    assert nullity_space(b2, "R").mu == nullity_space(b, "R").mu
