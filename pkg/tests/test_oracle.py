import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nullity_lab import ChartPoint, parse_energy
from nullity_lab.dsl import FieldSpec, evaluate
from nullity_lab.oracle import (
    Constraint,
    SamplerConfig,
    SamplingFailure,
    fd_bracket,
    fd_derivative,
    fd_partial,
    riemann_oracle,
    sample_points,
)

from .conftest import CURVED, EX1


def test_fd_derivative_polynomial():
    f = lambda z: z[0] ** 3 * z[1]  # noqa: E731
    est, err = fd_derivative(f, [0, 0, 1], np.array([1.2, -0.4]))
    assert est == pytest.approx(6 * 1.2, rel=1e-7)


@settings(max_examples=30, deadline=None)
@given(st.floats(-1.0, 1.0), st.floats(0.5, 2.0))
def test_fd_partial_of_exp(a, b):
    E = parse_energy("exp(x1*y1)", 1)
    r = fd_partial(E, ["x1", "y1"], np.array([a, b]))
    exact = (1 + a * b) * math.exp(a * b)
    assert r.value == pytest.approx(exact, rel=1e-7, abs=1e-9)


def test_riemann_oracle_energy_and_coefficient_forms_agree():
    E = parse_energy("y1^2 + (1 - x1^2/3)*x1^2*y2^2", 2)
    riem = riemann_oracle(E, ChartPoint((0.6, 0.0), (1.0, 1.0)))
    assert riem.shape == (2, 2, 2, 2)
    assert np.allclose(riem, -np.swapaxes(riem, 2, 3))
    riem2 = riemann_oracle([["1", "0"], ["0", "x1^2*(1 - x1^2/3)"]], ChartPoint((0.6, 0.0), (1.0, 1.0)))
    assert np.allclose(riem, riem2)


def test_riemann_oracle_flat_polar():
    # polar coordinates of the plane are flat
    riem = riemann_oracle([["1", "0"], ["0", "x1^2"]], ChartPoint((1.3, 0.2), (1.0, 0.0)))
    assert np.allclose(riem, 0, atol=1e-12)


def test_riemann_oracle_gaussian_curvature():
    # g = dx^2 + G(x) dy^2 has K = -(sqrt G)''/sqrt G; with sqrt G = cosh(x1), K = -1
    riem = riemann_oracle([["1", "0"], ["0", "((exp(x1)+exp(-x1))/2)^2"]], ChartPoint((0.4, 0.0), (1.0, 0.0)))
    G = math.cosh(0.4) ** 2
    # R(d1, d2) d2 = K (g22 d1 - g12 d2)  ->  Riem[0, 1, 0, 1] = K * g22
    assert riem[0, 1, 0, 1] == pytest.approx(-G, rel=1e-10)


def test_riemann_oracle_rejects_non_quadratic():
    with pytest.raises(ValueError):
        riemann_oracle(parse_energy(EX1, 4), ChartPoint((0, 0, 0, 1), (1, 1, 1, 1)))


def test_fd_bracket_of_coordinate_fields_on_flat_metric():
    E = parse_energy("y1^2+y2^2", 2)
    A = FieldSpec.parse("1, 0", 2)
    B = FieldSpec.parse("x2, 0", 2)
    raw = fd_bracket(E, A, B, np.array([0.1, 0.2, 1.0, 1.0]))
    assert np.allclose(raw, 0, atol=1e-9)
    raw = fd_bracket(E, FieldSpec.parse("0, 1", 2), B, np.array([0.1, 0.2, 1.0, 1.0]))
    assert np.allclose(raw, [1, 0, 0, 0], atol=1e-9)


@pytest.mark.parametrize("text,kind,var", [("y1 == 0", "==", None), ("x1*y2 != 0", "!=", None),
                                           ("y2^3+y3^3+5*y4^3 == 0; solve y4 = -y2", "==", "y4"),
                                           ("y1 > 1", ">", None)])
def test_constraint_parse(text, kind, var):
    c = Constraint.parse(text)
    assert c.kind == kind
    assert c.solve_for == var


def test_constraint_parse_errors():
    with pytest.raises(ValueError):
        Constraint.parse("y1 + 2")
    with pytest.raises(ValueError):
        Constraint.parse("y1 == 0; pick y1")


def test_sampler_deterministic_and_worker_streams():
    E = parse_energy(CURVED, 3)
    cfg = SamplerConfig(7, ((-1, 1),) * 3 + ((0.5, 2),) * 3)
    a = sample_points(E, cfg, 5)
    b = sample_points(E, cfg, 5)
    c = sample_points(E, cfg, 5, worker=1)
    assert a == b
    assert a != c


def test_sampler_equality_constraint_root_finding():
    E = parse_energy(EX1, 4)
    cons = (Constraint.parse("y2^3+y3^3+5*y4^3 == 0"),)
    cfg = SamplerConfig(3, ((-1, 1),) * 3 + ((0.5, 2),) * 4 + ((-2, -0.1),), cons)
    surf = parse_energy("y2^3+y3^3+5*y4^3", 4)
    for z in sample_points(E, cfg, 5):
        assert abs(evaluate(surf, z)) < 1e-10


def test_sampler_gives_up():
    E = parse_energy(CURVED, 3)
    cfg = SamplerConfig(1, ((-1, 1),) * 3 + ((0.5, 2),) * 3, (Constraint.parse("y1 > 5"),), max_rejects=50)
    with pytest.raises(SamplingFailure):
        sample_points(E, cfg, 1)


def test_sampler_box_size_checked():
    with pytest.raises(ValueError):
        sample_points(parse_energy(CURVED, 3), SamplerConfig(1, ((0, 1),) * 4), 1)
