from math import factorial

import numpy as np
import pytest

from hdg_ip.errors import CapabilityError, InvalidArgumentError
from hdg_ip.services.quadrature import MAX_EXACTNESS, quadrature, reference_measure


def test_triangle_integrates_x_squared():
    rule = quadrature("tri", 2)
    assert rule.weights @ rule.points[:, 0] ** 2 == pytest.approx(1.0 / 12.0, abs=1e-14)


def test_quad_weights_sum_to_area():
    rule = quadrature("quad", 0)
    assert rule.weights.sum() == pytest.approx(4.0, abs=1e-14)


def test_segment_integrates_x_fourth():
    rule = quadrature("segment", 5)
    assert rule.weights @ rule.points[:, 0] ** 4 == pytest.approx(0.4, abs=1e-14)


@pytest.mark.parametrize("exactness", [1, 4, 9, 16])
def test_triangle_monomials_are_exact(exactness):
    rule = quadrature("tri", exactness)
    x, y = rule.points[:, 0], rule.points[:, 1]
    for a in range(exactness + 1):
        for b in range(exactness + 1 - a):
            expected = factorial(a) * factorial(b) / factorial(a + b + 2)
            assert rule.weights @ (x**a * y**b) == pytest.approx(expected, rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("shape", ["segment", "tri", "quad"])
def test_weights_positive_and_sum_to_measure(shape):
    rule = quadrature(shape, 12)
    assert np.all(rule.weights > 0)
    assert rule.weights.sum() == pytest.approx(reference_measure(shape), rel=1e-13)


def test_quad_tensor_monomial():
    rule = quadrature("quad", 8)
    x, y = rule.points[:, 0], rule.points[:, 1]
    # int x^4 y^2 over [-1, 1]^2 = (2/5)(2/3)
    assert rule.weights @ (x**4 * y**2) == pytest.approx(4.0 / 15.0, rel=1e-13)


def test_points_inside_reference_triangle():
    rule = quadrature("tri", 20)
    assert np.all(rule.points >= 0)
    assert np.all(rule.points.sum(axis=1) <= 1.0)


def test_rules_are_read_only():
    rule = quadrature("quad", 3)
    with pytest.raises(ValueError):
        rule.weights[0] = 1.0


def test_unknown_shape_rejected():
    with pytest.raises(InvalidArgumentError):
        quadrature("hex", 2)


def test_exactness_above_maximum_rejected():
    with pytest.raises(CapabilityError):
        quadrature("tri", MAX_EXACTNESS + 1)


def test_negative_exactness_rejected():
    with pytest.raises(InvalidArgumentError):
        quadrature("segment", -1)
