import numpy as np
import pytest

from hdg_ip.errors import CapabilityError, CoefficientError, DomainError, InvalidArgumentError
from hdg_ip.services import model
from hdg_ip.services.mesh import Region

ELL, HYP = Region.ELLIPTIC, Region.HYPERBOLIC


def _pts(*xy):
    return np.array(xy, dtype=float)


def _operator(problem, point, region, step=1e-4):
    """-div(kappa grad u) + div(beta u) + gamma u by central differences."""
    h = step
    p = np.asarray(point, dtype=float)

    def u(q):
        return problem.exact(q[None, :], region)[0]

    def flux(q):
        grad = np.array([(u(q + [h, 0]) - u(q - [h, 0])) / (2 * h), (u(q + [0, h]) - u(q - [0, h])) / (2 * h)])
        kappa = problem.kappa(q[None, :], region)[0]
        beta = problem.beta(q[None, :], region)[0]
        return -kappa @ grad + beta * u(q)

    div = (flux(p + [h, 0])[0] - flux(p - [h, 0])[0]) / (2 * h) + (
        flux(p + [0, h])[1] - flux(p - [0, h])[1]
    ) / (2 * h)
    return div + problem.gamma(p[None, :], region)[0] * u(p)


# ============================================================================
# Test A
# ============================================================================


def test_layer_solution_vanishes_on_boundary():
    problem = model.get_testcase("A", kappa_scalar=0.5)
    values = problem.exact(_pts([0.0, 0.3], [0.7, 0.0], [1.0, 0.4], [0.2, 1.0], [1.0, 1.0]), ELL)
    np.testing.assert_allclose(values, 0.0, atol=1e-13)


@pytest.mark.parametrize("kappa", [0.5, 0.05])
def test_layer_source_matches_operator(kappa):
    problem = model.get_testcase("A", kappa_scalar=kappa)
    point = [0.5, 0.5]
    f = problem.source(_pts(point), ELL)[0]
    assert _operator(problem, point, ELL) == pytest.approx(f, rel=1e-5)


def test_layer_gradient_matches_finite_difference():
    problem = model.get_testcase("A", kappa_scalar=0.5)
    p = _pts([0.3, 0.6])
    h = 1e-6
    grad = problem.exact_gradient(p, ELL)[0]
    dx = (problem.exact(p + [h, 0], ELL) - problem.exact(p - [h, 0], ELL))[0] / (2 * h)
    dy = (problem.exact(p + [0, h], ELL) - problem.exact(p - [0, h], ELL))[0] / (2 * h)
    np.testing.assert_allclose(grad, [dx, dy], rtol=1e-6)


def test_small_diffusion_is_finite():
    problem = model.get_testcase("A", kappa_scalar=1e-3)
    values = problem.exact(_pts([0.999, 0.999], [0.5, 0.5]), ELL)
    assert np.all(np.isfinite(values))
    assert values[1] == pytest.approx(0.25, rel=1e-10)


@pytest.mark.parametrize("kwargs", [{"kappa_scalar": 0.0}, {"kappa_scalar": 0.5, "beta": (0.0, 1.0)}])
def test_layer_arguments_validated(kwargs):
    with pytest.raises(InvalidArgumentError):
        model.get_testcase("A", **kwargs)


# ============================================================================
# Test B
# ============================================================================


def test_discontinuity_values():
    problem = model.get_testcase("B")
    values = problem.exact(_pts([0.0, 0.75], [0.5, 0.5], [0.2, 0.25]), HYP)
    np.testing.assert_allclose(values, [1.0, 0.0, 0.0])
    assert problem.mu_star(_pts([0.3, 0.3]), HYP)[0] == pytest.approx(1.0)


def test_discontinuity_is_hyperbolic_everywhere():
    problem = model.get_testcase("B")
    assert np.all(problem.region_of(_pts([0.1, 0.1], [0.9, 0.9])) == HYP)
    assert problem.check_coefficients(_pts([0.1, 0.1]), HYP) == pytest.approx(1.0)


# ============================================================================
# Test C
# ============================================================================


def test_rotation_exact_solution_branches():
    problem = model.get_testcase("C")
    assert problem.exact(_pts([0.0, 0.75]), ELL)[0] == pytest.approx(np.pi**2 / 4)
    assert problem.exact(_pts([0.0, -0.75]), HYP)[0] == pytest.approx(1.5 * np.pi**2)


def test_rotation_interface_jump_and_continuity():
    problem = model.get_testcase("C")
    right = _pts([0.75, 0.0])
    left = _pts([-0.75, 0.0])
    jump = problem.exact(right, HYP)[0] - problem.exact(right, ELL)[0]
    assert jump == pytest.approx(2 * np.pi**2)
    assert problem.exact(left, HYP)[0] == pytest.approx(problem.exact(left, ELL)[0], abs=1e-12)


@pytest.mark.parametrize("point,region", [([0.3, 0.6], ELL), ([-0.4, -0.7], HYP)])
def test_rotation_source_matches_operator(point, region):
    problem = model.get_testcase("C")
    f = problem.source(_pts(point), region)[0]
    assert _operator(problem, point, region) == pytest.approx(f, rel=1e-5)


def test_rotation_field_is_divergence_free_and_tangential():
    problem = model.get_testcase("C")
    p = _pts([0.5 * np.cos(4.0), 0.5 * np.sin(4.0)])
    beta = problem.beta(p, HYP)[0]
    assert beta @ p[0] == pytest.approx(0.0, abs=1e-14)
    assert problem.div_beta(p, HYP)[0] == 0.0


def test_rotation_undefined_at_origin():
    problem = model.get_testcase("C")
    with pytest.raises(DomainError):
        problem.beta(_pts([0.0, 0.0]), ELL)


def test_rotation_regions():
    problem = model.get_testcase("C")
    np.testing.assert_array_equal(problem.region_of(_pts([0.2, 0.8], [0.2, -0.8])), [ELL, HYP])
    assert problem.mesh_family == "holed"
    assert problem.quadrature_boost == 2


# ============================================================================
# Polynomial problems and validation
# ============================================================================


def test_polynomial_source_matches_operator():
    problem = model.testcase_polynomial(
        [[1.0, -1.0, 0.0], [2.0, 0.5, 0.0], [1.0, 0.0, 0.0]],
        kappa=[[2.0, 0.5], [0.5, 1.0]],
        beta=(1.0, -0.5),
        gamma=0.3,
    )
    point = [0.4, 0.7]
    f = problem.source(_pts(point), ELL)[0]
    assert _operator(problem, point, ELL) == pytest.approx(f, rel=1e-6)


def test_zero_diffusion_polynomial_is_hyperbolic():
    problem = model.testcase_polynomial([[1.0, 1.0]], kappa=0.0, beta=(1.0, 0.5))
    assert np.all(problem.region_of(_pts([0.5, 0.5])) == HYP)


def test_indefinite_kappa_rejected():
    problem = model.testcase_polynomial([[1.0]], kappa=[[1.0, 0.0], [0.0, -1.0]])
    with pytest.raises(CoefficientError):
        problem.check_coefficients(_pts([0.5, 0.5]), ELL)


def test_nonsymmetric_kappa_rejected():
    problem = model.testcase_polynomial([[1.0]], kappa=[[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(CoefficientError):
        problem.check_coefficients(_pts([0.5, 0.5]), ELL)


def test_diffusion_on_hyperbolic_element_rejected():
    problem = model.testcase_polynomial([[1.0]], kappa=1.0)
    with pytest.raises(CoefficientError):
        problem.check_coefficients(_pts([0.5, 0.5]), HYP)


def test_negative_reaction_rejected():
    problem = model.testcase_polynomial([[1.0]], kappa=1.0, gamma=-1.0)
    with pytest.raises(CoefficientError):
        problem.check_coefficients(_pts([0.5, 0.5]), ELL)


def test_unknown_testcase():
    with pytest.raises(InvalidArgumentError):
        model.get_testcase("D")


def test_missing_exact_solution():
    problem = model.ProblemSpec(
        name="data-only",
        kappa=lambda p, r: np.zeros((len(p), 2, 2)),
        beta=lambda p, r: np.ones((len(p), 2)),
        gamma=lambda p, r: np.ones(len(p)),
        source=lambda p, r: np.zeros(len(p)),
        dirichlet=lambda p, r: np.zeros(len(p)),
    )
    assert not problem.has_exact
    with pytest.raises(CapabilityError):
        problem.require_exact()
