import math

import numpy as np
import pytest
from pydantic import ValidationError

from conftest import QUADRATIC, build_space
from hdg_ip.errors import ConfigurationError, DegenerateFaceError, InvalidArgumentError, RegimeError
from hdg_ip.services import model
from hdg_ip.services.mesh import InterfaceTag, Region, generate_holed_square, generate_structured
from hdg_ip.services.stabilization import (
    PenaltyCalculator,
    StabilizationConfig,
    advective_penalty,
    amp_add,
    amp_sg,
    amplification_table,
    bernoulli,
    diffusive_penalty,
    local_peclet,
    total_penalty,
    trace_weights,
)

# ============================================================================
# Bernoulli function and amplifications
# ============================================================================


def test_bernoulli_reference_values():
    assert bernoulli(0.0) == 1.0
    assert bernoulli(1.0) == pytest.approx(0.5819767068693265, rel=1e-12)
    assert amp_sg(2.0) == pytest.approx(2.3130352854993315, rel=1e-12)


@pytest.mark.parametrize("s", [1e-9, 1e-6, 1e-5, 3e-4, 0.7, 12.0, 400.0])
def test_bernoulli_reflection_identity(s):
    assert bernoulli(-s) - bernoulli(s) == pytest.approx(s, rel=1e-10, abs=1e-15)


def test_bernoulli_continuous_across_series_break():
    s = np.array([0.99e-5, 1.01e-5])
    exact = s / np.expm1(s)
    np.testing.assert_allclose(bernoulli(s), exact, rtol=1e-14)


def test_bernoulli_matches_series_across_switch_band():
    s = np.logspace(-6.0, -4.0, 201)
    s = np.concatenate([-s[::-1], s])
    series = 1.0 - s / 2.0 + s**2 / 12.0 - s**4 / 720.0
    np.testing.assert_allclose(bernoulli(s), series, rtol=1e-13)


def test_bernoulli_extreme_arguments():
    assert bernoulli(800.0) == pytest.approx(0.0, abs=1e-300)
    assert bernoulli(-800.0) == pytest.approx(800.0, rel=1e-14)


S_GRID = np.linspace(-20.0, 20.0, 401)


@pytest.mark.parametrize("amp", [amp_add, amp_sg])
def test_amplification_is_even_and_at_least_one(amp):
    np.testing.assert_allclose(amp(S_GRID), amp(-S_GRID))
    assert np.all(amp(S_GRID) >= 1.0)
    assert amp(0.0) == 1.0


@pytest.mark.parametrize("amp", [amp_add, amp_sg])
def test_amplification_tends_to_upwind(amp):
    s = 1e4
    assert abs(amp(s) / s - 1.0) < 1e-3


@pytest.mark.parametrize("theta", [0.5, 1.0, 1.5])
def test_additive_bound_for_theta_above_half(theta):
    assert np.all(amp_add(theta * S_GRID) >= 1.0 + np.abs(S_GRID) / 2 - 1e-14)


@pytest.mark.parametrize("theta", [1.0, 2.0])
def test_sg_bound_for_theta_at_least_one(theta):
    assert np.all(amp_sg(theta * S_GRID) >= 1.0 + np.abs(S_GRID) / 2 - 1e-12)


def test_sg_sandwiched_by_additive():
    s = S_GRID
    assert np.all(amp_add(s / 2) <= amp_sg(s) + 1e-12)
    assert np.all(amp_sg(s) <= amp_add(s) + 1e-12)


def test_amplification_table_shape():
    table = amplification_table()
    assert list(table.columns) == ["theta", "s", "add", "sg"]
    assert len(table) == 4 * 201
    row = table[(table.theta == 1.0) & np.isclose(table.s, 2.0)].iloc[0]
    assert row["add"] == pytest.approx(3.0)
    assert row["sg"] == pytest.approx(2.3130352854993315)


# ============================================================================
# Penalty formulas
# ============================================================================


def test_diffusive_penalty():
    assert diffusive_penalty(1.0, 0.125, 2.0, 3.0) == pytest.approx(48.0)


def test_anisotropic_normal_diffusivity():
    kappa = np.array([[4.0, 0.0], [0.0, 1.0]])
    n = np.array([1.0, 0.0])
    assert n @ kappa @ n == 4.0
    assert diffusive_penalty(n @ kappa @ n, 0.125, 2.0, 3.0) == pytest.approx(192.0)


def test_advective_penalty_and_peclet():
    assert advective_penalty(-2.0, 0.5) == pytest.approx(1.0)
    assert local_peclet(2.0, 4.0, 1.0) == pytest.approx(0.5)
    assert local_peclet(-2.0, 4.0, 1.0) == pytest.approx(-0.5)


def test_peclet_undefined_without_diffusion():
    with pytest.raises(RegimeError):
        local_peclet(1.0, 0.0, 1.0)


def test_total_penalty_additive():
    assert total_penalty(48.0, 2.0, 1.0, "add", Region.ELLIPTIC) == pytest.approx(50.0)


def test_total_penalty_sg_reduces_to_upwind():
    tau = total_penalty(1e-6, 2.0, 1.0, "sg", Region.ELLIPTIC)
    assert tau == pytest.approx(2.0, rel=1e-5)


def test_total_penalty_hyperbolic_ignores_diffusion():
    assert total_penalty(0.0, -3.0, 1.5, "sg", Region.HYPERBOLIC) == pytest.approx(4.5)


# ============================================================================
# Trace weights
# ============================================================================


def test_equal_penalties_average():
    weights = trace_weights(1.0, 1.0)
    assert weights.omega == (0.5, 0.5)
    assert weights.alpha == 0.5
    assert weights.eta == 0.5


def test_one_sided_penalty():
    weights = trace_weights(2.0, 0.0)
    assert weights.omega == (1.0, 0.0)
    assert weights.eta == 0.0


def test_upwind_weights_with_advection():
    # beta.n_1 = 1, tau_i = |beta.n|: the trace is the upwind value u_1
    weights = trace_weights(1.0, 1.0, beta_n=1.0)
    assert weights.omega == (1.0, 0.0)


@pytest.mark.parametrize("tau1,tau2,beta_n", [(3.0, 1.0, 0.5), (2.0, 5.0, -1.5), (0.0, 4.0, 0.0)])
def test_trace_weights_with_normal_velocity(tau1, tau2, beta_n):
    weights = trace_weights(tau1, tau2, beta_n=beta_n)
    total = tau1 + tau2
    assert weights.omega == pytest.approx(((tau1 + beta_n) / total, (tau2 - beta_n) / total))
    assert sum(weights.omega) == pytest.approx(1.0)
    assert weights.alpha == pytest.approx(1.0 / total)


def test_trace_weights_normal_velocity_is_keyword_only():
    with pytest.raises(TypeError):
        trace_weights(1.0, 1.0, 1.0)


def test_trace_weights_errors():
    with pytest.raises(DegenerateFaceError):
        trace_weights(0.0, 0.0)
    with pytest.raises(InvalidArgumentError):
        trace_weights(-1.0, 1.0)


# ============================================================================
# Configuration
# ============================================================================


@pytest.mark.parametrize("kwargs", [{"epsilon": 2}, {"theta": 0.5}, {"theta_hyp": float("inf")}, {"alpha0": 0.0}])
def test_config_validation(kwargs):
    with pytest.raises(ValidationError):
        StabilizationConfig(**kwargs)


def test_config_labels_and_overrides():
    config = StabilizationConfig.from_labels("iip", "add", theta=1.0, theta_hyp=3.0)
    assert config.epsilon == 0
    assert config.scheme == "iip"
    assert config.theta_for(Region.ELLIPTIC) == 1.0
    assert config.theta_for(Region.HYPERBOLIC) == 3.0


def test_unknown_scheme_label():
    with pytest.raises(InvalidArgumentError):
        StabilizationConfig.from_labels("dg")


def test_alpha0_default_and_limit():
    assert StabilizationConfig().resolve_alpha0(4) == 5.0
    assert StabilizationConfig().resolve_alpha0(3) == 4.0
    with pytest.raises(ConfigurationError) as info:
        StabilizationConfig(epsilon=1, alpha0=3.0).resolve_alpha0(4)
    assert info.value.field == "alpha0"
    # no limit for H-NIP
    assert StabilizationConfig(epsilon=-1, alpha0=0.1).resolve_alpha0(4) == 0.1


# ============================================================================
# Penalties on a discrete space
# ============================================================================


def test_side_penalties_on_layer_problem():
    problem = model.get_testcase("A", kappa_scalar=0.5)
    space = build_space(generate_structured(4, 4), problem, 1)
    penalties = PenaltyCalculator(space, problem, StabilizationConfig(elliptic_scheme="add"))
    side = penalties.side(0, 0)  # bottom face, normal (0, -1)
    np.testing.assert_allclose(side.beta_n, -1.0)
    np.testing.assert_allclose(side.kappa_n, 0.5)
    tau_k = 5.0 * space.flux_trace_constant_sq(0) * 0.5 / space.mesh.diameters[0]
    np.testing.assert_allclose(penalties.tau_kappa(0, 0), tau_k)
    np.testing.assert_allclose(penalties.tau_total(0, 0), tau_k + 1.0)
    np.testing.assert_allclose(penalties.peclet(0, 0), -1.0 / tau_k)
    np.testing.assert_allclose(penalties.tau_beta(0, 0), 1.0)
    assert penalties.check() > 0.0


def test_hyperbolic_penalty_is_upwind():
    problem = model.get_testcase("B")
    space = build_space(generate_structured(2, 2), problem, 1)
    penalties = PenaltyCalculator(space, problem, StabilizationConfig(theta=2.0))
    side = penalties.side(0, 1)  # right face, normal (1, 0)
    np.testing.assert_allclose(side.tau, 4.0)
    np.testing.assert_allclose(side.tau_kappa, 0.0)
    np.testing.assert_allclose(side.margin, 5.0)
    # tau_0 = min (theta |b.n| + b.n / 2) = (2 - 1/2) * 1
    assert penalties.check() == pytest.approx(1.5)


def test_layer_problem_margin_is_half_the_inflow_speed():
    problem = model.get_testcase("A", kappa_scalar=0.5)
    space = build_space(generate_structured(4, 4), problem, 1)
    penalties = PenaltyCalculator(space, problem, StabilizationConfig(elliptic_scheme="add"))
    # alpha0 = 5, normal-derivative constant 1 for Q1, h = 1/4
    np.testing.assert_allclose(penalties.tau_kappa(0, 0), 10.0)
    # additive, theta = 1: |b.n| + b.n / 2, smallest on the b.n = -1 faces
    assert penalties.check() == pytest.approx(0.5)


def test_pure_diffusion_has_no_advective_margin():
    problem = model.testcase_polynomial(QUADRATIC, kappa=1.0, beta=(0.0, 0.0), gamma=1.0)
    space = build_space(generate_structured(2, 2, shape="tri"), problem, 1)
    assert PenaltyCalculator(space, problem, StabilizationConfig()).check() == math.inf


def test_zero_margin_is_rejected():
    problem = model.get_testcase("B")
    space = build_space(generate_structured(2, 2), problem, 1)
    # theta = 1/2 bypasses validation: inflow sides have margin exactly 0
    config = StabilizationConfig.model_construct(theta=0.5)
    with pytest.raises(ConfigurationError, match="not positive") as info:
        PenaltyCalculator(space, problem, config).check()
    assert info.value.field == "theta"
    assert info.value.face >= 0


def test_negative_margin_names_the_face():
    problem = model.get_testcase("B")
    space = build_space(generate_structured(2, 2), problem, 1)
    config = StabilizationConfig.model_construct(theta=0.4)
    with pytest.raises(ConfigurationError, match="negative") as info:
        PenaltyCalculator(space, problem, config).check()
    assert info.value.face >= 0


def _side_of(mesh, e, f):
    return int(np.flatnonzero(mesh.element_faces[e, : mesh.nverts[e]] == f)[0])


def test_degenerate_outflow_faces_use_the_upwind_value():
    problem = model.get_testcase("C")
    space = build_space(generate_holed_square(2), problem, 1)
    mesh = space.mesh
    penalties = PenaltyCalculator(space, problem, StabilizationConfig())
    minus = np.flatnonzero(mesh.interface_tags == InterfaceTag.I_MINUS)
    assert len(minus) > 0
    for f in minus:
        for e in mesh.face_elements[f]:
            side = penalties.side(int(e), _side_of(mesh, e, f))
            if mesh.regions[e] == Region.HYPERBOLIC:
                np.testing.assert_array_equal(side.tau, 0.0)
                np.testing.assert_array_equal(side.tau_kappa, 0.0)
                assert np.all(side.beta_n > 0)
                np.testing.assert_allclose(side.margin, side.beta_n / 2)
            else:
                assert np.all(side.tau > 0)
    assert penalties.check() > 0.0


def test_continuous_interface_keeps_the_hyperbolic_penalty():
    problem = model.get_testcase("C")
    space = build_space(generate_holed_square(2), problem, 1)
    mesh = space.mesh
    config = StabilizationConfig()
    penalties = PenaltyCalculator(space, problem, config)
    plus = np.flatnonzero(mesh.interface_tags == InterfaceTag.I_PLUS)
    assert len(plus) > 0
    for f in plus:
        e = next(int(e) for e in mesh.face_elements[f] if mesh.regions[e] == Region.HYPERBOLIC)
        side = penalties.side(e, _side_of(mesh, e, f))
        np.testing.assert_allclose(side.tau, config.theta * np.abs(side.beta_n))
