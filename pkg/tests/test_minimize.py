"""Level solvers against independent references and pinned regressions.

The three frozen radial levels below were produced by an independent
collocation solver for the radial boundary-value problem (scipy solve_bvp
on the substituted second-order form, tolerance 1e-10, adaptive-quadrature
evaluation of the quotient, angular measure included). Finite elements on
the n = 2000 graded grid reproduce them to a few parts in 1e6; the 5e-5
gate leaves room for either discretization moving slightly.
"""

import math

import numpy as np
import pytest

from henon_annulus import (
    ConfigurationError,
    DiscreteField,
    InstantonParams,
    NonConvergenceError,
    ProblemParams,
    build_axi_grid,
    build_radial_grid,
    halfspace_energies,
    instanton,
    solve_ground,
    solve_lambda,
    solve_radial,
    solve_sigma,
)

# (alpha, p) -> independently computed S_rad at N = 3
FROZEN_RADIAL_LEVELS = {
    (0.0, 4.0): 18.902091570050,
    (2.0, 4.0): 48.246245104353,
    (1.0, 3.0): 22.451298972775,
}

# same-grid regression pins (96 x 32 graded-polar); these detect any
# accidental change in solver or quadrature behavior, not truth
PINNED_S_ALPHA1_P4 = 14.051234106668938
PINNED_T_ALPHA1_P4 = 16.986141264495174


class TestRadial:
    def test_linear_case_quarter_pi_squared(self, radial_grid):
        params = ProblemParams(alpha=0.0, p=2.0, validation_mode=True)
        result = solve_radial(params, radial_grid)
        assert result.converged
        assert result.report.quotient == pytest.approx(math.pi**2 / 4.0, rel=1e-4)

    @pytest.mark.parametrize("alpha,p", sorted(FROZEN_RADIAL_LEVELS))
    def test_frozen_oracle_levels(self, radial_grid_fine, alpha, p):
        params = ProblemParams(alpha=alpha, p=p)
        result = solve_radial(params, radial_grid_fine)
        assert result.converged
        assert result.report.quotient == pytest.approx(
            FROZEN_RADIAL_LEVELS[(alpha, p)], rel=5e-5
        )
        assert result.report.residual < 1e-8
        assert result.report.level_tag == "S_rad"
        assert result.init_tag == "half-sine"

    def test_deterministic(self, radial_grid):
        params = ProblemParams(alpha=1.0, p=4.0)
        a = solve_radial(params, radial_grid).report.quotient
        b = solve_radial(params, radial_grid).report.quotient
        assert a == b

    def test_minimizer_nonnegative(self, radial_grid):
        result = solve_radial(ProblemParams(alpha=2.0, p=4.0), radial_grid)
        assert np.all(result.field.values >= 0.0)

    def test_rejects_axi_grid(self, axi_grid):
        with pytest.raises(ConfigurationError):
            solve_radial(ProblemParams(alpha=1.0, p=4.0), axi_grid)

    def test_rejects_dim_mismatch(self, radial_grid):
        params = ProblemParams(alpha=1.0, p=3.0, dim=4)
        with pytest.raises(ConfigurationError):
            solve_radial(params, radial_grid)


class TestGround:
    def test_pinned_level(self, axi_grid, params_alpha1_p4):
        result = solve_ground(params_alpha1_p4, axi_grid)
        assert result.converged
        assert result.report.quotient == pytest.approx(PINNED_S_ALPHA1_P4, rel=1e-9)
        assert result.report.level_tag == "S"

    def test_below_radial_level(self, axi_grid, params_alpha1_p4):
        # matching radial resolution: the axisymmetric minimum cannot
        # exceed the radial one, and at this alpha it is strictly lower
        radial = build_radial_grid(96, "graded")
        s_rad = solve_radial(params_alpha1_p4, radial).report.quotient
        s = solve_ground(params_alpha1_p4, axi_grid).report.quotient
        assert s < s_rad * (1.0 - 1e-3)

    def test_explicit_inits(self, axi_grid, params_alpha1_p4):
        u0 = instanton(InstantonParams(1e-3, 0), axi_grid)
        result = solve_ground(params_alpha1_p4, axi_grid, inits=[u0])
        assert result.converged
        assert result.init_tag == "init-0"

    def test_empty_inits_rejected(self, axi_grid, params_alpha1_p4):
        with pytest.raises(ConfigurationError):
            solve_ground(params_alpha1_p4, axi_grid, inits=[])

    def test_zero_init_does_not_converge(self, axi_grid, params_alpha1_p4):
        with pytest.raises(NonConvergenceError):
            solve_ground(
                params_alpha1_p4, axi_grid, inits=[DiscreteField.zeros(axi_grid)]
            )

    def test_rejects_radial_grid(self, radial_grid, params_alpha1_p4):
        with pytest.raises(ConfigurationError):
            solve_ground(params_alpha1_p4, radial_grid)


class TestSigma:
    def test_pinned_level_and_constraint(self, axi_grid, params_alpha1_p4):
        ctol = 1e-4
        result = solve_sigma(params_alpha1_p4, axi_grid, ctol=ctol)
        assert result.converged
        assert result.report.quotient == pytest.approx(PINNED_T_ALPHA1_P4, rel=1e-9)
        assert result.report.level_tag == "T"
        ep, em = halfspace_energies(result.field)
        assert abs(ep - em) <= ctol * (ep + em)
        assert result.constraint_defect == pytest.approx(ep - em, abs=1e-12)

    def test_dominates_ground_level(self, axi_grid, params_alpha1_p4):
        t = solve_sigma(params_alpha1_p4, axi_grid).report.quotient
        s = solve_ground(params_alpha1_p4, axi_grid).report.quotient
        assert t >= s * (1.0 - 1e-9)

    def test_rejects_radial_grid(self, radial_grid, params_alpha1_p4):
        with pytest.raises(ConfigurationError):
            solve_sigma(params_alpha1_p4, radial_grid)


class TestLambda:
    def test_interior_near_critical(self, axi_grid):
        # close to the critical exponent the inner bubble relaxes to a
        # local minimizer that keeps its energy in the inner half
        params = ProblemParams(alpha=1.0, p=5.5)
        result = solve_lambda(params, axi_grid)
        assert result.converged
        assert result.report.level_tag == "raw"
        ep, em = halfspace_energies(result.field)
        escaped_now = (em - ep) < 1e-3 * (ep + em)
        assert result.escaped == escaped_now
        assert not result.escaped
        assert em > ep

    def test_escape_flag_consistent(self, axi_grid, params_alpha1_p4):
        # far from critical the basin may not persist; whatever happens,
        # the flag must agree with the returned field's energy split
        result = solve_lambda(params_alpha1_p4, axi_grid)
        ep, em = halfspace_energies(result.field)
        assert result.escaped == ((em - ep) < 1e-3 * (ep + em))

    def test_rejects_radial_grid(self, radial_grid, params_alpha1_p4):
        with pytest.raises(ConfigurationError):
            solve_lambda(params_alpha1_p4, radial_grid)


class TestResultPayload:
    def test_json_dict_keys(self, radial_grid, params_alpha1_p4):
        result = solve_radial(params_alpha1_p4, radial_grid)
        d = result.to_json_dict()
        assert set(d) == {
            "params",
            "level",
            "level_tag",
            "converged",
            "constraint_defect",
            "iterations",
            "residual",
            "grid",
            "init_tag",
            "escaped",
        }
        assert d["params"] == {"dim": 3, "alpha": 1.0, "p": 4.0}
        assert d["grid"] == radial_grid.descriptor
