"""Energies, weighted norms, gradients: exactness and invariance checks."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from henon_annulus import (
    ConfigurationError,
    DegenerateFieldError,
    DiscreteField,
    build_axi_grid,
    build_radial_grid,
    dirichlet_energy,
    functional_gradient,
    halfspace_energies,
    normalize,
    rayleigh,
    residual_pde,
    weighted_pnorm_p,
)
from henon_annulus import functional as fn


def _bump_radial(grid):
    return DiscreteField.sampled(grid, lambda r: (r - 1.0) * (3.0 - r))


def _bump_axi(grid):
    return DiscreteField.sampled(
        grid, lambda r, t: (r - 1.0) * (3.0 - r) * (1.0 + 0.5 * np.cos(t))
    )


class TestDirichletEnergy:
    def test_quadratic_bump_converges(self):
        # u = (r-1)(3-r): E = 4 pi int (4-2r)^2 r^2 dr exactly
        want = 4.0 * math.pi * quad(lambda r: (4.0 - 2.0 * r) ** 2 * r**2, 1.0, 3.0)[0]
        errs = []
        for n in (100, 200, 400):
            grid = build_radial_grid(n, "uniform")
            errs.append(abs(dirichlet_energy(_bump_radial(grid)) - want) / want)
        assert errs[2] < errs[0]
        assert errs[2] < 1e-4

    def test_partition_exact(self, axi_grid):
        u = _bump_axi(axi_grid)
        e = dirichlet_energy(u)
        ep, em = halfspace_energies(u)
        assert ep + em == pytest.approx(e, rel=1e-14)

    def test_partition_exact_radial(self, radial_grid):
        u = _bump_radial(radial_grid)
        ep, em = halfspace_energies(u)
        assert ep + em == pytest.approx(dirichlet_energy(u), rel=1e-14)

    def test_radial_embeds_into_axi(self, radial_grid):
        # a theta-constant axisymmetric field must reproduce the radial
        # energy of the same profile: the two assembly paths agree
        axi = build_axi_grid(96, 24, "graded-polar")
        u_r = _bump_radial(radial_grid)
        u_a = DiscreteField.sampled(axi, lambda r, t: (r - 1.0) * (3.0 - r))
        ref = 4.0 * math.pi * quad(lambda r: (4.0 - 2.0 * r) ** 2 * r**2, 1.0, 3.0)[0]
        assert dirichlet_energy(u_r) == pytest.approx(ref, rel=1e-3)
        assert dirichlet_energy(u_a) == pytest.approx(ref, rel=1e-3)

    def test_zero_field(self, radial_grid):
        assert dirichlet_energy(DiscreteField.zeros(radial_grid)) == 0.0


class TestWeightedNorm:
    @pytest.mark.parametrize("alpha,p", [(0.0, 4.0), (2.0, 4.0), (1.5, 3.0)])
    def test_radial_second_order_to_quad(self, alpha, p):
        # the norm integrates the piecewise-linear interpolant exactly, so
        # the gap to the smooth profile closes at second order in h
        want = sum(
            quad(
                lambda r: abs(r - 2.0) ** alpha
                * ((r - 1.0) * (3.0 - r)) ** p
                * 4.0
                * math.pi
                * r**2,
                a,
                b,
                limit=200,
            )[0]
            for a, b in ((1.0, 2.0), (2.0, 3.0))
        )
        errs = []
        for n in (500, 1000, 2000):
            u = _bump_radial(build_radial_grid(n, "graded"))
            errs.append(abs(weighted_pnorm_p(u, alpha, p) - want) / want)
        order = math.log2(errs[-2] / errs[-1])
        assert errs[-1] < 1e-5
        assert 1.9 < order < 2.1

    @pytest.mark.parametrize("alpha,p", [(0.0, 4.0), (2.0, 4.0), (1.5, 3.0)])
    def test_axi_reduces_to_radial(self, alpha, p):
        # matching radial edges: a theta-constant field must give the same
        # weighted norm through either reduction, up to roundoff
        rad = build_radial_grid(128, "graded")
        axi = build_axi_grid(128, 24, "graded-polar")
        u_r = DiscreteField.sampled(rad, lambda r: (r - 1.0) * (3.0 - r))
        u_a = DiscreteField.sampled(axi, lambda r, t: (r - 1.0) * (3.0 - r))
        got_r = weighted_pnorm_p(u_r, alpha, p)
        got_a = weighted_pnorm_p(u_a, alpha, p)
        assert got_a == pytest.approx(got_r, rel=1e-12)

    def test_homogeneity_degree_p(self, axi_grid):
        u = _bump_axi(axi_grid)
        base = weighted_pnorm_p(u, 1.0, 4.0)
        scaled = weighted_pnorm_p(u.with_values(3.0 * u.values), 1.0, 4.0)
        assert scaled == pytest.approx(3.0**4 * base, rel=1e-13)

    def test_huge_alpha_finite(self, radial_grid):
        u = _bump_radial(radial_grid)
        got = weighted_pnorm_p(u, 1000.0, 4.0)
        assert np.isfinite(got)
        assert got > 0.0


class TestRayleigh:
    def test_homogeneity(self, axi_grid):
        u = _bump_axi(axi_grid)
        base = rayleigh(u, 1.0, 4.0).quotient
        for c in (1e-6, 2.0, 1e6):
            scaled = rayleigh(u.with_values(c * u.values), 1.0, 4.0).quotient
            assert scaled == pytest.approx(base, rel=1e-11)

    def test_report_fields(self, radial_grid):
        u = _bump_radial(radial_grid)
        report = rayleigh(u, 2.0, 4.0, level_tag="S_rad", iterations=7)
        assert report.level_tag == "S_rad"
        assert report.iterations == 7
        assert report.grid == radial_grid.descriptor
        assert report.quotient == pytest.approx(
            report.dirichlet_energy / report.weighted_pnorm_p ** (2.0 / 4.0), rel=1e-14
        )

    def test_unknown_tag_rejected(self, radial_grid):
        with pytest.raises(ConfigurationError):
            rayleigh(_bump_radial(radial_grid), 1.0, 4.0, level_tag="ground")

    def test_zero_field_degenerate(self, radial_grid):
        with pytest.raises(DegenerateFieldError):
            rayleigh(DiscreteField.zeros(radial_grid), 1.0, 4.0)

    def test_normalize_unit_pnorm(self, axi_grid):
        u = normalize(_bump_axi(axi_grid), 1.0, 4.0)
        assert weighted_pnorm_p(u, 1.0, 4.0) == pytest.approx(1.0, rel=1e-12)


class TestGradient:
    def test_matches_finite_differences(self, axi_grid_small, rng):
        alpha, p = 1.0, 4.0
        u = _bump_axi(axi_grid_small)
        g = functional_gradient(u, alpha, p).values
        free = np.flatnonzero(~axi_grid_small.dirichlet_mask)
        base = rayleigh(u, alpha, p).quotient
        h = 1e-6
        for k in rng.choice(free, size=12, replace=False):
            probe = u.values.copy()
            probe[k] += h
            up = rayleigh(u.with_values(probe), alpha, p).quotient
            probe[k] -= 2.0 * h
            dn = rayleigh(u.with_values(probe), alpha, p).quotient
            fd = (up - dn) / (2.0 * h)
            scale = max(abs(fd), abs(g[k]), 1e-3 * abs(base))
            assert abs(fd - g[k]) / scale < 1e-5

    def test_orthogonal_to_field(self, axi_grid):
        # R is 0-homogeneous, so dR(u)[u] = 0
        u = _bump_axi(axi_grid)
        g = functional_gradient(u, 1.0, 4.0)
        e = dirichlet_energy(u)
        assert abs(float(g.values @ u.values)) <= 1e-10 * max(1.0, abs(e))

    def test_zero_at_dirichlet(self, axi_grid):
        g = functional_gradient(_bump_axi(axi_grid), 1.0, 4.0)
        assert np.all(g.values[axi_grid.dirichlet_mask] == 0.0)


class TestResidual:
    def test_linear_eigenfunction_residual_small(self, radial_grid_fine):
        # w = r u substitution: u = sin(pi (r-1)/2) / r solves the alpha=0,
        # p=2 problem at level pi^2/4
        u = DiscreteField.sampled(
            radial_grid_fine, lambda r: np.sin(0.5 * math.pi * (r - 1.0)) / r
        )
        level = math.pi**2 / 4.0
        u = normalize(u, 0.0, 2.0)
        raw = residual_pde(u, 0.0, 0.0, 2.0)
        scaled = residual_pde(u, level, 0.0, 2.0)
        assert scaled < 1e-3 * raw

    def test_rejects_negative_level(self, radial_grid):
        with pytest.raises(ConfigurationError):
            residual_pde(_bump_radial(radial_grid), -1.0, 1.0, 4.0)


class TestHalfspaceDecomposition:
    def test_supported_inner_has_no_outer_energy(self, axi_grid):
        u = DiscreteField.sampled(
            axi_grid, lambda r, t: np.clip(2.0 - r, 0.0, None) * (r - 1.0)
        )
        ep, em = halfspace_energies(u)
        assert em > 0.0
        assert ep == 0.0

    def test_stiffness_splits(self, axi_grid):
        u = _bump_axi(axi_grid)
        a_full = fn.stiffness_matrix(axi_grid)
        a_plus, a_minus = fn.halfspace_stiffness(axi_grid)
        v = u.values
        total = float(v @ (a_full @ v))
        split = float(v @ (a_plus @ v)) + float(v @ (a_minus @ v))
        assert split == pytest.approx(total, rel=1e-14)
        assert total == pytest.approx(dirichlet_energy(u), rel=1e-12)
