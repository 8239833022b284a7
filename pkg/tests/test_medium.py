import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavesim.exceptions import ConfigError, DomainError
from wavesim.medium import (Domain, HelmholtzProblem, PMLSpec, SourceSpec,
                            VelocityModel, background_wavefield,
                            boundary_distances, damping_coefficient,
                            sample_velocity, slowness_perturbation,
                            stretch_factors, stretching_state)
from wavesim.special import hankel_h0_2

DOM = Domain.from_interior(0.0, 100.0, 0.0, 80.0, 20.0)


class TestBoundaryDistances:
    def test_interior(self):
        assert boundary_distances([50.0, 40.0], DOM) == (0.0, 0.0)

    def test_left_collar(self):
        lx, lz = boundary_distances([-10.0, 40.0], DOM)
        assert (lx[0], lz[0]) == (10.0, 0.0)

    def test_corner(self):
        lx, lz = boundary_distances([105.0, 87.0], DOM)
        assert (lx[0], lz[0]) == (5.0, 7.0)

    def test_outside_raises(self):
        with pytest.raises(DomainError):
            boundary_distances([200.0, 0.0], DOM)


class TestDamping:
    def test_zero_scaling(self):
        assert damping_coefficient(PMLSpec(2.0, 0.0, enabled=True), 3.0) == 0.0

    def test_default_a0(self):
        c = damping_coefficient(PMLSpec(2.0, 0.8, omega0=5.0, enabled=True), 5.0)
        assert c == pytest.approx(0.2, rel=1e-15)

    def test_inverse_frequency(self):
        pml = PMLSpec(2.0, 0.8, omega0=5.0, enabled=True)
        assert damping_coefficient(pml, 10.0) == pytest.approx(
            0.5 * damping_coefficient(pml, 5.0))

    def test_default_omega0_is_scale_free(self):
        pml = PMLSpec(2.0, 0.8, enabled=True)
        assert damping_coefficient(pml, 1.0) == damping_coefficient(pml, 77.0)

    def test_zero_thickness(self):
        with pytest.raises(ConfigError):
            damping_coefficient(PMLSpec(0.0, 0.8), 1.0)


class TestStretching:
    def test_interior_identity(self):
        s = stretching_state([[50.0, 40.0], [1.0, 79.0]], DOM, 1e-3)
        for e in (s.e1, s.e2, s.e3):
            np.testing.assert_array_equal(e, 1.0)
        np.testing.assert_array_equal(s.de1_dx, 0.0)
        np.testing.assert_array_equal(s.de2_dz, 0.0)

    def test_symmetric_corner(self):
        e1, e2, _ = stretch_factors(3.0, 3.0, 0.05)
        assert e1 == 1.0 + 0.0j
        assert e2 == 1.0 + 0.0j

    def test_hand_values(self):
        e1, e2, e3 = stretch_factors(0.1, 0.0, 10.0)
        assert e1 == pytest.approx(1 / 1.01 + 0.1j / 1.01, rel=1e-14)
        assert e3 == pytest.approx(1 - 0.1j, rel=1e-14)

    @given(st.floats(0, 30), st.floats(0, 30), st.floats(0, 1e-2))
    def test_mirror(self, lx, lz, c):
        e1, e2, _ = stretch_factors(lx, lz, c)
        f1, f2, _ = stretch_factors(lz, lx, c)
        assert f1 == pytest.approx(e2, rel=1e-12, abs=1e-15)
        assert f2 == pytest.approx(e1, rel=1e-12, abs=1e-15)
        # the imaginary numerators are antisymmetric under the swap
        assert (f1.imag * (1 + c * c * lz ** 4)) == pytest.approx(
            -(e1.imag * (1 + c * c * lx ** 4)), rel=1e-12, abs=1e-15)

    def test_reduces_to_product_form(self):
        lx, lz, c = 7.0, 3.0, 2e-3
        e1, e2, e3 = stretch_factors(lx, lz, c)
        sx, sz = 1 - 1j * c * lx ** 2, 1 - 1j * c * lz ** 2
        assert e1 == pytest.approx(sz / sx)
        assert e2 == pytest.approx(sx / sz)
        assert e3 == pytest.approx(sx * sz)

    @pytest.mark.parametrize("pt", [[-12.0, 30.0], [113.0, 90.0], [115.0, -5.0],
                                    [-3.0, 95.0]])
    def test_gradients_match_finite_differences(self, pt):
        c = 2e-3
        h = 1e-5
        s = stretching_state(pt, DOM, c)
        xp = stretching_state([pt[0] + h, pt[1]], DOM, c).e1
        xm = stretching_state([pt[0] - h, pt[1]], DOM, c).e1
        zp = stretching_state([pt[0], pt[1] + h], DOM, c).e2
        zm = stretching_state([pt[0], pt[1] - h], DOM, c).e2
        fd_x = (xp - xm) / (2 * h)
        fd_z = (zp - zm) / (2 * h)
        assert abs(s.de1_dx[0] - fd_x[0]) <= 1e-6 * abs(fd_x[0])
        assert abs(s.de2_dz[0] - fd_z[0]) <= 1e-6 * abs(fd_z[0])


class TestVelocity:
    @pytest.fixture
    def model(self):
        v = np.array([[2000.0, 3000.0], [2000.0, 3000.0]])
        return VelocityModel(v, 10.0, 10.0)

    def test_node(self, model):
        assert sample_velocity(model, [10.0, 0.0])[0] == 2000.0

    def test_constant_patch(self):
        m = VelocityModel(np.full((3, 3), 1800.0), 5.0, 5.0)
        assert sample_velocity(m, [2.5, 7.5])[0] == pytest.approx(1800.0)

    def test_cell_center(self, model):
        assert sample_velocity(model, [5.0, 5.0])[0] == pytest.approx(2500.0)

    def test_edge_clamp(self, model):
        np.testing.assert_allclose(sample_velocity(model, [[-50.0, -50.0], [99.0, 99.0]]),
                                   [2000.0, 3000.0])

    def test_rejects_non_positive(self):
        with pytest.raises(ConfigError):
            VelocityModel(np.array([[1.0, 0.0]]), 1.0, 1.0)


class TestSlowness:
    def test_homogeneous(self):
        assert slowness_perturbation(1500.0, 1500.0)[1] == 0.0

    def test_hand_value(self):
        m, dm = slowness_perturbation(2000.0, 1000.0)
        assert m == pytest.approx(2.5e-7)
        assert dm == pytest.approx(-7.5e-7, rel=1e-12)

    @given(st.floats(100, 10000), st.floats(100, 10000))
    def test_sign(self, v, v0):
        dm = slowness_perturbation(v, v0)[1]
        if v > v0:
            assert dm < 0


class TestBackground:
    src = SourceSpec(50.0, 40.0, 10.0)
    pml = PMLSpec(20.0, 0.8, enabled=True)

    def test_interior_has_no_damping(self):
        u = background_wavefield([70.0, 40.0], self.src, 1500.0, DOM, self.pml)
        expect = 0.25j * hankel_h0_2(self.src.omega * 20.0 / 1500.0)
        assert u[0] == expect

    def test_radial_symmetry(self):
        u = background_wavefield([[70.0, 40.0], [50.0, 60.0]], self.src, 1500.0,
                                 DOM, self.pml)
        assert u[0] == pytest.approx(u[1], rel=1e-14)

    def test_damping_ratio(self):
        # l_x**2 + l_z**2 = 1 at x = x_br + 1, z interior
        p = [101.0, 40.0]
        damped = background_wavefield(p, self.src, 1500.0, DOM, self.pml)
        plain = background_wavefield(p, self.src, 1500.0, DOM, None)
        c = damping_coefficient(self.pml, self.src.omega)
        ratio = abs(damped[0]) / abs(plain[0])
        assert ratio == pytest.approx(np.exp(-self.src.omega * c / (3 * 1500.0)), rel=1e-12)

    def test_monotone_in_collar(self):
        xs = np.linspace(100.0, 120.0, 50)
        pts = np.stack([xs, np.full_like(xs, 40.0)], axis=1)
        damped = np.abs(background_wavefield(pts, self.src, 1500.0, DOM, self.pml))
        plain = np.abs(background_wavefield(pts, self.src, 1500.0, DOM, None))
        assert np.all(np.diff(damped / plain) <= 0)

    def test_source_singularity(self):
        with pytest.raises(DomainError):
            background_wavefield([50.0, 40.0], self.src, 1500.0, DOM)


def test_problem_scaling_preserves_dimensionless_quantities(pml_problem):
    s = pml_problem.scaled(1e-3)
    assert s.omega == pml_problem.omega
    assert s.wavelength == pytest.approx(pml_problem.wavelength * 1e-3)
    assert s.damping() * s.pml.L_pml ** 2 == pytest.approx(
        pml_problem.damping() * pml_problem.pml.L_pml ** 2)
    pts = np.array([[100.0, 900.0], [1100.0, -50.0]])
    np.testing.assert_allclose(
        background_wavefield(pts * 1e-3, s.source, s.v0, s.domain, s.pml),
        background_wavefield(pts, pml_problem.source, pml_problem.v0,
                             pml_problem.domain, pml_problem.pml), rtol=1e-10)


def test_problem_rejects_source_outside():
    model = VelocityModel(np.full((2, 2), 1500.0), 100.0, 100.0)
    with pytest.raises(ConfigError):
        HelmholtzProblem(model, SourceSpec(500.0, 50.0, 5.0),
                         Domain.from_interior(0.0, 100.0, 0.0, 100.0))


def test_problem_rejects_collar_mismatch():
    model = VelocityModel(np.full((2, 2), 1500.0), 100.0, 100.0)
    with pytest.raises(ConfigError):
        HelmholtzProblem(model, SourceSpec(50.0, 50.0, 5.0),
                         Domain.from_interior(0.0, 100.0, 0.0, 100.0, 10.0),
                         PMLSpec(20.0, 0.8, enabled=True))
