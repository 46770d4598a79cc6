import numpy as np
import pytest

from rokhlin.cstar import (
    CrossedElement,
    ElementOrbitFiber,
    HostMismatchError,
    InterpolationFiber,
    holonomy,
    norm,
    orbit_isomorphism,
    orbit_rep,
    orbit_rep_with_phases,
    periodic_embedding,
    primitive_spectrum,
    regular_window_norm,
)
from rokhlin.dynsys import make_cycle_system


def random_element(sys, radius, rng, scale=1.0):
    return CrossedElement(
        sys,
        {
            i: scale * (rng.standard_normal(sys.n) + 1j * rng.standard_normal(sys.n))
            for i in range(-radius, radius + 1)
        },
    )


class TestAlgebra:
    def test_two_cycle_product_vanishes(self):
        sys = make_cycle_system([2])
        fu = CrossedElement.indicator(sys, {0}, power=1)
        gu = CrossedElement.indicator(sys, {0}, power=1)
        assert (fu * gu).is_zero()

    def test_moved_coefficient_convention(self):
        # u g u* = g o forward^{-1}
        sys = make_cycle_system([3])
        u = CrossedElement.unitary(sys)
        g = CrossedElement.from_function(sys, [1.0, 2.0, 3.0])
        moved = u * g * u.adjoint()
        expected = np.array([1.0, 2.0, 3.0])[sys.power_perm(-1)]
        assert np.allclose(moved.coefficient(0), expected)
        assert moved.support == (0,)

    def test_identity(self):
        sys = make_cycle_system([4])
        one = CrossedElement.from_function(sys, np.ones(4))
        rng = np.random.default_rng(0)
        a = random_element(sys, 2, rng)
        assert ((a * one) - a).is_zero()
        assert ((one * a) - a).is_zero()

    def test_unitary_relation(self):
        sys = make_cycle_system([5])
        u = CrossedElement.unitary(sys)
        one = CrossedElement.from_function(sys, np.ones(5))
        assert (u * u.adjoint() - one).is_zero()
        assert (u.adjoint() * u - one).is_zero()

    def test_adjoint_involution_and_antihomomorphism(self):
        sys = make_cycle_system([6, 3])
        rng = np.random.default_rng(1)
        a, b = random_element(sys, 3, rng), random_element(sys, 3, rng)
        assert (a.adjoint().adjoint() - a).coefficient_bound() < 1e-12
        lhs = (a * b).adjoint()
        rhs = b.adjoint() * a.adjoint()
        assert (lhs - rhs).coefficient_bound() < 1e-10

    def test_expectation(self):
        sys = make_cycle_system([4])
        f = CrossedElement.indicator(sys, {1}, power=1)
        assert np.allclose(f.expectation(), 0)
        g = CrossedElement.from_function(sys, [1, 2, 3, 4])
        assert np.allclose(g.expectation(), [1, 2, 3, 4])

    def test_expectation_recovers_coefficients(self):
        sys = make_cycle_system([5])
        rng = np.random.default_rng(2)
        b = random_element(sys, 3, rng)
        u = CrossedElement.unitary(sys)
        for j in b.support:
            recovered = (b * CrossedElement.unitary(sys, power=-j)).expectation()
            assert np.allclose(recovered, b.coefficient(j), atol=1e-12)

    def test_expectation_faithful_on_positives(self):
        sys = make_cycle_system([4])
        rng = np.random.default_rng(3)
        for _ in range(10):
            a = random_element(sys, 2, rng)
            diag = (a.adjoint() * a).expectation()
            if np.abs(diag).max() < 1e-14:
                assert a.coefficient_bound() < 1e-7

    def test_host_mismatch(self):
        a = CrossedElement.unitary(make_cycle_system([3]))
        b = CrossedElement.unitary(make_cycle_system([3]))
        with pytest.raises(HostMismatchError):
            _ = a * b


class TestOrbitRep:
    def test_representation_property_random(self):
        sys = make_cycle_system([12])
        cyc = sys.orbits().cycles[0]
        rng = np.random.default_rng(4)
        for _ in range(4):
            a = random_element(sys, 4, rng)
            b = random_element(sys, 4, rng)
            for lam in np.exp(2j * np.pi * rng.random(16)):
                rep = orbit_rep(sys, cyc, lam)
                prod = np.abs(rep.matrix(a * b) - rep.matrix(a) @ rep.matrix(b)).max()
                adj = np.abs(rep.matrix(a.adjoint()) - rep.matrix(a).conj().T).max()
                assert prod < 1e-10 and adj < 1e-12

    def test_unit_is_identity(self):
        sys = make_cycle_system([7])
        rep = orbit_rep(sys, sys.orbits().cycles[0], 1j)
        one = CrossedElement.from_function(sys, np.ones(7))
        assert np.allclose(rep.matrix(one), np.eye(7))

    def test_u_power_is_scalar(self):
        sys = make_cycle_system([6])
        lam = np.exp(0.37j)
        rep = orbit_rep(sys, sys.orbits().cycles[0], lam)
        power = np.linalg.matrix_power(rep.u_matrix, 6)
        assert np.abs(power - lam * np.eye(6)).max() < 1e-12

    def test_covariance(self):
        sys = make_cycle_system([2])
        rng = np.random.default_rng(5)
        f = rng.standard_normal(2)
        for lam in np.exp(2j * np.pi * rng.random(6)):
            rep = orbit_rep(sys, sys.orbits().cycles[0], lam)
            assert rep.covariance_residual(f) < 1e-12

    def test_off_circle_rejected(self):
        sys = make_cycle_system([3])
        with pytest.raises(ValueError, match="unit circle"):
            orbit_rep(sys, sys.orbits().cycles[0], 1.5)


class TestNorm:
    def test_unitary_norm_one(self):
        sys = make_cycle_system([2, 5])
        res = norm(CrossedElement.unitary(sys), 1e-3)
        assert res.value == pytest.approx(1.0, abs=1e-9)

    def test_indicator_norm_one(self):
        sys = make_cycle_system([4])
        res = norm(CrossedElement.indicator(sys, {0}), 1e-3)
        assert res.value == pytest.approx(1.0, abs=1e-12)

    def test_fixed_point_two(self):
        # pi_lam(1 + u) = 1 + lam on a fixed point; sup over the circle is 2
        sys = make_cycle_system([1])
        f = CrossedElement.from_function(sys, [1.0])
        b = f + f * CrossedElement.unitary(sys)
        res = norm(b, 1e-4)
        # independent scalar oracle on a fine circle sample
        thetas = np.linspace(0, 2 * np.pi, 100001)
        oracle = np.abs(1 + np.exp(1j * thetas)).max()
        assert abs(res.value - oracle) <= 1e-4 + 1e-9
        assert res.upper >= oracle - 1e-9

    def test_zero_element(self):
        sys = make_cycle_system([3])
        assert norm(CrossedElement.zero(sys), 1e-3).value == 0.0

    def test_cstar_identity_sampled(self):
        sys = make_cycle_system([6])
        rng = np.random.default_rng(6)
        tol = 1e-3
        for _ in range(5):
            a = random_element(sys, 2, rng, scale=0.4)
            na = norm(a, tol).value
            naa = norm(a.adjoint() * a, tol).value
            assert abs(naa - na * na) <= 3 * tol * max(na, 1.0) + 1e-9

    def test_norm_dominates_fibers(self):
        sys = make_cycle_system([5, 8])
        rng = np.random.default_rng(7)
        a = random_element(sys, 2, rng, scale=0.3)
        res = norm(a, 1e-3)
        for cyc in sys.orbits().cycles:
            for lam in np.exp(2j * np.pi * rng.random(8)):
                fiber = orbit_rep(sys, cyc, lam).matrix(a)
                assert np.linalg.norm(fiber, 2) <= res.upper + 1e-9

    def test_expectation_contractive(self):
        sys = make_cycle_system([4, 9])
        rng = np.random.default_rng(8)
        for _ in range(5):
            a = random_element(sys, 2, rng, scale=0.5)
            res = norm(a, 1e-3)
            assert np.abs(a.expectation()).max() <= res.upper + 1e-9

    def test_grid_sizes_are_powers_of_two(self):
        sys = make_cycle_system([4])
        rng = np.random.default_rng(9)
        res = norm(random_element(sys, 3, rng), 1e-2)
        for g in res.grids.values():
            assert g & (g - 1) == 0


class TestOrbitIsomorphism:
    def test_unitary_round_trip(self):
        sys = make_cycle_system([12])
        iso = orbit_isomorphism(sys, sys.orbits().cycles[0], 256)
        u = CrossedElement.unitary(sys)
        back = iso.reconstruct(iso.sample(u))
        assert (back - u).coefficient_bound() < 1e-12

    def test_random_round_trip(self):
        sys = make_cycle_system([12])
        cyc = sys.orbits().cycles[0]
        iso = orbit_isomorphism(sys, cyc, 256)
        rng = np.random.default_rng(10)
        a = random_element(sys, 4, rng)
        back = iso.reconstruct(iso.sample(a))
        assert (back - a).coefficient_bound() < 1e-9

    def test_aliasing_flagged(self):
        sys = make_cycle_system([3])
        iso = orbit_isomorphism(sys, sys.orbits().cycles[0], 4)
        a = CrossedElement.unitary(sys, power=8)
        with pytest.raises(ValueError, match="alias"):
            iso.sample(a)

    def test_grid_must_be_power_of_two(self):
        sys = make_cycle_system([3])
        with pytest.raises(ValueError, match="power of two"):
            orbit_isomorphism(sys, sys.orbits().cycles[0], 100)


class TestPeriodicEmbedding:
    def test_identity_map_period_one(self):
        sys = make_cycle_system([1, 1])
        emb = periodic_embedding(sys, 16)
        assert emb.n == 1
        f = np.array([2.0, -1.0])
        assert emb.covariance_residual(f) < 1e-15

    def test_period_two_covariance(self):
        sys = make_cycle_system([2])
        emb = periodic_embedding(sys, 64)
        rng = np.random.default_rng(11)
        for _ in range(5):
            assert emb.covariance_residual(rng.standard_normal(2)) < 1e-12

    def test_unitarity_and_period_lcm(self):
        sys = make_cycle_system([2, 3])
        emb = periodic_embedding(sys, 32)
        assert emb.n == 6
        assert emb.unitarity_residual() < 1e-12

    def test_non_period_rejected(self):
        sys = make_cycle_system([2, 3])
        with pytest.raises(ValueError, match="not a period"):
            periodic_embedding(sys, 16, n=4)

    def test_expectation_commuting_square(self):
        sys = make_cycle_system([2, 3])
        rng = np.random.default_rng(12)
        emb = periodic_embedding(sys, 64)
        for radius in (1, 2, 5):
            a = random_element(sys, radius, rng)
            assert emb.expectation_residual(a) < 1e-9


class TestPrimSpectrum:
    def test_counts(self):
        rep = primitive_spectrum(make_cycle_system([2, 2, 5]))
        assert rep.counts == {2: 2, 5: 1}
        assert rep.max_irreducible_dim == 5
        assert rep.period == 10

    def test_fixed_points_only(self):
        rep = primitive_spectrum(make_cycle_system([1, 1, 1]))
        assert rep.max_irreducible_dim == 1

    def test_dim_at_most_period(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            lengths = [int(rng.integers(1, 7)) for _ in range(rng.integers(1, 4))]
            rep = primitive_spectrum(make_cycle_system(lengths))
            assert rep.max_irreducible_dim <= rep.period


class TestHolonomy:
    def test_all_ones(self):
        sys = make_cycle_system([4])
        rep = orbit_rep(sys, sys.orbits().cycles[0], 1.0)
        assert holonomy(rep) == pytest.approx(1.0)

    def test_three_phases(self):
        sys = make_cycle_system([3])
        rep = orbit_rep_with_phases(sys, sys.orbits().cycles[0], [1j, 1.0, -1.0])
        lam = holonomy(rep)
        assert lam == pytest.approx(-1j)
        power = np.linalg.matrix_power(rep.u_matrix, 3)
        assert np.abs(power - lam * np.eye(3)).max() < 1e-12

    def test_single_fixed_point(self):
        sys = make_cycle_system([1])
        rep = orbit_rep(sys, sys.orbits().cycles[0], np.exp(0.4j))
        assert holonomy(rep) == pytest.approx(np.exp(0.4j))

    def test_random_phases_match_power(self):
        rng = np.random.default_rng(14)
        for L in range(1, 9):
            sys = make_cycle_system([L])
            phases = np.exp(2j * np.pi * rng.random(L))
            rep = orbit_rep_with_phases(sys, sys.orbits().cycles[0], phases)
            lam = holonomy(rep, tol=1e-10)
            assert abs(lam - np.prod(phases)) < 1e-10

    def test_malformed_rejected(self):
        sys = make_cycle_system([3])
        rep = orbit_rep(sys, sys.orbits().cycles[0], 1.0)
        object.__setattr__(rep, "u_matrix", np.eye(3, dtype=complex))
        with pytest.raises(ValueError, match="form"):
            holonomy(rep)


class TestOracleAgreement:
    def test_grid_norm_vs_window_oracle(self):
        rng = np.random.default_rng(15)
        for L in (1, 2, 4, 7, 8):
            sys = make_cycle_system([L])
            cyc = sys.orbits().cycles[0]
            for k in (1, 2):
                a = random_element(sys, k, rng, scale=0.5)
                certified = norm(a, 1e-3)
                oracle = regular_window_norm(a, cyc, 8 * (L + k))
                ref = max(certified.value, oracle, 1e-12)
                assert abs(certified.value - oracle) / ref < 1e-2

    def test_window_oracle_underestimates(self):
        sys = make_cycle_system([5])
        cyc = sys.orbits().cycles[0]
        u = CrossedElement.unitary(sys)
        assert regular_window_norm(u, cyc, 48) <= 1.0 + 1e-12

    def test_power_path_matches_dense_sample(self):
        # long cycles take the banded power-iteration path; cross-check a few
        # fibers against a direct eigensolver on the dense matrices
        sys = make_cycle_system([150])
        cyc = sys.orbits().cycles[0]
        rng = np.random.default_rng(18)
        a = random_element(sys, 1, rng, scale=0.3)
        fib = ElementOrbitFiber(a, cyc)
        lams = np.exp(2j * np.pi * rng.random(6))
        from rokhlin.cstar import _sigma_max_power

        fast = _sigma_max_power(fib, lams)
        mats = fib.matrices(lams)
        dense = np.array([np.linalg.svd(m, compute_uv=False)[0] for m in mats])
        assert np.abs(fast - dense).max() < 1e-6 * dense.max()


class TestFibers:
    def test_interpolation_hits_nodes(self):
        sys = make_cycle_system([4])
        cyc = sys.orbits().cycles[0]
        rng = np.random.default_rng(16)
        a = random_element(sys, 2, rng)
        s = 16
        lams = np.exp(2j * np.pi * np.arange(s) / s)
        nodes = ElementOrbitFiber(a, cyc).matrices(lams)
        interp = InterpolationFiber(cyc, nodes)
        assert np.abs(interp.matrices(lams) - nodes).max() < 1e-12

    def test_interp_lip_bounds_variation(self):
        sys = make_cycle_system([3])
        cyc = sys.orbits().cycles[0]
        rng = np.random.default_rng(17)
        a = random_element(sys, 1, rng)
        s = 32
        lams = np.exp(2j * np.pi * np.arange(s) / s)
        interp = InterpolationFiber(cyc, ElementOrbitFiber(a, cyc).matrices(lams))
        lip = interp.lip()
        probe = np.exp(2j * np.pi * rng.random(50))
        vals = interp.matrices(probe)
        ref = interp.matrices(np.roll(probe, 1))
        arc = np.abs(np.angle(probe / np.roll(probe, 1)))
        for i in range(50):
            assert np.linalg.norm(vals[i] - ref[i], 2) <= lip * arc[i] + 1e-9
