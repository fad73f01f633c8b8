import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fatoushadow.blaschke import (BlaschkeProduct, boundary_derivative_modulus, derivative,
                                  evaluate, iterate, power_map_preimages, preimage_tree,
                                  preimages)
from fatoushadow.errors import CapacityError, DomainError, PreconditionError

from conftest import random_disk, random_products

Z2 = BlaschkeProduct.power(2)
Z3 = BlaschkeProduct.power(3)
H = BlaschkeProduct(0.0, [0, 0.5])


def naive_eval(theta, zeros, z):
    out = cmath.exp(1j * theta)
    for a in zeros:
        out *= (z - a) / (1 - a.conjugate() * z)
    return out


def hausdorff(a, b):
    a, b = np.asarray(a), np.asarray(b)
    d = np.abs(a[:, None] - b[None, :])
    return max(d.min(axis=1).max(), d.min(axis=0).max())


class TestConstruction:
    def test_counts(self):
        g = BlaschkeProduct(1.0, [0, 0, 0.3j])
        assert (g.m, g.m1, g.is_power_map) == (3, 2, False)
        assert Z2.is_power_map

    def test_theta_is_reduced(self):
        assert BlaschkeProduct(-math.pi / 2, [0, 0]).theta == pytest.approx(1.5 * math.pi)

    @pytest.mark.parametrize("zeros", [[0], [0, 1.0], [0, 0.6 + 0.8j], [0, float("nan")]])
    def test_invalid(self, zeros):
        with pytest.raises(PreconditionError):
            BlaschkeProduct(0, zeros)


class TestEvaluate:
    def test_monomial(self):
        assert evaluate(Z2, 0.5) == pytest.approx(0.25, abs=1e-15)

    def test_zero_of_product(self):
        assert evaluate(H, 0.5) == 0

    def test_inside_value(self):
        w = evaluate(H, 0.8)
        # 0.8 * 0.3 / 0.6
        assert w == pytest.approx(0.4, abs=1e-15)
        assert abs(w) < 1

    def test_matches_naive_product(self, rng):
        for g in random_products(10, 1):
            z = random_disk(rng, 50)
            expected = [naive_eval(g.theta, g.zeros, complex(v)) for v in z]
            np.testing.assert_allclose(evaluate(g, z), expected, rtol=1e-13, atol=1e-15)

    def test_outside_domain(self):
        with pytest.raises(DomainError):
            evaluate(Z2, 1.1)

    def test_pole_proximity(self):
        g = BlaschkeProduct(0, [0, 1 - 1e-9])
        # pole at 1/conj(a) = 1 + 1e-9 lies inside the evaluation slack
        with pytest.raises(DomainError):
            evaluate(g, 1 / (1 - 1e-9))

    def test_properness(self, rng):
        for g in random_products(20, 2):
            z = random_disk(rng, 10**4, 0.9999)
            assert np.all(np.abs(evaluate(g, z)) < 1)
            zeta = np.exp(2j * np.pi * rng.random(10**3))
            assert np.all(np.abs(np.abs(evaluate(g, zeta)) - 1) <= 1e-12)


class TestDerivative:
    def test_monomial(self):
        assert derivative(Z2, 0.5) == pytest.approx(1.0)

    def test_cubic_on_circle(self):
        assert abs(derivative(Z3, cmath.exp(0.7j))) == pytest.approx(3.0, rel=1e-14)

    def test_at_a_zero(self):
        # g = z (z - 0.5)/(1 - 0.5 z); g'(0.5) = 0.5 / 0.75
        assert derivative(H, 0.5) == pytest.approx(2 / 3, rel=1e-14)

    def test_central_differences(self, rng):
        h = 1e-6
        for g in random_products(20, 3):
            z = random_disk(rng, 200, 0.95)
            fd = (evaluate(g, z + h) - evaluate(g, z - h)) / (2 * h)
            an = derivative(g, z)
            assert np.all(np.abs(fd - an) <= 1e-6 * np.abs(an) + 1e-9)

    def test_boundary_matches_closed_form_at_one(self):
        assert abs(derivative(H, 1.0)) == pytest.approx(boundary_derivative_modulus(H, 1.0), rel=1e-12)


class TestBoundaryDerivative:
    def test_power_map(self, rng):
        for m in (2, 3, 5):
            zeta = np.exp(2j * np.pi * rng.random(20))
            np.testing.assert_array_equal(
                boundary_derivative_modulus(BlaschkeProduct.power(m, 0.3), zeta), m)

    def test_values(self):
        assert boundary_derivative_modulus(H, 1.0) == pytest.approx(4.0, rel=1e-15)
        assert boundary_derivative_modulus(H, -1.0) == pytest.approx(4 / 3, rel=1e-15)

    def test_argument_speed_oracle(self):
        # on the circle |g'(e^{it})| equals d/dt arg g(e^{it})
        h = 1e-6
        for t in np.linspace(0, 2 * np.pi, 17)[:-1]:
            a = cmath.phase(evaluate(H, cmath.exp(1j * (t + h))) / evaluate(H, cmath.exp(1j * (t - h))))
            assert a / (2 * h) == pytest.approx(boundary_derivative_modulus(H, cmath.exp(1j * t)), rel=1e-8)

    def test_consistency_with_derivative(self, rng):
        for g in random_products(50, 4):
            zeta = np.exp(2j * np.pi * rng.random(10**3))
            diff = np.abs(np.abs(derivative(g, zeta)) - boundary_derivative_modulus(g, zeta))
            assert diff.max() <= 1e-9

    def test_strictly_above_m1(self, rng):
        for g in random_products(50, 5):
            zeta = np.exp(2j * np.pi * rng.random(10**3))
            bd = boundary_derivative_modulus(g, zeta)
            assert bd.min() > 1
            if not g.is_power_map:
                assert bd.min() > g.m1

    def test_preconditions(self):
        with pytest.raises(DomainError):
            boundary_derivative_modulus(H, 0.9)
        with pytest.raises(PreconditionError):
            boundary_derivative_modulus(BlaschkeProduct(0, [0.1, 0.2]), 1.0)


class TestPreimages:
    def test_square_roots(self):
        ps = preimages(Z2, 0.25)
        np.testing.assert_allclose(ps.roots, [-0.5, 0.5], atol=1e-15)
        assert ps.degree_deficit == 0

    def test_superattracting(self):
        ps = preimages(Z2, 0)
        assert len(ps.roots) == 2
        assert all(abs(r) < 1e-12 for r in ps.roots)

    def test_zeros_of_g(self):
        np.testing.assert_allclose(preimages(H, 0).roots, [0, 0.5], atol=1e-14)

    def test_random_targets(self, rng):
        for g in random_products(20, 6, with_origin=False):
            for w in random_disk(rng, 10, 0.99):
                ps = preimages(g, w)
                assert len(ps.roots) == g.m
                assert max(ps.residuals) <= 1e-10
                assert all(abs(r) < 1 for r in ps.roots)

    def test_target_outside(self):
        with pytest.raises(DomainError):
            preimages(Z2, 1.0)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(0, 0.999), st.floats(0, 2 * math.pi), st.floats(0, 0.9), st.floats(0, 2 * math.pi))
    def test_roundtrip_property(self, wr, wt, ar, at):
        g = BlaschkeProduct(0.3, [0, ar * cmath.exp(1j * at), 0.2])
        w = wr * cmath.exp(1j * wt)
        for q in preimages(g, w).roots:
            assert abs(evaluate(g, q) - w) <= 1e-10


class TestPowerMapPreimages:
    def test_depth_one(self):
        np.testing.assert_allclose(power_map_preimages(2, 0, 0.5, 1),
                                   [math.sqrt(0.5), -math.sqrt(0.5)], atol=1e-15)

    def test_depth_zero(self):
        assert power_map_preimages(2, 0, 0.5, 0) == [pytest.approx(0.5)]

    def test_depth_two(self):
        pts = power_map_preimages(2, 0, 0.5, 2)
        assert np.allclose(np.abs(pts), 0.5**0.25)
        np.testing.assert_allclose(pts, 0.5**0.25 * np.exp(1j * np.pi / 2 * np.arange(4)), atol=1e-15)

    def test_matches_solver_at_depth_one(self):
        assert hausdorff(power_map_preimages(2, 0, 0.5, 1), preimages(Z2, 0.5).roots) < 1e-14

    @pytest.mark.parametrize("m,k", [(2, 6), (3, 4), (5, 3)])
    def test_forward_iteration_returns(self, m, k):
        theta, p = 1.234, 0.3 - 0.4j
        g = BlaschkeProduct.power(m, theta)
        pts = np.array(power_map_preimages(m, theta, p, k))
        assert len(pts) == m**k
        assert np.allclose(np.abs(pts), abs(p) ** (1 / m**k), rtol=1e-15)
        assert np.abs(iterate(g, pts, k) - p).max() <= 1e-9

    def test_capacity(self):
        with pytest.raises(CapacityError):
            power_map_preimages(2, 0, 0.5, 20)

    def test_base_point_constraints(self):
        with pytest.raises(DomainError):
            power_map_preimages(2, 0, 0, 1)


class TestPreimageTree:
    def test_binary_tree(self):
        t = preimage_tree(Z2, 0.5, 2)
        assert len(t) == 7
        assert list(t.generation) == [0, 1, 1, 2, 2, 2, 2]

    def test_fixed_point_dedup(self):
        t = preimage_tree(H, 0, 1)
        np.testing.assert_allclose(t.points, [0, 0.5], atol=1e-14)
        assert list(t.generation) == [0, 1]

    def test_depth_twelve(self):
        t = preimage_tree(Z2, 0.5, 12)
        assert len(t) == 2**13 - 1
        assert np.abs(t.points).max() == pytest.approx(0.5 ** (1 / 4096), abs=1e-12)
        assert 0.5 ** (1 / 4096) == pytest.approx(0.99983, abs=1e-5)

    def test_order_is_generation_then_lexicographic(self):
        t = preimage_tree(H, 0, 6)
        for _, sl in t.generation_slices():
            pts = t.points[sl]
            keys = list(zip(pts.real, pts.imag))
            assert keys == sorted(keys)

    def test_parents_and_roundtrip(self):
        t = preimage_tree(H, 0, 8)
        for i in range(1, len(t)):
            assert abs(evaluate(H, t.points[i]) - t.points[t.parent[i]]) <= 1e-10
            assert t.generation[t.parent[i]] == t.generation[i] - 1
        for k, sl in t.generation_slices():
            assert np.abs(iterate(H, t.points[sl], k) - 0).max() <= 1e-7 * max(k, 1)

    def test_prefix_property(self):
        deep, shallow = preimage_tree(H, 0.1j, 6), preimage_tree(H, 0.1j, 4)
        np.testing.assert_array_equal(deep.upto(4).points, shallow.points)

    def test_capacity(self):
        with pytest.raises(CapacityError) as info:
            preimage_tree(Z2, 0.5, 12, cap=1000)
        assert info.value.depth_reached == 8

    def test_immutable(self):
        t = preimage_tree(Z2, 0.5, 1)
        with pytest.raises(ValueError):
            t.points[0] = 0
