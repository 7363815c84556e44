import numpy as np
from django.test import SimpleTestCase

from geometry.curves import BoundaryCurve
from harmonic_solver.exceptions import NearBoundaryError
from harmonic_solver.operators import build_solver, circle_average

from .exceptions import CoincidentPointsError
from .oracles import disk_green, disk_regular_part, disk_robin
from .services import (
    green_function,
    green_strip_maximum,
    pole_derivative_part,
    regular_part,
    robin_jet,
    robin_value,
    singular_part,
)


class SingularPartTests(SimpleTestCase):

    def test_values_and_first_derivatives(self):
        self.assertEqual(singular_part([1.0, 0.0], [0.0, 1.0])[0], -0.5 * np.log(2.0))
        self.assertAlmostEqual(singular_part([0.6, 0.8], [0.0, 0.0])[0], 0.0, places=15)
        grad = singular_part([1.0, 0.0], [0.0, 0.0], order=1)[1]
        np.testing.assert_allclose(grad, [-1.0, 0.0])
        # d/dy = -d/dx: the kernel (x_p - y_p) / |x - y|^2
        self.assertEqual(-grad[0], 1.0)

    def test_higher_derivatives_match_finite_differences(self):
        x, y = np.array([0.4, -0.3]), np.array([-0.2, 0.5])
        jet = singular_part(x, y, order=3)
        step = 1e-6
        for k in (1, 2):
            for a, e in enumerate(step * np.eye(2)):
                fd = (singular_part(x + e, y, order=k)[k] - singular_part(x - e, y, order=k)[k]) / (2 * step)
                np.testing.assert_allclose(fd, np.take(jet[k + 1], a, axis=-1), rtol=1e-6, atol=1e-8)

    def test_coincident_points_rejected(self):
        with self.assertRaises(CoincidentPointsError):
            singular_part([0.1, 0.1], [0.1, 0.1])


class RegularPartTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.disk = build_solver(BoundaryCurve.circle(), 128)
        cls.ellipse = build_solver(BoundaryCurve.ellipse(1.5, 1.0), 128)

    def test_centered_pole_vanishes(self):
        part = regular_part(self.disk, [0.0, 0.0])
        self.assertLess(abs(part.evaluate([0.3, -0.1])[0]), 1e-12)

    def test_image_charge(self):
        y, x = np.array([0.5, 0.0]), np.array([0.2, 0.1])
        value = regular_part(self.disk, y).evaluate(x)[0]
        image = -np.log(np.linalg.norm(y) * np.linalg.norm(x - y / 0.25))
        self.assertLess(abs(value - image), 1e-9)
        self.assertLess(abs(value - disk_regular_part(x, y)), 1e-9)

    def test_symmetry(self):
        rng = np.random.default_rng(11)
        for _ in range(4):
            x, y = rng.uniform(-0.5, 0.5, size=(2, 2)) * [1.2, 0.8]
            self.assertLess(abs(regular_part(self.ellipse, y).evaluate(x)[0] - regular_part(self.ellipse, x).evaluate(y)[0]), 1e-8)

    def test_pole_derivative_on_disk(self):
        for p in (1, 2):
            field = pole_derivative_part(self.disk, [0.0, 0.0], p)
            value, grad = field.evaluate([0.3, 0.2], order=1)
            self.assertAlmostEqual(value, [0.3, 0.2][p - 1], places=10)
            np.testing.assert_allclose(grad, np.eye(2)[p - 1], atol=1e-10)
        with self.assertRaises(ValueError):
            pole_derivative_part(self.disk, [0.0, 0.0], 0)

    def test_pole_derivative_matches_finite_differences(self):
        y, x, step = np.array([0.3, -0.1]), np.array([-0.2, 0.25]), 1e-4
        for p in (1, 2):
            e = step * np.eye(2)[p - 1]
            fd = (regular_part(self.ellipse, y + e).evaluate(x)[0] - regular_part(self.ellipse, y - e).evaluate(x)[0]) / (2 * step)
            exact = pole_derivative_part(self.ellipse, y, p).evaluate(x)[0]
            self.assertLess(abs(fd - exact) / max(abs(exact), 1.0), 1e-5)

    def test_pole_derivative_is_harmonic(self):
        field = pole_derivative_part(self.ellipse, [0.2, 0.1], 1)
        center = np.array([-0.3, 0.0])
        self.assertLess(abs(circle_average(field.density, center, 0.3) - field.evaluate(center)[0]), 1e-7)

    def test_pole_in_exclusion_zone_rejected(self):
        with self.assertRaises(NearBoundaryError):
            regular_part(self.disk, [0.99, 0.0])


class GreenFunctionTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.disk = build_solver(BoundaryCurve.circle(), 128)
        cls.ellipse = build_solver(BoundaryCurve.ellipse(1.5, 1.0), 128)

    def test_image_charge_value(self):
        x, y = np.array([0.5, 0.0]), np.array([-0.5, 0.0])
        expected = np.log(np.linalg.norm(x - y / 0.25) * 0.5 / 1.0) / (2 * np.pi)
        self.assertLess(abs(green_function(self.disk, x, y) - expected), 1e-9)
        self.assertLess(abs(disk_green(x, y) - expected), 1e-12)

    def test_symmetry_and_positivity(self):
        rng = np.random.default_rng(5)
        for op, semi_axes in ((self.disk, (1.0, 1.0)), (self.ellipse, (1.5, 1.0))):
            for _ in range(5):
                radius = rng.uniform(0.0, 0.6, size=2)
                angle = rng.uniform(0.0, 2 * np.pi, size=2)
                x, y = radius[:, None] * np.column_stack([np.cos(angle), np.sin(angle)]) * semi_axes
                gxy, gyx = green_function(op, x, y), green_function(op, y, x)
                self.assertLess(abs(gxy - gyx), 1e-8)
                self.assertGreater(gxy, 0)

    def test_symmetry_on_perturbed_annulus(self):
        op = build_solver(BoundaryCurve.perturbed_annulus(0.45, 1.0, 0.05, 3), 256)
        rng = np.random.default_rng(11)
        for _ in range(5):
            radius = rng.uniform(0.6, 0.8, size=2)
            angle = rng.uniform(0.0, 2 * np.pi, size=2)
            x, y = radius[:, None] * np.column_stack([np.cos(angle), np.sin(angle)])
            if np.linalg.norm(x - y) < 1e-3:
                continue
            gxy, gyx = green_function(op, x, y), green_function(op, y, x)
            self.assertLess(abs(gxy - gyx), 1e-8)
            self.assertGreater(gxy, 0)

    def test_coincident_points_rejected(self):
        with self.assertRaises(CoincidentPointsError):
            green_function(self.disk, [0.1, 0.2], [0.1, 0.2])

    def test_boundary_decay_is_linear(self):
        for op in (self.disk, self.ellipse):
            maxima = [green_strip_maximum(op, [0.0, 0.0], tau) for tau in (0.1, 0.05, 0.025)]
            for coarse, fine in zip(maxima, maxima[1:]):
                self.assertTrue(0.4 <= fine / coarse <= 0.6)
        self.assertAlmostEqual(green_strip_maximum(self.disk, [0.0, 0.0], 0.1), -np.log(0.9) / (2 * np.pi), places=9)


class RobinJetTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.disk = build_solver(BoundaryCurve.circle(), 128)
        cls.ellipse = build_solver(BoundaryCurve.ellipse(1.5, 1.0), 128)

    def test_disk_oracle(self):
        x = np.array([0.3, 0.2])
        jet = robin_jet(self.disk, x)
        value, grad, hess = disk_robin(x)
        self.assertLess(abs(jet.value - value), 1e-8)
        np.testing.assert_allclose(jet.gradient, grad, atol=1e-8)
        np.testing.assert_allclose(jet.hessian, hess, atol=1e-7)
        center = robin_jet(self.disk, [0.0, 0.0])
        np.testing.assert_allclose(center.gradient, 0, atol=1e-8)
        np.testing.assert_allclose(center.hessian, 2 * np.eye(2), atol=1e-7)
        # the 4 H_xx reading gives 0 at the center
        self.assertAlmostEqual(center.diagnostics['literal_hessian_delta'], 2.0, places=6)
        self.assertLess(center.diagnostics['mixed_asymmetry'], 1e-8)

    def test_csv_row(self):
        row = robin_jet(self.disk, [0.1, 0.0]).as_row()
        self.assertEqual(list(row), ['x1', 'x2', 't', 'dt1', 'dt2', 'h11', 'h12', 'h22', 'residual'])
        self.assertLess(row['residual'], 1e-10)

    def test_translation_invariance(self):
        shifted = build_solver(BoundaryCurve.ellipse(1.5, 1.0, center=(0.7, -0.4)), 128)
        x = np.array([0.2, 0.3])
        self.assertLess(abs(robin_value(shifted, x + [0.7, -0.4]) - robin_value(self.ellipse, x)), 1e-9)

    def test_scaling_law(self):
        small = robin_value(build_solver(BoundaryCurve.circle(1.0), 128), [0.0, 0.0])
        large = robin_value(build_solver(BoundaryCurve.circle(2.0), 128), [0.0, 0.0])
        self.assertLess(abs(small), 1e-10)
        self.assertLess(abs(large - small + np.log(2.0)), 1e-8)

    def test_derivatives_match_finite_differences(self):
        x = np.array([0.35, -0.25])
        jet = robin_jet(self.ellipse, x)
        step = 1e-4
        grad_fd = np.array([
            (robin_value(self.ellipse, x + e) - robin_value(self.ellipse, x - e)) / (2 * step)
            for e in step * np.eye(2)
        ])
        self.assertLess(np.abs(grad_fd - jet.gradient).max() / max(np.abs(jet.gradient).max(), 1.0), 1e-5)
        hess_fd = np.column_stack([
            (robin_jet(self.ellipse, x + e).gradient - robin_jet(self.ellipse, x - e).gradient) / (2 * step)
            for e in step * np.eye(2)
        ])
        self.assertLess(np.abs(hess_fd - jet.hessian).max() / np.abs(jet.hessian).max(), 1e-4)
        np.testing.assert_array_equal(jet.hessian, jet.hessian.T)

    def test_margin_enforced(self):
        with self.assertRaises(NearBoundaryError):
            robin_jet(self.disk, [0.85, 0.0])
