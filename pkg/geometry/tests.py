from unittest import mock

import numpy as np
from django.test import SimpleTestCase, override_settings

from .curves import BoundaryCurve, FourierLoop
from .deformations import (
    ComposedField,
    ConstantField,
    DeformationField,
    LinearField,
    TrigBumpField,
    evaluate_deformation,
    inverse_jacobian,
    inverse_second_derivative,
    invert_deformation,
    neumann_inverse_jacobian,
    norm_box,
)
from .domains import deform_domain
from .exceptions import (
    CurveValidationError,
    DeformationError,
    DerivativeOrderError,
    GeometrySpecError,
    NonContractiveDeformationError,
)
from .serializers import load_domain


def bump_field(coeffs=(0.02, -0.015, 0.01, 0.012)):
    basis = [
        TrigBumpField(0, modes=(1, 0), kinds='cc', radius=2.5, wavelength=3.0),
        TrigBumpField(1, modes=(0, 1), kinds='cs', radius=2.5, wavelength=3.0),
        TrigBumpField(0, modes=(1, 1), kinds='sc', center=(0.2, -0.1), radius=2.2, wavelength=2.5),
        TrigBumpField(1, modes=(2, 1), kinds='ss', radius=2.5, wavelength=4.0),
    ]
    return DeformationField(basis, coeffs)


class BoundaryCurveTests(SimpleTestCase):

    def test_orientation_is_normalized(self):
        clockwise = FourierLoop([[0, 0], [1, 0]], [[0, -1]])
        curve = BoundaryCurve(clockwise)
        self.assertGreater(curve.outer.signed_area(), 0)
        annulus = BoundaryCurve.annulus(0.4, 1.0)
        self.assertLess(annulus.holes[0].signed_area(), 0)
        self.assertAlmostEqual(annulus.area, np.pi * (1 - 0.16), places=10)

    def test_self_intersection_rejected(self):
        # limacon with an inner loop crossing itself at the origin
        limacon = FourierLoop([[0.5, 0], [0.5, 0], [0.5, 0]], [[0, 0.5], [0, 0.5]])
        with self.assertRaises(CurveValidationError):
            BoundaryCurve(limacon)

    def test_overlapping_hole_rejected(self):
        hole = FourierLoop([[0.8, 0], [0.5, 0]], [[0, 0.5]])
        with self.assertRaises(CurveValidationError):
            BoundaryCurve(FourierLoop([[0, 0], [1, 0]], [[0, 1]]), [hole])

    def test_signed_distance_on_annulus(self):
        annulus = BoundaryCurve.annulus(0.4, 1.0)
        points = np.array([[0.7, 0.0], [0.0, -0.5], [0.2, 0.0], [1.2, 0.0]])
        dist = annulus.signed_distance(points)
        np.testing.assert_allclose(dist, [0.3, 0.1, -0.2, -0.2], atol=1e-12)

    def test_ellipse_closest_point_newton(self):
        ellipse = BoundaryCurve.ellipse(1.5, 1.0)
        result = ellipse.closest_points([[0.3, 0.2]])
        foot = result['foot'][0]
        self.assertAlmostEqual((foot[0] / 1.5) ** 2 + foot[1] ** 2, 1.0, places=12)
        rel = np.array([0.3, 0.2]) - foot
        self.assertAlmostEqual(abs(rel[0] * result['normal'][0][1] - rel[1] * result['normal'][0][0]), 0.0, places=10)

    def test_resampling_reproduces_trig_polynomial(self):
        loop = FourierLoop([[0.1, 0], [1, 0.2], [0, 0.05]], [[0, 0.9], [0.03, 0]])
        samples = loop.evaluate(2 * np.pi * np.arange(16) / 16)[0]
        copy = FourierLoop.from_samples(samples)
        s = np.linspace(0, 2 * np.pi, 37)
        np.testing.assert_allclose(copy.evaluate(s)[0], loop.evaluate(s)[0], atol=1e-13)


class DeformationFieldTests(SimpleTestCase):

    def test_trivial_fields(self):
        zero = DeformationField.zero()
        value, jac, hess, third = evaluate_deformation(zero, [0.3, 0.4], order=3)
        self.assertFalse(np.any(value) or np.any(jac) or np.any(hess) or np.any(third))

        shift = DeformationField([ConstantField(0), ConstantField(1)], [0.3, -0.2])
        value, jac = shift.evaluate([1.0, 5.0], order=1)
        np.testing.assert_allclose(value, [0.3, -0.2])
        self.assertFalse(np.any(jac))

        dilation = DeformationField.single(LinearField.dilation(), 0.1)
        value, jac = dilation.evaluate([1.0, 2.0], order=1)
        np.testing.assert_allclose(value, [0.1, 0.2])
        np.testing.assert_allclose(jac, 0.1 * np.eye(2))

    def test_order_above_three_rejected(self):
        with self.assertRaises(DerivativeOrderError):
            evaluate_deformation(bump_field(), [0, 0], order=4)

    def test_closed_form_derivatives_match_finite_differences(self):
        theta = bump_field((0.3, -0.2, 0.25, 0.1))
        rng = np.random.default_rng(3)
        step = 1e-5
        for x in rng.uniform(-1.2, 1.2, size=(5, 2)):
            jet = theta.evaluate(x, order=3)
            for k in range(3):
                for a in range(2):
                    e = np.zeros(2)
                    e[a] = step
                    fd = (theta.evaluate(x + e, order=k)[k] - theta.evaluate(x - e, order=k)[k]) / (2 * step)
                    exact = np.take(jet[k + 1], a, axis=-1)
                    scale = max(1.0, np.abs(exact).max())
                    self.assertLess(np.abs(fd - exact).max() / scale, 1e-6)

    def test_norm_scales_linearly(self):
        domain = BoundaryCurve.circle()
        theta = bump_field()
        box = norm_box(domain)
        self.assertAlmostEqual(theta.scaled(0.37).norm(box) / theta.norm(box), 0.37, places=12)
        self.assertTrue(theta.in_ball(theta.norm(box) * 1.01, box))


class InverseDeformationTests(SimpleTestCase):

    def test_analytic_inverses(self):
        np.testing.assert_allclose(invert_deformation(DeformationField.zero(), [0.2, 0.3]), [0, 0])
        shift = DeformationField([ConstantField(0), ConstantField(1)], [0.2, -0.1])
        np.testing.assert_allclose(invert_deformation(shift, [0.5, 0.5]), [-0.2, 0.1], atol=1e-14)
        dilation = DeformationField.single(LinearField.dilation(), 0.1)
        np.testing.assert_allclose(invert_deformation(dilation, [1.0, 0.0]), [-0.1 / 1.1, 0], atol=1e-12)
        np.testing.assert_allclose(inverse_jacobian(dilation, [0.3, 0.1]), -(0.1 / 1.1) * np.eye(2), atol=1e-12)
        np.testing.assert_allclose(inverse_jacobian(DeformationField.zero(), [0.3, 0.1]), np.zeros((2, 2)))

    def test_round_trip_on_grid(self):
        theta = bump_field()
        xs, ys = np.meshgrid(np.linspace(-0.6, 0.6, 7), np.linspace(-0.6, 0.6, 7))
        z = np.column_stack([xs.ravel(), ys.ravel()])
        x = z + invert_deformation(theta, z, tol=1e-12)
        image = x + theta.evaluate(x)[0]
        self.assertLess(np.abs(image - z).max(), 1e-10)

    def test_jacobian_matches_neumann_series_and_finite_differences(self):
        theta = bump_field()
        z = np.array([0.25, -0.3])
        exact = inverse_jacobian(theta, z)
        np.testing.assert_allclose(neumann_inverse_jacobian(theta, z, terms=8), exact, atol=1e-8)
        step = 1e-5
        for a in range(2):
            e = np.zeros(2)
            e[a] = step
            fd = (invert_deformation(theta, z + e) - invert_deformation(theta, z - e)) / (2 * step)
            np.testing.assert_allclose(fd, exact[:, a], rtol=1e-5, atol=1e-9)

    def test_second_derivative_matches_finite_differences(self):
        theta = bump_field((0.05, -0.04, 0.03, 0.02))
        z = np.array([0.1, 0.4])
        second = inverse_second_derivative(theta, z)
        step = 1e-5
        for b in range(2):
            e = np.zeros(2)
            e[b] = step
            fd = (inverse_jacobian(theta, z + e) - inverse_jacobian(theta, z - e)) / (2 * step)
            np.testing.assert_allclose(fd, second[:, :, b], atol=1e-8)

    def test_divergent_iteration_reported(self):
        expanding = DeformationField.single(LinearField.dilation(), -3.0)
        with self.assertRaises(NonContractiveDeformationError):
            invert_deformation(expanding, [1.0, 0.5])

    def test_composed_field_pulls_back(self):
        theta = bump_field()
        theta_bar = DeformationField.single(LinearField.dilation(), 0.05)
        alpha = ComposedField(theta, theta_bar)
        x = np.array([0.3, -0.2])
        eta = x + theta_bar.evaluate(x)[0]
        np.testing.assert_allclose(alpha.evaluate(eta)[0], theta.evaluate(x)[0], atol=1e-12)
        jac = alpha.evaluate(eta, order=1)[1]
        np.testing.assert_allclose(jac, theta.evaluate(x, order=1)[1] / 1.05, atol=1e-11)


class DeformDomainTests(SimpleTestCase):

    def test_translation_and_dilation_of_circle(self):
        circle = BoundaryCurve.circle()
        s = np.linspace(0, 2 * np.pi, 9)
        moved = deform_domain(circle, DeformationField([ConstantField(0)], [0.3]))
        np.testing.assert_allclose(moved.outer.evaluate(s)[0], circle.outer.evaluate(s)[0] + [0.3, 0])
        grown = deform_domain(circle, DeformationField.single(LinearField.dilation(), 0.1))
        radii = np.hypot(*grown.outer.evaluate(s)[0].T)
        np.testing.assert_allclose(radii, 1.1)
        same = deform_domain(circle, DeformationField.zero())
        np.testing.assert_array_equal(same.outer.evaluate(s)[0], circle.outer.evaluate(s)[0])

    def test_image_derivatives_by_chain_rule(self):
        image = deform_domain(BoundaryCurve.ellipse(1.5, 1.0), bump_field())
        s = np.array([0.3, 2.0])
        step = 1e-5
        jet = image.outer.evaluate(s, order=3)
        for k in range(3):
            fd = (image.outer.evaluate(s + step, order=k)[k] - image.outer.evaluate(s - step, order=k)[k]) / (2 * step)
            np.testing.assert_allclose(fd, jet[k + 1], rtol=1e-6, atol=1e-8)

    def test_resampling_error_decreases(self):
        image = deform_domain(BoundaryCurve.ellipse(1.5, 1.0), bump_field())
        self.assertLess(image.resampling_error(64), image.resampling_error(16))

    def test_folding_field_rejected(self):
        fold = DeformationField.single(LinearField([[-1.5, 0], [0, 0]]), 1.0)
        with self.assertRaises(DeformationError):
            deform_domain(BoundaryCurve.circle(), fold)

    @override_settings(ROBIN_NORM_GRID=20)
    def test_jacobian_check_uses_configured_grid(self):
        theta = DeformationField.single(LinearField.dilation(), 0.1)
        with mock.patch.object(theta, 'evaluate', wraps=theta.evaluate) as spy:
            deform_domain(BoundaryCurve.circle(), theta)
        self.assertEqual(spy.call_args_list[0].args[0].shape, (400, 2))

    def test_image_loop_signed_areas(self):
        annulus = BoundaryCurve.annulus(0.45, 1.0)
        image = deform_domain(annulus, DeformationField.single(LinearField.dilation(), 0.1))
        np.testing.assert_allclose(image.signed_areas(), [np.pi * 1.21, -np.pi * 0.45 ** 2 * 1.21], rtol=1e-10)
        self.assertAlmostEqual(image.area, np.pi * 1.21 * (1 - 0.45 ** 2), places=10)


class SerializerTests(SimpleTestCase):

    def test_named_and_raw_shapes(self):
        domain, theta = load_domain({'shape': 'annulus', 'radii': [0.45, 1.0]})
        self.assertEqual(domain.n_loops, 2)
        self.assertTrue(theta.is_zero)
        raw = {
            'outer': {'cos': [[0, 0], [1, 0]], 'sin': [[0, 1]]},
            'theta': {'basis': [{'type': 'linear', 'matrix': [[1, 0], [0, 1]]}], 'coeffs': [0.1]},
        }
        domain, theta = load_domain(raw)
        self.assertAlmostEqual(domain.area, np.pi * 1.21, places=8)

    def test_perturbed_annulus(self):
        domain, _ = load_domain({'shape': 'perturbed_annulus', 'radii': [0.45, 1.0], 'amplitude': 0.05, 'mode': 3})
        self.assertEqual(domain.n_loops, 2)
        s = np.linspace(0, 2 * np.pi, 7)
        radius = np.linalg.norm(domain.outer.evaluate(s)[0], axis=1)
        np.testing.assert_allclose(radius, 1.0 + 0.05 * np.cos(3 * s), atol=1e-12)
        self.assertAlmostEqual(domain.area, np.pi * (1.0 + 0.05 ** 2 / 2 - 0.45 ** 2), places=8)

    def test_bad_documents_rejected(self):
        with self.assertRaises(GeometrySpecError):
            load_domain({'shape': 'triangle'})
        with self.assertRaises(GeometrySpecError):
            load_domain({'outer': {'cos': [[0, 0], [1, 0]], 'sin': [[0, 1]]},
                         'theta': {'basis': [{'type': 'spline'}], 'coeffs': [1]}})
