import numpy as np
from django.test import SimpleTestCase

from geometry.curves import BoundaryCurve
from geometry.deformations import ComposedField, ConstantField, DeformationField, LinearField, TrigBumpField
from harmonic_solver.operators import build_solver

from .exceptions import ClearanceError, ExponentError, StripQuadratureError
from .services import (
    DECOMPOSITION,
    FINITE_DIFFERENCE,
    gateaux_F,
    shape_derivative_gradient,
    shape_derivative_regular_part,
    transported_regular_part,
    transported_residual,
)
from .sources import boundary_datum, source_term
from .surjectivity import (
    build_strip,
    build_surjectivity_field,
    cutoff_jet,
    distance_jet,
    sigma0,
    sigma_estimate,
    surjectivity_matrix,
)

ELLIPSE = BoundaryCurve.ellipse(1.5, 1.0)
PROBES = np.array([[0.3, 0.2], [-0.5, 0.1], [0.0, -0.4], [0.6, -0.3], [-0.2, 0.5]])
POLE = np.array([0.1, 0.05])


def bump(component, modes, kinds, coefficient=0.1):
    element = TrigBumpField(component, modes, kinds, radius=2.5, wavelength=4.0)
    return DeformationField.single(element, coefficient)


def basis_deformations():
    return [
        bump(0, (1, 0), 'cc'),
        bump(1, (0, 1), 'cs'),
        bump(0, (1, 1), 'sc'),
        bump(1, (2, 0), 'cc', 0.05),
        bump(0, (0, 2), 'cs', 0.05) + bump(1, (1, 0), 'sc', 0.05),
    ]


def relative_error(a, b):
    return np.abs(np.asarray(a) - np.asarray(b)).max() / max(1.0, np.abs(b).max())


class SourceTests(SimpleTestCase):

    def test_source_is_laplacian_of_transport(self):
        # v = x^2 - y^2, theta = (x^2, 0): theta . grad v = 2 x^3, Laplacian 12 x
        x = np.array([[0.3, -0.2], [-0.7, 0.4]])
        m = x.shape[0]
        v_jet = [
            x[:, 0] ** 2 - x[:, 1] ** 2,
            np.column_stack([2 * x[:, 0], -2 * x[:, 1]]),
            np.broadcast_to(np.diag([2.0, -2.0]), (m, 2, 2)),
        ]
        jac = np.zeros((m, 2, 2))
        jac[:, 0, 0] = 2 * x[:, 0]
        hess = np.zeros((m, 2, 2, 2))
        hess[:, 0, 0, 0] = 2.0
        theta_jet = [np.column_stack([x[:, 0] ** 2, np.zeros(m)]), jac, hess]
        np.testing.assert_allclose(source_term(v_jet, theta_jet), 12 * x[:, 0])

    def test_translation_datum_vanishes(self):
        theta = DeformationField.single(ConstantField(1), 0.3)
        nodes = build_solver(ELLIPSE, 64).nodes
        np.testing.assert_array_equal(boundary_datum(nodes, POLE, theta), 0.0)


class TransportedResidualTests(SimpleTestCase):

    def test_trivial_deformations(self):
        disk = BoundaryCurve.circle()
        xi = [0.2, 0.0]
        self.assertLess(transported_residual(disk, DeformationField.zero(), xi), 1e-7)
        translation = DeformationField.single(ConstantField(0), 0.1)
        self.assertLess(transported_residual(disk, translation, xi), 1e-7)

    def test_dilated_disk(self):
        dilation = DeformationField.single(LinearField.dilation(), 0.05)
        self.assertLess(transported_residual(BoundaryCurve.circle(), dilation, [0.2, 0.0]), 1e-4)


class RegularPartDerivativeTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.op = build_solver(ELLIPSE, 128)

    def test_zero_and_translation_give_zero(self):
        for theta in (DeformationField.zero(), DeformationField.single(ConstantField(0), 0.2)):
            u = shape_derivative_regular_part(self.op, POLE, theta)
            np.testing.assert_allclose(u.evaluate(PROBES)[0], 0.0, atol=1e-14)

    def test_linearity(self):
        theta1, theta2 = bump(0, (1, 0), 'cc'), bump(1, (0, 1), 'cs')
        u1 = shape_derivative_regular_part(self.op, POLE, theta1).evaluate(PROBES)[0]
        u2 = shape_derivative_regular_part(self.op, POLE, theta2).evaluate(PROBES)[0]
        total = shape_derivative_regular_part(self.op, POLE, theta1 + theta2).evaluate(PROBES)[0]
        scaled = shape_derivative_regular_part(self.op, POLE, theta1.scaled(3.0)).evaluate(PROBES)[0]
        self.assertLess(relative_error(total, u1 + u2), 1e-8)
        self.assertLess(relative_error(scaled, 3 * u1), 1e-8)

    def test_matches_deformed_domain_differences(self):
        t = 1e-3
        for theta in basis_deformations():
            u = shape_derivative_regular_part(self.op, POLE, theta).evaluate(PROBES)[0]
            plus = transported_regular_part(ELLIPSE, theta.scaled(t), POLE, PROBES, 128)[0]
            minus = transported_regular_part(ELLIPSE, theta.scaled(-t), POLE, PROBES, 128)[0]
            self.assertLess(relative_error(u, (plus - minus) / (2 * t)), 1e-3, msg=repr(theta.to_dict()))

    def test_difference_quotients_converge_quadratically(self):
        theta = bump(0, (1, 1), 'sc')

        def quotient(t):
            plus = transported_regular_part(ELLIPSE, theta.scaled(t), POLE, PROBES, 128)[0]
            minus = transported_regular_part(ELLIPSE, theta.scaled(-t), POLE, PROBES, 128)[0]
            return (plus - minus) / (2 * t)

        q1, q2, q3 = quotient(0.04), quotient(0.02), quotient(0.01)
        ratio = np.abs(q1 - q2).max() / np.abs(q2 - q3).max()
        self.assertGreater(ratio, 2.5)
        self.assertLess(ratio, 6.0)

    def test_gradient_commutes_with_shape_derivative(self):
        theta = bump(0, (1, 0), 'cc') + bump(1, (1, 1), 'cs', 0.05)
        gradient = shape_derivative_regular_part(self.op, POLE, theta).evaluate(PROBES, order=1)[1]
        for p in (1, 2):
            u_p = shape_derivative_gradient(self.op, POLE, theta, p).evaluate(PROBES)[0]
            self.assertLess(relative_error(u_p, gradient[:, p - 1]), 1e-3)

    def test_gradient_matches_differences(self):
        t = 1e-3
        theta = bump(1, (0, 1), 'cs')
        plus = transported_regular_part(ELLIPSE, theta.scaled(t), POLE, PROBES, 128)[1]
        minus = transported_regular_part(ELLIPSE, theta.scaled(-t), POLE, PROBES, 128)[1]
        for p in (1, 2):
            u_p = shape_derivative_gradient(self.op, POLE, theta, p).evaluate(PROBES)[0]
            self.assertLess(relative_error(u_p, (plus - minus)[:, p - 1] / (2 * t)), 1e-3)

    def test_zero_gradient_field(self):
        u_p = shape_derivative_gradient(self.op, POLE, DeformationField.zero(), 1)
        np.testing.assert_array_equal(u_p.evaluate(PROBES)[0], 0.0)

    def test_unknown_datum_rejected(self):
        with self.assertRaises(ValueError):
            shape_derivative_gradient(self.op, POLE, bump(0, (1, 0), 'cc'), 1, datum='guess')


class GateauxTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.disk = build_solver(BoundaryCurve.circle(), 128)

    def test_trivial_directions_on_disk(self):
        center = [0.0, 0.0]
        for alpha in (
            DeformationField.zero(),
            DeformationField.single(ConstantField(1), 0.5),
            DeformationField.single(LinearField.dilation(), 0.1),
        ):
            value = gateaux_F(self.disk, center, None, alpha).value
            np.testing.assert_allclose(value, [0.0, 0.0], atol=1e-8)

    def test_frames_and_methods_agree(self):
        op = build_solver(ELLIPSE, 128)
        x_bar = np.array([0.2, 0.1])
        theta_bar = bump(1, (1, 0), 'cc', 0.04)
        theta = bump(0, (1, 1), 'sc')
        pulled = gateaux_F(op, x_bar, theta_bar, theta).value
        decomposed = gateaux_F(op, x_bar, theta_bar, theta, method=DECOMPOSITION).value
        differenced = gateaux_F(op, x_bar, theta_bar, theta, method=FINITE_DIFFERENCE).value
        self.assertLess(relative_error(pulled, differenced), 1e-2)
        self.assertLess(relative_error(decomposed, pulled), 1e-3)

    def test_deformed_frame_takes_the_pushed_forward_field(self):
        op = build_solver(ELLIPSE, 128)
        x_bar = np.array([0.2, 0.1])
        theta_bar = bump(1, (1, 0), 'cc', 0.04)
        theta = bump(0, (1, 1), 'sc')
        base = gateaux_F(op, x_bar, theta_bar, theta, frame='base')
        deformed = gateaux_F(op, x_bar, theta_bar, ComposedField(theta, theta_bar), frame='deformed')
        self.assertLess(relative_error(deformed.value, base.value), 1e-10)
        self.assertEqual(deformed.diagnostics['frame'], 'deformed')
        # theta read directly on the deformed domain is a different direction
        unmapped = gateaux_F(op, x_bar, theta_bar, theta, frame='deformed')
        self.assertGreater(relative_error(unmapped.value, base.value), 1e-6)

    def test_finite_difference_needs_base_frame(self):
        with self.assertRaises(ValueError):
            gateaux_F(self.disk, [0.0, 0.0], None, bump(0, (1, 0), 'cc'), method=FINITE_DIFFERENCE, frame='deformed')


class CutoffTests(SimpleTestCase):

    def test_plateaus_and_midpoint(self):
        rho = 0.1
        for kind in ('quintic', 'septic'):
            chi = cutoff_jet([0.05, 0.15, 0.25], rho, kind)
            np.testing.assert_allclose(chi[0], [1.0, 0.5, 0.0], atol=1e-14)
            np.testing.assert_array_equal([chi[k][0] for k in (1, 2, 3)], 0.0)
        self.assertAlmostEqual(cutoff_jet([0.15], rho)[1][0], -15 / (8 * rho))

    def test_derivatives_match_differences(self):
        s, h = np.array([0.12, 0.137, 0.18]), 1e-6
        for kind in ('quintic', 'septic'):
            chi = cutoff_jet(s, 0.1, kind)
            for k in range(3):
                upper = cutoff_jet(s + h, 0.1, kind)[k]
                lower = cutoff_jet(s - h, 0.1, kind)[k]
                np.testing.assert_allclose((upper - lower) / (2 * h), chi[k + 1], rtol=1e-5, atol=1e-3)


class DistanceJetTests(SimpleTestCase):

    def test_disk_closed_form(self):
        x = np.array([[0.3, 0.4]])
        d, grad, hess, _ = distance_jet(BoundaryCurve.circle(), x)
        unit = x[0] / 0.5
        self.assertAlmostEqual(d[0], 0.5, places=12)
        np.testing.assert_allclose(grad[0], -unit, atol=1e-12)
        np.testing.assert_allclose(hess[0], -(np.eye(2) - np.outer(unit, unit)) / 0.5, atol=1e-10)

    def test_ellipse_third_derivatives(self):
        x = np.array([[0.3, 0.5], [-0.9, 0.3], [0.2, -0.6]])
        h = 1e-5
        third = distance_jet(ELLIPSE, x)[3]
        for k in range(2):
            shift = h * np.eye(2)[k]
            upper = distance_jet(ELLIPSE, x + shift)[2]
            lower = distance_jet(ELLIPSE, x - shift)[2]
            np.testing.assert_allclose((upper - lower) / (2 * h), third[..., k], atol=1e-6)


class SurjectivityFieldTests(SimpleTestCase):

    def setUp(self):
        self.field = build_surjectivity_field(BoundaryCurve.circle(), 1, [0.0, 0.0], 0.1, exponent=4)

    def test_support_and_plateau(self):
        values = self.field.evaluate(np.array([[0.2, 0.0], [0.9, 0.0], [0.999, 0.0]]))[0]
        np.testing.assert_allclose(values[:, 0], [0.0, 0.81, 0.998001], atol=1e-12)
        np.testing.assert_array_equal(values[:, 1], 0.0)
        np.testing.assert_array_equal(self.field.evaluate([0.0, 0.0])[0], 0.0)

    def test_derivatives_match_differences(self):
        # d = 0.6, d^4 inside the transition (rho_bar, 2 rho_bar)
        x = 0.4 * np.array([[np.cos(1.0), np.sin(1.0)], [np.cos(2.5), np.sin(2.5)]])
        jet = self.field.evaluate(x, order=3)
        h = 1e-5
        for k in range(2):
            shift = h * np.eye(2)[k]
            upper = self.field.evaluate(x + shift, order=2)
            lower = self.field.evaluate(x - shift, order=2)
            for order in range(3):
                scale = max(1.0, np.abs(jet[order + 1]).max())
                np.testing.assert_allclose(
                    (upper[order] - lower[order]) / (2 * h), jet[order + 1][..., k], atol=1e-4 * scale,
                )

    def test_clearance_violation_reports_range(self):
        with self.assertRaises(ClearanceError) as ctx:
            build_surjectivity_field(BoundaryCurve.circle(), 1, [0.0, 0.0], 0.3)
        self.assertAlmostEqual(ctx.exception.admissible[1], 0.25, places=6)

    def test_small_exponent_needs_flag(self):
        with self.assertRaises(ExponentError):
            build_surjectivity_field(BoundaryCurve.circle(), 2, [0.0, 0.0], 0.1, exponent=2)
        field = build_surjectivity_field(
            BoundaryCurve.circle(), 2, [0.0, 0.0], 0.1, exponent=2, allow_small_exponent=True,
        )
        self.assertEqual(field.exponent, 2)


class SigmaTests(SimpleTestCase):

    def test_sigma0_is_minus_one(self):
        cases = [
            (BoundaryCurve.circle(), [0.0, 0.0]),
            (ELLIPSE, [0.0, 0.0]),
            (BoundaryCurve.annulus(0.45, 1.0), [0.72, 0.0]),
        ]
        for domain, center in cases:
            self.assertAlmostEqual(sigma0(build_solver(domain, 128), center), -1.0, delta=1e-8)

    def test_strip_area_on_disk(self):
        op = build_solver(BoundaryCurve.circle(), 128)
        strip = build_strip(op, 0.05, 4)
        area = np.pi * ((1 - strip.inner) ** 2 - (1 - strip.outer) ** 2)
        self.assertAlmostEqual(strip.weights.sum(), area, places=10)

    def test_overlapping_strips_rejected(self):
        op = build_solver(BoundaryCurve.annulus(0.45, 1.0), 128)
        with self.assertRaises(StripQuadratureError):
            build_strip(op, 0.05, 4)

    def test_ellipse_cross_terms_vanish_by_symmetry(self):
        op = build_solver(ELLIPSE, 128)
        diagonal = sigma_estimate(op, 1, 1, [0.0, 0.0], 0.05)
        cross = sigma_estimate(op, 1, 2, [0.0, 0.0], 0.05)
        self.assertLess(abs(cross.value), 1e-6 * max(1.0, abs(diagonal.value)))
        self.assertGreater(cross.collar_bound, 0.0)

    def test_bound_grows_faster_for_small_exponent(self):
        op = build_solver(BoundaryCurve.circle(), 256)

        def growth(exponent):
            coarse, fine = (
                sigma_estimate(op, 1, 1, [0.0, 0.0], rho, exponent, allow_small_exponent=True).bound
                for rho in (0.1, 0.05)
            )
            return fine / coarse

        self.assertGreater(growth(2), growth(4))


class SurjectivityMatrixTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.disk = build_solver(BoundaryCurve.circle(), 128)

    def test_disk_center(self):
        report = surjectivity_matrix(self.disk, [0.0, 0.0], 0.05)
        np.testing.assert_allclose(report.matrix, -np.eye(2), atol=1e-6)
        np.testing.assert_allclose(report.direct, -np.eye(2), atol=1e-6)
        self.assertGreater(report.smin, 0.8)
        self.assertLess(report.method_delta, 1e-2)
        self.assertFalse(report.flagged)
        summary = report.as_dict()
        self.assertEqual(summary['a'], 4)
        self.assertEqual(len(summary['rows']), 2)

    def test_off_diagonals_stay_small_across_sweep(self):
        for rho in (0.2, 0.1, 0.05):
            for q, p in ((1, 2), (2, 1)):
                self.assertLess(abs(sigma_estimate(self.disk, q, p, [0.0, 0.0], rho).value), 1e-8)
