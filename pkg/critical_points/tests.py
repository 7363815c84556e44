from types import SimpleNamespace
from unittest import mock

import numpy as np
from django.test import SimpleTestCase

from geometry.curves import BoundaryCurve
from harmonic_solver.exceptions import SolverError
from harmonic_solver.operators import build_solver

from .exceptions import AsymmetricHessianError, NoConvergentStartError
from .services import (
    DEGENERATE,
    MAXIMUM,
    MINIMUM,
    SADDLE,
    CriticalPoint,
    F_map,
    classify_nondegeneracy,
    find_critical_points,
    multistart_grid,
    summarize,
)


class ClassificationTests(SimpleTestCase):

    def test_signatures(self):
        tag, eigenvalues = classify_nondegeneracy(2 * np.eye(2))
        self.assertEqual(tag, MINIMUM)
        np.testing.assert_allclose(eigenvalues, [2, 2])
        self.assertEqual(classify_nondegeneracy(np.diag([3.0, -1.0]))[0], SADDLE)
        self.assertEqual(classify_nondegeneracy(-np.eye(2))[0], MAXIMUM)
        self.assertEqual(classify_nondegeneracy(np.diag([5e-9, 1.0]), 1e-6)[0], DEGENERATE)

    def test_eigenvalues_are_ascending(self):
        _, eigenvalues = classify_nondegeneracy([[1.0, 2.0], [2.0, -3.0]])
        np.testing.assert_allclose(eigenvalues, np.linalg.eigvalsh([[1.0, 2.0], [2.0, -3.0]]))

    def test_asymmetric_hessian_rejected(self):
        with self.assertRaises(AsymmetricHessianError):
            classify_nondegeneracy([[1.0, 0.1], [0.0, 1.0]])


class FMapTests(SimpleTestCase):

    def test_disk_and_ellipse(self):
        disk = build_solver(BoundaryCurve.circle(), 128)
        np.testing.assert_allclose(F_map(disk, [0.0, 0.0]), [0, 0], atol=1e-10)
        np.testing.assert_allclose(F_map(disk, [0.3, 0.0]), [0.3 / 0.91, 0], atol=1e-9)
        ellipse = build_solver(BoundaryCurve.ellipse(1.5, 1.0), 128)
        np.testing.assert_allclose(F_map(ellipse, [0.0, 0.0]), [0, 0], atol=1e-10)


class MultistartTests(SimpleTestCase):

    def test_disk_has_one_minimum(self):
        points = find_critical_points(build_solver(BoundaryCurve.circle(), 128), grid_density=8)
        self.assertEqual(len(points), 1)
        self.assertLess(np.linalg.norm(points[0].location), 1e-8)
        np.testing.assert_allclose(points[0].eigenvalues, [2, 2], atol=1e-6)
        self.assertEqual(points[0].classification, MINIMUM)
        self.assertLessEqual(points[0].residual, 1e-8)

    def test_ellipse_center_with_split_eigenvalues(self):
        ellipse = build_solver(BoundaryCurve.ellipse(1.5, 1.0), 128)
        points = find_critical_points(ellipse, grid_density=8)
        self.assertEqual(len(points), 1)
        lam1, lam2 = points[0].eigenvalues
        self.assertGreater(lam1, 0)
        self.assertGreater(lam2 - lam1, 0.1 * lam1)

        refined = find_critical_points(build_solver(BoundaryCurve.ellipse(1.5, 1.0), 256), grid_density=8)
        self.assertLess(np.linalg.norm(refined[0].location - points[0].location), 1e-5)

    def test_annulus_critical_circle_is_degenerate(self):
        points = find_critical_points(build_solver(BoundaryCurve.annulus(0.45, 1.0), 128), grid_density=8)
        radii = np.array([np.linalg.norm(point.location) for point in points])
        self.assertLess(np.ptp(radii), 4e-3)
        for point in points:
            self.assertLess(point.min_abs_eigenvalue, 1e-3)
            self.assertEqual(point.classification, DEGENERATE)
        for i, a in enumerate(points):
            for b in points[i + 1:]:
                self.assertGreater(np.linalg.norm(a.location - b.location), 1e-7)
        summary = summarize(points)
        self.assertEqual(summary['counts'][DEGENERATE], len(points))
        self.assertFalse(summary['all_nondegenerate'])

    def test_no_convergent_start_reported(self):
        disk = build_solver(BoundaryCurve.circle(), 64)
        with self.assertRaises(NoConvergentStartError):
            find_critical_points(disk, grid_density=8, newton_tol=1e-30, max_iter=1)

    def test_grid_density_validated(self):
        with self.assertRaises(ValueError):
            find_critical_points(build_solver(BoundaryCurve.circle(), 64), grid_density=4)

    def test_solver_failure_is_not_reported_as_no_convergence(self):
        disk = build_solver(BoundaryCurve.circle(), 64)
        with mock.patch('critical_points.services.robin_jet', side_effect=SolverError('factorization failed')):
            with self.assertRaises(SolverError) as ctx:
                find_critical_points(disk, grid_density=8)
        self.assertNotIsInstance(ctx.exception, NoConvergentStartError)

    def test_root_reached_on_the_last_iteration_is_kept(self):
        # t = |x - c|^2 is solved exactly by one Newton step
        target = np.array([0.1, -0.05])

        def quadratic_jet(op, x):
            return SimpleNamespace(gradient=2 * (np.asarray(x) - target), hessian=2 * np.eye(2))

        disk = build_solver(BoundaryCurve.circle(), 64)
        with mock.patch('critical_points.services.robin_jet', side_effect=quadratic_jet):
            points = find_critical_points(disk, grid_density=8, max_iter=1, workers=1)
        self.assertEqual(len(points), 1)
        np.testing.assert_allclose(points[0].location, target, atol=1e-12)
        self.assertEqual(points[0].classification, MINIMUM)

    def test_thin_domains_refine_the_start_grid(self):
        annulus = BoundaryCurve.annulus(0.45, 1.0)
        starts = multistart_grid(annulus, 10, 0.25)
        self.assertGreaterEqual(len(starts), 10)
        self.assertTrue(np.all(annulus.signed_distance(starts) > 0.25))


class SummaryTests(SimpleTestCase):

    def test_radii_are_measured_from_the_centroid(self):
        annulus = BoundaryCurve.annulus(0.45, 1.0, center=(2.0, 1.0))
        angles = np.array([0.0, 2.0, 4.0])
        points = [
            CriticalPoint(annulus.centroid + 0.7 * np.array([np.cos(a), np.sin(a)]), 0.0, np.zeros((2, 2)),
                          np.array([-1e-6, 1.0]), DEGENERATE, index)
            for index, a in enumerate(angles)
        ]
        summary = summarize(points, center=annulus.centroid)
        self.assertAlmostEqual(summary['mean_radius'], 0.7, places=8)
        self.assertLess(summary['radial_spread'], 1e-8)
        self.assertGreater(summarize(points)['mean_radius'], 1.5)

