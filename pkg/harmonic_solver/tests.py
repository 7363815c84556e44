import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase, override_settings

from geometry.curves import BoundaryCurve

from .dumps import read_matrix, write_matrix
from .exceptions import NearBoundaryError, OutsideDomainError, SolverError
from .operators import (
    build_solver,
    circle_average,
    eval_interior,
    harmonic_measure_density,
    solve_dirichlet,
    solve_dirichlet_batch,
)
from .poisson import build_volume_grid, newton_potential, solve_poisson


def re_power(k):
    return lambda p: ((p[:, 0] + 1j * p[:, 1]) ** k).real


def two_hole_disk():
    return BoundaryCurve(
        BoundaryCurve.circle().outer,
        [BoundaryCurve.circle(0.15, (-0.45, 0)).outer, BoundaryCurve.circle(0.15, (0.45, 0)).outer],
    )


class DirichletSolveTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.disk64 = build_solver(BoundaryCurve.circle(), 64)
        cls.disk128 = build_solver(BoundaryCurve.circle(), 128)

    def test_operator_shape_and_residual(self):
        self.assertEqual(self.disk64.matrix.shape, (64, 64))
        self.assertLess(self.disk64.factorization_residual, 1e-10)
        annulus = build_solver(BoundaryCurve.annulus(0.4, 1.0), 48)
        self.assertEqual(annulus.matrix.shape, (97, 97))

    def test_exclusion_radius_is_five_node_spacings(self):
        for op in (self.disk64, build_solver(BoundaryCurve.annulus(0.4, 1.0), 48)):
            self.assertAlmostEqual(op.near_radius, 5 * op.node_spacing, places=14)
        self.assertAlmostEqual(self.disk64.node_spacing, 2 * np.pi / 64, places=12)

    def test_node_count_validated(self):
        with self.assertRaises(SolverError):
            build_solver(BoundaryCurve.circle(), 15)
        for n in (16, 30):
            with self.assertRaises(SolverError):
                build_solver(BoundaryCurve.circle(), n)
        with self.assertRaises(SolverError):
            build_solver(BoundaryCurve.circle(), 8)

    def test_constants_are_reproduced(self):
        density = solve_dirichlet(self.disk64, lambda p: np.ones(len(p)))
        value, grad, hess = eval_interior(density, [0.3, 0.2], order=2)
        self.assertAlmostEqual(value, 1.0, places=12)
        self.assertLess(np.abs(grad).max(), 1e-9)
        self.assertLess(np.abs(hess).max(), 1e-9)

    def test_zero_data_gives_zero_density(self):
        density = solve_dirichlet(self.disk64, np.zeros(64))
        self.assertFalse(np.any(density.values))

    def test_harmonic_polynomials(self):
        density = solve_dirichlet(self.disk64, re_power(3))
        self.assertAlmostEqual(eval_interior(density, [0.2, 0.1])[0], ((0.2 + 0.1j) ** 3).real, places=10)
        density = solve_dirichlet(self.disk64, lambda p: p[:, 0])
        x = np.array([0.5, 0.5]) / np.sqrt(2)
        self.assertLess(abs(eval_interior(density, x)[0] - x[0]), 1e-11)
        for k in range(1, 6):
            density = solve_dirichlet(self.disk128, re_power(k))
            probe = np.array([[0.4, -0.3]])
            self.assertLess(abs(eval_interior(density, probe)[0][0] - re_power(k)(probe)[0]), 1e-8)

    def test_radial_logarithm_on_annulus(self):
        op = build_solver(BoundaryCurve.annulus(0.4, 1.0), 128)
        density = solve_dirichlet(op, lambda p: np.log(np.hypot(p[:, 0], p[:, 1])))
        x = 0.7 * np.array([np.cos(1.0), np.sin(1.0)])
        self.assertLess(abs(eval_interior(density, x)[0] - np.log(0.7)), 1e-8)

    def test_hessian_and_finite_difference_gradient(self):
        density = solve_dirichlet(self.disk128, re_power(2))
        x = np.array([0.25, -0.35])
        value, grad, hess, third = eval_interior(density, x, order=3)
        np.testing.assert_allclose(hess, [[2, 0], [0, -2]], atol=1e-8)
        self.assertEqual(third.shape, (2, 2, 2))
        self.assertLess(np.abs(third).max(), 1e-7)
        self.assertEqual(hess[0, 1], hess[1, 0])

        density = solve_dirichlet(self.disk128, lambda p: np.exp(p[:, 0]) * np.cos(p[:, 1]))
        grad = eval_interior(density, x, order=1)[1]
        step = 1e-5
        fd = [
            (eval_interior(density, x + e)[0] - eval_interior(density, x - e)[0]) / (2 * step)
            for e in step * np.eye(2)
        ]
        np.testing.assert_allclose(fd, grad, rtol=1e-6)

    def test_maximum_principle(self):
        g = lambda p: p[:, 0] ** 2 - p[:, 1] ** 2 + 2
        density = solve_dirichlet(self.disk128, g)
        grid = self.disk128.domain.interior_grid(15, self.disk128.near_radius)
        values = eval_interior(density, grid)[0]
        boundary = g(self.disk128.nodes)
        self.assertGreaterEqual(values.min(), boundary.min() - 1e-9)
        self.assertLessEqual(values.max(), boundary.max() + 1e-9)

    def test_spectral_convergence(self):
        exact = lambda p: (1.0 / (p[:, 0] + 1j * p[:, 1] - 1.2)).real
        probe = np.array([[0.1, 0.05]])
        errors = []
        for n in (64, 128):
            density = solve_dirichlet(build_solver(BoundaryCurve.circle(), n), exact)
            errors.append(abs(eval_interior(density, probe)[0][0] - exact(probe)[0]))
        self.assertLess(errors[1], 1e-2 * errors[0] + 1e-14)

    def test_mean_value_property(self):
        density = solve_dirichlet(self.disk128, lambda p: re_power(4)(p) + p[:, 0])
        center = np.array([0.1, 0.1])
        average = circle_average(density, center, 0.3)
        self.assertLess(abs(average - eval_interior(density, center)[0]), 1e-7)

    def test_batch_solve_matches_single_solves(self):
        data = np.column_stack([re_power(1)(self.disk64.nodes), re_power(2)(self.disk64.nodes)])
        batch = solve_dirichlet_batch(self.disk64, data)
        single = solve_dirichlet(self.disk64, data[:, 1])
        np.testing.assert_allclose(batch[1].values, single.values, atol=1e-14)

    def test_points_near_or_outside_rejected(self):
        density = solve_dirichlet(self.disk64, re_power(1))
        with self.assertRaises(NearBoundaryError) as ctx:
            eval_interior(density, [0.95, 0.0])
        self.assertAlmostEqual(ctx.exception.distance, 0.05, places=8)
        self.assertEqual(ctx.exception.radius, self.disk64.near_radius)
        with self.assertRaises(OutsideDomainError):
            eval_interior(density, [1.5, 0.0])


class CollarEvaluationTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.op = build_solver(BoundaryCurve.ellipse(1.5, 1.0), 128)

    def test_boundary_values_match_data(self):
        g = lambda p: np.exp(0.5 * p[:, 0]) * np.sin(0.5 * p[:, 1]) + p[:, 0] * p[:, 1]
        density = solve_dirichlet(self.op, g)
        values = density.evaluate(self.op.nodes, near='collar')[0]
        np.testing.assert_allclose(values, g(self.op.nodes), atol=1e-10)

    def test_jets_inside_the_collar(self):
        density = solve_dirichlet(self.op, re_power(3))
        points = np.array([[1.49, 0.0], [0.0, -0.97], [1.0, 0.72]])
        value, grad, hess = density.evaluate(points, order=2, near='collar')
        z = points[:, 0] + 1j * points[:, 1]
        np.testing.assert_allclose(value, (z ** 3).real, atol=1e-9)
        np.testing.assert_allclose(grad[:, 0], (3 * z ** 2).real, atol=1e-8)
        np.testing.assert_allclose(grad[:, 1], (3j * z ** 2).real, atol=1e-8)
        np.testing.assert_allclose(hess[:, 0, 0], (6 * z).real, atol=1e-7)

    def test_collar_agrees_with_plain_evaluation_far_away(self):
        density = solve_dirichlet(self.op, re_power(2))
        x = np.array([[0.2, 0.1]])
        np.testing.assert_allclose(
            density.evaluate(x, order=1, near='collar')[1], eval_interior(density, x, order=1)[1], atol=1e-12
        )


class HarmonicMeasureTests(SimpleTestCase):

    def test_disk_center_and_poisson_kernel(self):
        op = build_solver(BoundaryCurve.circle(), 128)
        np.testing.assert_allclose(harmonic_measure_density(op, [0.0, 0.0]), -1 / (2 * np.pi), atol=1e-10)
        y = np.array([0.5, 0.0])
        expected = -(1 - 0.25) / (2 * np.pi * ((op.nodes - y) ** 2).sum(axis=1))
        np.testing.assert_allclose(harmonic_measure_density(op, y), expected, atol=1e-8)

    def test_total_mass_is_minus_one(self):
        cases = [
            (BoundaryCurve.ellipse(1.5, 1.0), [0.3, -0.2]),
            (BoundaryCurve.annulus(0.45, 1.0), [0.0, 0.7]),
        ]
        for domain, y in cases:
            op = build_solver(domain, 128)
            total = np.dot(op.weights, harmonic_measure_density(op, y))
            self.assertAlmostEqual(total, -1.0, places=8)

    def test_pole_in_exclusion_zone_rejected(self):
        op = build_solver(BoundaryCurve.circle(), 64)
        with self.assertRaises(NearBoundaryError):
            harmonic_measure_density(op, [0.9, 0.0])


class PoissonTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.disk = build_solver(BoundaryCurve.circle(), 128)

    def test_volume_grids(self):
        grid = build_volume_grid(BoundaryCurve.circle())
        self.assertAlmostEqual(grid.integrate(np.ones(len(grid))), np.pi, places=12)
        grid = build_volume_grid(BoundaryCurve.annulus(0.4, 1.0))
        self.assertAlmostEqual(grid.weights.sum(), np.pi * 0.84, places=12)
        grid = build_volume_grid(two_hole_disk(), angular_nodes=256)
        self.assertIn('blended', repr(grid))
        self.assertLess(abs(grid.weights.sum() - np.pi * (1 - 2 * 0.15 ** 2)), 1e-3)
        self.assertTrue(np.all(two_hole_disk().signed_distance(grid.points) > -1e-12))

    def test_zero_source_reduces_to_dirichlet(self):
        g = lambda p: p[:, 0] * p[:, 1]
        solution = solve_poisson(self.disk, None, g)
        density = solve_dirichlet(self.disk, g)
        x = np.array([0.3, -0.4])
        self.assertAlmostEqual(solution.evaluate(x)[0], eval_interior(density, x)[0], places=14)

    def test_constant_source(self):
        solution = solve_poisson(self.disk, lambda p: np.full(len(p), 4.0), lambda p: (p ** 2).sum(axis=1))
        self.assertLess(abs(solution.evaluate([0.3, -0.2])[0] - 0.13), 1e-5)

    def test_newton_potential_of_constant(self):
        # N[1] on the unit disk is (|x|^2 - 1) / 4
        values = newton_potential(self.disk, lambda p: np.ones(len(p)), [[0.2, 0.3], [0.0, 0.0]], order=1)
        np.testing.assert_allclose(values[0], [(0.13 - 1) / 4, -0.25], atol=1e-9)
        np.testing.assert_allclose(values[1], [[0.1, 0.15], [0, 0]], atol=1e-9)

    def test_polynomial_manufactured_solution(self):
        p = lambda x: x[:, 0] ** 3 * x[:, 1]
        laplacian = lambda x: 6 * x[:, 0] * x[:, 1]
        for op in (self.disk, build_solver(BoundaryCurve.ellipse(1.5, 1.0), 128)):
            solution = solve_poisson(op, laplacian, p)
            probes = np.array([[0.3, -0.2], [-0.1, 0.4]])
            np.testing.assert_allclose(solution.evaluate(probes)[0], p(probes), atol=1e-5)

    def test_annulus_source(self):
        op = build_solver(BoundaryCurve.annulus(0.4, 1.0), 128)
        solution = solve_poisson(op, lambda p: np.full(len(p), 4.0), lambda p: (p ** 2).sum(axis=1))
        x = 0.7 * np.array([np.cos(2.0), np.sin(2.0)])
        self.assertLess(abs(solution.evaluate(x)[0] - 0.49), 1e-5)

    def test_two_hole_sources(self):
        op = build_solver(two_hole_disk(), 128)
        probes = np.array([[0.0, 0.5], [0.0, -0.45]])
        square = solve_poisson(op, lambda p: np.full(len(p), 4.0), lambda p: (p ** 2).sum(axis=1))
        np.testing.assert_allclose(square.evaluate(probes)[0], (probes ** 2).sum(axis=1), atol=1e-5)
        f = lambda p: np.exp(p[:, 0])
        exponential = solve_poisson(op, f, f)
        np.testing.assert_allclose(exponential.evaluate(probes)[0], np.exp(probes[:, 0]), atol=1e-3)

    def test_exponential_source_and_residual(self):
        f = lambda p: np.exp(p[:, 0])
        solution = solve_poisson(self.disk, f, f)
        step = 0.02
        for x in np.array([[0.1, 0.2], [-0.3, 0.0]]):
            value, grad = solution.evaluate(x, order=1)
            self.assertLess(abs(value - np.exp(x[0])), 1e-5)
            np.testing.assert_allclose(grad, [np.exp(x[0]), 0.0], atol=1e-5)
            laplacian = sum(
                solution.evaluate(x + e)[0] + solution.evaluate(x - e)[0] for e in step * np.eye(2)
            ) - 4 * value
            self.assertLess(abs(laplacian / step ** 2 - np.exp(x[0])) / np.exp(x[0]), 1e-3)

    def test_order_above_one_rejected(self):
        solution = solve_poisson(self.disk, None, lambda p: p[:, 0])
        with self.assertRaises(ValueError):
            solution.evaluate([0.0, 0.0], order=2)


class MatrixDumpTests(SimpleTestCase):

    def test_dump_written_on_build(self):
        with tempfile.TemporaryDirectory() as tmp:
            with override_settings(ROBIN_DUMP_MATRICES=True, ROBIN_DUMP_DIR=Path(tmp)):
                op = build_solver(BoundaryCurve.circle(), 32)
            path = Path(tmp) / 'system_1x32.rbnm'
            data = path.read_bytes()
            self.assertEqual(data[:8], b'RBNMAT01')
            self.assertEqual(len(data), 16 + 32 * 32 * 8)
            np.testing.assert_array_equal(read_matrix(path), op.matrix)

    def test_bad_header_rejected(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_matrix(Path(tmp) / 'm.rbnm', np.eye(3))
            path.write_bytes(b'NOTAMAT!' + path.read_bytes()[8:])
            with self.assertRaises(SolverError):
                read_matrix(path)
