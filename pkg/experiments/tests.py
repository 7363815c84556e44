import json
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase, override_settings

from critical_points.services import DEGENERATE, MINIMUM
from geometry.curves import BoundaryCurve
from geometry.deformations import norm_box

from .artifacts import emit_artifacts, plain_json
from .exceptions import ConfigurationError
from .forms import ExperimentConfigForm
from .models import ExperimentRun, GenericityTrial
from .rng import TRIAL_STRIDE, CounterRandom, mix64
from .services import ExperimentReport, run_critical, run_decay, run_genericity, run_surjectivity, run_validation
from .svg import domain_figure, line_chart


def cleaned(**data):
    form = ExperimentConfigForm(data)
    assert form.is_valid(), form.errors
    return form.cleaned_data


class CounterRandomTests(SimpleTestCase):

    def test_splitmix64_stream_of_seed_zero(self):
        generator = CounterRandom(0)
        self.assertEqual(generator.bits(0), 0xE220A8397B1DCDAF)
        self.assertEqual(generator.bits(1), 0x6E789E6AA1B965F4)
        self.assertEqual(mix64(0), 0)

    def test_unit_interval_mapping(self):
        generator = CounterRandom(42)
        draws = [generator.random(i) for i in range(1000)]
        self.assertTrue(all(0.0 <= u < 1.0 for u in draws))
        self.assertEqual(generator.random(7), (generator.bits(7) >> 11) * 2.0 ** -53)
        self.assertAlmostEqual(np.mean(draws), 0.5, delta=0.05)

    def test_trial_streams_use_their_own_counters(self):
        generator = CounterRandom(5)
        self.assertEqual(generator.trial(3).random(7), generator.random(3 * TRIAL_STRIDE + 7))
        self.assertNotEqual(generator.trial(0).uniforms(4), generator.trial(1).uniforms(4))
        self.assertEqual(CounterRandom(5).trial(2).uniforms(4, -1, 1), generator.trial(2).uniforms(4, -1, 1))
        with self.assertRaises(ValueError):
            generator.trial(0).random(TRIAL_STRIDE)

    def test_seed_range(self):
        CounterRandom(2 ** 64 - 1).random(0)
        for seed in (-1, 2 ** 64):
            with self.assertRaises(ValueError):
                CounterRandom(seed)


class ConfigFormTests(SimpleTestCase):

    def test_experiment_defaults(self):
        config = cleaned(experiment='genericity')
        self.assertEqual(config['domain'], {'shape': 'annulus', 'radii': [0.45, 1.0]})
        self.assertEqual(config['trials'], 20)
        self.assertEqual(config['rho'], 0.05)
        self.assertEqual(config['nodes'], 128)
        self.assertEqual(config['seed'], 0)
        self.assertEqual(config['curve'].n_loops, 2)

    def test_rejections(self):
        cases = [
            ({'experiment': 'validate', 'domain': {'shape': 'ellipse'}}, 'domain'),
            ({'experiment': 'genericity', 'trials': 5}, 'trials'),
            ({'experiment': 'critical', 'nodes': 33}, 'nodes'),
            ({'experiment': 'critical', 'nodes': 8}, 'nodes'),
            ({'experiment': 'critical', 'nodes': 16}, 'nodes'),
            ({'experiment': 'genericity', 'nodes': 30}, 'nodes'),
            ({'experiment': 'validate', 'nodes': 14}, 'nodes'),
            ({'experiment': 'critical', 'domain': {'shape': 'hexagon'}}, 'domain'),
            ({'experiment': 'surjectivity', 'exponent': 2}, 'exponent'),
            ({'experiment': 'surjectivity', 'sweep': [0.1, -0.05]}, 'sweep'),
            ({'experiment': 'decay', 'pole': [0.1]}, 'pole'),
            ({'experiment': 'validate', 'tolerances': {'t': -1}}, 'tolerances'),
            ({'experiment': 'validate', 'tolerances': {'speed': 1e-3}}, 'tolerances'),
            ({'experiment': 'critical', 'seed': 2 ** 64}, 'seed'),
        ]
        for data, field in cases:
            form = ExperimentConfigForm(data)
            self.assertFalse(form.is_valid(), data)
            self.assertIn(field, form.errors)

    def test_only_validation_runs_below_the_solver_floor(self):
        self.assertEqual(cleaned(experiment='validate', nodes=16)['nodes'], 16)
        self.assertEqual(cleaned(experiment='critical', nodes=32)['nodes'], 32)

    def test_negative_control_allows_small_exponents(self):
        config = cleaned(experiment='surjectivity', exponent=2, negative_control=True)
        self.assertEqual(config['exponent'], 2)

    def test_hash_ignores_output_and_workers(self):
        def digest(**extra):
            form = ExperimentConfigForm({'experiment': 'decay', **extra})
            self.assertTrue(form.is_valid())
            return form.hash

        self.assertEqual(digest(), digest(output_dir='/tmp/elsewhere', workers=3))
        self.assertNotEqual(digest(), digest(seed=1))
        self.assertEqual(len(digest()), 64)


class SvgTests(SimpleTestCase):

    def test_domain_figure(self):
        point = type('Point', (), {'location': np.zeros(2), 'classification': MINIMUM})()
        text = domain_figure(
            BoundaryCurve.annulus(0.45, 1.0), [point],
            quiver=([[0.7, 0.0], [0.0, 0.7]], [[1.0, 0.0], [0.0, -2.0]]), title='annulus',
        )
        self.assertTrue(text.startswith('<?xml'))
        self.assertTrue(text.endswith('</svg>\n'))
        self.assertEqual(text.count('<polygon'), 2)
        self.assertIn('id="gradient"', text)
        self.assertIn('fill="#2563EB"', text)

    def test_line_chart(self):
        text = line_chart([0.2, 0.1, 0.05], {'smin': [0.9, 0.95, 0.99], 'off': [0.1, np.nan, 0.01]}, 'rho_bar', 'value')
        self.assertEqual(text.count('<polyline'), 2)
        self.assertIn('rho_bar', text)
        self.assertEqual(line_chart([1.0], {'flat': [2.0]}, 'x', 'y').count('<circle'), 1)


class ValidationTests(SimpleTestCase):

    def test_disk_oracles(self):
        report = run_validation(cleaned(experiment='validate'))
        self.assertIsNone(report.breach)
        quantities = report.summary['quantities']
        self.assertLess(quantities['t']['max_error'], 1e-8)
        self.assertGreater(quantities['t']['rows'], 50)
        self.assertEqual(
            set(quantities), {'regular_part', 'green', 'harmonic_measure', 't', 'grad_t', 'hess_t'},
        )
        columns, rows = report.tables['errors']
        self.assertEqual(columns[:3], ['quantity', 'x1', 'x2'])
        self.assertEqual(len(rows), sum(entry['rows'] for entry in quantities.values()))

    def test_coarse_disk_breaches(self):
        with self.assertLogs('experiments.services', 'WARNING') as logs:
            report = run_validation(cleaned(experiment='validate', nodes=16))
        self.assertIn('below the solver floor', logs.output[0])
        self.assertIsNotNone(report.breach)
        self.assertGreater(report.breach['max_error'], report.breach['tolerance'])
        self.assertIn('quantity', report.breach['row'])

    def test_annulus_radial_oracle(self):
        config = cleaned(
            experiment='validate', domain={'shape': 'annulus', 'radii': [0.45, 1.0]},
            tolerances={'green_symmetry': 1e-6},
        )
        report = run_validation(config)
        quantities = report.summary['quantities']
        self.assertLess(quantities['radial']['max_error'], 1e-7)
        self.assertLess(quantities['harmonic_measure']['max_error'], 1e-8)
        self.assertIn('green_symmetry', quantities)
        self.assertIsNone(report.breach)


class DecayTests(SimpleTestCase):

    def test_disk_decay_matches_formula(self):
        report = run_decay(cleaned(experiment='decay'))
        _, rows = report.tables['decay']
        for row in rows:
            self.assertAlmostEqual(row['max_abs_green'], -np.log(1 - row['tau']) / (2 * np.pi), places=7)
            self.assertAlmostEqual(row['max_abs_green'], row['oracle'], places=7)
        self.assertTrue(report.summary['linear'])
        self.assertTrue(all(0.4 <= ratio <= 0.6 for ratio in report.summary['ratios']))

    def test_ellipse_ratios(self):
        report = run_decay(cleaned(experiment='decay', domain={'shape': 'ellipse', 'semi_axes': [1.5, 1.0]}))
        self.assertTrue(report.summary['linear'])
        self.assertTrue(np.isnan(report.tables['decay'][1][0]['oracle']))

    def test_rejections(self):
        with self.assertRaises(ConfigurationError):
            run_decay(cleaned(experiment='decay', taus=[1.5, 0.1]))
        with self.assertRaises(ConfigurationError):
            run_decay(cleaned(experiment='decay', pole=[0.95, 0.0]))


class CriticalTests(SimpleTestCase):

    def test_disk_minimum_and_figure(self):
        report = run_critical(cleaned(experiment='critical', nodes=64, multistart_grid=8, quiver_grid=5), svg=True)
        self.assertEqual(report.summary['count'], 1)
        self.assertEqual(report.summary['counts'][MINIMUM], 1)
        _, robin_rows = report.tables['robin']
        self.assertLess(abs(robin_rows[0]['t']), 1e-7)
        self.assertIn('id="critical-points"', report.figures['domain'])


class SurjectivityTests(SimpleTestCase):

    def test_disk_center_sweep(self):
        report = run_surjectivity(cleaned(experiment='surjectivity', sweep=[0.2, 0.1, 0.05]), svg=True)
        self.assertIsNone(report.breach)
        self.assertLess(np.linalg.norm(report.summary['center']), 1e-6)
        finest = report.summary['finest']
        self.assertEqual(finest['rho_bar'], 0.05)
        self.assertGreater(finest['smin'], 0.8)
        _, sweep = report.tables['sweep']
        self.assertEqual([row['rho_bar'] for row in sweep], [0.2, 0.1, 0.05])
        self.assertTrue(all(row['off_diagonal'] < 1e-6 for row in sweep))
        _, sigma = report.tables['sigma']
        self.assertEqual(len(sigma), 12)
        self.assertIn('smin (direct)', report.figures['sweep'])

    def test_clearance_reported(self):
        from shape_derivative.exceptions import ClearanceError

        with self.assertRaises(ClearanceError) as caught:
            run_surjectivity(cleaned(experiment='surjectivity', center=[0.0, 0.0], sweep=[0.3]))
        self.assertAlmostEqual(caught.exception.admissible[1], 0.25, places=2)


class GenericityTests(SimpleTestCase):

    def test_disk_perturbations_stay_nondegenerate(self):
        config = cleaned(
            experiment='genericity', domain={'shape': 'disk'}, trials=10, nodes=64, multistart_grid=8, seed=7,
        )
        report = run_genericity(config, svg=True)
        self.assertFalse(report.baseline[0].classification == DEGENERATE)
        self.assertEqual(report.summary['trials'], 10)
        self.assertEqual(report.fraction, 1.0)
        self.assertGreater(report.summary['min_abs_eigenvalue'], 1.0)
        for trial in report.trials:
            self.assertAlmostEqual(trial.theta.norm(norm_box(config['curve'])), 0.05, places=10)
        _, rows = report.tables['trials']
        self.assertTrue(all(row['seed'] == 7 and row['nodes'] == 64 for row in rows))
        self.assertIn('trial_009', report.tables)
        self.assertIn('domain', report.figures)

        again = run_genericity(config)
        self.assertEqual(again.tables['trials'], report.tables['trials'])
        self.assertEqual(again.tables['coefficients'], report.tables['coefficients'])

    def test_zero_perturbation_keeps_the_degenerate_circle(self):
        config = cleaned(experiment='genericity', rho=0.0, trials=10, multistart_grid=8)
        report = run_genericity(config)
        self.assertTrue(report.summary['baseline']['degenerate'])
        self.assertEqual(report.summary['nondegenerate_trials'], 0)
        self.assertTrue(all(trial.theta.is_zero for trial in report.trials))
        self.assertTrue(all(trial.summary['counts'][DEGENERATE] > 0 for trial in report.trials))


class ArtifactTests(SimpleTestCase):

    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.out = Path(tmp.name)

    def test_empty_report_writes_summary_only(self):
        form = ExperimentConfigForm({'experiment': 'genericity'})
        self.assertTrue(form.is_valid())
        report = ExperimentReport('genericity', {'trials': 0}, {'trials': (['trial'], [])})
        summary, written = emit_artifacts(report, form, self.out)
        self.assertEqual(sorted(path.name for path in written), ['meta.json', 'summary.json'])
        self.assertEqual(list(self.out.glob('*.csv')), [])
        data = json.loads((self.out / 'summary.json').read_text())
        self.assertEqual(data['schema'], 1)
        self.assertEqual(data['trials'], 0)
        self.assertEqual(data['config_hash'], form.hash)
        self.assertIn('experiments', data['versions'])

    def test_non_finite_values_become_null(self):
        self.assertEqual(
            plain_json({'a': np.float64(np.inf), 'b': [np.nan, np.int64(3)], 'c': np.bool_(True)}),
            {'a': None, 'b': [None, 3], 'c': True},
        )


class CommandTests(TestCase):

    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.tmp = Path(tmp.name)

    def config(self, name, payload):
        path = self.tmp / f'{name}.json'
        path.write_text(json.dumps(payload))
        return str(path)

    def robin(self, *args):
        out = StringIO()
        call_command('robin', *args, stdout=out)
        return out.getvalue()

    def test_validate_succeeds_and_is_recorded(self):
        out = self.tmp / 'validate'
        self.robin('validate', '--config', self.config('disk', {'domain': {'shape': 'disk'}}), '--out', str(out))
        self.assertTrue((out / 'errors.csv').exists())
        summary = json.loads((out / 'summary.json').read_text())
        self.assertTrue(summary['passed'])
        self.assertEqual(summary['nodes'], 128)
        run = ExperimentRun.objects.get()
        self.assertEqual((run.status, run.exit_code), ('succeeded', 0))
        self.assertEqual(run.config_hash, summary['config_hash'])

    def test_coarse_validation_exits_with_breach(self):
        out = self.tmp / 'coarse'
        with self.assertRaises(CommandError) as caught:
            self.robin('validate', '--nodes', '16', '--out', str(out))
        self.assertEqual(caught.exception.returncode, 2)
        self.assertIn('Tolerance breached', str(caught.exception))
        self.assertTrue((out / 'errors.csv').exists())
        self.assertEqual(ExperimentRun.objects.get().status, 'breached')

    def test_configuration_errors(self):
        with self.assertRaises(CommandError) as caught:
            self.robin('validate', '--config', self.config('ellipse', {'domain': {'shape': 'ellipse'}}))
        self.assertEqual(caught.exception.returncode, 3)
        with self.assertRaises(CommandError) as caught:
            self.robin('decay', '--config', str(self.tmp / 'missing.json'))
        self.assertEqual(caught.exception.returncode, 3)
        with self.assertRaises(CommandError) as caught:
            self.robin('decay', '--config', self.config('mismatch', {'experiment': 'critical'}))
        self.assertEqual(caught.exception.returncode, 3)
        self.assertFalse(ExperimentRun.objects.exists())

    def test_runtime_configuration_error_is_recorded(self):
        with self.assertRaises(CommandError) as caught:
            self.robin('decay', '--config', self.config('wide', {'taus': [2.0]}), '--out', str(self.tmp / 'wide'))
        self.assertEqual(caught.exception.returncode, 3)
        run = ExperimentRun.objects.get()
        self.assertEqual((run.status, run.exit_code), ('failed', 3))
        self.assertIn('inradius', run.message)

    def test_decay_is_deterministic(self):
        config = self.config('decay', {'domain': {'shape': 'ellipse', 'semi_axes': [1.5, 1.0]}, 'seed': 11})
        first, second = self.tmp / 'first', self.tmp / 'second'
        self.robin('decay', '--config', config, '--out', str(first), '--svg')
        self.robin('decay', '--config', config, '--out', str(second), '--workers', '2')
        self.assertEqual((first / 'decay.csv').read_bytes(), (second / 'decay.csv').read_bytes())
        self.assertEqual((first / 'summary.json').read_bytes(), (second / 'summary.json').read_bytes())
        self.assertTrue((first / 'decay.svg').exists())
        self.assertFalse((second / 'decay.svg').exists())
        header = (first / 'decay.csv').read_text().splitlines()[0]
        self.assertEqual(header, 'tau,max_abs_green,ratio,constant,oracle,collar_points')

    def test_genericity_records_trials(self):
        out = self.tmp / 'genericity'
        config = self.config('generic', {'domain': {'shape': 'disk'}, 'trials': 10, 'multistart_grid': 8})
        self.robin('genericity', '--config', config, '--nodes', '64', '--seed', '3', '--out', str(out), '--svg')
        run = ExperimentRun.objects.get()
        self.assertEqual(run.trials.count(), 10)
        self.assertEqual(GenericityTrial.objects.filter(nondegenerate=True).count(), 10)
        self.assertEqual(int(run.seed), 3)
        for name in ('baseline.csv', 'trials.csv', 'coefficients.csv', 'trial_000.csv', 'domain.svg'):
            self.assertTrue((out / name).exists(), name)

    @override_settings(ROBIN_RECORD_RUNS=False)
    def test_surjectivity_threshold_breach(self):
        out = self.tmp / 'surjectivity'
        config = self.config('surj', {'center': [0.0, 0.0], 'sweep': [0.1, 0.05], 'smin_threshold': 1.5})
        with self.assertRaises(CommandError) as caught:
            self.robin('surjectivity', '--config', config, '--out', str(out))
        self.assertEqual(caught.exception.returncode, 2)
        self.assertTrue((out / 'sweep.csv').exists())
        self.assertFalse(ExperimentRun.objects.exists())

    def test_default_output_directory(self):
        with override_settings(ROBIN_OUTPUT_DIR=self.tmp):
            self.robin('decay')
        summary = json.loads(next(self.tmp.glob('decay-*/summary.json')).read_text())
        self.assertTrue(next(self.tmp.glob('decay-*')).name.endswith(summary['config_hash'][:12]))
