"""
python manage.py robin {validate|genericity|surjectivity|decay|critical} --config <path>
    [--out <dir>] [--seed <u64>] [--nodes <int>] [--workers <int>] [--svg]

Exit codes: 0 success, 2 tolerance breach, 3 configuration error, 4 solver failure.
"""

import json
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from django.utils import timezone

from critical_points.exceptions import CriticalPointError
from experiments.artifacts import emit_artifacts, plain_json
from experiments.exceptions import ArtifactError, ConfigurationError
from experiments.forms import ExperimentConfigForm
from experiments.models import ExperimentRun, GenericityTrial
from experiments.services import EXPERIMENTS
from geometry.exceptions import GeometryError, GeometrySpecError
from harmonic_solver.exceptions import SolverError
from shape_derivative.exceptions import ClearanceError, ExponentError, ShapeDerivativeError

TOLERANCE_BREACH = 2
CONFIGURATION_ERROR = 3
SOLVER_FAILURE = 4

# Checked in order: the configuration errors include subclasses of solver-side bases
CONFIGURATION_ERRORS = (ConfigurationError, GeometrySpecError, ClearanceError, ExponentError, ArtifactError)
SOLVER_ERRORS = (SolverError, ShapeDerivativeError, CriticalPointError, GeometryError)


def _describe(breach):
    return json.dumps(plain_json(breach), sort_keys=True)


class Command(BaseCommand):
    help = 'Run a Robin function experiment and write its CSV, JSON and SVG artifacts'

    def add_arguments(self, parser):
        parser.add_argument('experiment', choices=list(EXPERIMENTS))
        parser.add_argument('--config', help='JSON experiment configuration')
        parser.add_argument('--out', help='Output directory (default: ROBIN_OUTPUT_DIR/<experiment>-<hash>)')
        parser.add_argument('--seed', type=int, help='Unsigned 64-bit seed')
        parser.add_argument('--nodes', type=int, help='Nodes per boundary loop')
        parser.add_argument('--workers', type=int, help='Concurrent trials or Newton starts')
        parser.add_argument('--svg', action='store_true', help='Also write SVG figures')

    def _load(self, path):
        if not path:
            return {}
        try:
            data = json.loads(Path(path).read_text(encoding='utf-8'))
        except OSError as exc:
            raise CommandError(f'Cannot read config {path}: {exc}', returncode=CONFIGURATION_ERROR)
        except json.JSONDecodeError as exc:
            raise CommandError(f'Config {path} is not valid JSON: {exc}', returncode=CONFIGURATION_ERROR)
        if not isinstance(data, dict):
            raise CommandError(f'Config {path} must hold a JSON object', returncode=CONFIGURATION_ERROR)
        return data

    def _form(self, experiment, options):
        data = self._load(options.get('config'))
        if data.get('experiment', experiment) != experiment:
            raise CommandError(
                f'Config is for {data["experiment"]!r}, not {experiment!r}', returncode=CONFIGURATION_ERROR,
            )
        data['experiment'] = experiment
        for key in ('seed', 'nodes', 'workers'):
            if options.get(key) is not None:
                data[key] = options[key]
        form = ExperimentConfigForm(data)
        if not form.is_valid():
            errors = '; '.join(
                f'{field}: {" ".join(messages)}' for field, messages in form.errors.items()
            )
            raise CommandError(f'Invalid configuration: {errors}', returncode=CONFIGURATION_ERROR)
        return form

    def _fail(self, run, code, message):
        if run is not None:
            run.finish(code, message=message)
        raise CommandError(message, returncode=code)

    def handle(self, *args, **options):
        experiment = options['experiment']
        form = self._form(experiment, options)
        config = form.cleaned_data
        out_dir = Path(
            options.get('out') or config.get('output_dir')
            or settings.ROBIN_OUTPUT_DIR / f'{experiment}-{form.hash[:12]}'
        )

        run = None
        if settings.ROBIN_RECORD_RUNS:
            run = ExperimentRun.objects.create(
                experiment=experiment,
                seed=config['seed'],
                nodes=config['nodes'],
                config_hash=form.hash,
                config=form.canonical(),
                output_dir=str(out_dir),
            )
        started_at = timezone.now()

        try:
            report = EXPERIMENTS[experiment](config, svg=options.get('svg', False))
            summary, written = emit_artifacts(report, form, out_dir, svg=options.get('svg', False), started_at=started_at)
        except CONFIGURATION_ERRORS as exc:
            self._fail(run, CONFIGURATION_ERROR, f'{type(exc).__name__}: {exc}')
        except SOLVER_ERRORS as exc:
            self._fail(run, SOLVER_FAILURE, f'{type(exc).__name__}: {exc}')

        if run is not None and experiment == 'genericity':
            GenericityTrial.objects.bulk_create([
                GenericityTrial(
                    run=run,
                    index=trial.index,
                    coefficients=trial.theta.coeffs.tolist(),
                    norm=trial.norm,
                    critical_count=len(trial.points),
                    min_abs_eigenvalue=trial.min_abs_eigenvalue,
                    nondegenerate=trial.nondegenerate(config['eigen_threshold']),
                    error=trial.error,
                )
                for trial in report.trials
            ])

        for path in written:
            self.stdout.write(str(path))
        if report.breach is not None:
            if run is not None:
                run.finish(TOLERANCE_BREACH, plain_json(summary), _describe(report.breach))
            raise CommandError(f'Tolerance breached: {_describe(report.breach)}', returncode=TOLERANCE_BREACH)

        if run is not None:
            run.finish(0, plain_json(summary))
        self.stdout.write(self.style.SUCCESS(f'{experiment} finished: {len(written)} files in {out_dir}'))
