"""
Experiment configuration

A configuration is a JSON object validated by ExperimentConfigForm. Missing
keys take the per-experiment defaults below; ``nodes`` and ``workers``
default to the ROBIN_* settings.
"""

import hashlib
import json

from django import forms
from django.conf import settings

from geometry.exceptions import GeometrySpecError
from geometry.serializers import basis_from_dict, load_domain

from .models import ExperimentRun

MAX_SEED = 2 ** 64 - 1

# validate may run below the solver floor to show an oracle breach
COARSE_VALIDATION_NODES = 16

VALIDATION_TOLERANCES = {
    'regular_part': 1e-8,
    'green': 1e-8,
    't': 1e-8,
    'grad_t': 1e-7,
    'hess_t': 1e-6,
    'harmonic_measure': 1e-8,
    'radial': 1e-7,
    'green_symmetry': 1e-8,
}

EXPERIMENT_DEFAULTS = {
    'validate': {
        'domain': {'shape': 'disk'},
    },
    'genericity': {
        'domain': {'shape': 'annulus', 'radii': [0.45, 1.0]},
        'trials': 20,
        'rho': 0.05,
        'eigen_threshold': 1e-2,
    },
    'surjectivity': {
        'domain': {'shape': 'disk'},
        'sweep': [0.2, 0.1, 0.05],
        'smin_threshold': 0.8,
    },
    'decay': {
        'domain': {'shape': 'disk'},
        'taus': [0.1, 0.05, 0.025],
        'layers': 8,
    },
    'critical': {
        'domain': {'shape': 'disk'},
        'quiver_grid': 9,
    },
}

# Not part of the hashed configuration: they change where and how fast, not what
UNHASHED_FIELDS = ('output_dir', 'workers')


def canonical_json(payload):
    return json.dumps(payload, sort_keys=True, separators=(',', ':'), allow_nan=False)


def config_hash(payload):
    return hashlib.sha256(canonical_json(payload).encode('utf-8')).hexdigest()


class ExperimentConfigForm(forms.Form):
    experiment = forms.ChoiceField(choices=ExperimentRun.EXPERIMENT_CHOICES)
    domain = forms.JSONField(required=False)
    nodes = forms.IntegerField(required=False, min_value=2)
    seed = forms.IntegerField(required=False, min_value=0, max_value=MAX_SEED)
    workers = forms.IntegerField(required=False, min_value=1)
    output_dir = forms.CharField(required=False, max_length=500)

    # validate
    tolerances = forms.JSONField(required=False)

    # genericity
    trials = forms.IntegerField(required=False, min_value=0)
    rho = forms.FloatField(required=False, min_value=0.0)
    basis = forms.JSONField(required=False)
    eigen_threshold = forms.FloatField(required=False)
    min_fraction = forms.FloatField(required=False, min_value=0.0, max_value=1.0)

    # critical point search, shared by genericity, surjectivity and critical
    multistart_grid = forms.IntegerField(required=False, min_value=8)
    newton_tol = forms.FloatField(required=False)
    degeneracy_tol = forms.FloatField(required=False)
    quiver_grid = forms.IntegerField(required=False, min_value=3)

    # surjectivity
    center = forms.JSONField(required=False)
    sweep = forms.JSONField(required=False)
    exponent = forms.IntegerField(required=False, min_value=1)
    cutoff = forms.ChoiceField(required=False, choices=[('quintic', 'Quintic'), ('septic', 'Septic')])
    negative_control = forms.BooleanField(required=False)
    smin_threshold = forms.FloatField(required=False)

    # decay
    pole = forms.JSONField(required=False)
    taus = forms.JSONField(required=False)
    layers = forms.IntegerField(required=False, min_value=2)

    def _apply_defaults(self, cleaned):
        defaults = {
            'nodes': settings.ROBIN_NODES_PER_LOOP,
            'seed': 0,
            'workers': settings.ROBIN_WORKERS,
            **EXPERIMENT_DEFAULTS.get(cleaned.get('experiment'), {}),
        }
        for key, value in defaults.items():
            if cleaned.get(key) in (None, ''):
                cleaned[key] = value

    def _clean_point(self, cleaned, name):
        value = cleaned.get(name)
        if value is None:
            return
        if not (isinstance(value, list) and len(value) == 2 and all(isinstance(v, (int, float)) for v in value)):
            self.add_error(name, f'{name} must be a list of two numbers.')

    def _clean_positive_list(self, cleaned, name):
        value = cleaned.get(name)
        if value is None:
            return
        if not (isinstance(value, list) and value and all(isinstance(v, (int, float)) and v > 0 for v in value)):
            self.add_error(name, f'{name} must be a non-empty list of positive numbers.')

    def clean(self):
        cleaned = super().clean()
        if self.errors:
            return cleaned
        self._apply_defaults(cleaned)
        experiment = cleaned['experiment']
        spec = cleaned['domain']

        nodes = cleaned['nodes']
        floor = COARSE_VALIDATION_NODES if experiment == 'validate' else settings.ROBIN_MIN_NODES_PER_LOOP
        if nodes % 2 or nodes < floor:
            self.add_error('nodes', f'Nodes per loop must be even and at least {floor}.')

        for name in ('eigen_threshold', 'newton_tol', 'degeneracy_tol', 'smin_threshold'):
            if cleaned.get(name) is not None and cleaned[name] <= 0:
                self.add_error(name, 'Tolerances must be positive.')

        try:
            cleaned['curve'], cleaned['theta'] = load_domain(spec)
        except GeometrySpecError as exc:
            self.add_error('domain', str(exc))

        tolerances = cleaned.get('tolerances') or {}
        if not isinstance(tolerances, dict):
            self.add_error('tolerances', 'Tolerances must be an object.')
        else:
            unknown = sorted(set(tolerances) - set(VALIDATION_TOLERANCES))
            if unknown:
                self.add_error('tolerances', f'Unknown tolerance keys: {", ".join(unknown)}.')
            elif not all(isinstance(v, (int, float)) and v > 0 for v in tolerances.values()):
                self.add_error('tolerances', 'Tolerances must be positive.')
            else:
                cleaned['tolerances'] = {**VALIDATION_TOLERANCES, **tolerances}

        if cleaned.get('basis') is not None:
            try:
                cleaned['basis_fields'] = [basis_from_dict(entry) for entry in cleaned['basis']]
            except (GeometrySpecError, TypeError, AttributeError) as exc:
                self.add_error('basis', f'Malformed basis: {exc}')

        self._clean_point(cleaned, 'center')
        self._clean_point(cleaned, 'pole')
        self._clean_positive_list(cleaned, 'sweep')
        self._clean_positive_list(cleaned, 'taus')

        if experiment == 'validate':
            shape = spec.get('shape') if isinstance(spec, dict) else None
            if shape not in ('disk', 'circle', 'annulus') or spec.get('theta'):
                self.add_error('domain', 'Validation needs an undeformed disk or annulus (closed-form oracles).')
        if experiment == 'genericity' and cleaned['trials'] < 10:
            self.add_error('trials', 'Genericity runs need at least 10 trials.')
        exponent = cleaned.get('exponent')
        if exponent is not None and exponent < 4 and not cleaned.get('negative_control'):
            self.add_error('exponent', 'Exponents below 4 are only allowed with negative_control.')
        return cleaned

    def canonical(self):
        """The hashed part of the cleaned configuration, as plain JSON data."""
        return {
            name: self.cleaned_data.get(name)
            for name in self.fields
            if name not in UNHASHED_FIELDS
        }

    @property
    def hash(self):
        return config_hash(self.canonical())
