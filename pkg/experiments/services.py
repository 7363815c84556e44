"""
Experiment protocols

Each run_* function takes a cleaned configuration (ExperimentConfigForm.cleaned_data)
and returns an ExperimentReport: named tables, a JSON-ready summary, optional SVG
figures and, when a tolerance is breached, the offending row.
"""

import logging

import numpy as np
from django.conf import settings
from joblib import Parallel, delayed

from critical_points.exceptions import CriticalPointError
from critical_points.services import find_critical_points, search_margin, summarize
from geometry.deformations import DeformationField, TrigBumpField, norm_box
from geometry.domains import deform_domain
from geometry.exceptions import GeometryError
from greens_robin.oracles import disk_green, disk_regular_part, disk_robin
from greens_robin.services import green_strip_maximum, robin_jet, singular_part, strip_points
from harmonic_solver.exceptions import SingularSystemError, SolverError
from harmonic_solver.operators import SolverOperator, build_solver, solve_dirichlet, solve_dirichlet_batch
from shape_derivative.surjectivity import sigma0, surjectivity_matrix

from . import svg as figures
from .exceptions import ConfigurationError
from .rng import CounterRandom

logger = logging.getLogger(__name__)

VALIDATION_COLUMNS = ['quantity', 'x1', 'x2', 'y1', 'y2', 'computed', 'exact', 'error', 'tolerance', 'note']
CRITICAL_COLUMNS = ['x1', 'x2', 'residual', 'lam1', 'lam2', 'class', 'basin']
ROBIN_COLUMNS = ['x1', 'x2', 't', 'dt1', 'dt2', 'h11', 'h12', 'h22', 'residual']
TRIAL_COLUMNS = [
    'trial', 'seed', 'nodes', 'norm', 'count', 'minima', 'saddles', 'maxima', 'degenerate',
    'min_abs_eigenvalue', 'nondegenerate', 'error',
]
COEFFICIENT_COLUMNS = ['trial', 'index', 'coefficient']
SIGMA_COLUMNS = ['rho_bar', 'q', 'p', 'row_entry', 'direct_entry', 'sigma', 'bound']
SWEEP_COLUMNS = ['rho_bar', 'sigma0', 'smin', 'direct_smin', 'off_diagonal', 'method_delta', 'collar_bound', 'flagged']
DECAY_COLUMNS = ['tau', 'max_abs_green', 'ratio', 'constant', 'oracle', 'collar_points']

# (modes, kinds) of the default trig-bump family, used for both components
BASIS_MODES = (
    ((0, 0), 'cc'),
    ((1, 0), 'sc'),
    ((0, 1), 'cs'),
    ((1, 1), 'ss'),
    ((1, 0), 'cc'),
    ((0, 1), 'cc'),
    ((2, 0), 'cc'),
    ((0, 2), 'cc'),
)

LINEAR_DECAY_BAND = (0.4, 0.6)

THRESHOLD_NOTE = (
    'eigen_threshold is an experiment-design constant: genericity predicts that '
    'nondegeneracy is typical, not the rate at which random trials achieve it.'
)


class ExperimentReport:

    def __init__(self, experiment, summary, tables=None, figures=None, breach=None):
        self.experiment = experiment
        self.summary = summary
        self.tables = tables or {}
        self.figures = figures or {}
        self.breach = breach

    def __repr__(self):
        return f'{type(self).__name__}({self.experiment}, tables={list(self.tables)})'


class GenericityReport(ExperimentReport):
    """Baseline record, per-trial records and the nondegenerate fraction."""

    def __init__(self, baseline, trials, summary, tables=None, figures=None, breach=None):
        super().__init__('genericity', summary, tables, figures, breach)
        self.baseline = baseline
        self.trials = trials

    @property
    def fraction(self):
        return self.summary.get('fraction')


def _search_options(config):
    return {
        'grid_density': config.get('multistart_grid'),
        'newton_tol': config.get('newton_tol'),
        'degeneracy_tol': config.get('degeneracy_tol'),
    }


def _center(spec):
    return np.asarray(spec.get('center', (0.0, 0.0)), dtype=float)


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------

def _row(quantity, x, y, computed, exact, tolerance, note=''):
    """Worst entry of computed - exact; a failed evaluation counts as an infinite error."""
    y = (np.nan, np.nan) if y is None else y
    if computed is None:
        return dict(zip(VALIDATION_COLUMNS, (quantity, x[0], x[1], y[0], y[1], np.nan, np.nan, np.inf, tolerance, note)))
    diff = np.abs(np.asarray(computed, dtype=float) - np.asarray(exact, dtype=float)).ravel()
    worst = int(np.argmax(diff))
    values = (
        quantity, x[0], x[1], y[0], y[1],
        float(np.ravel(computed)[worst]), float(np.ravel(exact)[worst]), float(diff[worst]), tolerance, note,
    )
    return dict(zip(VALIDATION_COLUMNS, values))


def _regular_densities(op, poles):
    """H_y densities for every pole from one batched solve; no pole-position policy applies."""
    data = np.column_stack([singular_part(op.nodes, y)[0] for y in poles])
    return solve_dirichlet_batch(op, data)


def _harmonic_measure_row(op, y, tolerance):
    try:
        return _row('harmonic_measure', y, None, sigma0(op, y), -1.0, tolerance)
    except SolverError as exc:
        return _row('harmonic_measure', y, None, None, None, tolerance, str(exc))


def _disk_rows(op, spec, tolerances):
    radius = float(spec.get('radius', 1.0))
    center = _center(spec)
    domain = op.domain
    rows = []

    poles = domain.interior_grid(5, 0.3 * radius)
    probes = domain.interior_grid(7, 0.3 * radius)
    for y, density in zip(poles, _regular_densities(op, poles)):
        values = density.evaluate(probes, near='collar')[0]
        exact = disk_regular_part(probes, y, radius, center)
        for x, value, oracle in zip(probes, values, exact):
            rows.append(_row('regular_part', x, y, value, oracle, tolerances['regular_part']))
        apart = np.any(probes != y, axis=1)
        green = (singular_part(probes[apart], y)[0] - values[apart]) / (2 * np.pi)
        for x, value, oracle in zip(probes[apart], green, disk_green(probes[apart], y, radius, center)):
            rows.append(_row('green', x, y, value, oracle, tolerances['green']))
        rows.append(_harmonic_measure_row(op, y, tolerances['harmonic_measure']))

    grid = domain.interior_grid(15, 0.2 * radius)
    for x, density in zip(grid, _regular_densities(op, grid)):
        value = density.evaluate(x, near='collar')[0]
        rows.append(_row('t', x, None, value, disk_robin(x, radius, center)[0], tolerances['t']))

    for x in probes:
        _, gradient, hessian = disk_robin(x, radius, center)
        try:
            jet = robin_jet(op, x)
        except SolverError as exc:
            rows.append(_row('grad_t', x, None, None, None, tolerances['grad_t'], str(exc)))
            rows.append(_row('hess_t', x, None, None, None, tolerances['hess_t'], str(exc)))
            continue
        rows.append(_row('grad_t', x, None, jet.gradient, gradient, tolerances['grad_t']))
        rows.append(_row('hess_t', x, None, jet.hessian, hessian, tolerances['hess_t']))
    return rows


def _annulus_rows(op, spec, tolerances):
    inner, outer = (float(r) for r in spec.get('radii', (0.45, 1.0)))
    center = _center(spec)
    width = outer - inner
    domain = op.domain
    rows = []

    radius_at_nodes = np.linalg.norm(op.nodes - center, axis=1)
    probes = domain.interior_grid(15, 0.1 * width)
    r = np.linalg.norm(probes - center, axis=1)
    cases = (
        ('log', np.log(radius_at_nodes), np.log(r)),
        ('inner-indicator', (radius_at_nodes < 0.5 * (inner + outer)).astype(float),
         np.log(outer / r) / np.log(outer / inner)),
    )
    for note, data, exact in cases:
        values = solve_dirichlet(op, data).evaluate(probes, near='collar')[0]
        for x, value, oracle in zip(probes, values, exact):
            rows.append(_row('radial', x, None, value, oracle, tolerances['radial'], note))

    angles = 2 * np.pi * (np.arange(8) + 0.25) / 8
    poles = center + 0.5 * (inner + outer) * np.column_stack([np.cos(angles), np.sin(angles)])
    for y in poles:
        rows.append(_harmonic_measure_row(op, y, tolerances['harmonic_measure']))
    densities = _regular_densities(op, poles)
    regular = np.array([density.evaluate(poles, near='collar')[0] for density in densities])
    for i in range(len(poles)):
        for j in range(i + 1, len(poles)):
            gij = (singular_part(poles[i], poles[j])[0] - regular[j, i]) / (2 * np.pi)
            gji = (singular_part(poles[j], poles[i])[0] - regular[i, j]) / (2 * np.pi)
            rows.append(_row('green_symmetry', poles[i], poles[j], gij, gji, tolerances['green_symmetry']))
    return rows


def _validation_summary(rows):
    quantities = {}
    for row in rows:
        entry = quantities.setdefault(row['quantity'], {'rows': 0, 'max_error': 0.0, 'tolerance': row['tolerance'], 'worst': row})
        entry['rows'] += 1
        if row['error'] > entry['max_error']:
            entry['max_error'], entry['worst'] = row['error'], row
    breach = None
    for name, entry in quantities.items():
        entry['passed'] = entry['max_error'] <= entry['tolerance']
        if not entry['passed'] and breach is None:
            breach = {'quantity': name, 'max_error': entry['max_error'], 'tolerance': entry['tolerance'], 'row': entry['worst']}
    return quantities, breach


def _validation_solver(domain, nodes):
    """build_solver, except that node counts below the solver floor are let through."""
    if nodes >= settings.ROBIN_MIN_NODES_PER_LOOP:
        return build_solver(domain, nodes)
    logger.warning('Validating with %d nodes per loop, below the solver floor %d', nodes, settings.ROBIN_MIN_NODES_PER_LOOP)
    try:
        return SolverOperator(domain, nodes)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularSystemError(f'Could not factorize the boundary system: {exc}') from exc


def run_validation(config, svg=False):
    """Error tables against the image-charge (disk) or radial (annulus) oracles."""
    spec = config['domain']
    op = _validation_solver(config['curve'], config['nodes'])
    if spec['shape'] in ('disk', 'circle'):
        oracle, rows = 'disk', _disk_rows(op, spec, config['tolerances'])
    else:
        oracle, rows = 'annulus', _annulus_rows(op, spec, config['tolerances'])
    quantities, breach = _validation_summary(rows)
    for name, entry in quantities.items():
        logger.info('%s: max error %.3e (tolerance %.1e) over %d rows', name, entry['max_error'], entry['tolerance'], entry['rows'])
    summary = {
        'oracle': oracle,
        'quantities': {
            name: {key: entry[key] for key in ('rows', 'max_error', 'tolerance', 'passed')}
            for name, entry in quantities.items()
        },
    }
    return ExperimentReport('validate', summary, {'errors': (VALIDATION_COLUMNS, rows)}, breach=breach)


# ---------------------------------------------------------------------------
# genericity
# ---------------------------------------------------------------------------

def default_basis(domain):
    """Trig-bump fields centred on the domain, wide enough to move every loop."""
    center = domain.centroid
    return [
        TrigBumpField(component, modes, kinds, center, domain.diameter, 2 * domain.diameter)
        for component in (0, 1)
        for modes, kinds in BASIS_MODES
    ]


def draw_deformation(basis, generator, index, rho, box):
    """Uniform coefficients in [-1, 1] from trial ``index``, rescaled to sampled norm rho."""
    coeffs = np.array(generator.trial(index).uniforms(len(basis), -1.0, 1.0))
    theta = DeformationField(basis, coeffs)
    if rho == 0:
        return theta.scaled(0.0), 0.0
    return theta.scaled(rho / theta.norm(box)), rho


class TrialRecord:

    def __init__(self, index, theta, norm, points=(), error='', center=None):
        self.index = index
        self.theta = theta
        self.norm = norm
        self.points = list(points)
        self.error = error
        self.summary = summarize(self.points, center)

    def __repr__(self):
        return f'TrialRecord({self.index}, count={len(self.points)})'

    @property
    def min_abs_eigenvalue(self):
        return self.summary['min_abs_eigenvalue']

    def nondegenerate(self, threshold):
        return (
            not self.error
            and self.summary['all_nondegenerate']
            and self.min_abs_eigenvalue > threshold
        )

    def as_row(self, seed, nodes, threshold):
        counts = self.summary['counts']
        return {
            'trial': self.index,
            'seed': seed,
            'nodes': nodes,
            'norm': self.norm,
            'count': len(self.points),
            'minima': counts['nondegenerate-min'],
            'saddles': counts['nondegenerate-saddle'],
            'maxima': counts['nondegenerate-max'],
            'degenerate': counts['degenerate'],
            'min_abs_eigenvalue': self.min_abs_eigenvalue,
            'nondegenerate': self.nondegenerate(threshold),
            'error': self.error,
        }


def _run_trial(domain, basis, generator, index, rho, box, nodes, search):
    theta, norm = draw_deformation(basis, generator, index, rho, box)
    try:
        image = domain if theta.is_zero else deform_domain(domain, theta)
        points = find_critical_points(build_solver(image, nodes), workers=1, **search)
    except (GeometryError, SolverError, CriticalPointError) as exc:
        logger.warning('Trial %d failed: %s', index, exc)
        return TrialRecord(index, theta, norm, error=f'{type(exc).__name__}: {exc}')
    return TrialRecord(index, theta, norm, points, center=image.centroid)


def run_genericity(config, svg=False):
    """
    Baseline critical points of the undeformed domain, then ``trials`` random
    deformations of sampled norm rho, each searched and classified.
    """
    domain = config['curve']
    nodes, seed, rho = config['nodes'], config['seed'], config['rho']
    threshold = config['eigen_threshold']
    search = _search_options(config)
    basis = config.get('basis_fields') or default_basis(domain)

    baseline = find_critical_points(build_solver(domain, nodes), workers=config['workers'], **search)
    baseline_summary = summarize(baseline, domain.centroid)
    baseline_summary['degenerate'] = baseline_summary['counts']['degenerate'] > 0
    logger.info('Baseline: %d critical points, min |lambda| %s', len(baseline), baseline_summary['min_abs_eigenvalue'])

    generator = CounterRandom(seed)
    box = norm_box(domain)
    trials = Parallel(n_jobs=config['workers'], prefer='threads')(
        delayed(_run_trial)(domain, basis, generator, index, rho, box, nodes, search)
        for index in range(config['trials'])
    )

    passed = sum(trial.nondegenerate(threshold) for trial in trials)
    fraction = passed / len(trials) if trials else None
    eigenvalues = [trial.min_abs_eigenvalue for trial in trials if trial.min_abs_eigenvalue is not None]
    summary = {
        'trials': len(trials),
        'rho': rho,
        'basis_size': len(basis),
        'eigen_threshold': threshold,
        'threshold_note': THRESHOLD_NOTE,
        'baseline': baseline_summary,
        'nondegenerate_trials': passed,
        'failed_trials': sum(bool(trial.error) for trial in trials),
        'fraction': fraction,
        'min_abs_eigenvalue': min(eigenvalues, default=None),
    }

    tables = {
        'baseline': (CRITICAL_COLUMNS, [point.as_row() for point in baseline]),
        'trials': (TRIAL_COLUMNS, [trial.as_row(seed, nodes, threshold) for trial in trials]),
        'coefficients': (COEFFICIENT_COLUMNS, [
            {'trial': trial.index, 'index': j, 'coefficient': c}
            for trial in trials for j, c in enumerate(trial.theta.coeffs)
        ]),
    }
    for trial in trials:
        tables[f'trial_{trial.index:03d}'] = (CRITICAL_COLUMNS, [point.as_row() for point in trial.points])

    breach = None
    minimum = config.get('min_fraction')
    if minimum is not None and trials and fraction < minimum:
        breach = {'quantity': 'fraction', 'value': fraction, 'minimum': minimum}

    drawings = {}
    if svg:
        found = baseline + [point for trial in trials for point in trial.points]
        drawings['domain'] = figures.domain_figure(domain, found, title=f'rho = {rho}, {len(trials)} trials')
    logger.info('Genericity: %d of %d trials fully nondegenerate', passed, len(trials))
    return GenericityReport(baseline, trials, summary, tables, drawings, breach)


# ---------------------------------------------------------------------------
# surjectivity
# ---------------------------------------------------------------------------

def _surjectivity_center(op, config):
    if config.get('center') is not None:
        return np.asarray(config['center'], dtype=float), None
    points = find_critical_points(op, workers=config['workers'], **_search_options(config))
    # the most interior critical point leaves the widest admissible rho_bar range
    clearance = op.domain.signed_distance(np.array([point.location for point in points]))
    chosen = points[int(np.argmax(clearance))]
    return chosen.location, chosen


def run_surjectivity(config, svg=False):
    """surjectivity_matrix over the rho_bar sweep at a critical point of the domain."""
    op = build_solver(config['curve'], config['nodes'])
    center, point = _surjectivity_center(op, config)
    sweep = [float(rho_bar) for rho_bar in config['sweep']]

    sigma_rows, sweep_rows, reports = [], [], []
    for rho_bar in sweep:
        report = surjectivity_matrix(
            op, center, rho_bar, config.get('exponent'), config.get('cutoff') or None,
            allow_small_exponent=config.get('negative_control', False), workers=config['workers'],
        )
        reports.append(report)
        for q in (1, 2):
            for p in (1, 2):
                sigma_rows.append({
                    'rho_bar': rho_bar,
                    'q': q,
                    'p': p,
                    'row_entry': report.matrix[q - 1, p - 1],
                    'direct_entry': report.direct[q - 1, p - 1],
                    'sigma': report.sigmas[q - 1, p - 1],
                    'bound': report.bounds[q - 1, p - 1],
                })
        sweep_rows.append({
            'rho_bar': rho_bar,
            'sigma0': report.sigma0,
            'smin': report.smin,
            'direct_smin': report.direct_smin,
            'off_diagonal': report.off_diagonal,
            'method_delta': report.method_delta,
            'collar_bound': report.collar_bound,
            'flagged': report.flagged,
        })

    finest = reports[int(np.argmin(sweep))]
    summary = {
        'center': center.tolist(),
        'critical_point': None if point is None else point.classification,
        'exponent': finest.exponent,
        'cutoff': finest.cutoff,
        'smin_threshold': config['smin_threshold'],
        'finest': finest.as_dict(),
        'sweep': [row['rho_bar'] for row in sweep_rows],
    }
    breach = None
    if finest.smin < config['smin_threshold']:
        breach = {'quantity': 'smin', 'rho_bar': finest.rho_bar, 'value': finest.smin, 'minimum': config['smin_threshold']}

    drawings = {}
    if svg:
        order = np.argsort(sweep)
        drawings['sweep'] = figures.line_chart(
            np.asarray(sweep)[order],
            {
                'smin (representation)': np.array([r['smin'] for r in sweep_rows])[order],
                'smin (direct)': np.array([r['direct_smin'] for r in sweep_rows])[order],
                'max off-diagonal': np.array([r['off_diagonal'] for r in sweep_rows])[order],
            },
            'rho_bar', 'value', title=f'a = {finest.exponent}, {finest.cutoff} cutoff',
        )
    tables = {'sigma': (SIGMA_COLUMNS, sigma_rows), 'sweep': (SWEEP_COLUMNS, sweep_rows)}
    return ExperimentReport('surjectivity', summary, tables, drawings, breach)


# ---------------------------------------------------------------------------
# decay
# ---------------------------------------------------------------------------

def run_decay(config, svg=False):
    """max |G(., y)| over boundary strips of decreasing width."""
    domain = config['curve']
    op = build_solver(domain, config['nodes'])
    taus = [float(tau) for tau in config['taus']]
    layers = config['layers']
    pole = np.asarray(config['pole'] if config.get('pole') is not None else domain.centroid, dtype=float)

    inradius = domain.inradius
    too_wide = [tau for tau in taus if tau >= inradius]
    if too_wide:
        raise ConfigurationError(f'Strip widths {too_wide} are not below the inradius {inradius:.4f}')
    clearance = float(domain.signed_distance(pole[None, :])[0])
    if clearance <= max(max(taus), op.near_radius):
        raise ConfigurationError(
            f'Pole {pole.tolist()} is {clearance:.4f} from the boundary; it must clear the widest strip '
            f'({max(taus)}) and the exclusion radius ({op.near_radius:.4f})'
        )

    spec = config['domain']
    disk = spec.get('shape') in ('disk', 'circle') and not spec.get('theta')
    rows, previous = [], None
    for tau in taus:
        maximum = green_strip_maximum(op, pole, tau, layers)
        points = strip_points(op, tau, layers)
        oracle = np.nan
        if disk:
            radius, center = float(spec.get('radius', 1.0)), _center(spec)
            oracle = float(np.abs(disk_green(points, pole, radius, center)).max())
        rows.append({
            'tau': tau,
            'max_abs_green': maximum,
            'ratio': np.nan if previous is None else maximum / previous,
            'constant': maximum / tau,
            'oracle': oracle,
            'collar_points': int((domain.signed_distance(points) < op.near_radius).sum()),
        })
        previous = maximum

    ratios = [row['ratio'] for row in rows[1:]]
    summary = {
        'pole': pole.tolist(),
        'layers': layers,
        'ratios': ratios,
        'linear': all(LINEAR_DECAY_BAND[0] <= ratio <= LINEAR_DECAY_BAND[1] for ratio in ratios),
        'collar_caveat': (
            f'strip points closer than {op.near_radius:.4f} to the boundary are evaluated '
            'through the collar path, not the plain Nystrom formula'
        ),
    }
    drawings = {}
    if svg:
        series = {'max |G|': [row['max_abs_green'] for row in rows]}
        if disk:
            series['disk formula'] = [row['oracle'] for row in rows]
        order = np.argsort(taus)
        drawings['decay'] = figures.line_chart(
            np.asarray(taus)[order], {name: np.asarray(values)[order] for name, values in series.items()},
            'tau', 'max |G(., y)|', title='Green function near the boundary',
        )
    return ExperimentReport('decay', summary, {'decay': (DECAY_COLUMNS, rows)}, drawings)


# ---------------------------------------------------------------------------
# critical
# ---------------------------------------------------------------------------

def _gradient_quiver(op, per_axis):
    locations, vectors = [], []
    for x in op.domain.interior_grid(per_axis, search_margin(op)):
        try:
            vectors.append(robin_jet(op, x).gradient)
        except SolverError:
            continue
        locations.append(x)
    return np.array(locations).reshape(-1, 2), np.array(vectors).reshape(-1, 2)


def run_critical(config, svg=False):
    """Critical points of the Robin function with their classification and Robin jets."""
    domain = config['curve']
    op = build_solver(domain, config['nodes'])
    points = find_critical_points(op, workers=config['workers'], **_search_options(config))
    summary = summarize(points, domain.centroid)
    summary['points'] = [point.as_row() for point in points]
    tables = {
        'critical_points': (CRITICAL_COLUMNS, [point.as_row() for point in points]),
        'robin': (ROBIN_COLUMNS, [robin_jet(op, point.location).as_row() for point in points]),
    }
    drawings = {}
    if svg:
        drawings['domain'] = figures.domain_figure(
            domain, points, quiver=_gradient_quiver(op, config['quiver_grid']), title='Robin critical points',
        )
    return ExperimentReport('critical', summary, tables, drawings)


EXPERIMENTS = {
    'validate': run_validation,
    'genericity': run_genericity,
    'surjectivity': run_surjectivity,
    'decay': run_decay,
    'critical': run_critical,
}
