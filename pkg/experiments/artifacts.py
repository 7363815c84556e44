"""
Artifact emission: CSV tables, the schema-versioned summary.json, optional
SVG figures and a meta.json holding the only non-deterministic fields.
"""

import json
import logging
import math
from pathlib import Path

import numpy as np
import pandas as pd
from django.apps import apps
from django.conf import settings
from django.utils import timezone

from .exceptions import ArtifactError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.12g'


def module_versions():
    """Version tag of every project app, keyed by app label."""
    return {
        config.label: config.version
        for config in sorted(apps.get_app_configs(), key=lambda config: config.label)
        if getattr(config, 'version', None)
    }


def _write_text(path, text):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding='utf-8', newline='\n')
    except OSError as exc:
        raise ArtifactError(f'Could not write {path}: {exc}', path=str(path)) from exc


def write_table(path, columns, rows):
    frame = pd.DataFrame(rows, columns=columns)
    _write_text(path, frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator='\n'))


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f'{type(value).__name__} is not JSON serializable')


def _finite(value):
    if isinstance(value, dict):
        return {key: _finite(item) for key, item in value.items()}
    if isinstance(value, list):
        return [_finite(item) for item in value]
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def plain_json(payload):
    """``payload`` as plain JSON data: numpy values converted, non-finite floats as null."""
    return _finite(json.loads(json.dumps(payload, default=_jsonable)))


def write_json(path, payload):
    _write_text(path, json.dumps(plain_json(payload), indent=2, sort_keys=True, allow_nan=False) + '\n')


def build_summary(report, config):
    return {
        'schema': settings.ROBIN_SUMMARY_SCHEMA,
        'experiment': report.experiment,
        'config_hash': config.hash,
        'seed': config.cleaned_data['seed'],
        'nodes': config.cleaned_data['nodes'],
        'versions': module_versions(),
        'passed': report.breach is None,
        'breach': report.breach,
        **report.summary,
    }


def emit_artifacts(report, config, out_dir, svg=False, started_at=None):
    """
    Write every table of ``report`` with rows, summary.json, meta.json and,
    with ``svg``, the report figures. Returns the written paths.
    """
    out_dir = Path(out_dir)
    written = []
    for name, (columns, rows) in report.tables.items():
        if not rows:
            continue
        path = out_dir / f'{name}.csv'
        write_table(path, columns, rows)
        written.append(path)

    summary = build_summary(report, config)
    write_json(out_dir / 'summary.json', summary)
    written.append(out_dir / 'summary.json')

    if svg:
        for name, text in report.figures.items():
            path = out_dir / f'{name}.svg'
            _write_text(path, text)
            written.append(path)

    meta = {
        'started_at': (started_at or timezone.now()).isoformat(),
        'finished_at': timezone.now().isoformat(),
        'files': sorted(path.name for path in written),
    }
    write_json(out_dir / 'meta.json', meta)
    written.append(out_dir / 'meta.json')
    logger.info('Wrote %d artifacts to %s', len(written), out_dir)
    return summary, written
