"""
Geometry - JSON documents

Domain document:

    {"outer": {"cos": [[a0x, a0y], [a1x, a1y], ...], "sin": [[b1x, b1y], ...]},
     "holes": [{"cos": ..., "sin": ...}],
     "theta": {"basis": [...], "coeffs": [...]}}

or a named shape: {"shape": "disk", "radius": 1.0, "center": [0, 0]},
{"shape": "ellipse", "semi_axes": [1.5, 1.0]},
{"shape": "annulus", "radii": [0.45, 1.0]},
{"shape": "perturbed_annulus", "radii": [0.45, 1.0], "amplitude": 0.05, "mode": 3}.
A named shape may carry "theta".

Basis entries: {"type": "constant", "component": 0},
{"type": "linear", "matrix": [[1, 0], [0, 1]]},
{"type": "trig_bump", "component": 1, "modes": [1, 2], "kinds": "cs",
 "center": [0, 0], "radius": 2.0, "wavelength": 2.0}.
"""

from .curves import BoundaryCurve, FourierLoop
from .deformations import BASIS_TYPES, DeformationField
from .domains import deform_domain
from .exceptions import GeometryError, GeometrySpecError


def loop_from_dict(data):
    try:
        return FourierLoop(data['cos'], data.get('sin', []))
    except (KeyError, TypeError, ValueError) as exc:
        raise GeometrySpecError(f'Malformed loop: {exc}') from exc


def basis_from_dict(data):
    data = dict(data)
    kind = data.pop('type', None)
    if kind not in BASIS_TYPES:
        raise GeometrySpecError(f'Unknown basis type {kind!r}')
    try:
        return BASIS_TYPES[kind](**data)
    except TypeError as exc:
        raise GeometrySpecError(f'Malformed {kind} basis entry: {exc}') from exc


def field_from_dict(data):
    if not data:
        return DeformationField.zero()
    basis = [basis_from_dict(entry) for entry in data.get('basis', [])]
    return DeformationField(basis, data.get('coeffs', []))


def _named_shape(data):
    shape = data['shape']
    center = data.get('center', (0.0, 0.0))
    if shape in ('disk', 'circle'):
        return BoundaryCurve.circle(float(data.get('radius', 1.0)), center)
    if shape == 'ellipse':
        semi_x, semi_y = data.get('semi_axes', (1.5, 1.0))
        return BoundaryCurve.ellipse(float(semi_x), float(semi_y), center)
    if shape == 'annulus':
        inner, outer = data.get('radii', (0.45, 1.0))
        return BoundaryCurve.annulus(float(inner), float(outer), center)
    if shape == 'perturbed_annulus':
        inner, outer = data.get('radii', (0.45, 1.0))
        return BoundaryCurve.perturbed_annulus(
            float(inner), float(outer), float(data.get('amplitude', 0.05)), int(data.get('mode', 3)), center,
        )
    raise GeometrySpecError(f'Unknown shape {shape!r}')


def curve_from_dict(data):
    if not isinstance(data, dict):
        raise GeometrySpecError('Domain spec must be a JSON object')
    try:
        if 'shape' in data:
            return _named_shape(data)
        if 'outer' not in data:
            raise GeometrySpecError('Domain spec needs "outer" or "shape"')
        outer = loop_from_dict(data['outer'])
        holes = [loop_from_dict(hole) for hole in data.get('holes', [])]
        return BoundaryCurve(outer, holes)
    except GeometrySpecError:
        raise
    except GeometryError as exc:
        raise GeometrySpecError(str(exc)) from exc
    except (TypeError, ValueError) as exc:
        raise GeometrySpecError(f'Malformed domain spec: {exc}') from exc


def load_domain(data):
    """Return (domain, theta): the base curve, deformed when the document carries theta."""
    curve = curve_from_dict(data)
    theta = field_from_dict(data.get('theta'))
    if theta.is_zero:
        return curve, theta
    try:
        return deform_domain(curve, theta), theta
    except GeometryError as exc:
        raise GeometrySpecError(f'Document theta is not admissible: {exc}') from exc
