"""
Geometry - boundary curves
Closed Fourier loops and the boundary of a (possibly multiply connected)
planar domain. The domain always lies to the left of every loop: the outer
loop runs counterclockwise, holes run clockwise.
"""

import logging
from functools import cached_property

import numpy as np
from django.conf import settings

from .exceptions import CurveValidationError, DerivativeOrderError

logger = logging.getLogger(__name__)

COUNTERCLOCKWISE = 1
CLOCKWISE = -1
MAX_ORDER = 3

# Coarse samples per loop for closest-point searches
CLOSEST_POINT_SAMPLES = 512


def check_order(order):
    if not 0 <= order <= MAX_ORDER:
        raise DerivativeOrderError(f'Derivative order {order} outside 0..{MAX_ORDER}')


def cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def loop_frame(loop, s):
    """
    Quadrature geometry of a loop at parameters s.
    Returns points, c', c'', speed, unit tangent, outward normal and signed
    curvature (positive when the loop turns towards the domain).
    """
    c, d1, d2 = loop.evaluate(s, order=2)
    speed = np.hypot(d1[..., 0], d1[..., 1])
    tangent = d1 / speed[..., None]
    normal = np.stack([tangent[..., 1], -tangent[..., 0]], axis=-1)
    curvature = cross(d1, d2) / speed ** 3
    return {
        'points': c,
        'd1': d1,
        'd2': d2,
        'speed': speed,
        'tangent': tangent,
        'normal': normal,
        'curvature': curvature,
    }


class ClosedLoop:
    """Shared helpers for parametrized loops exposing evaluate(s, order)."""

    def signed_area(self, samples=256):
        s = 2 * np.pi * np.arange(samples) / samples
        c, d1 = self.evaluate(s, order=1)
        return np.pi * np.mean(cross(c, d1))


class FourierLoop(ClosedLoop):
    """
    One closed loop c(s) = a_0 + sum_m (a_m cos ms + b_m sin ms), s in [0, 2pi).

    ``cos_coeffs`` holds a_0..a_M (shape (M+1, 2)); ``sin_coeffs`` holds
    b_1..b_M (shape (M, 2)).
    """

    def __init__(self, cos_coeffs, sin_coeffs=()):
        cos_coeffs = np.asarray(cos_coeffs, dtype=float).reshape(-1, 2)
        sin_coeffs = np.asarray(sin_coeffs, dtype=float).reshape(-1, 2)
        modes = max(cos_coeffs.shape[0] - 1, sin_coeffs.shape[0], 0)
        self._cos = np.zeros((modes + 1, 2))
        self._cos[:cos_coeffs.shape[0]] = cos_coeffs
        self._sin = np.zeros((modes + 1, 2))
        self._sin[1:sin_coeffs.shape[0] + 1] = sin_coeffs
        self._cos.flags.writeable = False
        self._sin.flags.writeable = False

    def __repr__(self):
        return f'FourierLoop(modes={self.modes})'

    @property
    def modes(self):
        return self._cos.shape[0] - 1

    @property
    def cos_coeffs(self):
        return self._cos

    @property
    def sin_coeffs(self):
        return self._sin[1:]

    def evaluate(self, s, order=0):
        """Return [c(s), c'(s), ...] up to ``order``, each of shape s.shape + (2,)."""
        check_order(order)
        s = np.asarray(s, dtype=float)
        flat = s.reshape(-1)
        m = np.arange(self.modes + 1)
        phase = np.outer(flat, m)
        result = []
        for k in range(order + 1):
            shift = k * np.pi / 2
            factor = m.astype(float) ** k
            value = (np.cos(phase + shift) * factor) @ self._cos
            value += (np.sin(phase + shift) * factor) @ self._sin
            result.append(value.reshape(s.shape + (2,)))
        return result

    def reversed(self):
        """The same loop traversed backwards, c(-s)."""
        return FourierLoop(self._cos, -self._sin[1:])

    def translated(self, offset):
        cos_coeffs = np.array(self._cos)
        cos_coeffs[0] += np.asarray(offset, dtype=float)
        return FourierLoop(cos_coeffs, self._sin[1:])

    @classmethod
    def from_samples(cls, points):
        """Trigonometric interpolant through equispaced samples (Nyquist mode dropped)."""
        points = np.asarray(points, dtype=float)
        n = points.shape[0]
        spectrum = np.fft.rfft(points, axis=0) / n
        modes = (n - 1) // 2
        cos_coeffs = np.empty((modes + 1, 2))
        cos_coeffs[0] = spectrum[0].real
        cos_coeffs[1:] = 2 * spectrum[1:modes + 1].real
        sin_coeffs = -2 * spectrum[1:modes + 1].imag
        return cls(cos_coeffs, sin_coeffs)

    def to_dict(self):
        return {'cos': self._cos.tolist(), 'sin': self._sin[1:].tolist()}


def _segments_cross(a0, a1, b0, b1):
    d1 = cross(b1 - b0, a0 - b0)
    d2 = cross(b1 - b0, a1 - b0)
    d3 = cross(a1 - a0, b0 - a0)
    d4 = cross(a1 - a0, b1 - a0)
    return (d1 * d2 < 0) & (d3 * d4 < 0)


def winding_number(polygon, points):
    """Winding number of a closed polygon (k, 2) around each of points (m, 2)."""
    points = np.atleast_2d(points)
    rel = polygon[None, :, :] - points[:, None, :]
    angles = np.arctan2(rel[..., 1], rel[..., 0])
    turns = np.diff(np.concatenate([angles, angles[:, :1]], axis=1), axis=1)
    turns = (turns + np.pi) % (2 * np.pi) - np.pi
    return np.rint(turns.sum(axis=1) / (2 * np.pi)).astype(int)


class LoopSet:
    """
    Shared behaviour of anything bounded by a list of loops, each exposing
    ``evaluate(s, order)``. Subclasses set ``self.loops`` (outer loop first).
    """

    loops = ()

    @property
    def outer(self):
        return self.loops[0]

    @property
    def holes(self):
        return self.loops[1:]

    @property
    def n_loops(self):
        return len(self.loops)

    @property
    def orientations(self):
        return [COUNTERCLOCKWISE] + [CLOCKWISE] * (self.n_loops - 1)

    def polygon(self, index, samples=None):
        samples = samples or settings.ROBIN_CURVE_TEST_SAMPLES
        s = 2 * np.pi * np.arange(samples) / samples
        return self.loops[index].evaluate(s)[0]

    def validate(self, samples=None):
        """Raise CurveValidationError unless every loop is regular and the loops are disjoint."""
        samples = samples or settings.ROBIN_CURVE_TEST_SAMPLES
        s = 2 * np.pi * np.arange(samples) / samples
        segments = []
        for index, loop in enumerate(self.loops):
            c, d1 = loop.evaluate(s, order=1)
            speed = np.hypot(d1[:, 0], d1[:, 1])
            if not np.all(speed > 1e-10 * max(1.0, speed.max())):
                raise CurveValidationError(f'Loop {index} has vanishing speed (cusp)')
            segments.append((index, c, np.roll(c, -1, axis=0)))

        for i, a0, a1 in segments:
            for j, b0, b1 in segments:
                if j < i:
                    continue
                hits = _segments_cross(a0[:, None], a1[:, None], b0[None, :], b1[None, :])
                if i == j:
                    # neighbouring segments share an endpoint
                    k = np.arange(samples)
                    hits[k, k] = False
                    hits[k, (k + 1) % samples] = False
                    hits[(k + 1) % samples, k] = False
                if hits.any():
                    what = 'self-intersects' if i == j else f'intersects loop {j}'
                    raise CurveValidationError(f'Loop {i} {what}')

        outer_polygon = segments[0][1]
        for index in range(1, self.n_loops):
            probe = segments[index][1][:1]
            if winding_number(outer_polygon, probe)[0] == 0:
                raise CurveValidationError(f'Hole {index} lies outside the outer loop')
            for other in range(1, self.n_loops):
                if other != index and winding_number(segments[other][1], probe)[0] != 0:
                    raise CurveValidationError(f'Hole {index} is nested in hole {other}')
        return True

    def closest_points(self, points):
        """
        Closest boundary point for each of points (m, 2).
        Returns a dict with signed ``distance`` (positive inside the domain),
        ``loop`` index, parameter ``s``, ``foot`` point and outward ``normal``.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        m = points.shape[0]
        best = {
            'distance': np.full(m, np.inf),
            'loop': np.zeros(m, dtype=int),
            's': np.zeros(m),
            'foot': np.zeros((m, 2)),
            'normal': np.zeros((m, 2)),
        }
        grid = 2 * np.pi * np.arange(CLOSEST_POINT_SAMPLES) / CLOSEST_POINT_SAMPLES
        for index, loop in enumerate(self.loops):
            samples = loop.evaluate(grid)[0]
            s = np.empty(m)
            for start in range(0, m, 2048):
                chunk = points[start:start + 2048]
                d2 = ((chunk[:, None, :] - samples[None, :, :]) ** 2).sum(axis=-1)
                s[start:start + 2048] = grid[np.argmin(d2, axis=1)]
            for _ in range(12):
                c, d1, d2 = loop.evaluate(s, order=2)
                rel = c - points
                f = (rel * d1).sum(axis=1)
                fp = (d1 * d1).sum(axis=1) + (rel * d2).sum(axis=1)
                step = np.where(fp > 0, f / np.where(fp > 0, fp, 1.0), 0.0)
                step = np.clip(step, -0.5 * grid[1], 0.5 * grid[1])
                s = s - step
                if np.max(np.abs(step)) < 1e-15:
                    break
            s = np.mod(s, 2 * np.pi)
            frame = loop_frame(loop, s)
            rel = points - frame['points']
            dist = np.hypot(rel[:, 0], rel[:, 1])
            closer = dist < np.abs(best['distance'])
            sign = np.where((rel * frame['normal']).sum(axis=1) <= 0, 1.0, -1.0)
            best['distance'] = np.where(closer, sign * dist, best['distance'])
            best['loop'] = np.where(closer, index, best['loop'])
            best['s'] = np.where(closer, s, best['s'])
            best['foot'] = np.where(closer[:, None], frame['points'], best['foot'])
            best['normal'] = np.where(closer[:, None], frame['normal'], best['normal'])
        return best

    def signed_distance(self, points):
        return self.closest_points(points)['distance']

    def contains(self, points):
        return self.signed_distance(points) > 0

    def bounding_box(self, padding=0.0):
        xs = np.concatenate([self.polygon(i)[:, 0] for i in range(self.n_loops)])
        ys = np.concatenate([self.polygon(i)[:, 1] for i in range(self.n_loops)])
        return (xs.min() - padding, xs.max() + padding, ys.min() - padding, ys.max() + padding)

    @cached_property
    def diameter(self):
        outer = self.polygon(0, samples=256)
        diff = outer[:, None, :] - outer[None, :, :]
        return float(np.sqrt((diff ** 2).sum(axis=-1).max()))

    @cached_property
    def area(self):
        return float(self.signed_areas().sum())

    def signed_areas(self):
        return np.array([loop.signed_area() for loop in self.loops])

    @cached_property
    def centroid(self):
        """Area centroid of the domain (boundary-integral form, holes subtract)."""
        s = 2 * np.pi * np.arange(512) / 512
        moment = np.zeros(2)
        for loop in self.loops:
            c, d1 = loop.evaluate(s, order=1)
            moment[0] += np.mean(c[:, 0] ** 2 * d1[:, 1]) * np.pi
            moment[1] -= np.mean(c[:, 1] ** 2 * d1[:, 0]) * np.pi
        return moment / self.area

    @cached_property
    def inradius(self):
        """Largest boundary distance over a 48 x 48 interior grid."""
        xmin, xmax, ymin, ymax = self.bounding_box()
        xs, ys = np.meshgrid(np.linspace(xmin, xmax, 48), np.linspace(ymin, ymax, 48))
        dist = self.signed_distance(np.column_stack([xs.ravel(), ys.ravel()]))
        return float(dist.max())

    def interior_grid(self, per_axis, margin):
        """Deterministic tensor grid over the bounding box, kept where distance > margin."""
        xmin, xmax, ymin, ymax = self.bounding_box()
        xs, ys = np.meshgrid(np.linspace(xmin, xmax, per_axis), np.linspace(ymin, ymax, per_axis))
        points = np.column_stack([xs.ravel(), ys.ravel()])
        return points[self.signed_distance(points) > margin]


class BoundaryCurve(LoopSet):
    """
    Boundary of a smooth domain: one outer Fourier loop plus optional holes.
    Orientation is normalized on construction and the curve is validated.
    """

    def __init__(self, outer, holes=(), validate=True):
        if outer.signed_area() < 0:
            outer = outer.reversed()
        oriented = []
        for hole in holes:
            oriented.append(hole.reversed() if hole.signed_area() > 0 else hole)
        self.loops = (outer, *oriented)
        if validate:
            self.validate()

    def __repr__(self):
        return f'BoundaryCurve(loops={self.n_loops}, modes={self.outer.modes})'

    @classmethod
    def circle(cls, radius=1.0, center=(0.0, 0.0)):
        return cls(_circle_loop(radius, center))

    @classmethod
    def ellipse(cls, semi_x, semi_y, center=(0.0, 0.0)):
        return cls(FourierLoop([center, [semi_x, 0.0]], [[0.0, semi_y]]))

    @classmethod
    def annulus(cls, inner_radius, outer_radius, center=(0.0, 0.0)):
        if not 0 < inner_radius < outer_radius:
            raise CurveValidationError('Annulus radii must satisfy 0 < inner < outer')
        return cls(_circle_loop(outer_radius, center), [_circle_loop(inner_radius, center).reversed()])

    @classmethod
    def perturbed_annulus(cls, inner_radius, outer_radius, amplitude=0.05, mode=3, center=(0.0, 0.0)):
        """Annulus whose outer radius is modulated as R + amplitude * cos(mode * s)."""
        if not 0 < inner_radius < outer_radius - abs(amplitude):
            raise CurveValidationError('Perturbed annulus needs 0 < inner < outer - |amplitude|')
        samples = 4 * (mode + 2)
        s = 2 * np.pi * np.arange(samples) / samples
        radius = outer_radius + amplitude * np.cos(mode * s)
        points = np.column_stack([radius * np.cos(s), radius * np.sin(s)]) + np.asarray(center, dtype=float)
        outer = FourierLoop.from_samples(points)
        return cls(outer, [_circle_loop(inner_radius, center).reversed()])

    def translated(self, offset):
        return BoundaryCurve(
            self.outer.translated(offset),
            [hole.translated(offset) for hole in self.holes],
            validate=False,
        )

    def to_dict(self):
        return {
            'outer': self.outer.to_dict(),
            'holes': [hole.to_dict() for hole in self.holes],
        }


def _circle_loop(radius, center):
    return FourierLoop([center, [radius, 0.0]], [[0.0, radius]])
