"""
Plain SVG figures: domain outlines with critical points and grad t arrows,
and line charts for parameter sweeps. Output is text only and deterministic.
"""

import numpy as np

from critical_points.services import DEGENERATE, MAXIMUM, MINIMUM, SADDLE

HEADER = """<?xml version="1.0" standalone="no"?>
<!DOCTYPE svg PUBLIC "-//W3C//DTD SVG 1.1//EN" "http://www.w3.org/Graphics/SVG/1.1/DTD/svg11.dtd">
<svg version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}" xmlns="http://www.w3.org/2000/svg">
"""

GLYPH_COLORS = {
    MINIMUM: '#2563EB',
    SADDLE: '#F59E0B',
    MAXIMUM: '#10B981',
    DEGENERATE: '#EF4444',
}
SERIES_COLORS = ('#2563EB', '#EF4444', '#10B981', '#F59E0B')


class SVG:
    """Accumulates elements in pixel coordinates."""

    def __init__(self, width, height):
        self.width = width
        self.height = height
        self.svg = HEADER.format(width=width, height=height)
        self.svg += f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>\n'

    def group_start(self, attr):
        g_attr = [f'{key}="{value}"' for key, value in attr.items() if key in ('id', 'class')]
        self.svg += f'<g {" ".join(g_attr)}>\n'
        if 'title' in attr:
            self.svg += f'<title>{attr["title"]}</title>\n'

    def group_end(self):
        self.svg += '</g>\n'

    def polyline(self, points, stroke='#000000', width=1.0, closed=False):
        tag = 'polygon' if closed else 'polyline'
        coords = ' '.join(f'{x:.2f},{y:.2f}' for x, y in points)
        self.svg += f'<{tag} points="{coords}" fill="none" stroke="{stroke}" stroke-width="{width}"/>\n'

    def line(self, x1, y1, x2, y2, stroke='#000000', width=1.0):
        self.svg += (
            f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
            f'stroke="{stroke}" stroke-width="{width}"/>\n'
        )

    def circle(self, x, y, radius, fill='none', stroke='#000000'):
        self.svg += f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{radius:.2f}" fill="{fill}" stroke="{stroke}"/>\n'

    def text(self, x, y, string, size=12, anchor='start'):
        self.svg += f'<text x="{x:.2f}" y="{y:.2f}" font-size="{size}" text-anchor="{anchor}">{string}</text>\n'

    def get_svg(self):
        return f'{self.svg}</svg>\n'


class Viewport:
    """Maps a world box to pixels, y pointing up, with equal or free scaling."""

    def __init__(self, box, width, height, pad=30, equal=True):
        xmin, xmax, ymin, ymax = box
        self.xmin, self.ymax = xmin, ymax
        sx = (width - 2 * pad) / max(xmax - xmin, 1e-300)
        sy = (height - 2 * pad) / max(ymax - ymin, 1e-300)
        if equal:
            sx = sy = min(sx, sy)
        self.sx, self.sy, self.pad = sx, sy, pad

    def __call__(self, x, y):
        return self.pad + (x - self.xmin) * self.sx, self.pad + (self.ymax - y) * self.sy


def _glyph(svg, x, y, classification, size=5.0):
    color = GLYPH_COLORS[classification]
    if classification == MINIMUM:
        svg.circle(x, y, size, fill=color, stroke=color)
    elif classification == SADDLE:
        svg.line(x - size, y - size, x + size, y + size, stroke=color, width=2)
        svg.line(x - size, y + size, x + size, y - size, stroke=color, width=2)
    elif classification == MAXIMUM:
        svg.polyline([(x, y - size), (x + size, y + size), (x - size, y + size)], stroke=color, width=2, closed=True)
    else:
        svg.circle(x, y, size, stroke=color)


def domain_figure(domain, points=(), quiver=None, title='', size=480, samples=256):
    """
    Boundary loops, critical points glyph-coded by class and, optionally, a
    quiver ``(locations, vectors)`` of grad t scaled to a common arrow length.
    """
    svg = SVG(size, size)
    view = Viewport(domain.bounding_box(0.05 * domain.diameter), size, size)
    svg.group_start({'id': 'boundary'})
    for index in range(domain.n_loops):
        outline = [view(x, y) for x, y in domain.polygon(index, samples)]
        svg.polyline(outline, width=1.5, closed=True)
    svg.group_end()

    if quiver is not None:
        locations, vectors = (np.asarray(item, dtype=float) for item in quiver)
        lengths = np.linalg.norm(vectors, axis=1)
        scale = 0.04 * domain.diameter / max(float(lengths.max()), 1e-300)
        svg.group_start({'id': 'gradient', 'title': 'grad t'})
        for (x, y), (u, v) in zip(locations, vectors * scale):
            x0, y0 = view(x, y)
            x1, y1 = view(x + u, y + v)
            svg.line(x0, y0, x1, y1, stroke='#6B7280')
            svg.circle(x1, y1, 1.2, fill='#6B7280', stroke='#6B7280')
        svg.group_end()

    svg.group_start({'id': 'critical-points'})
    for point in points:
        _glyph(svg, *view(*point.location), point.classification)
    svg.group_end()
    if title:
        svg.text(size / 2, 18, title, anchor='middle')
    return svg.get_svg()


def _ticks(low, high, count=5):
    return np.linspace(low, high, count)


def line_chart(x, series, xlabel, ylabel, title='', width=560, height=360):
    """One polyline with markers per named series over the shared abscissa ``x``."""
    x = np.asarray(x, dtype=float)
    values = np.concatenate([np.asarray(y, dtype=float) for y in series.values()]) if series else np.zeros(1)
    finite = values[np.isfinite(values)]
    ylow, yhigh = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    if yhigh - ylow < 1e-12:
        ylow, yhigh = ylow - 0.5, yhigh + 0.5
    xlow, xhigh = float(x.min()), float(x.max())
    if xhigh - xlow < 1e-12:
        xlow, xhigh = xlow - 0.5, xhigh + 0.5

    svg = SVG(width, height)
    view = Viewport((xlow, xhigh, ylow, yhigh), width, height, pad=60, equal=False)
    x0, y0 = view(xlow, ylow)
    x1, y1 = view(xhigh, yhigh)
    svg.group_start({'id': 'axes'})
    svg.line(x0, y0, x1, y0)
    svg.line(x0, y0, x0, y1)
    for tick in _ticks(xlow, xhigh):
        px, _ = view(tick, ylow)
        svg.line(px, y0, px, y0 + 4)
        svg.text(px, y0 + 18, f'{tick:.3g}', size=10, anchor='middle')
    for tick in _ticks(ylow, yhigh):
        _, py = view(xlow, tick)
        svg.line(x0 - 4, py, x0, py)
        svg.text(x0 - 8, py + 3, f'{tick:.3g}', size=10, anchor='end')
    svg.text((x0 + x1) / 2, height - 12, xlabel, anchor='middle')
    svg.text(14, (y0 + y1) / 2, ylabel, anchor='start')
    svg.group_end()

    for k, (name, y) in enumerate(series.items()):
        color = SERIES_COLORS[k % len(SERIES_COLORS)]
        pairs = [view(a, b) for a, b in zip(x, np.asarray(y, dtype=float)) if np.isfinite(b)]
        svg.group_start({'id': f'series-{k}', 'title': name})
        svg.polyline(pairs, stroke=color, width=2)
        for px, py in pairs:
            svg.circle(px, py, 3, fill=color, stroke=color)
        svg.group_end()
        svg.text(x1 - 4, y1 + 14 * (k + 1), name, size=11, anchor='end')
    if title:
        svg.text(width / 2, 20, title, anchor='middle')
    return svg.get_svg()
