"""
Module to read and write DeLi datasets and results.

Readers: segment CSV files (header id,x1..xn,y1..yn), point CSV files with
missing entries, GeoJSON polylines. Writers: segment CSV, result documents
(JSON) and SVG drawings of 2-D clusterings and profiles. It also holds the
synthetic generators (convex blobs, doughnut, a sporulation-like expression
matrix). The generators produce synthetic stand-ins with the usual dataset
sizes and shapes.
"""

import json
import logging
import math
import re
from dataclasses import dataclass

import matplotlib
import numpy as np
import pandas as pd
from matplotlib import colors as mcolors
from matplotlib.collections import LineCollection
from matplotlib.figure import Figure

from delipy.engine import NOISE
from delipy.exceptions import DataFormatError, GeometryError
from delipy.geometry import SegmentLike
from delipy.printsummary import summary_counts

logger = logging.getLogger(__name__)

MISSING_TOKENS = ('', 'na')
NOISE_COLOUR = '#9e9e9e'


@dataclass(frozen=True)
class SegmentRecord:
    id: str
    x: tuple
    y: tuple

    @property
    def dim(self):
        return len(self.x)

    def to_segment(self):
        return SegmentLike.segment(self.x, self.y)


def _parse_float(text, path, line):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise DataFormatError('non-numeric field {!r}'.format(text), path, line)
    if not math.isfinite(value):
        raise DataFormatError('non-finite coordinate {!r}'.format(text), path, line)
    return value


def _read_text_table(path):
    # header=None: the header row fixes the field count, longer rows are parse errors
    try:
        raw = pd.read_csv(path, header=None, dtype=str, na_filter=False, skipinitialspace=True)
    except pd.errors.ParserError as err:
        match = re.search(r'line (\d+)', str(err))
        raise DataFormatError('ragged or malformed row ({})'.format(str(err).strip()), path,
                              int(match.group(1)) if match else None)
    except pd.errors.EmptyDataError:
        raise DataFormatError('empty file', path)
    frame = raw.iloc[1:].reset_index(drop=True)
    frame.columns = [str(c).strip() for c in raw.iloc[0]]
    for row_number, row in enumerate(frame.itertuples(index=False)):
        if any(not isinstance(v, str) for v in row):
            raise DataFormatError('ragged row: expected {} fields'.format(frame.shape[1]), path, row_number + 2)
    return frame


def _segment_header(columns, path):
    if not columns or columns[0].lower() != 'id':
        raise DataFormatError("header must start with 'id'", path, 1)
    coords = columns[1:]
    n = len(coords) // 2
    expected = ['x{}'.format(i) for i in range(1, n + 1)] + ['y{}'.format(i) for i in range(1, n + 1)]
    if n == 0 or [c.lower() for c in coords] != expected:
        raise DataFormatError('header must be id,x1..xn,y1..yn, got {}'.format(','.join(columns)), path, 1)
    return n


def load_segments_csv(path):
    frame = _read_text_table(path)
    n = _segment_header(list(frame.columns), path)
    records = []
    for row_number, row in enumerate(frame.itertuples(index=False)):
        line = row_number + 2
        values = [_parse_float(v, path, line) for v in row[1:]]
        records.append(SegmentRecord(str(row[0]).strip(), tuple(values[:n]), tuple(values[n:])))
    logger.info('loaded %d segments of dimension %d from %s', len(records), n, path)
    return records


def write_segments_csv(records, path):
    if not records:
        raise GeometryError('No segments to write')
    n = records[0].dim
    if any(r.dim != n for r in records):
        raise GeometryError('Mixed dimensions in one dataset')
    columns = ['id'] + ['x{}'.format(i) for i in range(1, n + 1)] + ['y{}'.format(i) for i in range(1, n + 1)]
    rows = [[r.id] + list(r.x) + list(r.y) for r in records]
    pd.DataFrame(rows, columns=columns).to_csv(path, index=False, float_format='%.17g')


def records_from_segments(segments, ids=None):
    if ids is None:
        ids = [str(i + 1) for i in range(len(segments))]
    return [SegmentRecord(str(i), s.x, s.y) for i, s in zip(ids, segments)]


def load_points_csv(path):
    """
    Points with missing entries: an optional leading 'id' column and one
    column per coordinate. Empty fields and NA (any case) are missing and
    come back as NaN.
    """
    frame = _read_text_table(path)
    columns = list(frame.columns)
    has_id = bool(columns) and columns[0].lower() == 'id'
    value_columns = columns[1:] if has_id else columns
    if not value_columns:
        raise DataFormatError('no coordinate columns', path, 1)

    ids, rows = [], []
    for row_number, row in enumerate(frame.itertuples(index=False)):
        line = row_number + 2
        fields = row[1:] if has_id else row
        ids.append(str(row[0]).strip() if has_id else str(row_number + 1))
        rows.append([np.nan if v.strip().lower() in MISSING_TOKENS else _parse_float(v, path, line)
                     for v in fields])
    points = pd.DataFrame(rows, columns=value_columns, index=pd.Index(ids, name='id'), dtype=float)
    logger.info('loaded %d points (%d with missing entries) from %s', len(points),
                int(points.isna().any(axis=1).sum()), path)
    return points


def write_points_csv(points, path):
    points.to_csv(path, na_rep='NA', float_format='%.17g', index_label='id')


def _line_parts(geometry):
    kind = geometry.get('type') if isinstance(geometry, dict) else None
    if kind == 'LineString':
        return [geometry.get('coordinates', [])]
    if kind == 'MultiLineString':
        return list(geometry.get('coordinates', []))
    return None


def load_geojson(path, crop=None):
    """
    Split every LineString / MultiLineString of a FeatureCollection into
    consecutive-vertex segments (raw lon/lat, no projection). Segment ids are
    '<feature id>:<ordinal>'. crop = (min_x, min_y, max_x, max_y) keeps the
    segments with both end points inside the box.
    """
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as err:
        raise DataFormatError('malformed JSON ({})'.format(err), path, err.lineno)
    if not isinstance(data, dict) or data.get('type') != 'FeatureCollection':
        raise DataFormatError('expected a GeoJSON FeatureCollection', path)

    records = []
    skipped = 0
    for k, feature in enumerate(data.get('features', [])):
        parts = _line_parts(feature.get('geometry'))
        if parts is None:
            skipped += 1
            continue
        fid = feature.get('id', k)
        ordinal = 0
        for part in parts:
            for a, b in zip(part[:-1], part[1:]):
                x, y = tuple(float(v) for v in a[:2]), tuple(float(v) for v in b[:2])
                ordinal += 1
                if crop is not None and not (_inside(x, crop) and _inside(y, crop)):
                    continue
                records.append(SegmentRecord('{}:{}'.format(fid, ordinal), x, y))
    if skipped:
        logger.warning('%s: skipped %d feature(s) without line geometry', path, skipped)
    if crop is not None and not records:
        logger.warning('%s: crop box %s leaves no segments', path, tuple(crop))
    return records


def _inside(p, box):
    return box[0] <= p[0] <= box[2] and box[1] <= p[1] <= box[3]


def _disk(rng, centre, radius, size):
    "Uniform points in a disk."
    r = radius * np.sqrt(rng.random(size))
    theta = rng.uniform(0.0, 2 * np.pi, size)
    return np.asarray(centre) + np.c_[r * np.cos(theta), r * np.sin(theta)]


def _records(prefix, starts, ends):
    width = len(str(len(starts)))
    return [SegmentRecord('{}{:0{}d}'.format(prefix, i + 1, width), tuple(a.tolist()), tuple(b.tolist()))
            for i, (a, b) in enumerate(zip(starts, ends))]


CONVEX_CENTRES = ((20.0, 20.0), (80.0, 20.0), (50.0, 50.0), (20.0, 80.0), (80.0, 80.0))


def gen_convex(count=150, seed=0):
    """
    Chords of five well separated disks (radius 8) on a 100 x 100 canvas.
    Disks are at least 26 units apart, so alpha = 12 keeps them apart.
    """
    if count < 1:
        raise GeometryError('count must be >= 1')
    rng = np.random.default_rng(seed)
    sizes = np.full(len(CONVEX_CENTRES), count // len(CONVEX_CENTRES))
    sizes[:count % len(CONVEX_CENTRES)] += 1
    starts, ends = [], []
    for centre, size in zip(CONVEX_CENTRES, sizes):
        starts.append(_disk(rng, centre, 8.0, size))
        ends.append(_disk(rng, centre, 8.0, size))
    return _records('c', np.vstack(starts), np.vstack(ends))


SATELLITE_CENTRES = ((8.0, 8.0), (92.0, 8.0), (8.0, 92.0), (92.0, 92.0))
SATELLITE_SIZE = 6


def gen_doughnut(count=400, seed=0):
    """
    Short tangent chords around an annulus (centre (50, 50), radius 35), a
    dense central blob and, for count >= 100, four corner groups of six
    segments. With alpha = 12 a corner segment has exactly six neighbours, so
    the corner groups are clusters for c <= 6 and noise for c >= 7.
    """
    if count < 1:
        raise GeometryError('count must be >= 1')
    rng = np.random.default_rng(seed)
    n_sat = SATELLITE_SIZE * len(SATELLITE_CENTRES) if count >= 100 else 0
    n_ring = int(round((count - n_sat) * 0.75))
    n_blob = count - n_sat - n_ring

    theta = rng.uniform(0.0, 2 * np.pi, n_ring)
    radius = 35.0 + np.clip(rng.normal(0.0, 1.5, n_ring), -4.5, 4.5)
    mid = 50.0 + np.c_[radius * np.cos(theta), radius * np.sin(theta)]
    tangent = np.c_[-np.sin(theta), np.cos(theta)]
    starts, ends = [mid - 2.0 * tangent], [mid + 2.0 * tangent]

    def short_segments(centre, spread, n, half_length):
        mid = _disk(rng, centre, spread, n)
        phi = rng.uniform(0.0, np.pi, n)
        half = half_length[:, None] * np.c_[np.cos(phi), np.sin(phi)]
        starts.append(mid - half)
        ends.append(mid + half)

    short_segments((50.0, 50.0), 6.0, n_blob, rng.uniform(1.0, 2.0, n_blob))
    if n_sat:
        for centre in SATELLITE_CENTRES:
            short_segments(centre, 2.0, SATELLITE_SIZE, np.full(SATELLITE_SIZE, 1.0))
    return _records('d', np.vstack(starts), np.vstack(ends))


SPORULATION_TIMES = ('0h', '0.5h', '2h', '5h', '7h', '9h', '11.5h')


def _planted_centres(rng, clusters, dim, low=-3.0, high=3.0, gap=2.0, min_axes=3):
    "Cluster centres pairwise apart by >= gap on at least min_axes coordinates."
    centres = []
    while len(centres) < clusters:
        candidate = rng.uniform(low, high, dim)
        if all(np.sum(np.abs(candidate - c) >= gap) >= min_axes for c in centres):
            centres.append(candidate)
    return np.array(centres)


def gen_sporulation(count=475, seed=0, clusters=4, noise_fraction=0.10, missing_fraction=0.15, spread=0.15):
    """
    Expression-matrix analog: seven time points, values in [-4, 4], planted
    Gaussian clusters, uniform noise rows, and a fraction of rows with one
    missing entry (NaN).

    Returns (points DataFrame indexed by id, planted labels array with -1 for noise).
    """
    dim = len(SPORULATION_TIMES)
    rng = np.random.default_rng(seed)
    centres = _planted_centres(rng, clusters, dim)
    n_noise = int(round(count * noise_fraction))
    sizes = np.full(clusters, (count - n_noise) // clusters)
    sizes[:(count - n_noise) % clusters] += 1

    blocks = [np.clip(c + rng.normal(0.0, spread, (s, dim)), -4.0, 4.0) for c, s in zip(centres, sizes)]
    blocks.append(rng.uniform(-4.0, 4.0, (n_noise, dim)))
    values = np.vstack(blocks)
    truth = np.concatenate([np.full(s, k + 1) for k, s in enumerate(sizes)] + [np.full(n_noise, NOISE)])

    order = rng.permutation(count)
    values, truth = values[order], truth[order]
    holes = rng.choice(count, size=int(round(count * missing_fraction)), replace=False)
    values[holes, rng.integers(0, dim, holes.size)] = np.nan

    ids = pd.Index(['g{:04d}'.format(i + 1) for i in range(count)], name='id')
    return pd.DataFrame(values, columns=list(SPORULATION_TIMES), index=ids), truth


def build_result_document(labels, ids=None, metadata=None):
    "ResultDocument: run metadata, clusters with member ids, noise ids and counts."
    if ids is None:
        ids = [str(i) for i in range(len(labels.assignment))]
    ids = list(ids)
    return {
        'run': dict(metadata or {}, mode=labels.mode.value, evals=labels.eval_count),
        'clusters': [{'id': cid, 'members': [ids[i] for i in members]}
                     for cid, members in enumerate(labels.clusters, start=1)],
        'noise': [ids[i] for i in labels.noise],
        'counts': summary_counts(labels),
    }


def write_results(labels, path, ids=None, metadata=None):
    document = build_result_document(labels, ids, metadata)
    with open(path, 'w') as f:
        json.dump(document, f, indent=2, sort_keys=True)
        f.write('\n')
    return document


def _cluster_colours(k):
    cmap = matplotlib.colormaps['tab10' if k <= 10 else 'tab20']
    return [mcolors.to_hex(cmap(i % cmap.N)) for i in range(k)]


def _save_svg(fig, path):
    with matplotlib.rc_context({'svg.hashsalt': 'deli', 'svg.fonttype': 'none'}):
        fig.savefig(path, format='svg', metadata={'Date': None})


def write_svg(U, labels, path):
    "2-D drawing of a clustering: one colour per cluster, noise in grey."
    if any(l.dim != 2 for l in U):
        raise GeometryError('SVG output needs 2-D data')
    colours = _cluster_colours(labels.k)
    fig = Figure(figsize=(6, 6), dpi=100)
    ax = fig.add_axes([0, 0, 1, 1])

    groups = {}
    for i, cid in enumerate(labels.assignment):
        groups.setdefault(cid, []).append(i)
    for cid in sorted(groups):
        colour = NOISE_COLOUR if cid == NOISE else colours[cid - 1]
        members = groups[cid]
        ax.add_collection(LineCollection([(U[i].x, U[i].y) for i in members], colors=colour, linewidths=1.2))
        points = np.array([U[i].x for i in members if U[i].is_degenerate])
        if points.size:
            ax.plot(points[:, 0], points[:, 1], 'o', color=colour, markersize=2)

    ax.autoscale()
    ax.set_aspect('equal', adjustable='datalim')
    ax.axis('off')
    _save_svg(fig, path)


def write_profile_svg(profile, alpha, path, eps=1e-6):
    """
    2-D (alpha * f)-neighbourhood of the unit segment [0, 1] x {0}: the band
    between -alpha f(t) and alpha f(t), drawn over the effective window.
    """
    lo, hi = profile.effective_window(eps)
    t = np.linspace(lo, hi, 801)
    r = alpha * profile.eval(t)
    fig = Figure(figsize=(6, 3), dpi=100)
    ax = fig.add_axes([0.05, 0.1, 0.9, 0.8])
    ax.fill_between(t, -r, r, color='#9ecae1', linewidth=0)
    ax.plot(t, r, color='#08519c', linewidth=1)
    ax.plot(t, -r, color='#08519c', linewidth=1)
    ax.plot([0.0, 1.0], [0.0, 0.0], color='k', linewidth=2)
    ax.set_title('{} (alpha = {:g})'.format(profile, alpha))
    ax.set_aspect('equal', adjustable='datalim')
    _save_svg(fig, path)
