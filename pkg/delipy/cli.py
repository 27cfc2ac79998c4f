"""
Command-line interface of DeLi.

    deli gen doughnut --count 400 --seed 7 -o doughnut.csv
    deli cluster doughnut.csv --version 1 --alpha 12 -c 5
    deli lift points.csv --axis 2=uniform:-4,4 -o lifted.csv
    deli plot-profile normal:0.5,0.01 --alpha 1 profile.svg
    deli bench
    deli compare points.csv --axis 2=-4,4 --alpha 0.6 -c 7

Exit codes: 0 success, 1 input/output or runtime error, 2 usage error.
"""

import functools
import json
import logging
import time
import tracemalloc
from pathlib import Path

import click
import numpy as np
import pandas as pd
from click.core import ParameterSource
from tqdm import tqdm

from delipy import dataio, printsummary
from delipy.engine import Mode, RunConfig, run
from delipy.exceptions import DeliError, NeighbourhoodConfigError, ProfileError
from delipy.geometry import SegmentLike, pack_segments
from delipy.missingdata import lift_dataset, parse_axis_domain
from delipy.neighborhood import NeighbourhoodSpec, Version, neighbor_set
from delipy.oracle import relation_matrix
from delipy.profile import ALPHA_LITERAL, ALPHA_MODES, parse_profile

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'
LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR')

CONFIG_KEYS = ('version', 'c', 'alpha', 'volume', 'profile', 'profiles', 'alpha_mode', 'mode', 'seed',
               'search_samples', 'threads', 'trace', 'svg', 'xlsx')

BENCH_SIZES = (250, 500, 1000)
BENCH_SPACING = 10.0


class _EchoHandler(logging.Handler):
    "Send log records to click's stderr, resolved at every call."

    def emit(self, record):
        try:
            click.echo(self.format(record), err=True)
        except Exception:
            self.handleError(record)


def _setup_logging(level):
    logging.basicConfig(level=getattr(logging, level.upper()), format=LOG_FORMAT, handlers=[_EchoHandler()],
                        force=True)


def _runtime_errors(func):
    "Turn data and runtime errors into exit code 1."
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (DeliError, OSError) as err:
            raise click.ClickException(str(err))
    return wrapper


@click.group()
@click.option('--log-level', envvar='DELI_LOG_LEVEL', default='WARNING', show_default=True,
              type=click.Choice(LOG_LEVELS, case_sensitive=False), help='Logging verbosity.')
def main(log_level):
    """DeLi: density-based clustering of lines and line segments."""
    _setup_logging(log_level)


def _write_csv(frame_writer, out):
    if out == '-':
        frame_writer(click.get_text_stream('stdout'))
    else:
        frame_writer(out)


@main.command()
@click.argument('kind', type=click.Choice(['convex', 'doughnut', 'sporulation']))
@click.option('--count', type=click.IntRange(min=1), default=None, help='Number of records (150, 400, 475).')
@click.option('--seed', type=click.IntRange(0, 2 ** 64 - 1), default=0, show_default=True)
@click.option('-o', '--out', default='-', show_default=True, help="Output CSV ('-' for stdout).")
@click.option('--truth', type=click.Path(dir_okay=False), default=None,
              help='sporulation only: write the planted labels to this CSV.')
@_runtime_errors
def gen(kind, count, seed, out, truth):
    """Generate a synthetic dataset."""
    kwargs = {'seed': seed}
    if count is not None:
        kwargs['count'] = count
    if kind == 'sporulation':
        points, labels = dataio.gen_sporulation(**kwargs)
        _write_csv(lambda target: dataio.write_points_csv(points, target), out)
        if truth is not None:
            pd.DataFrame({'label': labels}, index=points.index).to_csv(truth)
        return
    if truth is not None:
        raise click.UsageError('--truth is only available for sporulation')
    generator = dataio.gen_convex if kind == 'convex' else dataio.gen_doughnut
    records = generator(**kwargs)
    _write_csv(lambda target: dataio.write_segments_csv(records, target), out)


def _load_config(path):
    try:
        with open(path) as f:
            config = json.load(f)
    except json.JSONDecodeError as err:
        raise click.BadParameter('not valid JSON ({})'.format(err), param_hint='--config')
    if not isinstance(config, dict):
        raise click.BadParameter('must hold a JSON object', param_hint='--config')
    unknown = sorted(set(config) - set(CONFIG_KEYS))
    if unknown:
        raise click.BadParameter('unknown key(s): {}'.format(', '.join(unknown)), param_hint='--config')
    return config


def _merge_config(ctx, params, config):
    """
    Config values fill the options that were not given on the command line.
    They go through the option's own type, so a bad value is a usage error.
    """
    options = {param.name: param for param in ctx.command.params}
    merged = dict(params)
    for key, value in config.items():
        if ctx.get_parameter_source(key) not in (None, ParameterSource.DEFAULT, ParameterSource.DEFAULT_MAP):
            continue
        if key in options and not isinstance(value, dict):
            try:
                value = options[key].type_cast_value(ctx, value)
            except click.BadParameter as err:
                raise click.BadParameter(err.message, param_hint="'{}' in --config".format(key))
        merged[key] = value
    return merged


def _load_lines(path, crop=None):
    suffix = Path(path).suffix.lower()
    if suffix in ('.geojson', '.json'):
        records = dataio.load_geojson(path, crop)
    else:
        if crop is not None:
            raise click.UsageError('--crop only applies to GeoJSON input')
        records = dataio.load_segments_csv(path)
    if not records:
        raise click.ClickException('{}: no segments to cluster'.format(path))
    return [r.to_segment() for r in records], [r.id for r in records]


def _read_profiles(value):
    if value is None or isinstance(value, dict):
        return value
    with open(value) as f:
        try:
            profiles = json.load(f)
        except json.JSONDecodeError as err:
            raise click.BadParameter('not valid JSON ({})'.format(err), param_hint='--profiles')
    if not isinstance(profiles, dict):
        raise click.BadParameter('must map line ids to profiles', param_hint='--profiles')
    return profiles


def _by_index(mapping, ids, what):
    "Turn an {id: value} mapping into {line index: value}."
    position = {line_id: i for i, line_id in enumerate(ids)}
    unknown = [k for k in mapping if str(k) not in position]
    if unknown:
        raise click.UsageError('{} given for unknown line id(s): {}'.format(what, ', '.join(map(str, unknown[:5]))))
    return {position[str(k)]: v for k, v in mapping.items()}


def _build_spec(p, ids=None):
    """
    NeighbourhoodSpec from the merged options. Without ids, per-line maps are
    replaced by a single value so that the parameter rows can be checked
    before any data is loaded.
    """
    alpha, profile, profiles = p['alpha'], p['profile'], p['profiles']
    try:
        if ids is None:
            if isinstance(alpha, dict):
                alpha = 1.0
            if profiles is not None:
                for text in profiles.values():
                    parse_profile(text)
                profile = profile or next(iter(profiles.values()), 'uniform:0,1')
        else:
            if isinstance(alpha, dict):
                alpha = _by_index(alpha, ids, 'alpha')
                if len(alpha) != len(ids):
                    raise click.UsageError('alpha map does not cover every line')
            if profiles is not None:
                per_line = _by_index(profiles, ids, 'profile')
                if profile is not None:
                    per_line = {**{i: profile for i in range(len(ids))}, **per_line}
                profile = per_line
        return NeighbourhoodSpec(version=p['version'], c=p['c'], alpha=alpha, volume=p['volume'],
                                 profile=profile, search_samples=p['search_samples'], alpha_mode=p['alpha_mode'],
                                 distance_fallback=profiles is not None)
    except (NeighbourhoodConfigError, ProfileError) as err:
        raise click.UsageError(str(err))


def _metadata(p, source):
    return {'input': str(source), 'version': int(p['version']), 'c': p['c'], 'alpha': p['alpha'],
            'volume': p['volume'], 'profile': p['profile'], 'alpha_mode': p['alpha_mode'], 'seed': p['seed'],
            'search_samples': p['search_samples'], 'mode': p['mode']}


@main.command()
@click.argument('input_path', metavar='INPUT', type=click.Path(dir_okay=False))
@click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False), default=None,
              help='JSON file with option values; command-line flags take precedence.')
@click.option('--version', type=click.IntRange(1, 3), default=1, show_default=True, help='Relation version.')
@click.option('-c', type=click.IntRange(min=1), default=None, help='Cardinality threshold (compulsory).')
@click.option('--alpha', type=float, default=None, help='Scaling factor alpha (versions 1 and 3).')
@click.option('--volume', type=float, default=None, help='Volume parameter V (version 2).')
@click.option('--profile', default=None, help="Profile f_l for every line, e.g. 'normal:0.5,0.01'.")
@click.option('--profiles', type=click.Path(exists=True, dir_okay=False), default=None,
              help='JSON file {line id: profile}, e.g. written by `deli lift`.')
@click.option('--alpha-mode', type=click.Choice(ALPHA_MODES), default=ALPHA_LITERAL, show_default=True)
@click.option('--mode', type=click.Choice([m.value for m in Mode]), default=Mode.EXPAND.value, show_default=True)
@click.option('--seed', type=click.IntRange(0, 2 ** 64 - 1), default=0, show_default=True)
@click.option('--search-samples', type=click.IntRange(min=2), default=64, show_default=True)
@click.option('--threads', type=click.IntRange(min=1), default=1, show_default=True)
@click.option('--crop', default=None, help='GeoJSON bounding box min_x,min_y,max_x,max_y.')
@click.option('--trace', type=click.Path(dir_okay=False), default=None, help='Write the run trace (JSON lines).')
@click.option('-o', '--out', type=click.Path(dir_okay=False), default=None,
              help='Result document (default: INPUT with suffix .clusters.json).')
@click.option('--svg', type=click.Path(dir_okay=False), default=None, help='Drawing of a 2-D clustering.')
@click.option('--xlsx', type=click.Path(dir_okay=False), default=None, help='Excel summary.')
@click.option('--progress/--no-progress', default=False)
@click.pass_context
@_runtime_errors
def cluster(ctx, input_path, config_path, crop, out, progress, **options):
    """Cluster the lines of INPUT (segments CSV or GeoJSON)."""
    config = _load_config(config_path) if config_path else {}
    p = _merge_config(ctx, options, config)
    if p['c'] is None:
        raise click.UsageError('the cardinality c is compulsory (-c or config)')
    try:
        p['mode'] = Mode(p['mode']).value
        p['version'] = int(Version(int(p['version'])))
    except ValueError as err:
        raise click.UsageError(str(err))
    p['profiles'] = _read_profiles(p['profiles'])
    _build_spec(p)

    if ctx.get_parameter_source('mode') is ParameterSource.DEFAULT and 'mode' not in config:
        logger.warning("no --mode given, running 'expand'; use --mode literal for the verbatim DeLi loop")

    box = None
    if crop is not None:
        try:
            box = tuple(float(v) for v in crop.split(','))
        except ValueError:
            box = ()
        if len(box) != 4:
            raise click.BadParameter('expected min_x,min_y,max_x,max_y', param_hint='--crop')

    U, ids = _load_lines(input_path, box)
    spec = _build_spec(p, ids)
    cfg = RunConfig(spec, Mode(p['mode']), p['seed'], threads=p['threads'], progress=progress)
    click.echo(printsummary.run_info(len(U), U[0].dim, cfg, input_path))

    labels = run(U, cfg)
    metadata = _metadata(p, input_path)
    out = out or str(Path(input_path).with_suffix('.clusters.json'))
    dataio.write_results(labels, out, ids, metadata)
    if p['trace']:
        with open(p['trace'], 'w') as f:
            for line in labels.trace_lines():
                f.write(line + '\n')
    if p['svg']:
        dataio.write_svg(U, labels, p['svg'])
    if p['xlsx']:
        printsummary.save_excel_tab(labels, p['xlsx'], ids, {k: v for k, v in metadata.items()
                                                             if not isinstance(v, dict)})

    counts = printsummary.summary_counts(labels)
    click.echo('k={} outliers={} evals={}'.format(counts['k'], counts['outliers'], labels.eval_count))


def _axis_domains(axes):
    try:
        return [parse_axis_domain(text) for text in axes]
    except ProfileError as err:
        raise click.BadParameter(str(err), param_hint='--axis')


@main.command()
@click.argument('input_path', metavar='INPUT', type=click.Path(exists=True, dir_okay=False))
@click.option('--axis', 'axes', multiple=True, required=True,
              help="Window of a coordinate (1-based): '2=uniform:-4,4' or '2=-4,4;normal:0.5,0.01'.")
@click.option('-o', '--out', type=click.Path(dir_okay=False), required=True,
              help='Segments CSV; the profile map goes to OUT.profiles.json.')
@_runtime_errors
def lift(input_path, axes, out):
    """Lift points with one missing coordinate to segments and profiles."""
    domains = _axis_domains(axes)
    points = dataio.load_points_csv(input_path)
    lifted = lift_dataset(points.to_numpy().tolist(), domains, list(points.index))
    dataio.write_segments_csv(dataio.records_from_segments(lifted.segments, lifted.id_map), out)
    profiles = {str(lifted.id_map[i]): str(p) for i, p in sorted(lifted.profiles.items())}
    with open(out + '.profiles.json', 'w') as f:
        json.dump(profiles, f, indent=2, sort_keys=True)
        f.write('\n')
    click.echo('lifted {} records, {} with a missing coordinate'.format(len(lifted.segments), len(profiles)))


@main.command('plot-profile')
@click.argument('profile')
@click.argument('out', type=click.Path(dir_okay=False))
@click.option('--alpha', type=click.FloatRange(min=0, min_open=True), default=1.0, show_default=True)
@_runtime_errors
def plot_profile(profile, out, alpha):
    """Draw the 2-D (alpha f)-neighbourhood of the unit segment."""
    try:
        p = parse_profile(profile)
    except ProfileError as err:
        raise click.BadParameter(str(err), param_hint='PROFILE')
    dataio.write_profile_svg(p, alpha, out)


def isolated_segments(n, spacing=BENCH_SPACING):
    "n unit segments on the x axis, spacing apart: nothing relates under alpha = 1."
    return [SegmentLike.segment((spacing * i, 0.0), (spacing * i + 1.0, 0.0)) for i in range(n)]


def bench_run(n, seed=0):
    """
    Literal worst case: n isolated segments, version 1, alpha 1, c 2, with
    pair-by-pair relation evaluation. Returns (evals, seconds, peak bytes).
    """
    U = isolated_segments(n)
    cfg = RunConfig(NeighbourhoodSpec(Version.V1, c=2, alpha=1.0), Mode.LITERAL, seed, batch=False)
    tracemalloc.start()
    start = time.perf_counter()
    labels = run(U, cfg)
    seconds = time.perf_counter() - start
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    return labels.eval_count, seconds, peak


@main.command()
@click.option('--sizes', default=','.join(map(str, BENCH_SIZES)), show_default=True,
              help='Comma separated dataset sizes.')
@click.option('--seed', type=click.IntRange(0, 2 ** 64 - 1), default=0, show_default=True)
@click.option('--verify/--no-verify', default=False,
              help='Compare the relation matrix with the neighbour sets on the smallest size.')
@_runtime_errors
def bench(sizes, seed, verify):
    """Relation evaluations, wall time and peak memory of literal worst cases."""
    try:
        sizes = [int(s) for s in sizes.split(',')]
    except ValueError:
        raise click.BadParameter('expected integers', param_hint='--sizes')
    if not sizes or min(sizes) < 1:
        raise click.BadParameter('sizes must be positive', param_hint='--sizes')

    rows = []
    for n in tqdm(sizes, desc='bench', unit='size'):
        evals, seconds, peak = bench_run(n, seed)
        rows.append([n, evals, n * n, seconds, peak / 1024.0])
    table = pd.DataFrame(rows, columns=['n', 'evals', 'n^2', 'seconds', 'peak KiB'])
    table['time ratio'] = table['seconds'] / table['seconds'].shift(1)
    table['KiB per line'] = table['peak KiB'] / table['n']
    click.echo('')
    click.echo('---- BENCHMARK ---')
    click.echo(table.to_string(index=False))

    if verify:
        n = min(sizes)
        U = isolated_segments(n)
        spec = NeighbourhoodSpec(Version.V1, c=2, alpha=1.0)
        matrix = relation_matrix(U, spec)
        pack = pack_segments(U)
        rows_ok = all(neighbor_set(i, U, spec, pack) == np.flatnonzero(matrix[i]).tolist() for i in range(n))
        if not rows_ok:
            raise click.ClickException('relation matrix and neighbour sets disagree')
        click.echo('verify: relation matrix matches the neighbour sets (n={})'.format(n))


def _truth_labels(path):
    frame = pd.read_csv(path, dtype={'id': str}).set_index('id')
    return frame['label']


@main.command()
@click.argument('input_path', metavar='INPUT', type=click.Path(exists=True, dir_okay=False))
@click.option('--axis', 'axes', multiple=True, required=True, help='Axis window, as for `deli lift`.')
@click.option('--alpha', type=click.FloatRange(min=0, min_open=True), required=True)
@click.option('-c', type=click.IntRange(min=1), required=True)
@click.option('--mode', type=click.Choice([m.value for m in Mode]), default=Mode.EXPAND.value, show_default=True)
@click.option('--seed', type=click.IntRange(0, 2 ** 64 - 1), default=0, show_default=True)
@click.option('--truth', type=click.Path(exists=True, dir_okay=False), default=None,
              help="CSV with columns id,label (e.g. from `deli gen sporulation --truth`).")
@_runtime_errors
def compare(input_path, axes, alpha, c, mode, seed, truth):
    """Cluster the complete rows alone, then every row after lifting."""
    domains = _axis_domains(axes)
    points = dataio.load_points_csv(input_path)
    complete = points.dropna()
    if complete.empty:
        raise click.ClickException('{}: no complete rows'.format(input_path))

    U_complete = [SegmentLike.point(row) for row in complete.to_numpy()]
    complete_labels = run(U_complete, RunConfig(NeighbourhoodSpec(Version.V1, c=c, alpha=alpha), Mode(mode), seed))

    lifted = lift_dataset(points.to_numpy().tolist(), domains, list(points.index))
    if lifted.profiles:
        spec = NeighbourhoodSpec(Version.V3, c=c, alpha=alpha, profile=lifted.profiles, distance_fallback=True)
    else:
        spec = NeighbourhoodSpec(Version.V1, c=c, alpha=alpha)
    lifted_labels = run(lifted.segments, RunConfig(spec, Mode(mode), seed))

    f_text = ' '.join(axes)
    table = printsummary.comparison_table([
        printsummary.comparison_row('complete rows', 1, alpha, c, None, complete_labels),
        printsummary.comparison_row('with missing', int(spec.version), alpha, c, f_text, lifted_labels),
    ])
    click.echo('')
    click.echo('---- COMPARISON ---')
    click.echo(table.to_string(index=False))

    if truth is not None:
        expected = _truth_labels(truth)
        complete_ids = list(complete.index)
        by_id = dict(zip(lifted.id_map, lifted_labels.assignment))
        click.echo('ARI complete rows, complete-only run: {:.4f}'.format(printsummary.adjusted_rand(
            expected.loc[complete_ids], complete_labels.assignment)))
        click.echo('ARI complete rows, lifted run: {:.4f}'.format(printsummary.adjusted_rand(
            expected.loc[complete_ids], [by_id[i] for i in complete_ids])))
