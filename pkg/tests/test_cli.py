import json
import re
import zipfile

import pytest
from click.testing import CliRunner

from delipy.cli import bench_run, isolated_segments, main

SUMMARY = re.compile(r'k=(\d+) outliers=(\d+) evals=(\d+)')


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def doughnut(runner, tmp_path):
    path = tmp_path / 'doughnut.csv'
    result = runner.invoke(main, ['gen', 'doughnut', '--count', '400', '--seed', '7', '-o', str(path)])
    assert result.exit_code == 0, result.output
    return path


def _summary(output):
    k, outliers, evals = SUMMARY.search(output).groups()
    return int(k), int(outliers), int(evals)


def test_gen_is_deterministic(runner, tmp_path, doughnut):
    lines = doughnut.read_text().splitlines()
    assert lines[0] == 'id,x1,x2,y1,y2'
    assert len(lines) == 401
    again = tmp_path / 'again.csv'
    runner.invoke(main, ['gen', 'doughnut', '--count', '400', '--seed', '7', '-o', str(again)])
    assert again.read_bytes() == doughnut.read_bytes()


def test_gen_to_stdout(runner):
    result = runner.invoke(main, ['gen', 'convex', '--count', '5'])
    assert result.exit_code == 0
    assert result.output.splitlines()[0] == 'id,x1,x2,y1,y2'


def test_gen_truth_only_for_sporulation(runner, tmp_path):
    result = runner.invoke(main, ['gen', 'convex', '-o', str(tmp_path / 'c.csv'), '--truth', str(tmp_path / 't.csv')])
    assert result.exit_code == 2


def test_cluster_doughnut(runner, tmp_path, doughnut):
    out = tmp_path / 'five.json'
    five = runner.invoke(main, ['cluster', str(doughnut), '--alpha', '12', '-c', '5', '--seed', '7', '-o', str(out)])
    assert five.exit_code == 0, five.output
    assert '---- RUN PARAMETERS ---' in five.output
    assert 'no --mode given' in five.output
    k5, outliers5, _ = _summary(five.output)
    assert k5 >= 2

    document = json.loads(out.read_text())
    assert document['counts']['k'] == k5
    assert document['run']['c'] == 5
    assert len(document['noise']) == outliers5

    eight = runner.invoke(main, ['cluster', str(doughnut), '--alpha', '12', '-c', '8', '--seed', '7'])
    assert eight.exit_code == 0, eight.output
    _, outliers8, _ = _summary(eight.output)
    assert outliers8 >= outliers5 + 24
    assert (tmp_path / 'doughnut.clusters.json').exists()


@pytest.mark.parametrize('args', [
    ['--version', '2', '--volume', '3', '-c', '5'],
    ['--alpha', '12'],
    ['--version', '1', '-c', '5'],
    ['--alpha', '12', '-c', '5', '--profile', 'normal:0,-1', '--version', '3'],
])
def test_cluster_usage_errors(runner, doughnut, args):
    result = runner.invoke(main, ['cluster', str(doughnut)] + args)
    assert result.exit_code == 2


def test_cluster_missing_input(runner, tmp_path):
    result = runner.invoke(main, ['cluster', str(tmp_path / 'nowhere.csv'), '--alpha', '1', '-c', '2'])
    assert result.exit_code == 1


def test_cluster_bad_data(runner, tmp_path):
    path = tmp_path / 'bad.csv'
    path.write_text('id,x1,x2,y1,y2\na,0,0,1,oops\n')
    result = runner.invoke(main, ['cluster', str(path), '--alpha', '1', '-c', '2'])
    assert result.exit_code == 1
    assert 'bad.csv:2' in result.output


def test_config_precedence(runner, tmp_path, doughnut):
    config = tmp_path / 'run.json'
    config.write_text(json.dumps({'c': 8, 'alpha': 12, 'mode': 'expand', 'seed': 7}))
    out = tmp_path / 'out.json'
    result = runner.invoke(main, ['cluster', str(doughnut), '--config', str(config), '-c', '5', '-o', str(out)])
    assert result.exit_code == 0, result.output
    assert 'no --mode given' not in result.output
    document = json.loads(out.read_text())
    assert document['run']['c'] == 5
    assert document['run']['alpha'] == 12
    assert document['run']['seed'] == 7


def test_config_unknown_key(runner, tmp_path, doughnut):
    config = tmp_path / 'run.json'
    config.write_text(json.dumps({'c': 5, 'alpah': 12}))
    result = runner.invoke(main, ['cluster', str(doughnut), '--config', str(config)])
    assert result.exit_code == 2
    assert 'alpah' in result.output


@pytest.mark.parametrize('bad', [{'seed': -1}, {'threads': 0}, {'version': 4}, {'mode': 'sideways'}])
def test_config_bad_values(runner, tmp_path, doughnut, bad):
    config = tmp_path / 'run.json'
    config.write_text(json.dumps(dict({'c': 5, 'alpha': 12}, **bad)))
    result = runner.invoke(main, ['cluster', str(doughnut), '--config', str(config)])
    assert result.exit_code == 2
    assert list(bad)[0] in result.output


def test_cluster_outputs(runner, tmp_path, doughnut):
    trace, svg, xlsx = tmp_path / 'trace.jsonl', tmp_path / 'run.svg', tmp_path / 'run.xlsx'
    result = runner.invoke(main, ['cluster', str(doughnut), '--alpha', '12', '-c', '5', '--mode', 'literal',
                                  '--trace', str(trace), '--svg', str(svg), '--xlsx', str(xlsx),
                                  '-o', str(tmp_path / 'out.json')])
    assert result.exit_code == 0, result.output
    entries = [json.loads(line) for line in trace.read_text().splitlines()]
    assert entries
    assert {e['decision'] for e in entries} <= {'cluster', 'noise'}
    assert sum(e['decision'] == 'cluster' for e in entries) == _summary(result.output)[0]
    assert '<svg' in svg.read_text()
    with zipfile.ZipFile(xlsx) as book:
        assert 'xl/workbook.xml' in book.namelist()


def test_lift_then_cluster(runner, tmp_path):
    points = tmp_path / 'points.csv'
    points.write_text('id,a,b\np1,0,0\np2,0.1,0\np3,0,0.1\np4,NA,0.05\np5,5,5\n')
    lifted = tmp_path / 'lifted.csv'
    result = runner.invoke(main, ['lift', str(points), '--axis', '1=-1,1', '-o', str(lifted)])
    assert result.exit_code == 0, result.output
    assert 'lifted 5 records, 1 with a missing coordinate' in result.output
    profiles = json.loads((tmp_path / 'lifted.csv.profiles.json').read_text())
    assert list(profiles) == ['p4']

    out = tmp_path / 'out.json'
    result = runner.invoke(main, ['cluster', str(lifted), '--version', '3', '--alpha', '0.5', '-c', '3',
                                  '--profiles', str(tmp_path / 'lifted.csv.profiles.json'), '-o', str(out)])
    assert result.exit_code == 0, result.output
    document = json.loads(out.read_text())
    assert document['clusters'] == [{'id': 1, 'members': ['p1', 'p2', 'p3', 'p4']}]
    assert document['noise'] == ['p5']


def test_lift_errors(runner, tmp_path):
    points = tmp_path / 'points.csv'
    points.write_text('id,a,b\np1,NA,NA\n')
    result = runner.invoke(main, ['lift', str(points), '--axis', '1=-1,1', '-o', str(tmp_path / 'out.csv')])
    assert result.exit_code == 1
    result = runner.invoke(main, ['lift', str(points), '--axis', '1=1,-1', '-o', str(tmp_path / 'out.csv')])
    assert result.exit_code == 2


def test_plot_profile(runner, tmp_path):
    out = tmp_path / 'profile.svg'
    result = runner.invoke(main, ['plot-profile', 'normal:0.5,0.01', str(out), '--alpha', '0.2'])
    assert result.exit_code == 0, result.output
    assert '<svg' in out.read_text()
    result = runner.invoke(main, ['plot-profile', 'normal:0,-1', str(tmp_path / 'bad.svg')])
    assert result.exit_code == 2


def test_bench(runner):
    result = runner.invoke(main, ['bench', '--sizes', '10,20', '--verify'])
    assert result.exit_code == 0, result.output
    assert '---- BENCHMARK ---' in result.output
    assert 'verify: relation matrix matches the neighbour sets (n=10)' in result.output
    assert runner.invoke(main, ['bench', '--sizes', '10,x']).exit_code == 2


def test_bench_run_is_quadratic():
    assert len(isolated_segments(5)) == 5
    evals, seconds, peak = bench_run(30)
    assert evals == 900
    assert seconds >= 0
    assert peak > 0


@pytest.mark.slow
def test_bench_scaling():
    sizes = (250, 500, 1000)
    bench_run(50)  # warm-up: one-time allocations stay out of the peaks
    runs = [bench_run(n) for n in sizes]
    for n, (evals, _, _) in zip(sizes, runs):
        assert evals == n * n
    for (_, before, _), (_, after, _) in zip(runs, runs[1:]):
        assert 3.2 <= after / before <= 5.0
    # auxiliary memory grows linearly: bytes per line stay flat, not doubling with n
    per_line = [peak / n for n, (_, _, peak) in zip(sizes, runs)]
    assert max(per_line) <= 2.0 * min(per_line)


def test_compare(runner, tmp_path):
    points, truth = tmp_path / 'expr.csv', tmp_path / 'truth.csv'
    result = runner.invoke(main, ['gen', 'sporulation', '--count', '120', '--seed', '1', '-o', str(points),
                                  '--truth', str(truth)])
    assert result.exit_code == 0, result.output
    axes = []
    for k in range(1, 8):
        axes += ['--axis', '{}=-4,4'.format(k)]
    result = runner.invoke(main, ['compare', str(points), '--alpha', '0.6', '-c', '7', '--truth', str(truth)] + axes)
    assert result.exit_code == 0, result.output
    assert '---- COMPARISON ---' in result.output
    assert 'ARI complete rows, complete-only run:' in result.output
    lifted_ari = float(re.search(r'ARI complete rows, lifted run: ([-\d.]+)', result.output).group(1))
    assert lifted_ari >= 0.8
