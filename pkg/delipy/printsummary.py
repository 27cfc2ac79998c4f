'''

Module to summarise clustering results in tables and save them
in an Excel workbook.

'''

import numpy as np
import pandas as pd
from sklearn.metrics import adjusted_rand_score

COMPARISON_COLUMNS = ['Dataset', 'Version', 'alpha', 'c', 'f', 'Count', 'Min', 'Max', '#Outliers']


def summary_counts(labels):
    """
    Counts reported for a run: number of clusters, smallest and largest
    cluster size, number of outliers.
    """
    sizes = [len(members) for members in labels.clusters]
    return {'k': len(sizes),
            'min': min(sizes) if sizes else None,
            'max': max(sizes) if sizes else None,
            'outliers': len(labels.noise)}


def cluster_tab(labels, ids=None):
    """
    One row per cluster: id, size, member ids. Noise lines come last under
    the cluster id 'noise'.
    """
    if ids is None:
        ids = [str(i) for i in range(len(labels.assignment))]
    rows = [[cid, len(members), [ids[i] for i in members]]
            for cid, members in enumerate(labels.clusters, start=1)]
    noise = labels.noise
    if noise:
        rows.append(['noise', len(noise), [ids[i] for i in noise]])
    return pd.DataFrame(rows, columns=['Cluster #', 'Size', 'Members'])


def comparison_row(dataset, version, alpha, c, profile, labels):
    counts = summary_counts(labels)
    return [dataset, version, alpha, c, profile if profile is not None else '-',
            counts['k'], counts['min'], counts['max'], counts['outliers']]


def comparison_table(rows):
    "Side by side results of several runs (e.g. original vs missing entries)."
    return pd.DataFrame(rows, columns=COMPARISON_COLUMNS)


def run_info(n_lines, dim, cfg, source=None):
    "Text block with the dataset and run parameters."
    spec = cfg.spec
    lines = ['', '---- RUN PARAMETERS ---', '']
    if source is not None:
        lines.append('Input: {}'.format(source))
    lines.append('Lines: {} in R^{}'.format(n_lines, dim))
    lines.append('Version: {}   c: {}   mode: {}   seed: {}'.format(int(spec.version), spec.c, cfg.mode.value,
                                                                     cfg.rng_seed))
    if spec.alpha is not None:
        lines.append('alpha: {}'.format('per line' if hasattr(spec.alpha, 'keys') else spec.alpha))
    if spec.volume is not None:
        lines.append('V: {}   alpha mode: {}'.format(spec.volume, spec.alpha_mode))
    if spec.profile is not None:
        lines.append('f_l: {}'.format('per line' if hasattr(spec.profile, 'keys') else spec.profile))
    return '\n'.join(lines)


def adjusted_rand(labels_a, labels_b):
    "Adjusted Rand index; noise (-1) counts as one more label."
    return float(adjusted_rand_score(np.asarray(labels_a), np.asarray(labels_b)))


def save_excel_tab(labels, path, ids=None, metadata=None):
    """
    Save a run in an Excel workbook with the sheets 'Clusters', 'Noise'
    and 'Run'.
    """
    if ids is None:
        ids = [str(i) for i in range(len(labels.assignment))]

    clusterDataFrame = cluster_tab(labels, ids)
    clusterDataFrame = clusterDataFrame[clusterDataFrame['Cluster #'] != 'noise'].copy()
    clusterDataFrame['Members'] = clusterDataFrame['Members'].apply(' '.join)

    noiseDataFrame = pd.DataFrame({'Line id': [ids[i] for i in labels.noise]})

    dataRun = {key: [value] for key, value in (metadata or {}).items()}
    dataRun.update({'Mode': [labels.mode.value], 'Evaluations': [labels.eval_count]})
    counts = summary_counts(labels)
    dataRun.update({'Count': [counts['k']], 'Min': [counts['min']], 'Max': [counts['max']],
                    '#Outliers': [counts['outliers']]})
    runDataFrame = pd.DataFrame(data=dataRun)

    # Create a Pandas Excel writer using XlsxWriter as the engine.
    with pd.ExcelWriter(path, engine='xlsxwriter') as writer:
        clusterDataFrame.to_excel(writer, sheet_name='Clusters', index=False)
        noiseDataFrame.to_excel(writer, sheet_name='Noise', index=False)
        runDataFrame.to_excel(writer, sheet_name='Run', index=False)
