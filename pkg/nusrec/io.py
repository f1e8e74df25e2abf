from typing import List, Sequence, Tuple, Union
import os

import numpy as np
import pandas as pd

from nusrec.evaluation import HISTORY_COLUMNS, RESULT_COLUMNS
from nusrec.kernels import GramMatrix
from nusrec.multichannel import MultiChannelSamples
from nusrec.operators import SampleSequence
from nusrec.signal import DEFAULT_OVERSAMPLE, Signal


SAMPLE_COLUMNS = ['k', 't_prev', 't_k', 's_k', 'w_k']

MULTICHANNEL_COLUMNS = ['channel', 'j', 't_prev', 't_j', 's_ij']


def ensure_folder(filepath: str):
    """Create the parent folder of a file if it does not exist."""
    folder = os.path.dirname(filepath)
    if (folder != '') and (not os.path.isdir(folder)):
        os.makedirs(folder)


def _write_csv(df: pd.DataFrame, filepath: str):
    try:
        ensure_folder(filepath)
        df.to_csv(filepath, index=False)
    except OSError as e:
        raise OSError(f'Could not write {filepath}: {e}') from e


def _read_csv(filepath: str, columns: Sequence[str]) -> pd.DataFrame:
    try:
        df = pd.read_csv(filepath)
    except OSError as e:
        raise OSError(f'Could not read {filepath}: {e}') from e
    missing = [c for c in columns if c not in df.columns]
    if len(missing) > 0:
        raise ValueError(f'File {filepath} is missing columns {missing}')
    return df


def save_samples(filepath: str, instants: np.ndarray, samples: SampleSequence, period: float):
    """Save integral samples as a CSV file.

    Each row describes the sample of one interval [t_prev, t_k]. The interval of the
    last instant wraps around to the first instant plus the period.

    Args:
        filepath: Output CSV file.
        instants: Interval start instants.
        samples: Samples and their weights.
        period: Signal period.
    """
    instants = np.asarray(instants, dtype=float)
    if len(instants) != len(samples):
        raise ValueError(f'Got {len(instants)} instants but {len(samples)} samples')
    ends = np.append(instants[1:], instants[0] + period)
    df = pd.DataFrame({
        'k': np.arange(len(instants)),
        't_prev': instants,
        't_k': ends,
        's_k': samples.values,
        'w_k': samples.weights
    })
    _write_csv(df, filepath)


def load_samples(filepath: str) -> Tuple[np.ndarray, SampleSequence]:
    """Load integral samples saved with `save_samples`.

    Returns:
        instants: Interval start instants.
        samples: Samples and their weights.
    """
    df = _read_csv(filepath, SAMPLE_COLUMNS).sort_values('k')
    return df['t_prev'].to_numpy(dtype=float), SampleSequence(df['s_k'].to_numpy(), df['w_k'].to_numpy())


def save_point_samples(filepath: str, instants: np.ndarray, values: np.ndarray, period: float):
    """Save point samples x(t_k) with the schema of `save_samples`.

    `t_k` is the sampling instant and `t_prev` the previous instant (wrapped one period
    back for the first sample). Point samples have unit weights.
    """
    instants = np.asarray(instants, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(instants) != len(values):
        raise ValueError(f'Got {len(instants)} instants but {len(values)} samples')
    df = pd.DataFrame({
        'k': np.arange(len(instants)),
        't_prev': np.roll(instants, 1) - period * (np.arange(len(instants)) == 0),
        't_k': instants,
        's_k': values,
        'w_k': np.ones(len(instants))
    })
    _write_csv(df, filepath)


def load_point_samples(filepath: str) -> Tuple[np.ndarray, np.ndarray]:
    df = _read_csv(filepath, SAMPLE_COLUMNS).sort_values('k')
    return df['t_k'].to_numpy(dtype=float), df['s_k'].to_numpy(dtype=float)


def save_multichannel_samples(filepath: str, samples: MultiChannelSamples):
    rows = []
    for i in range(samples.n_channels):
        for j, (a, b, s) in enumerate(zip(samples.starts(i), samples.ends(i), samples.values[i])):
            rows.append((i, j, a, b, s))
    _write_csv(pd.DataFrame(rows, columns=MULTICHANNEL_COLUMNS), filepath)


def load_multichannel_samples(filepath: str, period: float, n_channels: int) -> MultiChannelSamples:
    df = _read_csv(filepath, MULTICHANNEL_COLUMNS)
    instants, values = [], []
    for i in range(n_channels):
        sub = df[df['channel'] == i].sort_values('j')
        instants.append(sub['t_prev'].to_numpy(dtype=float))
        values.append(sub['s_ij'].to_numpy(dtype=float))
    return MultiChannelSamples(period, tuple(instants), tuple(values))


def save_history(filepath: str, history: pd.DataFrame):
    _write_csv(history[HISTORY_COLUMNS], filepath)


def save_results(filepath: str, results: pd.DataFrame):
    _write_csv(results[RESULT_COLUMNS], filepath)


def load_results(filepath: str) -> pd.DataFrame:
    return _read_csv(filepath, RESULT_COLUMNS)


def save_gram(filepath: str, gram: GramMatrix):
    try:
        ensure_folder(filepath)
        gram.to_frame().to_csv(filepath)
    except OSError as e:
        raise OSError(f'Could not write {filepath}: {e}') from e


def save_waveforms(filepath: str, signals: Union[Signal, Sequence[Signal]], names: List[str] = None,
                   oversample: int = DEFAULT_OVERSAMPLE):
    """Save signals sampled on the dense grid, one column per signal."""
    if isinstance(signals, Signal):
        signals = [signals]
    if names is None:
        names = [f'x{i}' for i in range(len(signals))]
    grids = [sig.to_grid(oversample) for sig in signals]
    data = {'t': grids[0].times}
    for name, grid in zip(names, grids):
        data[name] = grid.samples
    _write_csv(pd.DataFrame(data), filepath)
