import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from nusrec.evaluation import Evaluation
from nusrec.io import (
    SAMPLE_COLUMNS, load_multichannel_samples, load_point_samples, load_results, load_samples,
    save_gram, save_multichannel_samples, save_point_samples, save_results, save_samples, save_waveforms
)
from nusrec.kernels import KernelFamily, KernelKind, gram_matrix
from nusrec.multichannel import MultiChannelSamples
from nusrec.operators import SampleSequence
from nusrec.signal import random_bandlimited


PERIOD = 31.


def test_integral_samples_file(tmp_path):
    instants = np.array([0.5, 4., 12., 30.])
    samples = SampleSequence([1., -2., 0.5, 3.], np.diff(np.append(instants, instants[0] + PERIOD)))
    filepath = str(tmp_path / 'nested' / 'samples.csv')
    save_samples(filepath, instants, samples, PERIOD)
    df = pd.read_csv(filepath)
    assert list(df.columns) == SAMPLE_COLUMNS
    assert_allclose(df['t_k'].iloc[-1], 0.5 + PERIOD)
    loaded_instants, loaded = load_samples(filepath)
    assert_allclose(loaded_instants, instants)
    assert_allclose(loaded.values, samples.values)
    assert_allclose(loaded.weights, samples.weights)
    with pytest.raises(ValueError):
        save_samples(filepath, instants[:2], samples, PERIOD)


def test_point_samples_file(tmp_path):
    times = np.array([1., 2.5, 20.])
    values = np.array([0.1, -0.4, 2.])
    filepath = str(tmp_path / 'points.csv')
    save_point_samples(filepath, times, values, PERIOD)
    df = pd.read_csv(filepath)
    assert_allclose(df['t_prev'], [20. - PERIOD, 1., 2.5])
    assert_allclose(df['w_k'], 1.)
    loaded_times, loaded_values = load_point_samples(filepath)
    assert_allclose(loaded_times, times)
    assert_allclose(loaded_values, values)


def test_multichannel_samples_file(tmp_path):
    samples = MultiChannelSamples(PERIOD, (np.array([0., 10.]), np.empty(0), np.array([3.])),
                                  (np.array([1., 2.]), np.empty(0), np.array([-1.])))
    filepath = str(tmp_path / 'multichannel.csv')
    save_multichannel_samples(filepath, samples)
    loaded = load_multichannel_samples(filepath, PERIOD, 3)
    assert len(loaded) == 3
    assert len(loaded.instants[1]) == 0
    for i in range(3):
        assert_allclose(loaded.instants[i], samples.instants[i])
        assert_allclose(loaded.values[i], samples.values[i])


def test_missing_columns_are_reported(tmp_path):
    filepath = str(tmp_path / 'broken.csv')
    pd.DataFrame({'k': [0], 't_k': [1.]}).to_csv(filepath, index=False)
    with pytest.raises(ValueError, match='missing columns'):
        load_samples(filepath)
    with pytest.raises(ValueError):
        load_results(filepath)
    with pytest.raises(OSError):
        load_samples(str(tmp_path / 'absent.csv'))


def test_results_file(tmp_path):
    evaluation = Evaluation()
    evaluation.add(pd.DataFrame({'iter': [0, 1], 'err_l2_rel': [1., 0.5], 'err_sobolev_rel': [1., 0.4],
                                 'step_norm': [0., 0.1]}), 'pocs', 'demo')
    filepath = str(tmp_path / 'demo.csv')
    save_results(filepath, evaluation.to_frame())
    table = load_results(filepath)
    assert_allclose(table['mse_l2'], [1., 0.25])
    assert list(table['algorithm']) == ['pocs', 'pocs']


def test_gram_and_waveform_files(tmp_path):
    fam = KernelFamily(KernelKind.INDICATOR, [0., 10., 20.], PERIOD)
    filepath = str(tmp_path / 'gram.csv')
    save_gram(filepath, gram_matrix(fam))
    df = pd.read_csv(filepath, index_col=0)
    assert df.shape == (3, 4)
    assert_allclose(df['weight'], fam.lengths)

    x = random_bandlimited(PERIOD, 1., seed=0)
    filepath = str(tmp_path / 'waveforms.csv')
    save_waveforms(filepath, [x, x * 2.], names=['input', 'double'])
    df = pd.read_csv(filepath)
    assert list(df.columns) == ['t', 'input', 'double']
    assert_allclose(df['input'], x(df['t'].to_numpy()), atol=1e-9)
