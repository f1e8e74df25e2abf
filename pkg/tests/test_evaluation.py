import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from nusrec.evaluation import RESULT_COLUMNS, Evaluation, relative_errors
from nusrec.signal import Signal, random_bandlimited


PERIOD = 31.


def history(errors):
    errors = np.asarray(errors, dtype=float)
    return pd.DataFrame({
        'iter': np.arange(len(errors)),
        'err_l2_rel': errors,
        'err_sobolev_rel': 2. * errors,
        'step_norm': np.zeros(len(errors))
    })


def test_relative_errors():
    x = random_bandlimited(PERIOD, 1., seed=0)
    assert relative_errors(x, x) == (0., 0.)
    err_l2, err_sob = relative_errors(x * 1.1, x)
    assert_allclose([err_l2, err_sob], [0.1, 0.1])
    # The constant is invisible to the Sobolev seminorm
    shifted = x + Signal.constant(PERIOD, 0.5, M=x.M)
    assert relative_errors(shifted, x)[1] < 1e-12
    assert relative_errors(shifted, x)[0] > 0.
    assert np.isnan(relative_errors(x, Signal.zeros(PERIOD, M=x.M))[0])


def test_relative_errors_of_vector_signals():
    y = [random_bandlimited(PERIOD, 1., seed=k) for k in range(2)]
    err_l2, _ = relative_errors([y[0], y[1] * 0.], y)
    expected = y[1].norm_l2() / np.sqrt(y[0].norm_l2() ** 2 + y[1].norm_l2() ** 2)
    assert_allclose(err_l2, expected)
    with pytest.raises(ValueError):
        relative_errors(y[:1], y)


def test_evaluation_averages_squared_errors():
    evaluation = Evaluation()
    evaluation.add(history([1., 0.5, 0.25]), 'pocs', 'demo')
    evaluation.add(history([1., 0.1]), 'pocs', 'demo')
    evaluation.add(history([1., 1., 1.]), 'frame', 'demo')
    assert evaluation.scenarios == ['demo']
    assert evaluation.algorithms('demo') == ['pocs', 'frame']

    errors = evaluation.get('demo', 'pocs', 'err_l2_rel')
    assert errors.shape == (2, 3)
    # Histories that stopped early keep their last value
    assert_allclose(errors[1], [1., 0.1, 0.1])
    assert_allclose(Evaluation.final(errors), [0.25, 0.1])

    table = evaluation.to_frame()
    assert list(table.columns) == RESULT_COLUMNS
    pocs = table[table['algorithm'] == 'pocs']
    assert_allclose(pocs['mse_l2'], [1., (0.25 + 0.01) / 2, (0.0625 + 0.01) / 2])
    assert_allclose(pocs['mse_sobolev'], 4. * pocs['mse_l2'])
    assert set(pocs['trials']) == {2}
    assert_allclose(Evaluation.db(np.array([1., 0.01])), [0., -20.])


def test_evaluation_rejects_incomplete_history():
    with pytest.raises(ValueError):
        Evaluation().add(pd.DataFrame({'iter': [0], 'err_l2_rel': [1.]}), 'pocs', 'demo')
    assert list(Evaluation().to_frame().columns) == RESULT_COLUMNS

