import os

import pandas as pd
import pytest

from nusrec.cli import main


CONFIG = """\
name = "cli"
period = 31
trials = 1
n_iters = 5
output_dir = "{output_dir}"

[encoder]
kind = "integral"

[instants]
kind = "uniform-gap"
lo = 0.3
hi = 0.8

[[algorithms]]
name = "pocs"
"""


@pytest.fixture
def config(tmp_path) -> str:
    filepath = tmp_path / 'cli.toml'
    filepath.write_text(CONFIG.format(output_dir=(tmp_path / 'results').as_posix()))
    return str(filepath)


def test_encode(tmp_path, config, capsys):
    out = str(tmp_path / 'samples.csv')
    assert main(['encode', '--config', config, '--out', out]) == 0
    df = pd.read_csv(out)
    assert list(df.columns) == ['k', 't_prev', 't_k', 's_k', 'w_k']
    assert f'Samples stored at {out}.' in capsys.readouterr().out


def test_reconstruct(tmp_path, config, capsys):
    out = str(tmp_path / 'estimate.csv')
    assert main(['reconstruct', '--config', config, '--algo', 'pocs-discrete', '--n-iters', '3', '--out', out]) == 0
    assert list(pd.read_csv(out).columns) == ['t', 'input', 'estimate']
    history = pd.read_csv(str(tmp_path / 'estimate-history.csv'))
    assert list(history['iter']) == [0, 1, 2, 3]
    assert 'Relative L2 error' in capsys.readouterr().out


def test_gram_table(tmp_path, config):
    out = str(tmp_path / 'gram.csv')
    samples = str(tmp_path / 'samples.csv')
    assert main(['gram-table', '--config', config, '--out', out]) == 0
    assert main(['encode', '--config', config, '--out', samples]) == 0
    gram = pd.read_csv(out, index_col=0)
    assert gram.shape == (len(pd.read_csv(samples)), len(pd.read_csv(samples)) + 1)


def test_custom_experiment(tmp_path, config):
    assert main(['experiment', '--scenario', f'custom:{config}']) == 0
    results = tmp_path / 'results'
    assert os.path.isfile(results / 'cli.csv')
    assert os.path.isfile(results / 'cli-flags.csv')
    assert os.path.isfile(results / 'cli.svg')


def test_errors(tmp_path, config, capsys):
    broken = tmp_path / 'broken.toml'
    broken.write_text('period = 31\nspeed = 2\n')
    assert main(['encode', '--config', str(broken)]) == 2
    assert 'speed' in capsys.readouterr().err
    assert main(['encode', '--config', str(tmp_path / 'absent.toml')]) == 1
    assert main(['experiment', '--scenario', 'fig9']) == 2
    with pytest.raises(SystemExit):
        main(['reconstruct', '--config', config, '--algo', 'pocs', '--relaxation', '3'])


def test_reconstruct_from_stored_samples(tmp_path, config, capsys):
    samples = str(tmp_path / 'samples.csv')
    assert main(['encode', '--config', config, '--out', samples]) == 0
    direct, stored = str(tmp_path / 'direct.csv'), str(tmp_path / 'stored.csv')
    assert main(['reconstruct', '--config', config, '--algo', 'pocs', '--out', direct]) == 0
    assert main(['reconstruct', '--config', config, '--algo', 'pocs', '--samples', samples, '--out', stored]) == 0
    pd.testing.assert_frame_equal(pd.read_csv(stored), pd.read_csv(direct), rtol=1e-9)

    # Zero samples give a zero estimate
    df = pd.read_csv(samples)
    df['s_k'] = 0.
    df.to_csv(samples, index=False)
    assert main(['reconstruct', '--config', config, '--algo', 'pocs', '--samples', samples, '--out', stored]) == 0
    assert (pd.read_csv(stored)['estimate'].abs() < 1e-12).all()

    df.drop(columns=['w_k']).to_csv(samples, index=False)
    capsys.readouterr()
    assert main(['reconstruct', '--config', config, '--algo', 'pocs', '--samples', samples, '--out', stored]) == 1
    assert 'w_k' in capsys.readouterr().err
