import math

import pytest

from nusrec.config import (
    FULL_PERIOD, FULL_TRIALS, AlgorithmConfig, ConfigError, EncoderConfig, ScenarioConfig, config_from_dict,
    load_config, preset
)
from nusrec.encoders import Clusters, EncodingKind, UniformGap


CONFIG = """\
[scenario]
name = "demo"
period = 31
trials = 2
n_iters = 10

[scenario.instants]
kind = "uniform-gap"
lo = 0.2
hi = 0.6

[scenario.noise]
snr_db = 30

[[scenario.algorithms]]
name = "kaczmarz"

[[scenario.algorithms]]
name = "grochenig-relaxed"
relaxation = 1.2
"""


def write(tmp_path, text: str) -> str:
    filepath = tmp_path / 'scenario.toml'
    filepath.write_text(text)
    return str(filepath)


def test_load_config(tmp_path):
    cfg = load_config(write(tmp_path, CONFIG))
    assert cfg.name == 'demo'
    assert cfg.period == 31.
    assert isinstance(cfg.period, float)
    assert cfg.trials == 2
    assert cfg.noise.snr_db == 30.
    assert cfg.instants.scenario() == UniformGap(0.2, 0.6)
    assert [algo.name for algo in cfg.algorithms] == ['kaczmarz', 'grochenig-relaxed']
    assert cfg.algorithms[1].relaxation == 1.2
    assert cfg.encoder.kind == 'point'


def test_unknown_key_is_located(tmp_path):
    text = CONFIG.replace('n_iters = 10', 'n_iters = 10\nwarp = 3')
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, text))
    assert info.value.key == 'warp'
    assert info.value.line == 6
    assert 'warp' in str(info.value)


def test_invalid_values(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, CONFIG.replace('trials = 2', 'trials = "two"')))
    assert info.value.key == 'trials'
    assert info.value.line == 4
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, CONFIG.replace('period = 31', 'period = 2')))
    assert info.value.key == 'period'
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, CONFIG + 'oops ='))
    with pytest.raises(OSError):
        load_config(str(tmp_path / 'absent.toml'))


def test_validation():
    with pytest.raises(ConfigError):
        config_from_dict({'algorithms': [{'name': 'magic'}]})
    # Point samples cannot feed the integral algorithms
    with pytest.raises(ConfigError):
        config_from_dict({'encoder': {'kind': 'point'}, 'algorithms': [{'name': 'pocs'}]})
    with pytest.raises(ConfigError):
        config_from_dict({'encoder': {'kind': 'integral'}, 'algorithms': [{'name': 'frame'}]})
    with pytest.raises(ConfigError):
        config_from_dict({'encoder': {'kind': 'integral'}, 'algorithms': [{'name': 'multichannel'}]})
    with pytest.raises(ConfigError):
        config_from_dict({'sources': 2, 'mixing': [[1., 0.], [0.5]], 'encoder': {'kind': 'integrate-and-fire'},
                          'algorithms': [{'name': 'multichannel'}]})
    with pytest.raises(ConfigError):
        config_from_dict({'instants': {'kind': 'uniform-gap', 'lo': 1., 'hi': 0.5}, 'algorithms': [{'name': 'frame'}]})
    with pytest.raises(ConfigError):
        config_from_dict({'algorithms': [{'name': 'frame', 'relaxation': -1.}]})
    cfg = config_from_dict({'sources': 2, 'mixing': [[1., 0.], [0., 1.], [0.6, -0.8]],
                            'encoder': {'kind': 'integrate-and-fire', 'bias': 6.},
                            'algorithms': [{'name': 'multichannel'}]})
    assert cfg.encoder.spec().kind == EncodingKind.INTEGRAL_UNIFORM_TRIGGER


def test_encoder_spec():
    spec = EncoderConfig(kind='integral', leak=0.2).spec((0., 1., 2.))
    assert spec.kind == EncodingKind.INSTANT_LIST
    assert spec.leak == 0.2
    with pytest.raises(ConfigError):
        EncoderConfig(kind='sigma-delta').spec()


@pytest.mark.parametrize('name', ['fig2a', 'fig2b', 'fig2c', 'fig3'])
def test_presets(name):
    cfg = preset(name)
    assert cfg.name == name
    assert cfg.period == 63.
    full = preset(name, full=True)
    assert full.period == FULL_PERIOD
    if name == 'fig3':
        assert full.trials == 1
        assert cfg.encoder.target_ratio == 0.77
    else:
        assert full.trials == FULL_TRIALS
        assert len(cfg.algorithms) == 5
    assert preset('fig2c').noise.snr_db == 45.
    assert math.isinf(preset('fig2a').noise.snr_db)
    assert isinstance(preset('fig2b').instants.scenario(), Clusters)
    with pytest.raises(NotImplementedError):
        preset('fig4')


def test_scaled_keeps_desk_config():
    cfg = ScenarioConfig(algorithms=[AlgorithmConfig('frame')]).validate()
    assert cfg.scaled(False) is cfg
