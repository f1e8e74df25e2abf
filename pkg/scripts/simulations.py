import logging
import os
import sys
sys.path.insert(0, '..')

from nusrec.config import (
    AlgorithmConfig, EncoderConfig, InstantsConfig, ScenarioConfig, preset
)
from nusrec.experiments import run_fig3, run_scenario


ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), '..')
OUT_FOLDER = os.path.join(ROOT, 'sim-results')
N_JOBS = max(1, (os.cpu_count() or 1) - 1)

os.makedirs(OUT_FOLDER, exist_ok=True)


def integral_scenario(full: bool = True) -> ScenarioConfig:
    # POCS from integral samples, continuous time versus discrete time
    return ScenarioConfig(
        name='integral',
        instants=InstantsConfig(kind='uniform-gap', lo=0.3, hi=1.),
        encoder=EncoderConfig(kind='integral'),
        algorithms=[
            AlgorithmConfig('pocs', relaxation=1.),
            AlgorithmConfig('pocs-discrete', relaxation=1.),
        ]
    ).validate().scaled(full)


def multichannel_scenario(full: bool = True) -> ScenarioConfig:
    # 3 integrate-and-fire channels encoding 2 mixed sources
    return ScenarioConfig(
        name='multichannel',
        sources=2,
        mixing=[[1., 0.], [0., 1.], [0.6, -0.8]],
        encoder=EncoderConfig(kind='integrate-and-fire', threshold=2., bias=6.),
        algorithms=[AlgorithmConfig('multichannel', relaxation=1.)]
    ).validate().scaled(full)


if __name__ == '__main__':

    logging.basicConfig(level=logging.INFO)

    for name in ['fig2a', 'fig2b', 'fig2c', 'fig3']:
        cfg = preset(name, full=True)
        cfg.output_dir = OUT_FOLDER
        cfg.n_jobs = N_JOBS
        if name == 'fig3':
            run_fig3(cfg)
        else:
            run_scenario(cfg, verbose=True)

    for cfg in [integral_scenario(), multichannel_scenario()]:
        cfg.output_dir = OUT_FOLDER
        cfg.n_jobs = N_JOBS
        run_scenario(cfg, verbose=True)
