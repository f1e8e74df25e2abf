from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Dict, Optional, Tuple
import logging
import os

import matplotlib
from matplotlib.figure import Figure
import numpy as np
import pandas as pd
import seaborn
from tqdm import tqdm

from nusrec.config import AlgorithmConfig, ScenarioConfig
from nusrec.encoders import (
    add_noise, difference_samples, instant_generator, integral_samples,
    integrate_and_fire, level_crossings, point_samples, sampling_ratio, signal_power, tune_level_spacing
)
from nusrec.evaluation import HISTORY_COLUMNS, Evaluation, relative_errors
from nusrec.io import (
    ensure_folder, load_multichannel_samples, load_point_samples, load_samples, save_results, save_waveforms
)
from nusrec.kernels import GramMatrix, KernelFamily, KernelKind, gram_matrix
from nusrec.multichannel import (
    ChannelMatrix, MultiChannelOperator, MultiChannelSamples, expand_and_encode, mix, multichannel_gram
)
from nusrec.operators import SampleSequence, SamplingOperator
from nusrec.recon import (
    KaczmarzOrder, ReconResult, ReconRun, discrete_iterates, frame_algorithm_run, grochenig_run,
    kaczmarz_run, pocs_run, staircase_initializer, synthesize
)
from nusrec.signal import Signal, random_bandlimited
from nusrec.utils import spawn_seeds


logger = logging.getLogger(__name__)

# Fixed salt so that SVG element ids do not change between runs
SVG_HASHSALT = 'nusrec'


def _relaxation(algo: AlgorithmConfig, default: Optional[float] = 1.) -> Optional[float]:
    return default if algo.relaxation is None else algo.relaxation


def _level_spacing(cfg: ScenarioConfig, x: Signal) -> float:
    if cfg.encoder.target_ratio is not None:
        return tune_level_spacing(x, cfg.encoder.target_ratio, offset=cfg.encoder.offset)
    return cfg.encoder.level_spacing


def _discrete_history(op: SamplingOperator, s: SampleSequence, u0, relaxation: float, n_iters: int, truth,
                      gram=None, readout=None) -> ReconResult:
    """Run the discrete-time iteration, synthesizing every iterate to record its errors."""
    rows = []
    u, c_prev = u0, None
    for n, c in enumerate(discrete_iterates(op, s, u0=u0, relaxation=relaxation, n_iters=n_iters, gram=gram)):
        u = synthesize(op, u0, c)
        estimate = u if readout is None else readout(u)
        err_l2, err_sob = relative_errors(estimate, truth)
        step = np.nan if c_prev is None else float(np.linalg.norm(op.rows.T @ ((c - c_prev) / op.weights)))
        rows.append((n, err_l2, err_sob, step))
        c_prev = c
    history = pd.DataFrame(rows, columns=HISTORY_COLUMNS)
    estimate = u if readout is None else readout(u)
    return ReconResult(estimate, history, False, n_iters, warning=f'Fixed budget of {n_iters} iterations')


def run_point_algorithm(algo: AlgorithmConfig, x: Signal, times: np.ndarray, values: np.ndarray,
                        n_iters: int, seed=None) -> ReconResult:
    """Reconstruct x from the point samples (t_k, values_k) with a fixed iteration budget."""
    period = x.period
    if algo.name in ('grochenig', 'grochenig-relaxed'):
        lam = 1. if algo.name == 'grochenig' else _relaxation(algo)
        return grochenig_run(times, values, period, relaxation=lam, n_iters=n_iters, truth=x, M=x.M, tol=0.)
    op = SamplingOperator.from_family(KernelFamily(KernelKind.SINC, times, period, M=x.M))
    s = op.sequence(values)
    if algo.name == 'frame':
        return frame_algorithm_run(op, s, relaxation=_relaxation(algo, None), n_iters=n_iters, truth=x, tol=0.)
    run = ReconRun(op, s, relaxation=_relaxation(algo), max_iter=n_iters, tol=0., truth=x)
    if algo.name == 'kaczmarz':
        return kaczmarz_run(run, order=KaczmarzOrder.CYCLIC)
    elif algo.name == 'kaczmarz-random':
        return kaczmarz_run(run, order=KaczmarzOrder.RANDOM, seed=seed)
    raise NotImplementedError(f'Algorithm "{algo.name}" does not reconstruct from point samples')


def run_integral_algorithm(algo: AlgorithmConfig, x: Signal, fam: KernelFamily, s: SampleSequence,
                           n_iters: int) -> ReconResult:
    """Reconstruct x from integral samples with a fixed iteration budget."""
    op = SamplingOperator.from_family(fam)
    if algo.name == 'pocs':
        return pocs_run(ReconRun(op, s, relaxation=_relaxation(algo), max_iter=n_iters, tol=0., truth=x))
    elif algo.name == 'pocs-discrete':
        return _discrete_history(op, s, op.zero(), _relaxation(algo), n_iters, x)
    raise NotImplementedError(f'Algorithm "{algo.name}" does not reconstruct from integral samples')


@dataclass
class TrialData:
    """Input and samples of one random trial.

    Attributes:
        x: Input signal (channels for multichannel scenarios).
        times: Sampling instants (point samples) or interval start instants (integral samples).
        values: Observed samples, noise included.
        family: Kernel family of integral samples.
        y: Sources of multichannel scenarios.
        samples: Multichannel samples.
        channels: Mixing matrix of multichannel scenarios.
        seed: Seed left for the randomized algorithms.
    """

    x: object
    times: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None
    family: Optional[KernelFamily] = None
    y: Optional[list] = None
    samples: Optional[MultiChannelSamples] = None
    channels: Optional[ChannelMatrix] = None
    seed: Optional[np.random.SeedSequence] = None

    @property
    def multichannel(self) -> bool:
        return self.samples is not None


def trial_seeds(cfg: ScenarioConfig):
    return spawn_seeds(cfg.seed, cfg.trials)


def encode_trial(cfg: ScenarioConfig, seed: np.random.SeedSequence) -> TrialData:
    """Draw the random input of a trial and sample it as configured."""
    input_seed, instant_seed, noise_seed, algo_seed = seed.spawn(4)
    period = cfg.period
    if len(cfg.mixing) > 0:
        A = ChannelMatrix.from_array(cfg.mixing)
        y = [random_bandlimited(period, cfg.input_rms, seed=s) for s in input_seed.spawn(A.n_sources)]
        if cfg.encoder.kind == 'integral':
            specs = [
                cfg.encoder.spec(tuple(instant_generator(cfg.instants.scenario(), s, period)))
                for s in instant_seed.spawn(A.n_channels)]
        else:
            specs = cfg.encoder.spec()
        samples = expand_and_encode(y, A, specs)
        x = mix(y, A.A)
        noisy = [
            add_noise(v, cfg.noise.snr_db, signal_power(xi), seed=s)
            for v, xi, s in zip(samples.values, x, noise_seed.spawn(A.n_channels))]
        samples = MultiChannelSamples(period, samples.instants, tuple(noisy))
        return TrialData(x, y=y, samples=samples, channels=A, seed=algo_seed)

    x = random_bandlimited(period, cfg.input_rms, seed=input_seed)
    power = signal_power(x)
    kind = cfg.encoder.kind
    family = None
    if kind == 'point':
        times = instant_generator(cfg.instants.scenario(), instant_seed, period)
        values = point_samples(x, times)
    elif kind == 'level-crossing':
        times, values = level_crossings(x, _level_spacing(cfg, x), offset=cfg.encoder.offset)
    elif kind == 'integral':
        times = instant_generator(cfg.instants.scenario(), instant_seed, period)
        values = integral_samples(x, times, leak=cfg.encoder.leak).values
        leak = cfg.encoder.leak
        family = KernelFamily(KernelKind.LEAKY_EXP if leak > 0 else KernelKind.INDICATOR, times, period,
                              leak=leak, M=x.M)
    else:
        times, values = integrate_and_fire(x, cfg.encoder.threshold, cfg.encoder.bias)
        family = KernelFamily(KernelKind.INDICATOR, times, period, M=x.M)
    values = add_noise(values, cfg.noise.snr_db, power, seed=noise_seed)
    return TrialData(x, times=times, values=values, family=family, seed=algo_seed)


def load_trial_samples(cfg: ScenarioConfig, data: TrialData, filepath: str) -> TrialData:
    """Replace the samples of a trial by the samples stored in a CSV file (as written by `encode`).

    The input of the trial is kept as the reference of the recorded errors.
    """
    if data.multichannel:
        samples = load_multichannel_samples(filepath, cfg.period, data.channels.n_channels)
        return replace(data, samples=samples)
    if data.family is None:
        times, values = load_point_samples(filepath)
        return replace(data, times=times, values=values)
    instants, s = load_samples(filepath)
    family = KernelFamily(data.family.kind, instants, cfg.period, leak=data.family.leak, M=data.x.M)
    if not np.allclose(s.weights, family.weights):
        raise ValueError(f'Sample weights in {filepath} do not match the intervals of scenario {cfg.name}')
    return replace(data, times=instants, values=s.values, family=family)


def reconstruct_trial(cfg: ScenarioConfig, data: TrialData, algo: AlgorithmConfig) -> ReconResult:
    """Run one algorithm on the samples of a trial."""
    if data.multichannel:
        if algo.name != 'multichannel':
            raise NotImplementedError(f'Algorithm "{algo.name}" does not handle multichannel samples')
        A = data.channels
        M = data.y[0].M
        op = MultiChannelOperator(data.samples, A, M=M)
        gram = multichannel_gram(data.samples, A, M=M)
        return _discrete_history(op, data.samples.sequence(), op.zero(), _relaxation(algo), cfg.n_iters, data.y,
                                 gram=gram, readout=lambda u: mix(u, A.pinv))
    if data.family is None:
        return run_point_algorithm(algo, data.x, data.times, data.values, cfg.n_iters, seed=data.seed)
    s = SampleSequence(data.values, data.family.weights)
    return run_integral_algorithm(algo, data.x, data.family, s, cfg.n_iters)


def trial_gram(cfg: ScenarioConfig, data: TrialData) -> GramMatrix:
    """Gram matrix of the sampling operator of a trial.

    Point samples use the sinc kernels, level crossings the ramp kernels of their
    difference samples.
    """
    if data.multichannel:
        return multichannel_gram(data.samples, data.channels, M=data.y[0].M)
    family = data.family
    if family is None:
        kind = KernelKind.RAMP if cfg.encoder.kind == 'level-crossing' else KernelKind.SINC
        family = KernelFamily(kind, data.times, data.x.period, M=data.x.M)
    return gram_matrix(family)


def run_trial(cfg: ScenarioConfig, seed: np.random.SeedSequence) -> Dict[str, Tuple[pd.DataFrame, bool, Optional[str]]]:
    """Run all the algorithms of a scenario on one random input.

    Returns:
        For each algorithm, its error history, convergence flag and warning.
    """
    data = encode_trial(cfg, seed)
    results = {algo.name: reconstruct_trial(cfg, data, algo) for algo in cfg.algorithms}
    return {name: (r.history, r.converged, r.warning) for name, r in results.items()}


def run_scenario(cfg: ScenarioConfig, write: bool = True, verbose: bool = False) -> pd.DataFrame:
    """Average the squared relative errors of each algorithm over random trials.

    Args:
        cfg: Scenario configuration.
        write: Whether to write the result table (and the convergence flags) in `cfg.output_dir`.
        verbose: Whether to show a progress bar.

    Returns:
        Table with columns `scenario, algorithm, iter, mse_l2, mse_sobolev, trials`.
    """
    cfg.validate()
    seeds = trial_seeds(cfg)
    if cfg.n_jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.n_jobs) as executor:
            futures = [executor.submit(run_trial, cfg, seed) for seed in seeds]
            trials = [f.result() for f in tqdm(futures, desc=cfg.name, disable=not verbose)]
    else:
        trials = [run_trial(cfg, seed) for seed in tqdm(seeds, desc=cfg.name, disable=not verbose)]

    evaluation = Evaluation()
    flags = []
    for i, trial in enumerate(trials):
        for name, (history, converged, warning) in trial.items():
            evaluation.add(history, name, cfg.name)
            flags.append((cfg.name, name, i, converged, warning or ''))
    table = evaluation.to_frame()
    logger.info(f'Scenario {cfg.name}: {cfg.trials} trials, {len(cfg.algorithms)} algorithms')
    for name in evaluation.algorithms(cfg.name):
        final = Evaluation.final(evaluation.get(cfg.name, name, 'err_l2_rel'))
        logger.info(
            f'{name}: final relative MSE {Evaluation.db(Evaluation.mse(final)):.2f} dB, '
            f'worst trial {Evaluation.db(np.max(final ** 2)):.2f} dB')

    if write:
        save_results(os.path.join(cfg.output_dir, f'{cfg.name}.csv'), table)
        flags = pd.DataFrame(flags, columns=['scenario', 'algorithm', 'trial', 'converged', 'warning'])
        flags.to_csv(os.path.join(cfg.output_dir, f'{cfg.name}-flags.csv'), index=False)
    return table


def anchor_constant(u: Signal, times: np.ndarray, values: np.ndarray) -> Signal:
    """Shift u by the constant that best fits the points (t_k, values_k)."""
    shift = float(np.mean(np.asarray(values) - u(np.asarray(times))))
    return u + Signal.constant(u.period, shift, M=u.M)


def level_crossing_runs(cfg: ScenarioConfig,
                        data: Optional[TrialData] = None) -> Dict[str, Tuple[ReconResult, Signal]]:
    """Level-crossing reconstruction from a zero and a staircase initial estimate.

    The iteration u <- P_B(u + lambda L(x - u)) is run from both initial estimates. Its
    theoretical limit is computed by the pseudo-inverse of the ramp-kernel sampling
    operator, known up to a constant that is anchored on the crossings.

    Args:
        cfg: Level-crossing scenario configuration.
        data: Trial to reconstruct (the first trial of the scenario by default).

    Returns:
        For "zero" and "staircase", the reconstruction result and its limit.
    """
    if cfg.encoder.kind != 'level-crossing':
        raise ValueError(f'Scenario {cfg.name} is not a level-crossing scenario')
    if data is None:
        data = encode_trial(cfg, trial_seeds(cfg)[0])
    period = cfg.period
    x, times, levels = data.x, data.times, data.values
    op = SamplingOperator.from_family(KernelFamily(KernelKind.RAMP, times, period, M=x.M))
    s = op.sequence(difference_samples(levels))
    lam = _relaxation(cfg.algorithms[0])
    n_iters = max([cfg.n_iters] + list(cfg.snapshots))

    runs = {}
    starts = (('zero', Signal.zeros(period, M=x.M)), ('staircase', staircase_initializer(times, levels, period, M=x.M)))
    for label, u0 in starts:
        result = grochenig_run(times, levels, period, u0=u0, relaxation=lam, n_iters=n_iters, truth=x,
                               M=x.M, tol=0., snapshots=cfg.snapshots)
        limit = anchor_constant(op.limit(s, u0), times, levels)
        err_l2, err_sob = relative_errors(result.estimate, limit)
        logger.info(f'Initial estimate {label}: distance to the limit {err_l2:.3e} (L2), {err_sob:.3e} (Sobolev)')
        runs[label] = (result, limit)
    return runs


def run_fig3(cfg: ScenarioConfig, write: bool = True) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Compare the level-crossing reconstructions from a zero and a staircase initial estimate.

    Args:
        cfg: Level-crossing scenario configuration.
        write: Whether to write the result tables in `cfg.output_dir`.

    Returns:
        table: Error histories with columns `scenario, algorithm, iter, mse_l2, mse_sobolev, trials`.
        waveforms: Input, staircase, snapshots and limits sampled on the dense grid.
    """
    cfg.validate()
    if cfg.encoder.kind != 'level-crossing':
        raise ValueError(f'Scenario {cfg.name} is not a level-crossing scenario')
    data = encode_trial(cfg, trial_seeds(cfg)[0])
    x = data.x
    logger.info(
        f'Scenario {cfg.name}: {len(data.times)} crossings, '
        f'sampling ratio {sampling_ratio(data.times, cfg.period):.3f}')
    runs = level_crossing_runs(cfg, data)

    evaluation = Evaluation()
    names = ['input', 'staircase']
    waveforms = [x, staircase_initializer(data.times, data.values, cfg.period, M=x.M)]
    for label, (result, limit) in runs.items():
        evaluation.add(result.history, f'grochenig-{label}', cfg.name)
        for n in sorted(result.snapshots):
            names.append(f'{label}@{n}')
            waveforms.append(result.snapshots[n])
        names.append(f'{label}@limit')
        waveforms.append(limit)
    finals = {label: result.history['err_l2_rel'].iloc[-1] ** 2 for label, (result, _) in runs.items()}
    logger.info(
        f'Final relative MSE: {Evaluation.db(finals["staircase"]):.2f} dB from the staircase, '
        f'{Evaluation.db(finals["zero"]):.2f} dB from zero')
    table = evaluation.to_frame()
    frame = pd.DataFrame({'t': x.to_grid().times})
    for name, sig in zip(names, waveforms):
        frame[name] = sig.to_grid().samples

    if write:
        save_results(os.path.join(cfg.output_dir, f'{cfg.name}.csv'), table)
        save_waveforms(os.path.join(cfg.output_dir, f'{cfg.name}-waveforms.csv'), waveforms, names=names)
    return table, frame


def emit_plot(table: pd.DataFrame, filepath: str):
    """Render a result table as a self-contained SVG file.

    Tables with MSE columns give MSE-vs-iteration curves on a log scale (solid lines for
    the L2 error, dashed lines for the Sobolev error), one panel per scenario. Tables
    with a time column `t` give waveform overlays. Output bytes only depend on the table.

    Args:
        table: Result table or waveform table.
        filepath: Output SVG file.
    """
    if (table is None) or (len(table) == 0):
        raise ValueError('Nothing to plot: the table is empty')
    with matplotlib.rc_context({'svg.hashsalt': SVG_HASHSALT, 'svg.fonttype': 'path'}):
        if 't' in table.columns:
            fig = _plot_waveforms(table)
        elif {'algorithm', 'mse_l2'}.issubset(table.columns):
            fig = _plot_curves(table)
        else:
            raise ValueError(f'Cannot plot a table with columns {list(table.columns)}')
        try:
            ensure_folder(filepath)
            fig.savefig(filepath, format='svg', metadata={'Date': None})
        except OSError as e:
            raise OSError(f'Could not write plot {filepath}: {e}') from e


def _style(ax):
    ax.spines['right'].set_visible(False)
    ax.spines['top'].set_visible(False)
    ax.grid(alpha=0.4, color='grey', linewidth=0.5, linestyle='--')


def _plot_curves(table: pd.DataFrame) -> Figure:
    scenarios = list(dict.fromkeys(table['scenario']))
    algorithms = list(dict.fromkeys(table['algorithm']))
    if len(algorithms) == 0:
        raise ValueError('No algorithm to plot')
    colors = dict(zip(algorithms, seaborn.color_palette('colorblind', len(algorithms))))
    fig = Figure(figsize=(5 * len(scenarios), 4))
    for k, scenario in enumerate(scenarios):
        ax = fig.add_subplot(1, len(scenarios), k + 1)
        sub = table[table['scenario'] == scenario]
        for algorithm in dict.fromkeys(sub['algorithm']):
            rows = sub[sub['algorithm'] == algorithm].sort_values('iter')
            ax.plot(rows['iter'], rows['mse_l2'], '-', color=colors[algorithm], label=algorithm)
            ax.plot(rows['iter'], rows['mse_sobolev'], '--', color=colors[algorithm])
        ax.set_yscale('log')
        ax.set_xlabel('Iteration')
        ax.set_ylabel('Relative MSE')
        ax.set_title(scenario)
        _style(ax)
        ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    return fig


def _plot_waveforms(table: pd.DataFrame) -> Figure:
    columns = [c for c in table.columns if c != 't']
    colors = seaborn.color_palette('colorblind', len(columns))
    fig = Figure(figsize=(10, 4))
    ax = fig.add_subplot(1, 1, 1)
    for color, column in zip(colors, columns):
        style = ':' if column == 'staircase' else '-'
        width = 1.5 if column == 'input' else 0.8
        ax.plot(table['t'], table[column], style, color=color, linewidth=width, label=column)
    ax.set_xlabel('Time')
    _style(ax)
    ax.legend(frameon=False, fontsize=7, ncol=2)
    fig.tight_layout()
    return fig
