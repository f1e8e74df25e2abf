import argparse
import logging
import os
import sys
from dataclasses import replace
from typing import List, Optional

from nusrec.config import ALGORITHMS, AlgorithmConfig, ConfigError, ScenarioConfig, load_config, preset
from nusrec.experiments import (
    emit_plot, encode_trial, load_trial_samples, reconstruct_trial, run_fig3, run_scenario, trial_gram, trial_seeds
)
from nusrec.io import (
    save_gram, save_history, save_multichannel_samples, save_point_samples, save_samples, save_waveforms
)
from nusrec.operators import SampleSequence
from nusrec.utils import bounded_float_type, bounded_int_type


PRESETS = ('fig2a', 'fig2b', 'fig2c', 'fig3')

TESTS_FOLDER = os.path.join(os.path.dirname(os.path.abspath(__file__)), '..', 'tests')


def _with_suffix(filepath: str, suffix: str) -> str:
    root, ext = os.path.splitext(filepath)
    return f'{root}{suffix}{ext or ".csv"}'


def _print_summary(cfg: ScenarioConfig, source: str):
    print(f'Input configuration            : {source}')
    print(f'Scenario                       : {cfg.name}')
    print(f'Period                         : {cfg.period:g}')
    print(f'Encoder                        : {cfg.encoder.kind}')
    print('Number of trials               : %i' % cfg.trials)
    print('Number of iterations           : %i' % cfg.n_iters)
    print('Algorithms                     : %s' % ', '.join(algo.name for algo in cfg.algorithms))


def encode(args) -> int:
    cfg = load_config(args.config).validate()
    _print_summary(cfg, args.config)
    data = encode_trial(cfg, trial_seeds(cfg)[0])
    if data.multichannel:
        save_multichannel_samples(args.out, data.samples)
        print('Number of samples              : %i' % len(data.samples))
    elif data.family is None:
        save_point_samples(args.out, data.times, data.values, cfg.period)
        print('Number of samples              : %i' % len(data.values))
    else:
        save_samples(args.out, data.times, SampleSequence(data.values, data.family.weights), cfg.period)
        print('Number of samples              : %i' % len(data.values))
    print(f'Samples stored at {args.out}.')
    return 0


def reconstruct(args) -> int:
    cfg = load_config(args.config)
    algo = next((a for a in cfg.algorithms if a.name == args.algo), AlgorithmConfig(args.algo))
    if args.relaxation is not None:
        algo = replace(algo, relaxation=args.relaxation)
    if args.n_iters is not None:
        cfg = replace(cfg, n_iters=args.n_iters)
    cfg = replace(cfg, algorithms=[algo]).validate()
    _print_summary(cfg, args.config)

    data = encode_trial(cfg, trial_seeds(cfg)[0])
    if args.samples is not None:
        data = load_trial_samples(cfg, data, args.samples)
        print(f'Samples                        : {args.samples}')
    result = reconstruct_trial(cfg, data, algo)
    if data.multichannel:
        signals = list(data.y) + list(result.estimate)
        names = [f'y{i}' for i in range(len(data.y))] + [f'estimate{i}' for i in range(len(data.y))]
    else:
        signals = [data.x, result.estimate]
        names = ['input', 'estimate']
    save_waveforms(args.out, signals, names=names)
    history_filepath = _with_suffix(args.out, '-history')
    save_history(history_filepath, result.history)

    last = result.history.iloc[-1]
    print(f'Relative L2 error              : {last["err_l2_rel"]:.3e}')
    print(f'Relative Sobolev error         : {last["err_sobolev_rel"]:.3e}')
    if result.warning is not None:
        print(f'Warning                        : {result.warning}')
    print(f'Reconstruction results stored at {args.out} and {history_filepath}.')
    return 0


def experiment(args) -> int:
    if args.scenario.startswith('custom:'):
        source = args.scenario[len('custom:'):]
        cfg = load_config(source).scaled(args.full)
    elif args.scenario in PRESETS:
        source = 'built-in'
        cfg = preset(args.scenario, full=args.full)
    else:
        raise ConfigError(f'Unknown scenario "{args.scenario}"', key='scenario')
    if args.jobs is not None:
        cfg = replace(cfg, n_jobs=args.jobs)
    if args.out is not None:
        cfg = replace(cfg, output_dir=args.out)
    cfg = cfg.validate()
    _print_summary(cfg, source)

    if cfg.encoder.kind == 'level-crossing' and (args.scenario == 'fig3' or cfg.trials == 1):
        _, waveforms = run_fig3(cfg)
        emit_plot(waveforms, os.path.join(cfg.output_dir, f'{cfg.name}.svg'))
    else:
        table = run_scenario(cfg, verbose=args.verbose > 0)
        emit_plot(table, os.path.join(cfg.output_dir, f'{cfg.name}.svg'))
    print(f'Experiment results stored at {cfg.output_dir}.')
    return 0


def gram_table(args) -> int:
    cfg = load_config(args.config).validate()
    _print_summary(cfg, args.config)
    gram = trial_gram(cfg, encode_trial(cfg, trial_seeds(cfg)[0]))
    save_gram(args.out, gram)
    print('Size of the Gram matrix        : %i' % len(gram.weights))
    print(f'Gram matrix stored at {args.out}.')
    return 0


def selftest(args) -> int:
    import pytest
    return int(pytest.main([TESTS_FOLDER, '-q']))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='nusrec',
        description='Reconstruction of bandlimited signals from nonuniform generalized samples'
    )
    parser.add_argument(
        '-v', '--verbose',
        action='count',
        default=0,
        help='Increase logging verbosity (-v for info, -vv for debug)'
    )
    subparsers = parser.add_subparsers(dest='command', required=True)

    p = subparsers.add_parser('encode', help='Sample the first trial of a scenario')
    p.add_argument('--config', type=str, required=True, help='Scenario configuration (TOML file)')
    p.add_argument('--out', type=str, default='samples.csv', help='Where to write the samples (CSV file)')
    p.set_defaults(func=encode)

    p = subparsers.add_parser('reconstruct', help='Reconstruct the first trial of a scenario')
    p.add_argument('--config', type=str, required=True, help='Scenario configuration (TOML file)')
    p.add_argument('--algo', type=str, required=True, choices=ALGORITHMS, help='Reconstruction algorithm')
    p.add_argument('--relaxation', type=bounded_float_type(0., 2.), default=None, help='Relaxation coefficient')
    p.add_argument('--n-iters', type=bounded_int_type(1), default=None, help='Number of iterations')
    p.add_argument('--samples', type=str, default=None,
                   help='Samples written by "encode" (CSV file), instead of sampling the first trial again')
    p.add_argument('--out', type=str, default='estimate.csv',
                   help='Where to write the estimate on a dense grid (CSV file)')
    p.set_defaults(func=reconstruct)

    p = subparsers.add_parser('experiment', help='Run a scenario and plot its results')
    p.add_argument('--scenario', type=str, required=True,
                   help=f'One of {", ".join(PRESETS)}, or custom:<file> for a TOML configuration')
    p.add_argument('--full', action='store_true', help='Whether to run at full scale (period 315, 100 trials)')
    p.add_argument('--jobs', type=bounded_int_type(1), default=None, help='Number of worker processes')
    p.add_argument('--out', type=str, default=None, help='Output folder')
    p.set_defaults(func=experiment)

    p = subparsers.add_parser('gram-table', help='Write the Gram matrix of the first trial of a scenario')
    p.add_argument('--config', type=str, required=True, help='Scenario configuration (TOML file)')
    p.add_argument('--out', type=str, default='gram.csv', help='Where to write the Gram matrix (CSV file)')
    p.set_defaults(func=gram_table)

    p = subparsers.add_parser('selftest', help='Run the test suite')
    p.set_defaults(func=selftest)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format='%(asctime)s %(name)s %(levelname)s: %(message)s')
    try:
        return args.func(args)
    except ConfigError as e:
        print(f'Invalid configuration: {e}', file=sys.stderr)
        return 2
    except OSError as e:
        print(e, file=sys.stderr)
        return 1
    except ValueError as e:
        print(f'Invalid input: {e}', file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
