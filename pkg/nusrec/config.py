from dataclasses import dataclass, field, fields, is_dataclass, replace
from typing import Any, Dict, List, Optional, Tuple, get_args, get_origin, get_type_hints
import math
import re
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from nusrec.encoders import Clusters, EncodingKind, EncodingSpec, Listed, UniformGap


# Desk-scale defaults and their full-scale counterparts
DESK_PERIOD = 63.
DESK_TRIALS = 20
FULL_PERIOD = 315.
FULL_TRIALS = 100

ALGORITHMS = (
    'frame',
    'kaczmarz',
    'kaczmarz-random',
    'grochenig',
    'grochenig-relaxed',
    'pocs',
    'pocs-discrete',
    'multichannel',
)

# Kinds of samples each algorithm consumes
POINT_ALGORITHMS = {'frame', 'kaczmarz', 'kaczmarz-random', 'grochenig', 'grochenig-relaxed'}
INTEGRAL_ALGORITHMS = {'pocs', 'pocs-discrete', 'multichannel'}


class ConfigError(ValueError):
    """Invalid scenario configuration.

    Attributes:
        key: Dotted path of the offending field.
        line: Line of the field in the configuration file, if known.
    """

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        self.key: Optional[str] = key
        self.line: Optional[int] = line
        location = ''
        if key is not None:
            location += f' [{key}]'
        if line is not None:
            location += f' (line {line})'
        super().__init__(f'{message}{location}')


@dataclass
class InstantsConfig:
    """Statistics of the sampling instants ("uniform-gap", "clusters" or "listed")."""

    kind: str = 'uniform-gap'
    lo: float = 0.3
    hi: float = 1.
    intra_gap: float = 0.25
    count: int = 3
    ratio: float = 2.
    instants: List[float] = field(default_factory=list)

    def scenario(self):
        if self.kind == 'uniform-gap':
            return UniformGap(self.lo, self.hi)
        elif self.kind == 'clusters':
            return Clusters(self.intra_gap, self.count, self.ratio)
        elif self.kind == 'listed':
            return Listed(tuple(self.instants))
        raise ConfigError(f'Unknown instant scenario "{self.kind}"', key='instants.kind')


@dataclass
class EncoderConfig:
    """How the input is sampled.

    `kind` is "point" (values at the generated instants), "integral" (integrals over
    the intervals between generated instants), "integrate-and-fire" or "level-crossing".
    """

    kind: str = 'point'
    threshold: float = 0.5
    bias: float = 3.
    level_spacing: float = 0.5
    target_ratio: Optional[float] = None
    offset: float = 0.
    leak: float = 0.

    def spec(self, instants: Optional[Tuple[float, ...]] = None) -> EncodingSpec:
        if self.kind in ('point', 'integral'):
            return EncodingSpec(EncodingKind.INSTANT_LIST, instants=instants, leak=self.leak)
        elif self.kind == 'integrate-and-fire':
            return EncodingSpec(EncodingKind.INTEGRAL_UNIFORM_TRIGGER, threshold=self.threshold,
                                bias=self.bias, leak=self.leak)
        elif self.kind == 'level-crossing':
            return EncodingSpec(EncodingKind.LEVEL_CROSSING, level_spacing=self.level_spacing, offset=self.offset)
        raise ConfigError(f'Unknown encoder "{self.kind}"', key='encoder.kind')


@dataclass
class NoiseConfig:
    snr_db: float = math.inf


@dataclass
class AlgorithmConfig:
    name: str = 'pocs'
    relaxation: Optional[float] = None


@dataclass
class ScenarioConfig:
    """Settings of a reconstruction experiment.

    Attributes:
        name: Scenario identifier, used in result tables and file names.
        period: Signal period (Nyquist period is 1).
        seed: Master seed, split into one independent seed per trial.
        trials: Number of random inputs.
        sources: Number of source signals (multichannel scenarios).
        input_rms: Root-mean-square amplitude of the random inputs.
        n_iters: Iteration budget of each algorithm.
        snapshots: Iterations at which estimates are stored (level-crossing scenarios).
        n_jobs: Number of worker processes running trials.
        output_dir: Folder where result tables and plots are written.
        mixing: Mixing matrix of multichannel scenarios (rows are channels).
        instants: Statistics of the sampling instants.
        encoder: Sampling scheme.
        noise: Sample noise.
        algorithms: Reconstruction algorithms to compare.
    """

    name: str = 'custom'
    period: float = DESK_PERIOD
    seed: int = 0
    trials: int = DESK_TRIALS
    sources: int = 1
    input_rms: float = 1.
    n_iters: int = 30
    snapshots: List[int] = field(default_factory=lambda: [1, 10, 100])
    n_jobs: int = 1
    output_dir: str = 'results'
    mixing: List[List[float]] = field(default_factory=list)
    instants: InstantsConfig = field(default_factory=InstantsConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    algorithms: List[AlgorithmConfig] = field(default_factory=lambda: [AlgorithmConfig()])

    def validate(self) -> 'ScenarioConfig':
        if self.period < 3:
            raise ConfigError(f'Period must be >= 3, got {self.period}', key='period')
        if self.trials < 1:
            raise ConfigError(f'Number of trials must be >= 1, got {self.trials}', key='trials')
        if self.n_iters < 1:
            raise ConfigError(f'Number of iterations must be >= 1, got {self.n_iters}', key='n_iters')
        if self.n_jobs < 1:
            raise ConfigError(f'Number of jobs must be >= 1, got {self.n_jobs}', key='n_jobs')
        if self.input_rms <= 0:
            raise ConfigError(f'Input amplitude must be positive, got {self.input_rms}', key='input_rms')
        if len(self.algorithms) == 0:
            raise ConfigError('No algorithm to run', key='algorithms')
        for k, algo in enumerate(self.algorithms):
            key = f'algorithms[{k}]'
            if algo.name not in ALGORITHMS:
                raise ConfigError(f'Unknown algorithm "{algo.name}"', key=f'{key}.name')
            if (algo.relaxation is not None) and (algo.relaxation <= 0):
                raise ConfigError(f'Relaxation must be positive, got {algo.relaxation}', key=f'{key}.relaxation')
            if (self.encoder.kind in ('point', 'level-crossing')) and (algo.name not in POINT_ALGORITHMS):
                raise ConfigError(f'Algorithm "{algo.name}" needs integral samples', key=f'{key}.name')
            if (self.encoder.kind in ('integral', 'integrate-and-fire')) and (algo.name not in INTEGRAL_ALGORITHMS):
                raise ConfigError(f'Algorithm "{algo.name}" needs point samples', key=f'{key}.name')
            if (algo.name == 'multichannel') and (len(self.mixing) == 0):
                raise ConfigError('Multichannel reconstruction needs a mixing matrix', key='mixing')
        if len(self.mixing) > 0:
            if any(len(row) != self.sources for row in self.mixing):
                raise ConfigError(f'Mixing matrix rows must have {self.sources} entries', key='mixing')
            if any(algo.name != 'multichannel' for algo in self.algorithms):
                raise ConfigError('Scenarios with a mixing matrix only run multichannel reconstruction', key='algorithms')
        if self.encoder.kind not in ('point', 'integral', 'integrate-and-fire', 'level-crossing'):
            raise ConfigError(f'Unknown encoder "{self.encoder.kind}"', key='encoder.kind')
        if self.encoder.kind in ('point', 'integral'):
            try:
                self.instants.scenario()
            except ConfigError:
                raise
            except ValueError as e:
                raise ConfigError(str(e), key='instants')
        if (self.encoder.target_ratio is not None) and (self.encoder.target_ratio <= 0):
            raise ConfigError('Target sampling ratio must be positive', key='encoder.target_ratio')
        if any(n < 0 for n in self.snapshots):
            raise ConfigError('Snapshot iterations must be non-negative', key='snapshots')
        return self

    def scaled(self, full: bool) -> 'ScenarioConfig':
        """Copy of the configuration at full scale (period 315, 100 trials) if requested."""
        if not full:
            return self
        return replace(self, period=FULL_PERIOD, trials=FULL_TRIALS)


def _line_of(text: Optional[str], key: str) -> Optional[int]:
    if text is None:
        return None
    name = re.escape(key.split('.')[-1].split('[')[0])
    for i, line in enumerate(text.splitlines(), start=1):
        if re.match(rf'^\s*"?{name}"?\s*=', line) or re.match(rf'^\s*\[+\s*{name}\s*\]+', line):
            return i
    return None


def _convert(value: Any, hint: Any, key: str, text: Optional[str]) -> Any:
    origin = get_origin(hint)
    if is_dataclass(hint):
        if not isinstance(value, dict):
            raise ConfigError('Expected a table', key=key, line=_line_of(text, key))
        return _from_dict(hint, value, key, text)
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError('Expected an array', key=key, line=_line_of(text, key))
        (item_hint,) = get_args(hint)
        return [_convert(v, item_hint, f'{key}[{i}]', text) for i, v in enumerate(value)]
    if origin is not None and type(None) in get_args(hint):
        inner = [h for h in get_args(hint) if h is not type(None)][0]
        return None if value is None else _convert(value, inner, key, text)
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f'Expected a number, got {value!r}', key=key, line=_line_of(text, key))
        return float(value)
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f'Expected an integer, got {value!r}', key=key, line=_line_of(text, key))
        return value
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f'Expected a string, got {value!r}', key=key, line=_line_of(text, key))
        return value
    return value


def _from_dict(cls, data: Dict[str, Any], prefix: str, text: Optional[str]):
    hints = get_type_hints(cls)
    names = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        path = f'{prefix}.{key}' if prefix else key
        if key not in names:
            raise ConfigError('Unknown key', key=path, line=_line_of(text, path))
        kwargs[key] = _convert(value, hints[key], path, text)
    return cls(**kwargs)


def config_from_dict(data: Dict[str, Any], text: Optional[str] = None) -> ScenarioConfig:
    """Build and validate a scenario configuration from a (parsed TOML) dict."""
    if 'scenario' in data:
        data = dict(data)
        scenario = data.pop('scenario')
        if len(data) > 0:
            raise ConfigError('Unknown key', key=next(iter(data)), line=_line_of(text, next(iter(data))))
        data = scenario
    cfg = _from_dict(ScenarioConfig, data, '', text)
    try:
        return cfg.validate()
    except ConfigError as e:
        if (e.line is None) and (e.key is not None):
            raise ConfigError(str(e).split(' [')[0], key=e.key, line=_line_of(text, e.key))
        raise


def load_config(filepath: str) -> ScenarioConfig:
    """Load a scenario configuration from a TOML file.

    Args:
        filepath: TOML file, either flat or with all settings under a `[scenario]` table.

    Returns:
        The validated configuration.
    """
    try:
        with open(filepath, 'rb') as f:
            raw = f.read()
    except OSError as e:
        raise OSError(f'Could not read configuration file {filepath}: {e}') from e
    text = raw.decode('utf-8')
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f'Invalid TOML in {filepath}: {e}', line=getattr(e, 'lineno', None))
    return config_from_dict(data, text=text)


def preset(name: str, full: bool = False) -> ScenarioConfig:
    """Built-in scenarios comparing the point-sampling algorithms."""
    point_algorithms = lambda lam: [
        AlgorithmConfig('frame'),
        AlgorithmConfig('kaczmarz'),
        AlgorithmConfig('kaczmarz-random'),
        AlgorithmConfig('grochenig'),
        AlgorithmConfig('grochenig-relaxed', relaxation=lam),
    ]
    if name == 'fig2a':
        cfg = ScenarioConfig(
            name=name,
            instants=InstantsConfig(kind='uniform-gap', lo=0.3, hi=1.),
            algorithms=point_algorithms(1.3))
    elif name == 'fig2b':
        cfg = ScenarioConfig(
            name=name,
            instants=InstantsConfig(kind='clusters', intra_gap=0.25, count=3, ratio=2.),
            algorithms=point_algorithms(1.45))
    elif name == 'fig2c':
        cfg = ScenarioConfig(
            name=name,
            instants=InstantsConfig(kind='uniform-gap', lo=0., hi=0.5),
            noise=NoiseConfig(snr_db=45.),
            algorithms=point_algorithms(1.05))
    elif name == 'fig3':
        cfg = ScenarioConfig(
            name=name,
            trials=1,
            seed=3,
            n_iters=100,
            snapshots=[1, 10, 100],
            encoder=EncoderConfig(kind='level-crossing', target_ratio=0.77),
            algorithms=[AlgorithmConfig('grochenig')])
    else:
        raise NotImplementedError(f'Unknown scenario "{name}"')
    cfg = cfg.validate().scaled(full)
    if name == 'fig3':
        cfg = replace(cfg, trials=1)
    return cfg
