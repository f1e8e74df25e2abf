from dataclasses import dataclass, field
from typing import Optional, Tuple, Union
import enum
import logging

import numpy as np
import scipy.integrate
import scipy.optimize

from nusrec.kernels import KernelFamily, KernelKind
from nusrec.operators import SampleSequence
from nusrec.signal import DEFAULT_OVERSAMPLE, Signal, evaluate, integral


logger = logging.getLogger(__name__)

# Time accuracy of the root refinements (firing instants, level crossings)
TIME_TOL = 1e-12

# Attempts at drawing uniform gaps whose wrap-around gap also lies in [lo, hi)
MAX_GAP_DRAWS = 1000


class EncodingKind(enum.Enum):

    INTEGRAL_UNIFORM_TRIGGER = 'integrate-and-fire'
    LEVEL_CROSSING = 'level-crossing'
    INSTANT_LIST = 'instants'


@dataclass(frozen=True)
class EncodingSpec:
    """Parameters of an encoder.

    Attributes:
        kind: Encoder type.
        threshold: Integration threshold delta of integrate-and-fire encoding.
        bias: Bias b added to the input before integration.
        level_spacing: Spacing of the levels of level-crossing sampling.
        offset: Offset of the level grid.
        instants: Explicit integration instants.
        leak: Leak rate of the integration kernels.
    """

    kind: EncodingKind
    threshold: Optional[float] = None
    bias: Optional[float] = None
    level_spacing: Optional[float] = None
    offset: float = 0.
    instants: Optional[Tuple[float, ...]] = None
    leak: float = 0.

    def __post_init__(self):
        if not isinstance(self.kind, EncodingKind):
            try:
                object.__setattr__(self, 'kind', EncodingKind(str(self.kind)))
            except ValueError:
                raise NotImplementedError(f'Unknown encoder "{self.kind}"')
        if self.leak < 0:
            raise ValueError(f'Leak must be non-negative, got {self.leak}')
        if self.kind == EncodingKind.INTEGRAL_UNIFORM_TRIGGER:
            if (self.threshold is None) or (self.threshold <= 0):
                raise ValueError('Integrate-and-fire encoding needs a positive threshold')
            if self.bias is None:
                raise ValueError('Integrate-and-fire encoding needs a bias')
        elif self.kind == EncodingKind.LEVEL_CROSSING:
            if (self.level_spacing is None) or (self.level_spacing <= 0):
                raise ValueError('Level-crossing sampling needs a positive level spacing')
        else:
            if (self.instants is None) or np.any(np.diff(self.instants) <= 0):
                raise ValueError('Explicit instants must be strictly increasing')


def integral_samples(x: Signal, instants: np.ndarray, leak: float = 0.) -> SampleSequence:
    """Integral samples s_k = int_{t_k}^{t_{k+1}} exp(-leak (t - t_k)) x(t) dt.

    Integrals are computed by adaptive quadrature of the pointwise signal values. The last
    interval wraps around to `instants[0] + period`.

    Args:
        x: Input signal.
        instants: Strictly increasing instants spanning less than one period.
        leak: Leak rate alpha (0 for plain integrals).

    Returns:
        The samples, weighted by the squared norms of the integration kernels.
    """
    kind = KernelKind.LEAKY_EXP if leak > 0 else KernelKind.INDICATOR
    fam = KernelFamily(kind, instants, x.period, leak=leak, M=x.M)
    values = np.empty(len(fam))
    for k, (a, b) in enumerate(zip(fam.starts, fam.ends)):
        integrand = lambda t, a=a: evaluate(x, t) * np.exp(-leak * (t - a))
        values[k], _ = scipy.integrate.quad(integrand, a, b, epsabs=1e-12, epsrel=1e-12, limit=500)
    return SampleSequence(values, fam.weights)


def amplitude_bound(x: Signal) -> float:
    """Upper bound of max |x(t)| from the harmonics."""
    return float(np.abs(x.positive[0]) + 2. * np.sum(np.abs(x.positive[1:])))


def fire_instants(x: Signal, threshold: float, bias: float, start: float = 0.,
                  oversample: int = DEFAULT_OVERSAMPLE) -> np.ndarray:
    """Spike instants of an ideal integrate-and-fire encoder.

    Consecutive instants satisfy int_{t_{j-1}}^{t_j} (x(t) + bias) dt = threshold. Each root
    is bracketed from the amplitude bounds of x and refined with Brent's method.

    Args:
        x: Input signal.
        threshold: Integration threshold delta > 0.
        bias: Bias b, which must dominate the signal amplitude.
        start: First instant.
        oversample: Grid oversampling used to check the amplitude of x.

    Returns:
        Firing instants within [start, start + period), `start` included.
    """
    if threshold <= 0:
        raise ValueError(f'Threshold must be positive, got {threshold}')
    peak = float(np.max(np.abs(x.to_grid(oversample).samples)))
    if bias <= peak:
        raise ValueError(f'Bias {bias} does not dominate the input amplitude {peak:.6g}: firing could stall')
    upper = amplitude_bound(x)

    F = lambda t: x.antiderivative(t) + bias * t
    instants = [start]
    end = start + x.period
    while True:
        t_prev = instants[-1]
        level = F(t_prev) + threshold
        g = lambda t: F(t) - level
        lo = t_prev + threshold / (bias + upper)
        hi = t_prev + threshold / (bias - peak)
        while g(hi) < 0:
            hi += threshold / (bias - peak)
        if g(lo) > 0:
            lo = t_prev
        t_next = scipy.optimize.brentq(g, lo, hi, xtol=TIME_TOL, rtol=4 * np.finfo(float).eps)
        # Instants closer to the end of the period than the time accuracy belong to the next period
        if t_next >= end - 1e3 * TIME_TOL:
            break
        instants.append(t_next)
    logger.debug(f'Integrate-and-fire encoder produced {len(instants)} spikes over one period')
    return np.asarray(instants)


def fire_samples(instants: np.ndarray, threshold: float, bias: float) -> np.ndarray:
    """Integral samples delta - b * (t_j - t_{j-1}) of the firing intervals."""
    return threshold - bias * np.diff(np.asarray(instants, dtype=float))


def integrate_and_fire(x: Signal, threshold: float, bias: float, start: float = 0.,
                      oversample: int = DEFAULT_OVERSAMPLE) -> Tuple[np.ndarray, np.ndarray]:
    """Firing instants and integral samples of one period of an integrate-and-fire encoder.

    The last interval, left incomplete by the end of the period, is measured by the plain
    integral of x up to `start + period`, so that the intervals tile the period.

    Returns:
        instants: Firing instants, `start` included.
        values: Integral samples of x over the intervals starting at each instant.
    """
    instants = fire_instants(x, threshold, bias, start=start, oversample=oversample)
    tail = integral(x, instants[-1], start + x.period)
    return instants, np.append(fire_samples(instants, threshold, bias), tail)


def level_crossings(x: Signal, level_spacing: float, offset: float = 0.,
                    oversample: int = DEFAULT_OVERSAMPLE) -> Tuple[np.ndarray, np.ndarray]:
    """Crossings of the signal with the levels m * level_spacing + offset.

    Sign changes are located on the dense grid and refined with Brent's method. A contact
    without sign change (tangency) is not a crossing.

    Args:
        x: Input signal.
        level_spacing: Spacing L > 0 of the levels.
        offset: Offset of the level grid.
        oversample: Grid oversampling.

    Returns:
        times: Crossing instants in [0, period), sorted.
        levels: Crossed levels (exact values of the samples).
    """
    if level_spacing <= 0:
        raise ValueError(f'Level spacing must be positive, got {level_spacing}')
    grid = x.to_grid(oversample)
    t = grid.times
    n = grid.n_grid
    samples = grid.samples
    m_min = int(np.ceil((np.min(samples) - offset) / level_spacing))
    m_max = int(np.floor((np.max(samples) - offset) / level_spacing))

    times, levels = [], []
    for m in range(m_min, m_max + 1):
        level = m * level_spacing + offset
        signs = np.sign(samples - level)
        nonzero = np.nonzero(signs)[0]
        if len(nonzero) < 2:
            continue
        g = lambda tau, level=level: evaluate(x, tau) - level
        for i, j in zip(nonzero, np.roll(nonzero, -1)):
            if signs[i] == signs[j]:
                continue
            a = t[i]
            b = t[j] if j > i else t[j] + x.period
            if (j - i) % n == 1:
                root = scipy.optimize.brentq(g, a, b, xtol=TIME_TOL, rtol=4 * np.finfo(float).eps)
            else:
                # Exact zeros on the grid between the two sign-carrying points
                root = t[(i + 1) % n] if (i + 1) % n != 0 else x.period
            times.append(float(np.mod(root, x.period)))
            levels.append(level)
    times = np.asarray(times, dtype=float)
    levels = np.asarray(levels, dtype=float)
    idx = np.argsort(times, kind='stable')
    return times[idx], levels[idx]


def tune_level_spacing(x: Signal, target_ratio: float, offset: float = 0., n_steps: int = 40,
                       oversample: int = DEFAULT_OVERSAMPLE) -> float:
    """Level spacing whose crossing count per unit time is closest to `target_ratio`.

    The count decreases (not strictly) with the spacing, which is searched by bisection.
    """
    if target_ratio <= 0:
        raise ValueError(f'Target sampling ratio must be positive, got {target_ratio}')
    peak = float(np.max(np.abs(x.to_grid(oversample).samples)))
    if peak == 0:
        raise ValueError('A zero signal has no level crossing')
    target = target_ratio * x.period
    count = lambda L: len(level_crossings(x, L, offset=offset, oversample=oversample)[0])
    lo, hi = 1e-3 * peak, 4. * peak + abs(offset)
    best, best_gap = hi, abs(count(hi) - target)
    for _ in range(n_steps):
        mid = np.sqrt(lo * hi)
        n = count(mid)
        if abs(n - target) < best_gap:
            best, best_gap = mid, abs(n - target)
        if n > target:
            lo = mid
        else:
            hi = mid
    logger.debug(f'Level spacing {best:.6g} gives {best_gap:.0f} crossings away from the target')
    return float(best)


@dataclass(frozen=True)
class UniformGap:
    """I.i.d. gaps between sampling instants, uniformly distributed in [lo, hi].

    The gap closing the period (from the last instant back to the first one) is kept
    in [lo, hi) as well, by redrawing the whole sequence when it falls outside.
    """

    lo: float
    hi: float

    def __post_init__(self):
        if not (0 <= self.lo < self.hi):
            raise ValueError(f'Invalid gap distribution [{self.lo}, {self.hi}]')

    @property
    def mean_gap(self) -> float:
        return 0.5 * (self.lo + self.hi)


@dataclass(frozen=True)
class Clusters:
    """Randomly positioned clusters of `count` instants equally spaced by `intra_gap`.

    The period is split into equal slots, one per cluster, so that the overall density
    of instants is `ratio` per unit time. Each cluster is placed uniformly within its
    slot, at least `intra_gap` away from the next cluster (across the period boundary too).
    """

    intra_gap: float
    count: int
    ratio: float

    def __post_init__(self):
        if (self.intra_gap <= 0) or (self.count < 1) or (self.ratio <= 0):
            raise ValueError('Clusters need a positive gap, count and density')


@dataclass(frozen=True)
class Listed:

    instants: Tuple[float, ...] = field(default_factory=tuple)


Scenario = Union[UniformGap, Clusters, Listed]


def _uniform_gap_instants(scenario: UniformGap, rng: np.random.Generator, period: float) -> np.ndarray:
    """Accumulate i.i.d. gaps over one period, redrawn until the wrap-around gap lies in [lo, hi)."""
    if scenario.lo >= period:
        raise ValueError(f'Gaps of at least {scenario.lo} do not fit in period {period}')
    n_draw = int(np.ceil(2 * period / scenario.mean_gap)) + 16
    for _ in range(MAX_GAP_DRAWS):
        cum = np.concatenate(([0.], np.cumsum(rng.uniform(scenario.lo, scenario.hi, size=n_draw))))
        while cum[-1] < period:
            cum = np.concatenate((cum, cum[-1] + np.cumsum(rng.uniform(scenario.lo, scenario.hi, size=n_draw))))
        t = cum[(cum <= period - scenario.lo) & (cum < period)]
        if period - t[-1] < scenario.hi:
            return np.sort(np.mod(rng.uniform(0, period) + t, period))
    raise ValueError(f'Could not close gaps in [{scenario.lo}, {scenario.hi}] over period {period}')


def instant_generator(scenario: Scenario, seed, period: float) -> np.ndarray:
    """Generate sampling instants within [0, period).

    Args:
        scenario: Statistics of the instants.
        seed: Seed of the random generator (or a `np.random.Generator`).
        period: Signal period.

    Returns:
        Strictly increasing instants in [0, period).
    """
    rng = np.random.default_rng(seed)
    if isinstance(scenario, UniformGap):
        instants = _uniform_gap_instants(scenario, rng, period)
    elif isinstance(scenario, Clusters):
        span = (scenario.count - 1) * scenario.intra_gap
        n_clusters = int(round(scenario.ratio * period / scenario.count))
        slot = period / max(n_clusters, 1)
        play = slot - span - scenario.intra_gap
        if (n_clusters < 1) or (play < 0):
            raise ValueError(
                f'Infeasible cluster density: {n_clusters} clusters of span {span} do not fit in period {period}')
        # One cluster per slot, at a uniform position leaving at least `intra_gap` before the next slot
        anchors = rng.uniform(0, period) + slot * np.arange(n_clusters) + rng.uniform(0, play, size=n_clusters)
        t = (anchors[:, np.newaxis] + scenario.intra_gap * np.arange(scenario.count)[np.newaxis, :]).ravel()
        instants = np.sort(np.mod(t, period))
    elif isinstance(scenario, Listed):
        instants = np.asarray(scenario.instants, dtype=float)
        if np.any(np.diff(instants) <= 0):
            raise ValueError('Listed instants must be strictly increasing')
        if (len(instants) > 0) and (instants[-1] - instants[0] >= period):
            raise ValueError('Listed instants must span less than one period')
        return instants
    else:
        raise NotImplementedError(f'Unknown instant scenario "{scenario}"')

    instants = np.unique(instants)
    assert np.all(np.diff(instants) > 0)
    return instants


def sampling_ratio(instants: np.ndarray, period: float) -> float:
    """Average number of samples per Nyquist period."""
    return len(instants) / period


def point_samples(x: Signal, instants: np.ndarray) -> np.ndarray:
    return evaluate(x, np.asarray(instants, dtype=float))


def difference_samples(values: np.ndarray) -> np.ndarray:
    """Samples s_k = v_{k+1} - v_k of the ramp kernels, the last one wrapping around."""
    values = np.asarray(values, dtype=float)
    return np.roll(values, -1) - values


def signal_power(x: Signal) -> float:
    """Mean square value over one period."""
    return float(np.real(np.sum(np.abs(x.coeffs) ** 2)))


def add_noise(s: Union[SampleSequence, np.ndarray], snr_db: float, power: float, seed=None):
    """Add i.i.d. Gaussian errors with variance `power * 10^(-snr_db / 10)`.

    Args:
        s: Samples, either a `SampleSequence` or a plain array.
        snr_db: Signal-to-noise ratio in dB (infinite for no noise).
        power: Reference input power.
        seed: Seed of the random generator (or a `np.random.Generator`).

    Returns:
        Noisy samples, of the same type as `s`.
    """
    values = s.values if isinstance(s, SampleSequence) else np.asarray(s, dtype=float)
    if np.isinf(snr_db) and snr_db > 0:
        noisy = np.array(values, dtype=float)
    else:
        rng = np.random.default_rng(seed)
        sigma = np.sqrt(power * 10. ** (-snr_db / 10.))
        noisy = values + sigma * rng.standard_normal(len(values))
    if isinstance(s, SampleSequence):
        return SampleSequence(noisy, s.weights)
    return noisy
