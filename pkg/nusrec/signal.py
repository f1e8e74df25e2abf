from dataclasses import dataclass
from typing import Optional, Union
import logging

import numpy as np


logger = logging.getLogger(__name__)

# Guard used to decide the harmonic cutoff of odd/even periods deterministically
HARMONIC_EPS = 1e-9

DEFAULT_OVERSAMPLE = 16


def max_harmonic(period: float, eps: float = HARMONIC_EPS) -> int:
    """Largest harmonic index M of a `period`-periodic signal of Nyquist period 1.

    Args:
        period: Signal period, in Nyquist period units.
        eps: Small guard so that integer periods are handled deterministically.

    Returns:
        M = floor((period - eps) / 2).
    """
    if period <= 0:
        raise ValueError(f'Period must be positive, got {period}')
    return max(int(np.floor((period - eps) / 2.)), 0)


def angular_frequencies(period: float, M: int) -> np.ndarray:
    """Angular frequencies 2*pi*m/period for m = 0, ..., M."""
    return 2. * np.pi * np.arange(M + 1) / period


@dataclass(frozen=True, eq=False)
class Signal:
    """Real periodic bandlimited signal stored by its Fourier harmonics.

    The signal reads u(t) = sum_{m=-M}^{M} c_m exp(i 2 pi m t / period), with
    c_{-m} = conj(c_m) so that u is real-valued.

    Attributes:
        period: Period of the signal (Nyquist period is 1).
        coeffs: Complex array of size `2M + 1`, where `coeffs[m + M]` is c_m.
    """

    period: float
    coeffs: np.ndarray

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError(f'Period must be positive, got {self.period}')
        coeffs = np.array(self.coeffs, dtype=complex)
        if (coeffs.ndim != 1) or (len(coeffs) % 2 != 1):
            raise ValueError('Harmonics must be stored in an array of odd size 2M+1')
        M = len(coeffs) // 2
        if M > int(np.floor(self.period / 2.)):
            raise ValueError(f'Harmonic cutoff {M} exceeds the Nyquist limit of period {self.period}')
        scale = max(1., float(np.max(np.abs(coeffs))))
        if not np.allclose(coeffs, np.conj(coeffs[::-1]), rtol=0, atol=1e-12 * scale):
            raise ValueError('Harmonics are not conjugate-symmetric (signal is not real)')
        # Enforce exact symmetry
        coeffs = 0.5 * (coeffs + np.conj(coeffs[::-1]))
        coeffs.setflags(write=False)
        object.__setattr__(self, 'coeffs', coeffs)

    @staticmethod
    def from_positive(period: float, c_pos: np.ndarray) -> 'Signal':
        """Build a signal from its harmonics c_0, ..., c_M."""
        c_pos = np.asarray(c_pos, dtype=complex).copy()
        c_pos[0] = c_pos[0].real
        coeffs = np.concatenate((np.conj(c_pos[:0:-1]), c_pos))
        return Signal(period, coeffs)

    @staticmethod
    def zeros(period: float, M: Optional[int] = None) -> 'Signal':
        if M is None:
            M = max_harmonic(period)
        return Signal(period, np.zeros(2 * M + 1, dtype=complex))

    @staticmethod
    def constant(period: float, value: float, M: Optional[int] = None) -> 'Signal':
        sig = Signal.zeros(period, M=M)
        c_pos = sig.positive.copy()
        c_pos[0] = value
        return Signal.from_positive(period, c_pos)

    @property
    def M(self) -> int:
        return len(self.coeffs) // 2

    @property
    def positive(self) -> np.ndarray:
        """Harmonics c_0, ..., c_M."""
        return self.coeffs[self.M:]

    @property
    def mean(self) -> float:
        return float(self.coeffs[self.M].real)

    def is_compatible(self, other: 'Signal') -> bool:
        return (self.period == other.period) and (self.M == other.M)

    def _check(self, other: 'Signal'):
        if self.is_compatible(other):
            return
        if self.period != other.period:
            raise ValueError(f'Period mismatch: {self.period} and {other.period}')
        if self.M != other.M:
            raise ValueError(f'Harmonic cutoff mismatch: {self.M} and {other.M}')

    def __add__(self, other: 'Signal') -> 'Signal':
        self._check(other)
        return Signal(self.period, self.coeffs + other.coeffs)

    def __sub__(self, other: 'Signal') -> 'Signal':
        self._check(other)
        return Signal(self.period, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> 'Signal':
        return Signal(self.period, float(scalar) * self.coeffs)

    __rmul__ = __mul__

    def __neg__(self) -> 'Signal':
        return Signal(self.period, -self.coeffs)

    def __call__(self, t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        return evaluate(self, t)

    def norm_l2(self) -> float:
        return float(np.sqrt(inner_l2(self, self)))

    def antiderivative(self, t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        return primitive(self, t)

    def to_grid(self, oversample: int = DEFAULT_OVERSAMPLE) -> 'GridFunction':
        return to_grid(self, oversample=oversample)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Samples of a periodic function on the uniform grid t_j = j * period / n_grid.

    Attributes:
        period: Period of the function.
        samples: Real array of size `n_grid`.
    """

    period: float
    samples: np.ndarray

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError(f'Period must be positive, got {self.period}')
        samples = np.array(self.samples, dtype=float)
        assert samples.ndim == 1
        samples.setflags(write=False)
        object.__setattr__(self, 'samples', samples)

    @property
    def n_grid(self) -> int:
        return len(self.samples)

    @property
    def times(self) -> np.ndarray:
        return grid_times(self.period, self.n_grid)

    @property
    def step(self) -> float:
        return self.period / self.n_grid

    def integral(self) -> float:
        """Periodic trapezoid rule (rectangle rule on a closed period)."""
        return float(self.step * np.sum(self.samples))

    def inner(self, other: 'GridFunction') -> float:
        assert self.n_grid == other.n_grid
        return float(self.step * np.dot(self.samples, other.samples))

    def __add__(self, other: 'GridFunction') -> 'GridFunction':
        assert (self.period == other.period) and (self.n_grid == other.n_grid)
        return GridFunction(self.period, self.samples + other.samples)

    def __sub__(self, other: 'GridFunction') -> 'GridFunction':
        assert (self.period == other.period) and (self.n_grid == other.n_grid)
        return GridFunction(self.period, self.samples - other.samples)


def grid_size(period: float, oversample: int = DEFAULT_OVERSAMPLE) -> int:
    """Number of grid points used to represent functions of the given period.

    Args:
        period: Signal period.
        oversample: Grid points per Nyquist period. Must be a power of two >= 8.

    Returns:
        The grid size `ceil(oversample * period)`.
    """
    oversample = int(oversample)
    if (oversample < 8) or (oversample & (oversample - 1)) != 0:
        raise ValueError(f'Grid oversampling must be a power of two >= 8, got {oversample}')
    return int(np.ceil(oversample * period))


def grid_times(period: float, n_grid: int) -> np.ndarray:
    return np.arange(n_grid) * (period / n_grid)


def random_bandlimited(period: float, target_rms: float, seed: Optional[int] = None, M: Optional[int] = None) -> Signal:
    """Draw a random real periodic bandlimited signal.

    Real and imaginary parts of the harmonics 0 < m <= M are i.i.d. standard normal
    (the constant harmonic is real), and the result is scaled so that its
    root-mean-square over one period equals `target_rms`.

    Args:
        period: Signal period, must be >= 3.
        target_rms: Root-mean-square value of the signal.
        seed: Seed of the random generator (or a `np.random.Generator`).
        M: Harmonic cutoff, defaults to the Nyquist cutoff of the period.

    Returns:
        The random signal.
    """
    if period < 3:
        raise ValueError(f'Random bandlimited signals need a period >= 3, got {period}')
    if target_rms < 0:
        raise ValueError(f'Target RMS must be non-negative, got {target_rms}')
    if M is None:
        M = max_harmonic(period)
    rng = np.random.default_rng(seed)
    c_pos = rng.standard_normal(M + 1) + 1j * rng.standard_normal(M + 1)
    c_pos[0] = c_pos[0].real
    if target_rms == 0:
        return Signal.zeros(period, M=M)

    # Mean square over one period is sum_m |c_m|^2 (Parseval)
    power = np.abs(c_pos[0]) ** 2 + 2. * np.sum(np.abs(c_pos[1:]) ** 2)
    c_pos *= target_rms / np.sqrt(power)
    return Signal.from_positive(period, c_pos)


def evaluate(sig: Signal, t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Evaluate the signal by direct Fourier summation."""
    scalar = np.isscalar(t)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    omega = angular_frequencies(sig.period, sig.M)[1:]
    values = np.full(t.shape, sig.mean)
    if sig.M > 0:
        # Reduce modulo the period so that large t keeps full accuracy
        tau = np.mod(t, sig.period)
        phases = np.exp(1j * np.multiply.outer(tau, omega))
        values = values + 2. * np.real(phases @ sig.positive[1:])
    if scalar:
        return float(values[0])
    return values


def integral(sig: Signal, a: Union[float, np.ndarray], b: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Exact integral of the signal over [a, b]."""
    return primitive(sig, b) - primitive(sig, a)


def primitive(sig: Signal, t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Primitive of the signal vanishing at t = 0: c_0 t + sum_{m != 0} c_m (e^{i w t} - 1) / (i w)."""
    scalar = np.isscalar(t)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    values = sig.mean * t
    if sig.M > 0:
        omega = angular_frequencies(sig.period, sig.M)[1:]
        tau = np.mod(t, sig.period)
        phases = np.exp(1j * np.multiply.outer(tau, omega)) - 1.
        values = values + 2. * np.real(phases @ (sig.positive[1:] / (1j * omega)))
    if scalar:
        return float(values[0])
    return values


def to_grid(sig: Signal, oversample: int = DEFAULT_OVERSAMPLE, n_grid: Optional[int] = None) -> GridFunction:
    """Sample the signal on the uniform grid."""
    if n_grid is None:
        n_grid = grid_size(sig.period, oversample)
    if n_grid < 2 * sig.M + 1:
        raise ValueError(f'Grid of size {n_grid} is too coarse for harmonic cutoff {sig.M}')
    spectrum = np.zeros(n_grid // 2 + 1, dtype=complex)
    spectrum[:sig.M + 1] = sig.positive
    samples = n_grid * np.fft.irfft(spectrum, n=n_grid)
    return GridFunction(sig.period, samples)


def project_bandlimited(g: GridFunction, M: int) -> Signal:
    """Orthogonal projection of a grid function onto the harmonics |m| <= M.

    Args:
        g: Periodic function sampled on a uniform grid.
        M: Harmonic cutoff.

    Returns:
        The bandlimited projection, as a `Signal`.
    """
    if g.n_grid < 2 * M + 1:
        raise ValueError(f'Grid of size {g.n_grid} is too coarse for harmonic cutoff {M}')
    spectrum = np.fft.rfft(g.samples) / g.n_grid
    return Signal.from_positive(g.period, spectrum[:M + 1])


def inner_l2(u: Signal, v: Signal) -> float:
    """L2 inner product over one period: period * sum_m c_m(u) conj(c_m(v))."""
    if u.period != v.period:
        raise ValueError(f'Period mismatch: {u.period} and {v.period}')
    M = min(u.M, v.M)
    cu = u.coeffs[u.M - M:u.M + M + 1]
    cv = v.coeffs[v.M - M:v.M + M + 1]
    return float(u.period * np.real(np.sum(cu * np.conj(cv))))


def derivative(u: Signal) -> Signal:
    m = np.arange(-u.M, u.M + 1)
    return Signal(u.period, (2j * np.pi * m / u.period) * u.coeffs)


def sobolev_inner(u: Signal, v: Signal) -> float:
    """Homogeneous Sobolev inner product <u', v'>_2."""
    return inner_l2(derivative(u), derivative(v))


def sobolev_seminorm(u: Signal) -> float:
    return float(np.sqrt(max(sobolev_inner(u, u), 0.)))


def dirichlet(period: float, t0: float, M: Optional[int] = None) -> Signal:
    """Periodic sinc kernel centred at t0.

    This is the reproducing kernel of the periodic bandlimited space:
    inner_l2(u, dirichlet(period, t0)) = u(t0).
    """
    if M is None:
        M = max_harmonic(period)
    omega = angular_frequencies(period, M)
    return Signal.from_positive(period, np.exp(-1j * omega * t0) / period)


def interval_harmonics(a, b, period: float, M: int, leak: float = 0.) -> np.ndarray:
    """Exact harmonics c_0, ..., c_M of (leaky) indicator functions.

    The function is t -> exp(-leak * (t - a)) on [a, b], zero elsewhere in the period,
    extended periodically. Wrap-around intervals (b > period) are allowed as long as
    the interval is not longer than one period. `a` and `b` may be arrays of equal shape.

    Args:
        a: Start of the interval(s).
        b: End of the interval(s).
        period: Period.
        M: Harmonic cutoff.
        leak: Leak rate alpha >= 0.

    Returns:
        Complex array of shape `a.shape + (M + 1,)`.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    length = b - a
    if not np.all(length > 0):
        raise ValueError('Interval bounds must be increasing')
    if np.any(length > period * (1. + 1e-12)):
        raise ValueError(f'Intervals cannot be longer than the period {period}')
    if leak < 0:
        raise ValueError(f'Leak must be non-negative, got {leak}')
    omega = angular_frequencies(period, M)
    z = leak + 1j * omega
    length = length[..., np.newaxis]
    coeffs = np.empty(length.shape[:-1] + (M + 1,), dtype=complex)
    if leak == 0:
        coeffs[..., 0] = length[..., 0]
    else:
        coeffs[..., 0] = -np.expm1(-leak * length[..., 0]) / leak
    if M > 0:
        zm = z[1:]
        phases = np.exp(-1j * omega[1:] * a[..., np.newaxis])
        coeffs[..., 1:] = phases * (-np.expm1(-zm * length)) / zm
    return coeffs / period


@dataclass(frozen=True)
class HarmonicBasis:
    """Orthonormal real coordinates of the periodic bandlimited space.

    With `sobolev=False`, coordinates are taken in the basis
    (1/sqrt(T), sqrt(2/T) cos(w_m t), sqrt(2/T) sin(w_m t)) which is orthonormal for
    the L2 inner product over one period. With `sobolev=True`, the harmonics are divided
    by w_m so that the basis is orthonormal for <u', v'>_2, and the constant component,
    which has zero Sobolev norm, is left out.

    Coordinates are ordered as [a_0, cos_1..cos_M, sin_1..sin_M] (a_0 absent in the
    Sobolev case).
    """

    period: float
    M: int
    sobolev: bool = False

    @property
    def dim(self) -> int:
        return 2 * self.M + (0 if self.sobolev else 1)

    @property
    def omega(self) -> np.ndarray:
        return angular_frequencies(self.period, self.M)[1:]

    def coords_from_positive(self, c_pos: np.ndarray) -> np.ndarray:
        """Convert harmonics c_0..c_M (last axis) into real coordinates."""
        c_pos = np.asarray(c_pos, dtype=complex)
        root = np.sqrt(2. * self.period)
        cos_part = root * np.real(c_pos[..., 1:])
        sin_part = -root * np.imag(c_pos[..., 1:])
        if self.sobolev:
            return np.concatenate((cos_part * self.omega, sin_part * self.omega), axis=-1)
        const = np.sqrt(self.period) * np.real(c_pos[..., :1])
        return np.concatenate((const, cos_part, sin_part), axis=-1)

    def positive_from_coords(self, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords, dtype=float)
        assert coords.shape[-1] == self.dim
        M = self.M
        c_pos = np.zeros(coords.shape[:-1] + (M + 1,), dtype=complex)
        if self.sobolev:
            cos_part = coords[..., :M] / self.omega
            sin_part = coords[..., M:] / self.omega
        else:
            c_pos[..., 0] = coords[..., 0] / np.sqrt(self.period)
            cos_part = coords[..., 1:M + 1]
            sin_part = coords[..., M + 1:]
        c_pos[..., 1:] = (cos_part - 1j * sin_part) / np.sqrt(2. * self.period)
        return c_pos

    def to_coords(self, sig: Signal) -> np.ndarray:
        if (sig.period != self.period) or (sig.M != self.M):
            raise ValueError(
                f'Signal (period={sig.period}, M={sig.M}) does not belong to the basis '
                f'(period={self.period}, M={self.M})')
        return self.coords_from_positive(sig.positive)

    def from_coords(self, coords: np.ndarray) -> Signal:
        return Signal.from_positive(self.period, self.positive_from_coords(coords))

    def inner(self, u: Signal, v: Signal) -> float:
        """Inner product of the basis' Hilbert space (L2, or Sobolev on the zero-mean part)."""
        return float(np.dot(self.to_coords(u), self.to_coords(v)))

    def norm(self, u: Signal) -> float:
        return float(np.linalg.norm(self.to_coords(u)))
