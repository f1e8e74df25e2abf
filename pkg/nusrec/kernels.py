from dataclasses import dataclass, field
from typing import Callable, Optional, Union
import enum
import logging

import numpy as np
import pandas as pd
import scipy.special

from nusrec.signal import (
    DEFAULT_OVERSAMPLE, GridFunction, HarmonicBasis, Signal, angular_frequencies,
    dirichlet, grid_size, grid_times, interval_harmonics, max_harmonic, project_bandlimited
)


logger = logging.getLogger(__name__)

# Default step of the lookup tables of the single-argument function f
TABLE_STEP = 1e-3


class KernelKind(enum.Enum):

    INDICATOR = 'indicator'
    LEAKY_EXP = 'leaky-exp'
    RAMP = 'ramp'
    SINC = 'sinc'

    @staticmethod
    def parse(value: Union[str, 'KernelKind']) -> 'KernelKind':
        if isinstance(value, KernelKind):
            return value
        try:
            return KernelKind(str(value).lower())
        except ValueError:
            raise NotImplementedError(f'Unknown kernel kind "{value}"')


@dataclass(frozen=True, eq=False)
class KernelFamily:
    """Finite family of sampling kernels on a periodic time axis.

    Interval kernels (indicator, leaky exponential, ramp) are supported on
    [t_k, t_{k+1}], where the last interval wraps around to `instants[0] + period`,
    so that a family of N instants has N pairwise disjoint intervals covering a full period.
    Sinc kernels are periodic sinc (Dirichlet) kernels centred at each instant.

    Attributes:
        kind: Kernel kind.
        instants: Strictly increasing instants spanning less than one period.
        period: Period of the signals.
        leak: Leak rate alpha of leaky-exponential kernels.
        M: Harmonic cutoff of the input space (Nyquist cutoff of the period by default).
    """

    kind: KernelKind
    instants: np.ndarray
    period: float
    leak: float = 0.
    M: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, 'kind', KernelKind.parse(self.kind))
        instants = np.array(self.instants, dtype=float).ravel()
        if len(instants) == 0:
            raise ValueError('Kernel family is empty')
        if np.any(np.diff(instants) <= 0):
            raise ValueError('Sampling instants must be strictly increasing')
        if instants[-1] - instants[0] >= self.period:
            raise ValueError(f'Sampling instants must span less than one period ({self.period})')
        if self.leak < 0:
            raise ValueError(f'Leak must be non-negative, got {self.leak}')
        if (self.leak > 0) and (self.kind != KernelKind.LEAKY_EXP):
            raise ValueError('Only leaky-exponential kernels have a leak')
        instants.setflags(write=False)
        object.__setattr__(self, 'instants', instants)
        if self.M is None:
            object.__setattr__(self, 'M', max_harmonic(self.period))

    def __len__(self) -> int:
        return len(self.instants)

    @property
    def starts(self) -> np.ndarray:
        return self.instants

    @property
    def ends(self) -> np.ndarray:
        return np.append(self.instants[1:], self.instants[0] + self.period)

    @property
    def lengths(self) -> np.ndarray:
        return self.ends - self.starts

    @property
    def is_interval(self) -> bool:
        return self.kind != KernelKind.SINC

    @property
    def sobolev(self) -> bool:
        """Whether the ambient inner product is the Sobolev one <u', v'>_2."""
        return self.kind == KernelKind.RAMP

    @property
    def basis(self) -> HarmonicBasis:
        return HarmonicBasis(self.period, self.M, sobolev=self.sobolev)

    @property
    def weights(self) -> np.ndarray:
        """Squared ambient norms of the kernels."""
        if self.kind in (KernelKind.INDICATOR, KernelKind.RAMP):
            return self.lengths
        elif self.kind == KernelKind.LEAKY_EXP:
            if self.leak == 0:
                return self.lengths
            return -np.expm1(-2. * self.leak * self.lengths) / (2. * self.leak)
        else:
            return np.full(len(self), (2 * self.M + 1) / self.period)

    def check_index(self, k: int) -> int:
        if not (0 <= int(k) < len(self)):
            raise IndexError(f'Unknown kernel index {k} (family of size {len(self)})')
        return int(k)


def si(x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Sine integral Si(x) = int_0^x sin(tau) / tau dtau."""
    value = scipy.special.sici(x)[0]
    if np.isscalar(x):
        return float(value)
    return value


def f_kernel(t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Single-argument function f(t) = int_0^t (t - tau) sinc(tau) dtau.

    f'' = sinc, so that double integrals of sinc(t - tau) over two intervals reduce
    to four evaluations of f.
    """
    t = np.asarray(t, dtype=float)
    value = t * si(np.pi * t) / np.pi - (1. - np.cos(np.pi * t)) / np.pi ** 2
    if value.ndim == 0:
        return float(value)
    return value


def periodic_f_kernel(t: Union[float, np.ndarray], period: float, M: Optional[int] = None) -> Union[float, np.ndarray]:
    """Counterpart of `f_kernel` for the periodic sinc kernel.

    Its second derivative is the Dirichlet kernel (1/T) sum_{|m|<=M} exp(i w_m t),
    which makes the four-term expansion of the Gram entries exact for periodic signals.
    """
    if M is None:
        M = max_harmonic(period)
    t = np.asarray(t, dtype=float)
    omega = angular_frequencies(period, M)[1:]
    value = t ** 2 / (2. * period)
    if M > 0:
        value = value + (2. / period) * np.sum(
            (1. - np.cos(np.multiply.outer(t, omega))) / omega ** 2, axis=-1)
    if value.ndim == 0:
        return float(value)
    return value


class FunctionTable:
    """Uniform lookup table with linear interpolation for an even function.

    If `period` is given, the function is assumed to be the sum of t^2 / (2 period)
    and of an even periodic part, and only the periodic part is tabulated on [0, period / 2].
    """

    def __init__(self, func: Callable, t_max: float, step: float = TABLE_STEP, period: Optional[float] = None):
        self.step: float = float(step)
        self.period: Optional[float] = period
        if period is not None:
            t_max = period / 2.
        self.t_max: float = float(t_max)
        self.t: np.ndarray = np.linspace(0, self.t_max, int(np.ceil(self.t_max / self.step)) + 1)
        values = np.asarray(func(self.t), dtype=float)
        if period is not None:
            values = values - self.t ** 2 / (2. * period)
        self.values: np.ndarray = values

    def __call__(self, t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        t = np.asarray(t, dtype=float)
        if self.period is None:
            tau = np.abs(t)
            if np.any(tau > self.t_max * (1. + 1e-12)):
                raise ValueError(f'Argument out of the table range [-{self.t_max}, {self.t_max}]')
            value = np.interp(tau, self.t, self.values)
        else:
            tau = np.mod(t, self.period)
            tau = np.minimum(tau, self.period - tau)
            value = t ** 2 / (2. * self.period) + np.interp(tau, self.t, self.values)
        if value.ndim == 0:
            return float(value)
        return value


def f_table(period: Optional[float] = None, M: Optional[int] = None, t_max: Optional[float] = None,
            step: float = TABLE_STEP) -> FunctionTable:
    """Lookup table of `periodic_f_kernel` (if `period` is given) or of `f_kernel`."""
    if period is None:
        if t_max is None:
            raise ValueError('The range of the lookup table of f must be specified')
        return FunctionTable(f_kernel, t_max, step=step)
    if M is None:
        M = max_harmonic(period)
    return FunctionTable(lambda t: periodic_f_kernel(t, period, M=M), period / 2., step=step, period=period)


def four_term(f: Callable, a, b, c, d):
    """Double integral of the kernel f'' over [a, b] x [c, d], i.e. <P 1_[c,d], 1_[a,b]>."""
    return f(b - c) - f(a - c) - f(b - d) + f(a - d)


def projected_harmonics(fam: KernelFamily, index=None) -> np.ndarray:
    """Harmonics c_0..c_M of the projected kernels, as a matrix of shape `(len(fam), M + 1)`.

    If `index` is given, only the selected kernels are computed.
    """
    M = fam.M
    if index is None:
        index = slice(None)
    starts = np.atleast_1d(fam.starts[index])
    ends = np.atleast_1d(fam.ends[index])
    if fam.kind == KernelKind.SINC:
        omega = angular_frequencies(fam.period, M)
        return np.exp(-1j * np.multiply.outer(starts, omega)) / fam.period
    elif fam.kind == KernelKind.RAMP:
        # Projection in the Sobolev sense: project the derivative (an indicator)
        # and integrate spectrally, the constant component being undefined
        H = interval_harmonics(starts, ends, fam.period, M)
        omega = angular_frequencies(fam.period, M)
        H[:, 1:] /= 1j * omega[1:]
        H[:, 0] = 0
        return H
    else:
        leak = fam.leak if fam.kind == KernelKind.LEAKY_EXP else 0.
        return interval_harmonics(starts, ends, fam.period, M, leak=leak)


def kernel_grid(fam: KernelFamily, k: int, oversample: int = DEFAULT_OVERSAMPLE) -> GridFunction:
    """Sample the raw (un-projected) kernel g_k on the dense grid.

    For ramp kernels, whose ambient inner product involves derivatives, the derivative
    g_k' = 1_[t_k, t_{k+1}] is returned instead. Interval supports are half-open so that
    the grid samples of distinct kernels have disjoint supports.
    """
    k = fam.check_index(k)
    n_grid = grid_size(fam.period, oversample)
    if fam.kind == KernelKind.SINC:
        return dirichlet(fam.period, fam.instants[k], M=fam.M).to_grid(oversample)
    t = grid_times(fam.period, n_grid)
    a, b = fam.starts[k], fam.ends[k]
    tau = np.mod(t - a, fam.period)
    mask = tau < (b - a)
    values = mask.astype(float)
    if fam.kind == KernelKind.LEAKY_EXP:
        values = values * np.exp(-fam.leak * tau)
    return GridFunction(fam.period, values)


def projected_kernel(fam: KernelFamily, k: int, method: str = 'exact', oversample: int = DEFAULT_OVERSAMPLE) -> Signal:
    """Orthogonal projection of the kernel g_k onto the input space.

    Args:
        fam: Kernel family.
        k: Kernel index.
        method: "exact" integrates the Fourier coefficients of g_k analytically,
            "grid" samples g_k on the dense grid and projects it with the FFT.
        oversample: Grid oversampling of the "grid" method.

    Returns:
        The projected kernel.
    """
    k = fam.check_index(k)
    if method == 'exact':
        c_pos = projected_harmonics(fam, index=k)[0]
        return Signal.from_positive(fam.period, c_pos)
    elif method == 'grid':
        projected = project_bandlimited(kernel_grid(fam, k, oversample=oversample), fam.M)
        if fam.kind != KernelKind.RAMP:
            return projected
        c_pos = np.array(projected.positive)
        c_pos[1:] /= 1j * angular_frequencies(fam.period, fam.M)[1:]
        c_pos[0] = 0
        return Signal.from_positive(fam.period, c_pos)
    else:
        raise NotImplementedError(f'Unknown projection method "{method}"')


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """Matrix SS* of the discrete-time iteration.

    Attributes:
        entries: Matrix of shape `(K, K)` with entries h[k, k'] = <g~_k', g_k> / w_k'.
        weights: Squared kernel norms w_k.
    """

    entries: np.ndarray
    weights: np.ndarray
    labels: Optional[list] = field(default=None)

    def __post_init__(self):
        assert self.entries.ndim == 2
        assert self.entries.shape[0] == self.entries.shape[1] == len(self.weights)
        assert np.all(self.weights > 0)

    def __len__(self) -> int:
        return len(self.weights)

    def symmetrized(self) -> np.ndarray:
        """D h D^{-1} with D = diag(1 / ||g_k||), which is symmetric."""
        root = np.sqrt(self.weights)
        sym = self.entries * root[np.newaxis, :] / root[:, np.newaxis]
        return 0.5 * (sym + sym.T)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.symmetrized())

    def to_frame(self) -> pd.DataFrame:
        labels = self.labels if self.labels is not None else [str(k) for k in range(len(self))]
        df = pd.DataFrame(self.entries, index=labels, columns=labels)
        df.insert(0, 'weight', self.weights)
        df.index.name = 'k'
        return df


def _ambient_inner(fam: KernelFamily) -> np.ndarray:
    """Matrix G[k, k'] = <g_k', g_k> of the raw kernels in their ambient space."""
    if fam.kind == KernelKind.SINC:
        B = fam.basis.coords_from_positive(projected_harmonics(fam))
        return B @ B.T
    a, b = fam.starts, fam.ends
    G = np.zeros((len(fam), len(fam)))
    for shift in (-fam.period, 0., fam.period):
        lo = np.maximum(a[:, np.newaxis], a[np.newaxis, :] + shift)
        hi = np.minimum(b[:, np.newaxis], b[np.newaxis, :] + shift)
        overlap = np.clip(hi - lo, 0, None)
        if (fam.kind == KernelKind.LEAKY_EXP) and (fam.leak > 0):
            alpha = fam.leak
            lo = np.where(overlap > 0, lo, a[:, np.newaxis])
            decay = np.exp(-alpha * (lo - a[:, np.newaxis]) - alpha * (lo - a[np.newaxis, :] - shift))
            G += decay * (-np.expm1(-2. * alpha * overlap)) / (2. * alpha)
        else:
            # Ramp kernels: overlap of their derivatives
            G += overlap
    return G


def _gauss_legendre(a: float, b: float, n_nodes: int):
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    half = 0.5 * (b - a)
    return a + half * (x + 1.), half * w


def quadrature_inner(fam: KernelFamily, H: np.ndarray) -> np.ndarray:
    """Matrix G[k, k'] = <g~_k', g_k> by quadrature over the support of g_k.

    Each row of H holds the harmonics of one projected kernel g~_k'. Except for sinc
    kernels, these need not be the projected kernels of `fam` itself.
    """
    K = len(fam)
    omega = angular_frequencies(fam.period, fam.M)
    if fam.kind == KernelKind.SINC:
        # Periodic rectangle rule, exact for bandlimited integrands
        n_grid = grid_size(fam.period, DEFAULT_OVERSAMPLE)
        t = grid_times(fam.period, n_grid)
        phases = np.exp(1j * np.multiply.outer(t, omega[1:]))
        raw = np.real(H[:, :1].T) + 2. * np.real(phases @ H[:, 1:].T)
        return (fam.period / n_grid) * raw.T @ raw

    G = np.empty((K, len(H)))
    if fam.kind == KernelKind.RAMP:
        # Ambient inner product of derivatives: g~_k' is integrated against 1_[t_k, t_k+1]
        H = H * (1j * omega)[np.newaxis, :]
    for k in range(K):
        a, b = fam.starts[k], fam.ends[k]
        n_nodes = 16 + 8 * int(np.ceil(b - a))
        t, w = _gauss_legendre(a, b, n_nodes)
        if fam.kind == KernelKind.LEAKY_EXP:
            w = w * np.exp(-fam.leak * (t - a))
        phases = np.exp(1j * np.multiply.outer(np.mod(t, fam.period), omega[1:]))
        values = np.real(H[:, 0])[np.newaxis, :] + 2. * np.real(phases @ H[:, 1:].T)
        G[k, :] = w @ values
    return G


def gram_matrix(
        fam: KernelFamily,
        method: str = 'spectral',
        projected: bool = True,
        use_table: bool = False,
        table_step: float = TABLE_STEP
) -> GramMatrix:
    """Gram matrix h[k, k'] = <g~_k', g_k> / ||g_k'||^2 of a kernel family.

    Args:
        fam: Kernel family.
        method: "spectral" (Parseval on the exact projected kernels), "closed_form"
            (four-term expansion with the periodic single-argument function, indicator
            kernels only) or "quadrature" (Gauss-Legendre over the kernel supports).
        projected: If False, the ambient Gram matrix <g_k', g_k> / ||g_k'||^2 of the
            raw kernels is computed instead (exactly, from the overlaps of their supports).
        use_table: Whether the closed form reads f from a lookup table.
        table_step: Step of the lookup table.

    Returns:
        The Gram matrix.
    """
    if len(fam) == 0:
        raise ValueError('Kernel family is empty')
    w = fam.weights
    if not projected:
        G = _ambient_inner(fam)
    elif method == 'spectral':
        B = fam.basis.coords_from_positive(projected_harmonics(fam))
        G = B @ B.T
    elif method == 'closed_form':
        if fam.kind != KernelKind.INDICATOR:
            raise ValueError(f'No closed form for the Gram matrix of {fam.kind.value} kernels')
        if use_table:
            f = f_table(period=fam.period, M=fam.M, step=table_step)
        else:
            f = lambda t: periodic_f_kernel(t, fam.period, M=fam.M)
        a, b = fam.starts[:, np.newaxis], fam.ends[:, np.newaxis]
        c, d = fam.starts[np.newaxis, :], fam.ends[np.newaxis, :]
        G = four_term(f, a, b, c, d)
    elif method == 'quadrature':
        G = quadrature_inner(fam, projected_harmonics(fam))
    else:
        raise NotImplementedError(f'Unknown Gram assembly method "{method}"')
    logger.debug(f'Assembled {len(fam)}x{len(fam)} Gram matrix ({method}, projected={projected})')
    return GramMatrix(G / w[np.newaxis, :], w)
