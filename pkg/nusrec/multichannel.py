from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Sequence, Tuple, Union
import logging

import numpy as np

from nusrec.encoders import EncodingKind, EncodingSpec, integral_samples, integrate_and_fire
from nusrec.kernels import (
    GramMatrix, KernelFamily, KernelKind, TABLE_STEP, f_table, four_term, periodic_f_kernel, projected_harmonics,
    quadrature_inner
)
from nusrec.operators import RCOND, SampleSequence, SamplingOperator
from nusrec.recon import discrete_iterates
from nusrec.signal import (
    GridFunction, HarmonicBasis, Signal, interval_harmonics, max_harmonic, project_bandlimited
)


logger = logging.getLogger(__name__)

VectorSignal = List[Signal]


@dataclass(frozen=True, eq=False)
class ChannelMatrix:
    """Mixing matrix A of shape `(n_channels, n_sources)`, with x(t) = A y(t)."""

    A: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim == 1:
            A = A[:, np.newaxis]
        if (A.ndim != 2) or (A.size == 0):
            raise ValueError('Mixing matrix must be a non-empty 2D array')
        A.setflags(write=False)
        object.__setattr__(self, 'A', A)

    @staticmethod
    def from_array(A) -> 'ChannelMatrix':
        if isinstance(A, ChannelMatrix):
            return A
        return ChannelMatrix(np.asarray(A, dtype=float))

    @property
    def n_channels(self) -> int:
        return self.A.shape[0]

    @property
    def n_sources(self) -> int:
        return self.A.shape[1]

    @cached_property
    def pinv(self) -> np.ndarray:
        return np.linalg.pinv(self.A)

    @cached_property
    def a_mask(self) -> np.ndarray:
        """Orthogonal projector AA^+ onto ran(A)."""
        P = self.A @ self.pinv
        return 0.5 * (P + P.T)

    @property
    def rank(self) -> int:
        return int(np.linalg.matrix_rank(self.A))


def mix(signals: Sequence[Signal], matrix: np.ndarray) -> VectorSignal:
    """Pointwise product of a constant matrix with a vector of signals."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if matrix.shape[1] != len(signals):
        raise ValueError(f'Matrix of shape {matrix.shape} cannot act on {len(signals)} signals')
    ref = signals[0]
    for sig in signals[1:]:
        ref._check(sig)
    C = np.asarray([sig.coeffs for sig in signals])
    return [Signal(ref.period, coeffs) for coeffs in matrix @ C]


@dataclass(frozen=True, eq=False)
class MultiChannelSamples:
    """Integral samples s_{i,j} of each channel over [t^i_j, t^i_{j+1}].

    Each channel's last interval wraps around to its first instant plus the period.
    Samples are indexed channel-major by (i, j).
    """

    period: float
    instants: Tuple[np.ndarray, ...]
    values: Tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.instants) != len(self.values):
            raise ValueError(f'Got instants for {len(self.instants)} channels but values for {len(self.values)}')
        instants, values = [], []
        for i, (t, s) in enumerate(zip(self.instants, self.values)):
            t = np.array(t, dtype=float).ravel()
            s = np.array(s, dtype=float).ravel()
            if len(t) != len(s):
                raise ValueError(f'Channel {i}: got {len(t)} instants but {len(s)} samples')
            if np.any(np.diff(t) <= 0):
                raise ValueError(f'Channel {i}: instants must be strictly increasing')
            if (len(t) > 0) and (t[-1] - t[0] >= self.period):
                raise ValueError(f'Channel {i}: instants must span less than one period')
            t.setflags(write=False)
            s.setflags(write=False)
            instants.append(t)
            values.append(s)
        object.__setattr__(self, 'instants', tuple(instants))
        object.__setattr__(self, 'values', tuple(values))

    @property
    def n_channels(self) -> int:
        return len(self.instants)

    def __len__(self) -> int:
        return sum(len(t) for t in self.instants)

    @property
    def index(self) -> List[Tuple[int, int]]:
        return [(i, j) for i, t in enumerate(self.instants) for j in range(len(t))]

    @property
    def labels(self) -> List[str]:
        return [f'{i}:{j}' for i, j in self.index]

    def starts(self, i: int) -> np.ndarray:
        return self.instants[i]

    def ends(self, i: int) -> np.ndarray:
        t = self.instants[i]
        if len(t) == 0:
            return t
        return np.append(t[1:], t[0] + self.period)

    @property
    def weights(self) -> np.ndarray:
        """Squared kernel norms ||g^i_j||^2 = t^i_{j+1} - t^i_j."""
        return np.concatenate([self.ends(i) - self.starts(i) for i in range(self.n_channels)])

    @property
    def channel_of(self) -> np.ndarray:
        return np.asarray([i for i, _ in self.index], dtype=int)

    def sequence(self) -> SampleSequence:
        return SampleSequence(np.concatenate(self.values), self.weights)

    def family(self, i: int, M: Optional[int] = None) -> Optional[KernelFamily]:
        if len(self.instants[i]) == 0:
            return None
        return KernelFamily(KernelKind.INDICATOR, self.instants[i], self.period, M=M)


def drop_channel(samples: MultiChannelSamples, i: int) -> MultiChannelSamples:
    """Remove all samples of channel i (the channel itself is kept, unobserved)."""
    if not (0 <= i < samples.n_channels):
        raise IndexError(f'Unknown channel {i}')
    instants = list(samples.instants)
    values = list(samples.values)
    instants[i] = np.empty(0)
    values[i] = np.empty(0)
    return MultiChannelSamples(samples.period, tuple(instants), tuple(values))


def expand_and_encode(y: Sequence[Signal], A, specs: Union[EncodingSpec, Sequence[EncodingSpec]]) -> MultiChannelSamples:
    """Mix the sources with x(t) = A y(t) and integrate each channel over its own intervals.

    Args:
        y: Source signals, sharing the same period and cutoff.
        A: Mixing matrix of shape `(n_channels, n_sources)`.
        specs: Encoder of each channel (or a single encoder shared by all channels).
            Integrate-and-fire channels measure their last, incomplete interval up to
            the end of the period.

    Returns:
        The multichannel samples.
    """
    A = ChannelMatrix.from_array(A)
    if len(y) != A.n_sources:
        raise ValueError(f'Mixing matrix expects {A.n_sources} sources, got {len(y)}')
    if isinstance(specs, EncodingSpec):
        specs = [specs] * A.n_channels
    if len(specs) != A.n_channels:
        raise ValueError(f'Mixing matrix has {A.n_channels} channels, got {len(specs)} encoders')
    x = mix(y, A.A)
    period = y[0].period
    instants, values = [], []
    for i, (xi, spec) in enumerate(zip(x, specs)):
        if spec.leak > 0:
            raise ValueError('Multichannel encoding uses plain (non-leaky) integration')
        if spec.kind == EncodingKind.INSTANT_LIST:
            t = np.asarray(spec.instants, dtype=float)
            s = integral_samples(xi, t).values
        elif spec.kind == EncodingKind.INTEGRAL_UNIFORM_TRIGGER:
            t, s = integrate_and_fire(xi, spec.threshold, spec.bias)
        else:
            raise NotImplementedError(f'Channel {i}: encoder "{spec.kind.value}" does not produce integral samples')
        instants.append(t)
        values.append(s)
    logger.debug(f'Encoded {len(y)} sources into {A.n_channels} channels: {[len(t) for t in instants]} samples')
    return MultiChannelSamples(period, tuple(instants), tuple(values))


def project_A(u: Sequence[Union[GridFunction, Signal]], A, M: Optional[int] = None) -> VectorSignal:
    """Projection onto bandlimited vector functions taking values in ran(A).

    AA^+ is applied pointwise across channels, followed by the bandlimited projection
    of each channel.
    """
    A = ChannelMatrix.from_array(A)
    if len(u) != A.n_channels:
        raise ValueError(f'Expected {A.n_channels} channels, got {len(u)}')
    if all(isinstance(ui, Signal) for ui in u):
        return mix(u, A.a_mask)
    grids = [ui if isinstance(ui, GridFunction) else ui.to_grid() for ui in u]
    n_grid = grids[0].n_grid
    period = grids[0].period
    if any((g.n_grid != n_grid) or (g.period != period) for g in grids):
        raise ValueError('Channels are sampled on different grids')
    if M is None:
        M = max_harmonic(period)
    mixed = A.a_mask @ np.asarray([g.samples for g in grids])
    return [project_bandlimited(GridFunction(period, row), M) for row in mixed]


class MultiChannelOperator(SamplingOperator):
    """Sampling operator of the multichannel integral samples on bandlimited vector functions.

    Inputs are lists of channel signals, in stacked channel-major L2 coordinates. The
    projected kernel of sample (i, j) has channel i' equal to a_{i'i} times the projected
    indicator of [t^i_j, t^i_{j+1}].
    """

    def __init__(self, samples: MultiChannelSamples, A, M: Optional[int] = None, rcond: float = RCOND):
        A = ChannelMatrix.from_array(A)
        if samples.n_channels != A.n_channels:
            raise ValueError(f'Mixing matrix has {A.n_channels} channels, samples have {samples.n_channels}')
        if M is None:
            M = max_harmonic(samples.period)
        channel_basis = HarmonicBasis(samples.period, M)
        blocks = []
        for i in range(samples.n_channels):
            fam = samples.family(i, M=M)
            if fam is None:
                continue
            b = channel_basis.coords_from_positive(projected_harmonics(fam))
            blocks.append(np.kron(A.a_mask[np.newaxis, :, i], b))
        if len(blocks) == 0:
            raise ValueError('No sample in any channel')
        super().__init__(np.concatenate(blocks, axis=0), samples.weights, basis=channel_basis, rcond=rcond)
        self.samples: MultiChannelSamples = samples
        self.channels: ChannelMatrix = A

    @property
    def n_channels(self) -> int:
        return self.channels.n_channels

    def to_coords(self, u: Sequence[Signal]) -> np.ndarray:
        if len(u) != self.n_channels:
            raise ValueError(f'Expected {self.n_channels} channels, got {len(u)}')
        return np.concatenate([self.basis.to_coords(ui) for ui in u])

    def from_coords(self, coords: np.ndarray) -> VectorSignal:
        coords = np.asarray(coords, dtype=float).reshape(self.n_channels, self.basis.dim)
        return [self.basis.from_coords(row) for row in coords]

    def subspace_dim(self) -> int:
        """Dimension of the input space (bandlimited functions with values in ran(A))."""
        return self.channels.rank * self.basis.dim


def multichannel_gram(samples: MultiChannelSamples, A, M: Optional[int] = None, method: str = 'closed_form',
                      use_table: bool = False, table_step: float = TABLE_STEP) -> GramMatrix:
    """Gram matrix of the multichannel samples, factorized as a scalar Gram times a_{ii'}.

    Args:
        samples: Multichannel samples.
        A: Mixing matrix.
        M: Harmonic cutoff.
        method: "closed_form" (four-term expansion of the single-argument function f,
            shared by all channel pairs), "spectral" (Parseval on projected indicators)
            or "quadrature" (Gauss-Legendre integration of the projected kernels over
            each sampling interval).
        use_table: Whether f is read from a lookup table.
        table_step: Step of the lookup table.

    Returns:
        The Gram matrix over the channel-major index set.
    """
    A = ChannelMatrix.from_array(A)
    if M is None:
        M = max_harmonic(samples.period)
    a = np.concatenate([samples.starts(i) for i in range(samples.n_channels)])
    b = np.concatenate([samples.ends(i) for i in range(samples.n_channels)])
    if method == 'closed_form':
        if use_table:
            f = f_table(period=samples.period, M=M, step=table_step)
        else:
            f = lambda t: periodic_f_kernel(t, samples.period, M=M)
        scalar = four_term(f, a[:, np.newaxis], b[:, np.newaxis], a[np.newaxis, :], b[np.newaxis, :])
    elif method == 'spectral':
        B = HarmonicBasis(samples.period, M).coords_from_positive(interval_harmonics(a, b, samples.period, M))
        scalar = B @ B.T
    elif method == 'quadrature':
        families = [fam for fam in (samples.family(i, M=M) for i in range(samples.n_channels)) if fam is not None]
        H = np.concatenate([projected_harmonics(fam) for fam in families])
        scalar = np.concatenate([quadrature_inner(fam, H) for fam in families])
    else:
        raise NotImplementedError(f'Unknown Gram assembly method "{method}"')
    channel = samples.channel_of
    mask = A.a_mask[channel[:, np.newaxis], channel[np.newaxis, :]]
    w = samples.weights
    return GramMatrix(scalar * mask / w[np.newaxis, :], w, labels=samples.labels)


def zero_order_hold_synthesis(samples: MultiChannelSamples, c: np.ndarray, A, M: Optional[int] = None) -> VectorSignal:
    """S*c = sum_i P_B(c^i(t)) AA^+ e_i, with c^i(t) = sum_j (c_{i,j} / ||g^i_j||^2) 1_[t^i_j, t^i_{j+1}](t)."""
    A = ChannelMatrix.from_array(A)
    if M is None:
        M = max_harmonic(samples.period)
    c = np.asarray(c, dtype=float)
    if len(c) != len(samples):
        raise ValueError(f'Expected {len(samples)} coefficients, got {len(c)}')
    held = []
    offset = 0
    for i in range(samples.n_channels):
        n = len(samples.instants[i])
        c_pos = np.zeros(M + 1, dtype=complex)
        if n > 0:
            starts, ends = samples.starts(i), samples.ends(i)
            H = interval_harmonics(starts, ends, samples.period, M)
            c_pos = (c[offset:offset + n] / (ends - starts)) @ H
        held.append(Signal.from_positive(samples.period, c_pos))
        offset += n
    return mix(held, A.a_mask)


def reconstruct_multichannel(samples: MultiChannelSamples, A, u0: Optional[Sequence[Signal]] = None,
                             relaxation: Union[float, Sequence[float]] = 1., n_iters: int = 100,
                             M: Optional[int] = None, gram: Optional[GramMatrix] = None) -> Tuple[VectorSignal, VectorSignal]:
    """Discrete-time POCS reconstruction of the channels, then recovery of the sources.

    Args:
        samples: Multichannel samples.
        A: Mixing matrix.
        u0: Initial channel estimate, projected onto the admissible space (zero by default).
        relaxation: Constant relaxation coefficient, or per-iteration schedule.
        n_iters: Number of iterations.
        M: Harmonic cutoff.
        gram: Gram matrix, assembled in closed form if not provided.

    Returns:
        x_hat: Estimated channels.
        y_hat: Estimated sources A^+ x_hat.
    """
    A = ChannelMatrix.from_array(A)
    if M is None:
        M = max_harmonic(samples.period)
    op = MultiChannelOperator(samples, A, M=M)
    if u0 is None:
        u0 = op.zero()
    else:
        u0 = project_A(u0, A)
    if gram is None:
        gram = multichannel_gram(samples, A, M=M)
    s = samples.sequence()
    c = None
    for c in discrete_iterates(op, s, u0=u0, relaxation=relaxation, n_iters=n_iters, gram=gram):
        pass
    correction = zero_order_hold_synthesis(samples, c, A, M=M)
    x_hat = [ui + ci for ui, ci in zip(u0, correction)]
    y_hat = mix(x_hat, A.pinv)

    # Diagnostics: the samples determine the channels only if S is one-to-one on the input space
    if op.rank < op.subspace_dim():
        logger.warning(
            f'Samples span a subspace of dimension {op.rank} < {op.subspace_dim()}: '
            'the estimate is only the minimum-norm consistent one')
    residual = op.apply_S(x_hat) - s
    scale = max(float(np.linalg.norm(s.whitened())), 1e-300)
    logger.info(f'Multichannel reconstruction: relative consistency residual {np.linalg.norm(residual.whitened()) / scale:.3e}')
    return x_hat, y_hat
