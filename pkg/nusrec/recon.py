from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Sequence, Union
import enum
import logging

import numpy as np
import pandas as pd

from nusrec.evaluation import HISTORY_COLUMNS, relative_errors
from nusrec.kernels import GramMatrix
from nusrec.operators import SampleSequence, SamplingOperator
from nusrec.signal import (
    DEFAULT_OVERSAMPLE, GridFunction, Signal, angular_frequencies, evaluate, grid_size,
    grid_times, interval_harmonics, max_harmonic
)
from nusrec.utils import relaxation_schedule


logger = logging.getLogger(__name__)

# Stop when ||u^(n+1) - u^(n)|| / max(||u^(n)||, 1) falls below this threshold
STOP_TOL = 1e-12

DEFAULT_MAX_ITER = 100


class KaczmarzOrder(enum.Enum):

    CYCLIC = 'cyclic'
    RANDOM = 'random'


@dataclass
class ReconResult:
    """Outcome of an iterative reconstruction.

    Attributes:
        estimate: Last iterate.
        history: Per-iteration errors, with columns `iter`, `err_l2_rel`,
            `err_sobolev_rel` and `step_norm` (errors are NaN without ground truth).
        converged: Whether the stop rule was met before the iteration budget ran out.
        iterations: Number of iterations performed.
        warning: Diagnostic message, if any.
        snapshots: Iterates stored at requested iteration counts.
    """

    estimate: Any
    history: pd.DataFrame
    converged: bool
    iterations: int
    warning: Optional[str] = None
    snapshots: Dict[int, Any] = field(default_factory=dict)


@dataclass
class ReconRun:
    """Settings of a POCS or Kaczmarz reconstruction.

    Attributes:
        op: Sampling operator.
        samples: Observed samples s.
        u0: Initial estimate (zero by default).
        relaxation: Constant relaxation coefficient, or per-iteration schedule.
        max_iter: Iteration budget.
        tol: Tolerance of the stop rule on the relative step norm (0 disables it).
        truth: Ground-truth input, used to record errors.
        eps: If given, relaxation coefficients must lie in [eps, 2 - eps].
    """

    op: SamplingOperator
    samples: SampleSequence
    u0: Any = None
    relaxation: Union[float, Sequence[float]] = 1.
    max_iter: int = DEFAULT_MAX_ITER
    tol: float = STOP_TOL
    truth: Any = None
    eps: Optional[float] = None
    schedule: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError(f'Number of iterations must be >= 1, got {self.max_iter}')
        self.schedule = relaxation_schedule(self.relaxation, self.max_iter)
        if self.eps is not None:
            if not (0 < self.eps <= 1):
                raise ValueError(f'Relaxation margin must be in (0, 1], got {self.eps}')
            if np.any(self.schedule < self.eps) or np.any(self.schedule > 2. - self.eps):
                raise ValueError(f'Relaxation coefficients must lie in [{self.eps}, {2. - self.eps}]')
        elif np.any(self.schedule <= 0) or np.any(self.schedule >= 2):
            raise ValueError('Relaxation coefficients must lie in (0, 2)')
        self.op._check_sequence(self.samples)
        if self.u0 is None:
            self.u0 = self.op.zero()


class _History:

    def __init__(self, truth=None):
        self.truth = truth
        self.rows: List[tuple] = []

    def record(self, n: int, u, step_norm: float):
        if self.truth is None:
            err_l2, err_sob = np.nan, np.nan
        else:
            err_l2, err_sob = relative_errors(u, self.truth)
        self.rows.append((n, err_l2, err_sob, step_norm))

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.rows, columns=HISTORY_COLUMNS)
        df['iter'] = df['iter'].astype(int)
        return df


def _offset(op: SamplingOperator, u):
    """Part of u invisible to the operator coordinates (the constant, in the Sobolev case)."""
    if isinstance(u, Signal) and (op.basis is not None) and op.basis.sobolev:
        return Signal.constant(u.period, u.mean, M=u.M)
    return None


def _synthesize(op: SamplingOperator, coords: np.ndarray, offset=None):
    u = op.from_coords(coords)
    if offset is not None:
        u = u + offset
    return u


def _correction(op: SamplingOperator, s: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Coordinates of S*(s - Su)."""
    return op.rows.T @ ((s - op.rows @ a) / op.weights)


def _iterate_linear(op: SamplingOperator, s: SampleSequence, u0, schedule: np.ndarray, tol: float,
                    truth=None) -> ReconResult:
    """Iterate u <- u + lambda_n S*(s - Su) in operator coordinates."""
    offset = _offset(op, u0)
    a = op.to_coords(u0)
    history = _History(truth)
    history.record(0, u0, np.nan)
    converged = False
    n = 0
    for n, lam in enumerate(schedule, start=1):
        step = lam * _correction(op, s.values, a)
        scale = max(float(np.linalg.norm(a)), 1.)
        a = a + step
        step_norm = float(np.linalg.norm(step))
        history.record(n, _synthesize(op, a, offset), step_norm)
        if step_norm < tol * scale:
            converged = True
            break
    warning = None
    if not converged:
        warning = f'Stop rule not met within {len(schedule)} iterations'
    logger.debug(f'Linear iteration stopped after {n} iterations (converged={converged})')
    return ReconResult(_synthesize(op, a, offset), history.to_frame(), converged, n, warning=warning)


def pocs_step(op: SamplingOperator, s: SampleSequence, u, lam: float):
    """One relaxed POCS iteration u + lam * S*(s - Su)."""
    op._check_sequence(s)
    a = op.to_coords(u)
    return _synthesize(op, a + lam * _correction(op, s.values, a), _offset(op, u))


def pocs_run(run: ReconRun) -> ReconResult:
    """Relaxed POCS iteration, converging to S^+ s + P_{F^perp} u0."""
    return _iterate_linear(run.op, run.samples, run.u0, run.schedule, run.tol, truth=run.truth)


def discrete_iterates(op: SamplingOperator, s: SampleSequence, u0=None, relaxation: Union[float, Sequence[float]] = 1.,
                      n_iters: int = DEFAULT_MAX_ITER, gram: Optional[GramMatrix] = None) -> Iterator[np.ndarray]:
    """Sequences c^(n) of the discrete-time iteration c <- c + lambda_n (s0 - SS* c).

    The first yielded sequence is c^(0) = 0, and u^(n) = u0 + S*c^(n).
    """
    op._check_sequence(s)
    if gram is None:
        gram = op.gram
    if (len(gram) != len(op)) or (not np.allclose(gram.weights, op.weights, rtol=1e-12, atol=0)):
        raise ValueError('Gram matrix does not match the sampling operator')
    if u0 is None:
        u0 = op.zero()
    s0 = s.values - op.apply_S(u0).values
    h = gram.entries
    c = np.zeros(len(op))
    yield c
    for lam in relaxation_schedule(relaxation, n_iters):
        c = c + lam * (s0 - h @ c)
        yield c


def synthesize(op: SamplingOperator, u0, c: np.ndarray):
    """Continuous-time estimate u0 + S*c."""
    a = op.to_coords(u0) + op.rows.T @ (np.asarray(c) / op.weights)
    return _synthesize(op, a, _offset(op, u0))


def pocs_discrete_run(op: SamplingOperator, s: SampleSequence, u0=None, relaxation: Union[float, Sequence[float]] = 1.,
                      n_iters: int = DEFAULT_MAX_ITER, gram: Optional[GramMatrix] = None):
    """POCS iteration in discrete time, the estimate being synthesized once at the end.

    Args:
        op: Sampling operator.
        s: Observed samples.
        u0: Initial estimate (zero by default).
        relaxation: Constant relaxation coefficient, or per-iteration schedule.
        n_iters: Number of iterations.
        gram: Gram matrix SS*, assembled from the operator if not provided.

    Returns:
        The estimate u^(n_iters).
    """
    if u0 is None:
        u0 = op.zero()
    c = None
    for c in discrete_iterates(op, s, u0=u0, relaxation=relaxation, n_iters=n_iters, gram=gram):
        pass
    return synthesize(op, u0, c)


def kaczmarz_sweep(op: SamplingOperator, s: SampleSequence, u, order: Optional[Sequence[int]] = None, lam: float = 1.):
    """Sequential projections onto the sample hyperplanes {u : <u, g_k> = s_k}.

    Projections are taken within the input space, along the projected kernels g~_k.

    Args:
        op: Sampling operator.
        s: Observed samples.
        u: Current estimate.
        order: Order in which the samples are visited (natural order by default).
        lam: Relaxation of each projection.

    Returns:
        The estimate after one sweep.
    """
    op._check_sequence(s)
    return _synthesize(op, _sweep(op, s.values, op.to_coords(u), order, lam), _offset(op, u))


def _sweep(op: SamplingOperator, s: np.ndarray, a: np.ndarray, order: Optional[Sequence[int]], lam: float) -> np.ndarray:
    a = np.array(a, dtype=float)
    norms = np.sum(op.rows ** 2, axis=1)
    if order is None:
        order = range(len(op))
    for k in order:
        if norms[k] <= 0:
            continue
        g = op.rows[k]
        a += lam * ((s[k] - g @ a) / norms[k]) * g
    return a


def kaczmarz_run(run: ReconRun, order: Union[str, KaczmarzOrder] = KaczmarzOrder.CYCLIC, seed=None) -> ReconResult:
    """Kaczmarz method, one iteration being a full sweep over all the samples.

    Args:
        run: Reconstruction settings.
        order: "cyclic" visits the samples in their natural order, "random" draws
            a new random permutation at each sweep.
        seed: Seed of the random permutations.

    Returns:
        The reconstruction result.
    """
    order = KaczmarzOrder(order)
    rng = np.random.default_rng(seed)
    op = run.op
    offset = _offset(op, run.u0)
    a = op.to_coords(run.u0)
    history = _History(run.truth)
    history.record(0, run.u0, np.nan)
    converged = False
    n = 0
    for n, lam in enumerate(run.schedule, start=1):
        perm = rng.permutation(len(op)) if order == KaczmarzOrder.RANDOM else None
        a_new = _sweep(op, run.samples.values, a, perm, lam)
        step_norm = float(np.linalg.norm(a_new - a))
        scale = max(float(np.linalg.norm(a)), 1.)
        a = a_new
        history.record(n, _synthesize(op, a, offset), step_norm)
        if step_norm < run.tol * scale:
            converged = True
            break
    warning = None if converged else f'Stop rule not met within {run.max_iter} sweeps'
    return ReconResult(_synthesize(op, a, offset), history.to_frame(), converged, n, warning=warning)


def frame_algorithm_run(op: SamplingOperator, s: SampleSequence, u0=None, relaxation: Optional[float] = None,
                        n_iters: int = DEFAULT_MAX_ITER, truth=None, tol: float = STOP_TOL) -> ReconResult:
    """Frame algorithm u <- u + lam * S*(s - Su), typically on point samples (sinc kernels).

    Args:
        op: Sampling operator.
        s: Observed samples.
        u0: Initial estimate (zero by default).
        relaxation: Relaxation coefficient, 2 / (gamma(S)^2 + ||S||^2) by default.
        n_iters: Number of iterations.
        truth: Ground-truth input, used to record errors.
        tol: Tolerance of the stop rule.

    Returns:
        The reconstruction result, flagged with a warning if the relaxation lies
        outside the contraction range (0, 2 / ||S||^2).
    """
    if n_iters < 1:
        raise ValueError(f'Number of iterations must be >= 1, got {n_iters}')
    op._check_sequence(s)
    if u0 is None:
        u0 = op.zero()
    if relaxation is None:
        relaxation = op.optimal_relaxation()
    _, B = op.frame_bounds()
    result = _iterate_linear(op, s, u0, np.full(n_iters, float(relaxation)), tol, truth=truth)
    if not (0 < relaxation < 2. / B):
        result.warning = f'Relaxation {relaxation:.6g} outside the contraction range (0, {2. / B:.6g})'
        logger.warning(result.warning)
    return result


def _check_points(times: np.ndarray, values: np.ndarray, period: float):
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.shape != values.shape:
        raise ValueError(f'Got {len(times)} instants but {len(values)} values')
    if np.any(np.diff(times) <= 0):
        raise ValueError('Interpolation instants must be strictly increasing (no duplicates)')
    if (len(times) > 0) and (times[-1] - times[0] >= period):
        raise ValueError(f'Interpolation instants must span less than one period ({period})')
    return times, values


def linear_interpolant(times: np.ndarray, values: np.ndarray, period: float,
                       oversample: int = DEFAULT_OVERSAMPLE) -> GridFunction:
    """Periodic piecewise-linear interpolant of the points (t_k, v_k) on the dense grid."""
    times, values = _check_points(times, values, period)
    if len(times) == 0:
        raise ValueError('No point to interpolate')
    t = grid_times(period, grid_size(period, oversample))
    return GridFunction(period, np.interp(t, times, values, period=period))


def interpolant_harmonics(times: np.ndarray, values: np.ndarray, period: float, M: Optional[int] = None) -> np.ndarray:
    """Exact harmonics c_0..c_M of the periodic piecewise-linear interpolant.

    The derivative of the interpolant is piecewise constant, so its harmonics are
    slope-weighted interval harmonics, divided by i w_m to recover the interpolant.
    """
    times, values = _check_points(times, values, period)
    if len(times) == 0:
        raise ValueError('No point to interpolate')
    if M is None:
        M = max_harmonic(period)
    starts = times
    ends = np.append(times[1:], times[0] + period)
    following = np.roll(values, -1)
    lengths = ends - starts
    slopes = (following - values) / lengths
    c_pos = np.zeros(M + 1, dtype=complex)
    c_pos[0] = np.sum(lengths * 0.5 * (values + following)) / period
    if M > 0:
        H = interval_harmonics(starts, ends, period, M)
        omega = angular_frequencies(period, M)[1:]
        c_pos[1:] = (slopes @ H[:, 1:]) / (1j * omega)
    return c_pos


def grochenig_run(times: np.ndarray, values: np.ndarray, period: float, u0: Optional[Signal] = None,
                  relaxation: Union[float, Sequence[float]] = 1., n_iters: int = DEFAULT_MAX_ITER,
                  truth: Optional[Signal] = None, M: Optional[int] = None, tol: float = STOP_TOL,
                  snapshots: Sequence[int] = ()) -> ReconResult:
    """Iteration u <- P_B(u + lambda_n L(x - u)) from point samples, L being the linear interpolation.

    Args:
        times: Sampling instants t_k.
        values: Point samples x(t_k).
        period: Signal period.
        u0: Initial estimate (zero by default).
        relaxation: Constant relaxation coefficient, or per-iteration schedule.
        n_iters: Number of iterations.
        truth: Ground-truth input, used to record errors.
        M: Harmonic cutoff (Nyquist cutoff of the period by default).
        tol: Tolerance of the stop rule.
        snapshots: Iteration counts at which the iterates are kept.

    Returns:
        The reconstruction result.
    """
    times, values = _check_points(times, values, period)
    if len(times) < 2:
        raise ValueError(f'Need at least 2 points, got {len(times)}')
    if n_iters < 1:
        raise ValueError(f'Number of iterations must be >= 1, got {n_iters}')
    if M is None:
        M = max_harmonic(period) if u0 is None else u0.M
    u = Signal.zeros(period, M=M) if u0 is None else u0
    history = _History(truth)
    history.record(0, u, np.nan)
    kept = {0: u} if 0 in snapshots else {}
    converged = False
    n = 0
    for n, lam in enumerate(relaxation_schedule(relaxation, n_iters), start=1):
        residual = values - evaluate(u, times)
        step = Signal.from_positive(period, lam * interpolant_harmonics(times, residual, period, M=M))
        scale = max(u.norm_l2(), 1.)
        u = u + step
        step_norm = step.norm_l2()
        history.record(n, u, step_norm)
        if n in snapshots:
            kept[n] = u
        if step_norm < tol * scale:
            converged = True
            break
    warning = None if converged else f'Stop rule not met within {n_iters} iterations'
    return ReconResult(u, history.to_frame(), converged, n, warning=warning, snapshots=kept)


def staircase_initializer(times: np.ndarray, levels: np.ndarray, period: float, M: Optional[int] = None) -> Signal:
    """Bandlimited projection of the staircase holding each crossed level until the next crossing."""
    times, levels = _check_points(times, levels, period)
    if len(times) == 0:
        raise ValueError('Staircase needs at least one crossing')
    if M is None:
        M = max_harmonic(period)
    ends = np.append(times[1:], times[0] + period)
    H = interval_harmonics(times, ends, period, M)
    return Signal.from_positive(period, levels @ H)
