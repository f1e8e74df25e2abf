import argparse
from typing import Callable, List, Sequence, Union

import numpy as np


def bounded_float_type(lb: float = -np.inf, ub: float = np.inf) -> Callable:
    def _bounded_float_type(arg: str):
        try:
            f = float(arg)
        except ValueError:
            raise argparse.ArgumentTypeError('Must be a floating point number')
        if f < lb or f > ub:
            raise argparse.ArgumentTypeError(f'Argument must be in the range [{lb}, {ub}]')
        return f
    return _bounded_float_type


def bounded_int_type(lb: int = 0, ub: Union[int, float] = np.inf) -> Callable:
    def _bounded_int_type(arg: str):
        try:
            i = int(arg)
        except ValueError:
            raise argparse.ArgumentTypeError('Must be an integer')
        if i < lb or i > ub:
            raise argparse.ArgumentTypeError(f'Argument must be in the range [{lb}, {ub}]')
        return i
    return _bounded_int_type


def spawn_seeds(seed: int, n: int) -> List[np.random.SeedSequence]:
    """Independent seeds for `n` trials, derived from a master seed."""
    if n < 0:
        raise ValueError(f'Number of seeds must be non-negative, got {n}')
    return np.random.SeedSequence(seed).spawn(n)


def relaxation_schedule(spec: Union[float, Sequence[float]], n: int) -> np.ndarray:
    """Relaxation coefficients lambda_0, ..., lambda_{n-1}.

    Args:
        spec: Constant coefficient, or sequence of coefficients. A sequence shorter
            than `n` is extended with its last value.
        n: Number of iterations.

    Returns:
        Array of size `n`.
    """
    if n < 0:
        raise ValueError(f'Number of iterations must be non-negative, got {n}')
    if np.isscalar(spec):
        return np.full(n, float(spec))
    values = np.asarray(spec, dtype=float).ravel()
    if len(values) == 0:
        raise ValueError('Empty relaxation schedule')
    if len(values) >= n:
        return values[:n].copy()
    return np.concatenate((values, np.full(n - len(values), values[-1])))
