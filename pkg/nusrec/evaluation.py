from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from nusrec.signal import Signal, sobolev_seminorm


HISTORY_COLUMNS = ['iter', 'err_l2_rel', 'err_sobolev_rel', 'step_norm']

RESULT_COLUMNS = ['scenario', 'algorithm', 'iter', 'mse_l2', 'mse_sobolev', 'trials']


def _as_list(u: Union[Signal, Sequence[Signal]]) -> List[Signal]:
    if isinstance(u, Signal):
        return [u]
    return list(u)


def relative_errors(u: Union[Signal, Sequence[Signal]], truth: Union[Signal, Sequence[Signal]]) -> Tuple[float, float]:
    """Relative errors ||u - x||_2 / ||x||_2 and ||(u - x)'||_2 / ||x'||_2.

    Vector-valued signals (lists of channels) are measured with the sum of the
    channel-wise squared norms. An error relative to a zero reference is NaN.

    Returns:
        err_l2: Relative L2 error.
        err_sobolev: Relative Sobolev seminorm error.
    """
    u, truth = _as_list(u), _as_list(truth)
    if len(u) != len(truth):
        raise ValueError(f'Got {len(u)} channels but {len(truth)} reference channels')
    num_l2 = sum((ui - xi).norm_l2() ** 2 for ui, xi in zip(u, truth))
    den_l2 = sum(xi.norm_l2() ** 2 for xi in truth)
    num_sob = sum(sobolev_seminorm(ui - xi) ** 2 for ui, xi in zip(u, truth))
    den_sob = sum(sobolev_seminorm(xi) ** 2 for xi in truth)
    err_l2 = np.sqrt(num_l2 / den_l2) if den_l2 > 0 else np.nan
    err_sob = np.sqrt(num_sob / den_sob) if den_sob > 0 else np.nan
    return float(err_l2), float(err_sob)


class Evaluation:
    """Data structure for storing the error histories of reconstruction experiments.

    Attributes:
        data: Dict, where each key is a scenario name and each value a sub-dict.
            For each sub-dict, each key is an algorithm name and each value the list
            of per-trial histories (data frames with columns `HISTORY_COLUMNS`).
    """

    def __init__(self):
        self.data: Dict[str, Dict[str, List[pd.DataFrame]]] = {}

    @property
    def scenarios(self) -> List[str]:
        return list(self.data.keys())

    def algorithms(self, scenario: str) -> List[str]:
        return list(self.data[scenario].keys())

    def add(self, history: pd.DataFrame, algorithm: str, scenario: str):
        """Add the error history of one trial.

        Args:
            history: Per-iteration errors of the trial.
            algorithm: Algorithm name.
            scenario: Scenario name.
        """
        missing = set(HISTORY_COLUMNS) - set(history.columns)
        if len(missing) > 0:
            raise ValueError(f'History is missing columns {sorted(missing)}')
        if scenario not in self.data:
            self.data[scenario] = {}
        if algorithm not in self.data[scenario]:
            self.data[scenario][algorithm] = []
        self.data[scenario][algorithm].append(history)

    def get(self, scenario: str, algorithm: str, metric: str) -> np.ndarray:
        """Errors of an algorithm across all trials of a scenario.

        Histories that stopped early are extended with their last value.

        Args:
            scenario: Scenario name.
            algorithm: Algorithm name.
            metric: History column, e.g. "err_l2_rel".

        Returns:
            A matrix of shape `(n_trials, n_iters + 1)`.
        """
        histories = self.data[scenario][algorithm]
        n_iter = max(int(h['iter'].max()) for h in histories)
        rows = []
        for h in histories:
            series = h.set_index('iter')[metric].reindex(np.arange(n_iter + 1)).ffill()
            rows.append(series.to_numpy(dtype=float))
        return np.asarray(rows)

    def to_frame(self) -> pd.DataFrame:
        """Mean squared relative errors per scenario, algorithm and iteration."""
        frames = []
        for scenario in self.scenarios:
            for algorithm in self.algorithms(scenario):
                mse_l2 = Evaluation.mse(self.get(scenario, algorithm, 'err_l2_rel'))
                mse_sob = Evaluation.mse(self.get(scenario, algorithm, 'err_sobolev_rel'))
                frames.append(pd.DataFrame({
                    'scenario': scenario,
                    'algorithm': algorithm,
                    'iter': np.arange(len(mse_l2)),
                    'mse_l2': mse_l2,
                    'mse_sobolev': mse_sob,
                    'trials': len(self.data[scenario][algorithm])
                }))
        if len(frames) == 0:
            return pd.DataFrame(columns=RESULT_COLUMNS)
        return pd.concat(frames, ignore_index=True)[RESULT_COLUMNS]

    @staticmethod
    def mse(errors: np.ndarray) -> np.ndarray:
        """Average squared relative error across trials.

         Returns:
             An array of size `(n_iters + 1,)`.
        """
        return np.mean(np.asarray(errors, dtype=float) ** 2, axis=0)

    @staticmethod
    def db(mse: np.ndarray) -> np.ndarray:
        """Convert a mean squared error to decibels."""
        return 10. * np.log10(np.maximum(mse, np.finfo(float).tiny))

    @staticmethod
    def final(errors: np.ndarray) -> np.ndarray:
        """Error of each trial at the last recorded iteration."""
        return np.asarray(errors)[:, -1]
