from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Tuple
import logging

import numpy as np

from nusrec.kernels import GramMatrix, KernelFamily, projected_harmonics
from nusrec.signal import HarmonicBasis, Signal


logger = logging.getLogger(__name__)

# Singular value cutoff (relative to the largest one) of the pseudo-inverse
RCOND = 1e-10

# Eigenvalue cutoff (relative to the largest one) deciding the rank of SS*
EIG_RCOND = 1e-10


@dataclass(frozen=True, eq=False)
class SampleSequence:
    """Sample sequence s = (s_k) of the weighted space D.

    Attributes:
        values: Samples s_k.
        weights: Squared kernel norms w_k = ||g_k||^2, defining
            <c, d>_D = sum_k c_k d_k / w_k.
    """

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        weights = np.array(self.weights, dtype=float).ravel()
        if len(values) != len(weights):
            raise ValueError(f'Got {len(values)} samples but {len(weights)} weights')
        if np.any(weights <= 0):
            raise ValueError('Sample weights must be positive')
        values.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'weights', weights)

    def __len__(self) -> int:
        return len(self.values)

    def _check(self, other: 'SampleSequence'):
        if (len(self) != len(other)) or (not np.allclose(self.weights, other.weights, rtol=1e-12, atol=0)):
            raise ValueError('Sample sequences have different weights')

    def __add__(self, other: 'SampleSequence') -> 'SampleSequence':
        self._check(other)
        return SampleSequence(self.values + other.values, self.weights)

    def __sub__(self, other: 'SampleSequence') -> 'SampleSequence':
        self._check(other)
        return SampleSequence(self.values - other.values, self.weights)

    def __mul__(self, scalar: float) -> 'SampleSequence':
        return SampleSequence(float(scalar) * self.values, self.weights)

    __rmul__ = __mul__

    def whitened(self) -> np.ndarray:
        """Coordinates (s_k / ||g_k||) in which the D inner product is Euclidean."""
        return self.values / np.sqrt(self.weights)

    @staticmethod
    def from_whitened(z: np.ndarray, weights: np.ndarray) -> 'SampleSequence':
        return SampleSequence(np.asarray(z) * np.sqrt(weights), weights)


def d_inner(a: SampleSequence, b: SampleSequence) -> float:
    """Weighted inner product <a, b>_D = sum_k a_k b_k / ||g_k||^2."""
    a._check(b)
    return float(np.sum(a.values * b.values / a.weights))


def d_norm(a: SampleSequence) -> float:
    return float(np.sqrt(d_inner(a, a)))


class SamplingOperator:
    """Sampling operator Su = (<u, g_k>)_k on a finite-dimensional input space.

    The input space is described by real orthonormal coordinates, and the operator is
    stored as the matrix whose k-th row holds the coordinates of the projected kernel
    g~_k, so that <u, g_k> = <u, g~_k> is a dot product. The weights w_k = ||g_k||^2
    define the metric of the sample space D.

    Args:
        rows: Matrix of shape `(K, dim)` of projected kernel coordinates.
        weights: Squared ambient kernel norms, of size `K`.
        basis: Coordinate system of the input space.
        family: Kernel family the operator was built from, if any.
        rcond: Relative singular value cutoff of the pseudo-inverse.
    """

    def __init__(
            self,
            rows: np.ndarray,
            weights: np.ndarray,
            basis: Optional[HarmonicBasis] = None,
            family: Optional[KernelFamily] = None,
            rcond: float = RCOND
    ):
        self.rows: np.ndarray = np.asarray(rows, dtype=float)
        self.weights: np.ndarray = np.asarray(weights, dtype=float)
        self.basis: Optional[HarmonicBasis] = basis
        self.family: Optional[KernelFamily] = family
        self.rcond: float = rcond
        if self.rows.ndim != 2:
            raise ValueError('Operator rows must form a matrix')
        if len(self.weights) != self.rows.shape[0]:
            raise ValueError(f'Got {self.rows.shape[0]} kernels but {len(self.weights)} weights')
        if len(self.weights) == 0:
            raise ValueError('Sampling operator has no kernel')
        if np.any(self.weights <= 0):
            raise ValueError('Kernel norms must be positive')
        self.rows.setflags(write=False)
        self.weights.setflags(write=False)

    @staticmethod
    def from_family(fam: KernelFamily, rcond: float = RCOND) -> 'SamplingOperator':
        basis = fam.basis
        rows = basis.coords_from_positive(projected_harmonics(fam))
        return SamplingOperator(rows, fam.weights, basis=basis, family=fam, rcond=rcond)

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    # Input space

    def to_coords(self, u) -> np.ndarray:
        return self.basis.to_coords(u)

    def from_coords(self, coords: np.ndarray):
        return self.basis.from_coords(coords)

    def zero(self):
        return self.from_coords(np.zeros(self.dim))

    def inner(self, u, v) -> float:
        return float(np.dot(self.to_coords(u), self.to_coords(v)))

    def norm(self, u) -> float:
        return float(np.linalg.norm(self.to_coords(u)))

    def projected_kernel(self, k: int):
        return self.from_coords(self.rows[k])

    def sequence(self, values: np.ndarray) -> SampleSequence:
        return SampleSequence(values, self.weights)

    def _check_sequence(self, c: SampleSequence):
        if len(c) != len(self):
            raise ValueError(f'Expected {len(self)} samples, got {len(c)}')
        if not np.allclose(c.weights, self.weights, rtol=1e-12, atol=0):
            raise ValueError('Sample weights do not match the operator')

    # Operator and adjoint

    def apply_S(self, u) -> SampleSequence:
        """Su = (<u, g_k>)_k."""
        return self.sequence(self.rows @ self.to_coords(u))

    def apply_S_star(self, c: SampleSequence):
        """S*c = sum_k (c_k / ||g_k||^2) g~_k."""
        self._check_sequence(c)
        return self.from_coords(self.rows.T @ (c.values / self.weights))

    @cached_property
    def gram(self) -> GramMatrix:
        """SS* as the matrix [<g~_k', g_k> / ||g_k'||^2]."""
        return GramMatrix(self.rows @ self.rows.T / self.weights[np.newaxis, :], self.weights)

    @cached_property
    def whitened(self) -> np.ndarray:
        """Matrix of S from input coordinates to whitened sample coordinates."""
        return self.rows / np.sqrt(self.weights)[:, np.newaxis]

    @cached_property
    def _svd(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, int]:
        U, sigma, Vt = np.linalg.svd(self.whitened, full_matrices=True)
        rank = 0
        if len(sigma) > 0 and sigma[0] > 0:
            rank = int(np.sum(sigma > self.rcond * sigma[0]))
        logger.debug(f'SVD of {self.whitened.shape[0]}x{self.whitened.shape[1]} operator: rank {rank}')
        return U, sigma, Vt, rank

    @property
    def rank(self) -> int:
        return self._svd[3]

    # Spectral quantities

    def spectral_bounds(self) -> Tuple[float, float]:
        """Reduced minimum modulus gamma(S) and operator norm ||S||.

        Both are read from the eigenvalues of the symmetrized Gram matrix,
        gamma(S)^2 being the smallest eigenvalue above the rank cutoff.
        """
        eigenvalues = self.gram.eigenvalues()
        top = float(np.max(eigenvalues))
        if top <= 0:
            return 0., 0.
        nonzero = eigenvalues[eigenvalues > EIG_RCOND * top]
        return float(np.sqrt(np.min(nonzero))), float(np.sqrt(top))

    def frame_bounds(self) -> Tuple[float, float]:
        gamma, opnorm = self.spectral_bounds()
        return gamma ** 2, opnorm ** 2

    def optimal_relaxation(self) -> float:
        """Relaxation 2 / (gamma(S)^2 + ||S||^2) minimizing the contraction factor."""
        A, B = self.frame_bounds()
        return 2. / (A + B)

    def contraction_factor(self, lam: float) -> float:
        A, B = self.frame_bounds()
        return max(abs(1. - lam * B), abs(1. - lam * A))

    def rate(self, eps: float) -> float:
        """Linear convergence rate 1 - eps * gamma(S)^2 for relaxations in [eps, 2 - eps]."""
        A, _ = self.frame_bounds()
        return 1. - eps * A

    # Pseudo-inverse oracle

    def pseudo_inverse_apply(self, s: SampleSequence):
        """Minimum-norm least-squares solution S^+ s in the metric of D."""
        self._check_sequence(s)
        U, sigma, Vt, r = self._svd
        z = U[:, :r].T @ s.whitened()
        return self.from_coords(Vt[:r, :].T @ (z / sigma[:r]))

    def project_range(self, s: SampleSequence) -> SampleSequence:
        """Orthogonal projection of s onto ran(S), in the metric of D."""
        self._check_sequence(s)
        U, _, _, r = self._svd
        Ur = U[:, :r]
        return SampleSequence.from_whitened(Ur @ (Ur.T @ s.whitened()), self.weights)

    def project_F(self, u):
        """Orthogonal projection onto F = span(g~_k) = null(S)^perp."""
        _, _, Vt, r = self._svd
        Vr = Vt[:r, :]
        return self.from_coords(Vr.T @ (Vr @ self.to_coords(u)))

    def project_F_perp(self, u):
        a = self.to_coords(u)
        _, _, Vt, r = self._svd
        Vr = Vt[:r, :]
        return self.from_coords(a - Vr.T @ (Vr @ a))

    def limit(self, s: SampleSequence, u0=None):
        """Limit S^+ s + P_{F^perp} u0 of the POCS and frame iterations started at u0."""
        estimate = self.pseudo_inverse_apply(s)
        if u0 is not None:
            estimate = estimate + self.project_F_perp(u0)
        return estimate

    def range_complement_sample(self, seed=None) -> SampleSequence:
        """Random sample sequence of ran(S)^perp (zero if S is onto)."""
        rng = np.random.default_rng(seed)
        U, _, _, r = self._svd
        U_perp = U[:, r:]
        z = U_perp @ rng.standard_normal(U_perp.shape[1])
        return SampleSequence.from_whitened(z, self.weights)
