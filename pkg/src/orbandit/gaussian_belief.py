"""Gaussian beliefs over bandit parameters, stored in precision form.

Beliefs are kept as (mean, precision) rather than (mean, covariance) so the
uniform starting prior is representable exactly as a zero precision matrix,
and batch updates can add curvature terms in place. Covariance is
materialized only where sampling or marginalization needs it.

The parameter vector for a K-arm model is (b_1, ..., b_{K-1}, b_K), where
b_i for i < K is the log odds ratio of arm i against the last (reference)
arm and b_K is the reference arm's own log odds. ``build_c_ind`` maps this
vector to per-arm log odds; ``compose_reindex`` relabels arms, including
moving the reference, without changing the per-arm probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    CannotSampleError,
    InvalidDimensionError,
    InvalidPermutationError,
    InvalidTransformError,
)

__all__ = [
    "GaussianBelief",
    "TransformMatrix",
    "make_flat_belief",
    "build_c_ind",
    "build_c_f",
    "compose_reindex",
    "transform",
    "marginalize_drop_last",
    "marginalize_keep",
    "embed_flat_last",
    "sample",
]

# Cholesky pivots must clear this floor for a precision matrix to count as
# positive definite (and the belief as proper).
PIVOT_TOL = 1e-10

# Slack allowed on the smallest eigenvalue when validating positive
# semidefiniteness after symmetrization.
EIG_TOL = 1e-9


@dataclass(frozen=True)
class GaussianBelief:
    """Multivariate Gaussian in precision form.

    Zero rows and columns of ``precision`` encode flat (improper)
    directions; a belief with any flat direction is not proper and cannot
    be sampled, but it can still be transformed, updated, and embedded.
    A zero-dimensional belief is permitted as the degenerate base case for
    ``embed_flat_last``.
    """

    mean: np.ndarray
    precision: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        precision = np.array(self.precision, dtype=float)
        d = mean.size
        if precision.shape != (d, d):
            raise InvalidDimensionError(
                f"precision shape {precision.shape} does not match mean length {d}"
            )
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(precision))):
            raise ValueError("belief entries must be finite")
        # Symmetrize on every construction for numerical cleanliness.
        precision = 0.5 * (precision + precision.T)
        if d:
            min_eig = float(np.linalg.eigvalsh(precision)[0])
            if min_eig < -EIG_TOL:
                raise ValueError(
                    f"precision is not positive semidefinite (min eigenvalue {min_eig:.3e})"
                )
        mean.setflags(write=False)
        precision.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "precision", precision)

    @property
    def dim(self) -> int:
        return self.mean.size

    def _cholesky(self) -> np.ndarray | None:
        """Lower Cholesky factor of the precision, or None if any pivot
        falls below the positive-definiteness floor."""
        try:
            factor = np.linalg.cholesky(self.precision)
        except np.linalg.LinAlgError:
            return None
        if self.dim and np.min(np.diag(factor)) ** 2 <= PIVOT_TOL:
            return None
        return factor

    def is_proper(self) -> bool:
        """True when the precision is positive definite."""
        return self._cholesky() is not None

    def covariance(self) -> np.ndarray:
        """Materialized covariance; requires a proper belief."""
        factor = self._cholesky()
        if factor is None:
            raise CannotSampleError("improper belief has no covariance")
        inv_factor = solve_triangular(factor, np.eye(self.dim), lower=True)
        cov = inv_factor.T @ inv_factor
        return 0.5 * (cov + cov.T)


@dataclass(frozen=True)
class TransformMatrix:
    """Invertible linear reparameterization of the belief coordinates."""

    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1] or entries.shape[0] < 1:
            raise InvalidTransformError(f"transform must be square, got shape {entries.shape}")
        if not np.all(np.isfinite(entries)):
            raise InvalidTransformError("transform entries must be finite")
        try:
            inverse = np.linalg.solve(entries, np.eye(entries.shape[0]))
        except np.linalg.LinAlgError as exc:
            raise InvalidTransformError("transform is singular") from exc
        if not np.all(np.isfinite(inverse)):
            raise InvalidTransformError("transform is numerically singular")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


def make_flat_belief(dim: int) -> GaussianBelief:
    """Improper uniform belief: zero mean, zero precision."""
    dim = int(dim)
    if dim < 1:
        raise InvalidDimensionError(f"belief dimension must be positive, got {dim}")
    return GaussianBelief(np.zeros(dim), np.zeros((dim, dim)))


def build_c_ind(num_arms: int) -> TransformMatrix:
    """Matrix sending odds-ratio parameters to per-arm log odds.

    Row i < K adds the reference coordinate to coordinate i; the last row
    passes the reference coordinate through unchanged.
    """
    k = int(num_arms)
    if k < 1:
        raise InvalidDimensionError(f"arm count must be positive, got {k}")
    entries = np.eye(k)
    entries[:, -1] = 1.0
    return TransformMatrix(entries)


def build_c_f(perm: Sequence[int]) -> TransformMatrix:
    """Permutation matrix for relabeling arm positions.

    ``perm[j]`` is the new (0-based) position of the arm currently at
    position j; applying the matrix to a per-arm vector moves entry j to
    position ``perm[j]``.
    """
    perm = np.asarray(perm, dtype=int).reshape(-1)
    k = perm.size
    if k < 1:
        raise InvalidPermutationError("permutation must be non-empty")
    if not np.array_equal(np.sort(perm), np.arange(k)):
        raise InvalidPermutationError(f"{perm.tolist()} is not a permutation of 0..{k - 1}")
    entries = np.zeros((k, k))
    entries[perm, np.arange(k)] = 1.0
    return TransformMatrix(entries)


def compose_reindex(perm: Sequence[int], num_arms: int) -> TransformMatrix:
    """Parameter-space transform realizing an arm relabeling.

    Conjugates the positional permutation by the per-arm log-odds basis, so
    applying the result to an odds-ratio parameter vector produces the
    parameter vector of the relabeled model: per-arm probabilities follow
    the permutation exactly, including when the reference arm moves.
    """
    k = int(num_arms)
    c_f = build_c_f(perm)
    if c_f.dim != k:
        raise InvalidPermutationError(
            f"permutation length {c_f.dim} does not match arm count {k}"
        )
    c_ind = build_c_ind(k).entries
    entries = np.linalg.solve(c_ind, c_f.entries @ c_ind)
    return TransformMatrix(entries)


def transform(belief: GaussianBelief, matrix: TransformMatrix) -> GaussianBelief:
    """Push a belief through an invertible reparameterization.

    The mean maps forward; the precision maps by inverse conjugation, so a
    zero precision stays zero and proper beliefs stay proper.
    """
    if matrix.dim != belief.dim:
        raise InvalidDimensionError(
            f"transform dimension {matrix.dim} does not match belief dimension {belief.dim}"
        )
    entries = matrix.entries
    mean = entries @ belief.mean
    try:
        inverse = np.linalg.solve(entries, np.eye(matrix.dim))
    except np.linalg.LinAlgError as exc:  # guarded at construction; keep a sharp error
        raise InvalidTransformError("transform is singular") from exc
    precision = inverse.T @ belief.precision @ inverse
    return GaussianBelief(mean, precision)


def marginalize_keep(belief: GaussianBelief, keep: Sequence[int]) -> GaussianBelief:
    """Marginal belief over a subset of coordinates, in the given order.

    Works directly in precision form: the retained block minus the coupling
    through the dropped block's pseudo-inverse. The pseudo-inverse makes
    this total over valid (positive semidefinite) precisions: flat dropped
    directions carry no coupling, so they integrate out to nothing, and a
    fully flat belief marginalizes to a flat belief.
    """
    keep = list(int(i) for i in keep)
    d = belief.dim
    if len(keep) < 1:
        raise InvalidDimensionError("must keep at least one coordinate")
    if len(set(keep)) != len(keep) or any(i < 0 or i >= d for i in keep):
        raise InvalidDimensionError(f"invalid coordinate subset {keep} for dimension {d}")
    drop = [i for i in range(d) if i not in set(keep)]
    if not drop:
        return GaussianBelief(belief.mean[keep], belief.precision[np.ix_(keep, keep)])
    p = belief.precision
    kept_block = p[np.ix_(keep, keep)]
    cross = p[np.ix_(keep, drop)]
    dropped_block = p[np.ix_(drop, drop)]
    correction = cross @ np.linalg.pinv(dropped_block, rcond=1e-12, hermitian=True) @ cross.T
    return GaussianBelief(belief.mean[keep], kept_block - correction)


def marginalize_drop_last(belief: GaussianBelief) -> GaussianBelief:
    """Marginal over all coordinates but the last.

    In precision form this is the leading block minus the rank-one coupling
    through the last pivot; when the last direction is flat it carries no
    coupling (any valid precision is positive semidefinite), so the marginal
    is the leading block itself. Equivalent to taking the leading block of
    the covariance when the belief is proper.
    """
    if belief.dim < 2:
        raise InvalidDimensionError(
            f"marginalization needs at least two coordinates, got {belief.dim}"
        )
    p = belief.precision
    last_pivot = p[-1, -1]
    if last_pivot > PIVOT_TOL:
        core = p[:-1, :-1] - np.outer(p[:-1, -1], p[-1, :-1]) / last_pivot
    else:
        core = p[:-1, :-1]
    return GaussianBelief(belief.mean[:-1], core)


def embed_flat_last(belief: GaussianBelief, start_last: float = 0.0) -> GaussianBelief:
    """Append one flat coordinate after the existing ones.

    The new coordinate gets mean ``start_last`` and a zero precision row
    and column, so the result is always improper in that direction; the
    mean entry only seeds later mode searches.
    """
    d = belief.dim
    mean = np.append(belief.mean, float(start_last))
    precision = np.zeros((d + 1, d + 1))
    precision[:d, :d] = belief.precision
    return GaussianBelief(mean, precision)


def sample(belief: GaussianBelief, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` vectors from a proper belief, shape (count, dim).

    Draws are produced by back-solving the precision's Cholesky factor
    against standard normals, so no covariance matrix is formed.
    """
    count = int(count)
    if count < 1:
        raise ValueError(f"sample count must be positive, got {count}")
    factor = belief._cholesky()
    if factor is None:
        raise CannotSampleError("cannot sample from an improper belief")
    z = rng.standard_normal((count, belief.dim))
    return belief.mean + solve_triangular(factor, z.T, lower=True, trans="T").T
