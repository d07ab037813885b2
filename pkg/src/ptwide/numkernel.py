"""Seeded randomness and dense symmetric eigenvalue extraction.

Matrices are plain float64 numpy arrays throughout the package. Random
draws go through named :class:`RngStream` objects so that, e.g., changing
the hidden width never perturbs the dataset stream.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError, NumericError, StructuralError

SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class RngStream:
    """A named, independently-seeded random stream.

    Two streams with equal (seed, stream) produce identical sequences;
    distinct stream names give independent draws even under the same seed.
    """

    seed: int
    stream: str

    def generator(self) -> np.random.Generator:
        # Fold the stream name into the entropy so streams are isolated.
        tag = int.from_bytes(
            hashlib.sha256(self.stream.encode("utf-8")).digest()[:8], "little"
        )
        return np.random.default_rng(np.random.SeedSequence([self.seed, tag]))


def gaussian_matrix(rng: RngStream, rows: int, cols: int) -> np.ndarray:
    """i.i.d. standard-normal (rows, cols) matrix, reproducible per stream."""
    return rng.generator().standard_normal((rows, cols))


def rademacher_vector(rng: RngStream, length: int, scale: float) -> np.ndarray:
    """Vector of +-scale signs, each with probability 1/2."""
    if scale <= 0:
        raise InvalidConfigError(f"scale must be positive, got {scale}")
    signs = rng.generator().integers(0, 2, size=length) * 2 - 1
    return scale * signs.astype(np.float64)


def sym_eig_extremes(a: np.ndarray, tol: float = 1e-10) -> tuple[float, float]:
    """Extreme eigenvalues (min, max) of a symmetric matrix.

    Uses LAPACK's tridiagonalization + implicit-QL solver (numpy eigvalsh)
    over the full spectrum; accurate well below any reasonable ``tol``.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise StructuralError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.abs(a - a.T) <= SYMMETRY_TOL):
        raise StructuralError("matrix is not symmetric to within 1e-12")
    try:
        vals = np.linalg.eigvalsh(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericError(f"eigensolver did not converge: {exc}") from exc
    return float(vals[0]), float(vals[-1])


def full_spectrum(a: np.ndarray) -> np.ndarray:
    """All eigenvalues of a symmetric matrix, ascending (for reports)."""
    if not np.all(np.abs(a - a.T) <= SYMMETRY_TOL):
        raise StructuralError("matrix is not symmetric to within 1e-12")
    return np.linalg.eigvalsh(np.asarray(a, dtype=np.float64))
