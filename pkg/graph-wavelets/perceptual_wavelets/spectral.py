"""Graph Fourier analysis on the combinatorial Laplacian."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import linalg, sparse


LOGGER = logging.getLogger("perceptual_wavelets.spectral")

DEFAULT_EXACT_CAP = 5000
EIGENVALUE_CLAMP = 1e-10
SIGN_TOLERANCE = 1e-12
POWER_TOLERANCE = 1e-6
POWER_MAX_ITERATIONS = 500
LAMBDA_MAX_MARGIN = 1.01
# Eigen-residual a converged Rayleigh quotient must also satisfy, relative to itself.
RESIDUAL_TOLERANCE = 1e-3


class SpectralError(RuntimeError):
    """Raised when a spectral computation cannot be carried out."""


class BasisTooLargeError(SpectralError):
    """The graph exceeds the exact eigendecomposition cap; use the Chebyshev path."""


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Ascending eigenvalues and orthonormal eigenvectors (columns) of a Laplacian."""

    eigenvalues: NDArray[np.float64]
    eigenvectors: NDArray[np.float64] = field(repr=False)

    @property
    def n_vertices(self) -> int:
        return int(self.eigenvalues.shape[0])

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1]) if self.n_vertices else 0.0


def _as_dense(L) -> NDArray[np.float64]:
    if sparse.issparse(L):
        return L.toarray().astype(np.float64)
    return np.asarray(L, dtype=np.float64)


def _check_length(values: NDArray, n: int, what: str) -> None:
    if values.shape[0] != n:
        raise ValueError(f"{what} has length {values.shape[0]}, expected {n}")


def eigendecompose(L, max_vertices: int = DEFAULT_EXACT_CAP) -> SpectralBasis:
    """Full ascending eigendecomposition with a deterministic sign convention.

    The first entry of each eigenvector whose magnitude exceeds round-off is
    made positive. Eigenvalues within 1e-10 of zero, or negative, are set to 0.
    """
    n = L.shape[0]
    if n > max_vertices:
        raise BasisTooLargeError(
            f"{n} vertices exceed the exact eigendecomposition cap of {max_vertices}"
        )
    LOGGER.info("eigendecomposing a %d-vertex Laplacian", n)
    eigenvalues, eigenvectors = linalg.eigh(_as_dense(L))
    eigenvalues = np.where(eigenvalues < EIGENVALUE_CLAMP, 0.0, eigenvalues)

    significant = np.abs(eigenvectors) > SIGN_TOLERANCE
    first = np.argmax(significant, axis=0)
    signs = np.sign(eigenvectors[first, np.arange(n)])
    signs[signs == 0] = 1.0
    eigenvectors = eigenvectors * signs
    return SpectralBasis(eigenvalues=eigenvalues, eigenvectors=eigenvectors)


def gft(f: ArrayLike, basis: SpectralBasis) -> NDArray[np.float64]:
    """Graph Fourier coefficients X^T f."""

    values = np.asarray(f, dtype=np.float64)
    _check_length(values, basis.n_vertices, "signal")
    return basis.eigenvectors.T @ values


def igft(f_hat: ArrayLike, basis: SpectralBasis) -> NDArray[np.float64]:
    values = np.asarray(f_hat, dtype=np.float64)
    _check_length(values, basis.n_vertices, "spectral coefficients")
    return basis.eigenvectors @ values


def quadratic_form(f: ArrayLike, L) -> float:
    """sqrt(f^T L f); tiny negative round-off is clamped to 0."""

    values = np.asarray(f, dtype=np.float64)
    _check_length(values, L.shape[0], "signal")
    energy = float(values @ (L @ values))
    return math.sqrt(max(energy, 0.0))


def quadratic_form_spectral(f_hat: ArrayLike, basis: SpectralBasis) -> float:
    values = np.asarray(f_hat, dtype=np.float64)
    _check_length(values, basis.n_vertices, "spectral coefficients")
    energy = float(np.sum(values * values * basis.eigenvalues))
    return math.sqrt(max(energy, 0.0))


def gershgorin_bound(L) -> float:
    """2 * max degree, an upper bound on the Laplacian spectrum."""

    diagonal = L.diagonal() if sparse.issparse(L) else np.diag(np.asarray(L))
    return 2.0 * float(np.max(diagonal)) if diagonal.size else 0.0


def estimate_lambda_max(
    L,
    tolerance: float = POWER_TOLERANCE,
    max_iterations: int = POWER_MAX_ITERATIONS,
) -> float:
    """Upper bound on the largest Laplacian eigenvalue.

    Power iteration from a seeded start vector, stopped when the Rayleigh
    quotient changes by less than ``tolerance`` (relative), then inflated by
    1%. Falls back to the Gershgorin bound when the iteration does not
    converge or the operator is zero.
    """
    n = L.shape[0]
    fallback = gershgorin_bound(L)
    if n == 0 or fallback == 0.0:
        return fallback

    v = np.random.default_rng(0).standard_normal(n)
    v /= np.linalg.norm(v)
    estimate = 0.0
    for iteration in range(1, max_iterations + 1):
        w = L @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            break
        rayleigh = float(v @ w)
        residual = float(np.linalg.norm(w - rayleigh * v)) / max(abs(rayleigh), 1e-300)
        v = w / norm
        settled = abs(rayleigh - estimate) <= tolerance * max(abs(rayleigh), 1e-300)
        if iteration > 1 and settled and residual <= RESIDUAL_TOLERANCE:
            bound = min(rayleigh * LAMBDA_MAX_MARGIN, fallback)
            LOGGER.debug("power iteration converged after %d steps: %g", iteration, bound)
            return bound
        estimate = rayleigh
    LOGGER.warning(
        "power iteration did not converge in %d steps; using Gershgorin bound %g",
        max_iterations,
        fallback,
    )
    return fallback


__all__ = [
    "BasisTooLargeError",
    "SpectralBasis",
    "SpectralError",
    "eigendecompose",
    "estimate_lambda_max",
    "gershgorin_bound",
    "gft",
    "igft",
    "quadratic_form",
    "quadratic_form_spectral",
]
