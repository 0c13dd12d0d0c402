"""Spectral graph wavelet transform with cubic spline kernels."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import chebyshev as npcheb
from numpy.typing import ArrayLike, NDArray
from scipy import integrate, optimize, sparse
from scipy.sparse.linalg import LinearOperator, cg

from perceptual_wavelets.config import TransformParams
from perceptual_wavelets.spectral import (
    SpectralBasis,
    eigendecompose,
    estimate_lambda_max,
    gft,
    quadratic_form,
)


LOGGER = logging.getLogger("perceptual_wavelets.sgwt")

Kernel = Callable[[NDArray[np.float64]], NDArray[np.float64]]

DEFAULT_ALPHA = 2.0
DEFAULT_BETA = 2.0
DEFAULT_X1 = 1.0
DEFAULT_X2 = 2.0
DEFAULT_DESIGN_K = 20.0
SCALING_WIDTH = 0.6
QUADRATURE_FACTOR = 10
FRAME_GRID = 1000
FRAME_FLOOR = 1e-12


class TransformError(RuntimeError):
    """Raised when the wavelet transform is ill-posed for the given graph."""


class ConvergenceError(TransformError):
    """The least-squares inverse did not reach its tolerance."""

    def __init__(self, message: str, residual: float) -> None:
        super().__init__(message)
        self.residual = residual


@lru_cache(maxsize=32)
def _spline_coefficients(alpha: float, beta: float, x1: float, x2: float) -> Tuple[float, ...]:
    # Cubic through (x1, 1) and (x2, 1) matching the slopes of the monomial pieces.
    system = np.array(
        [
            [1.0, x1, x1**2, x1**3],
            [1.0, x2, x2**2, x2**3],
            [0.0, 1.0, 2.0 * x1, 3.0 * x1**2],
            [0.0, 1.0, 2.0 * x2, 3.0 * x2**2],
        ]
    )
    rhs = np.array([1.0, 1.0, alpha / x1, -beta / x2])
    return tuple(float(c) for c in np.linalg.solve(system, rhs))


def kernel_g(
    x: ArrayLike,
    alpha: float = DEFAULT_ALPHA,
    beta: float = DEFAULT_BETA,
    x1: float = DEFAULT_X1,
    x2: float = DEFAULT_X2,
) -> NDArray[np.float64]:
    """Band-pass cubic spline kernel.

    Rises as (x/x1)^alpha below x1, follows a cubic between x1 and x2 and
    decays as (x2/x)^beta above x2. With the defaults the cubic is
    -5 + 11x - 6x^2 + x^3.
    """
    values = np.asarray(x, dtype=np.float64)
    c0, c1, c2, c3 = _spline_coefficients(alpha, beta, x1, x2)
    low = (values / x1) ** alpha
    mid = c0 + values * (c1 + values * (c2 + values * c3))
    with np.errstate(divide="ignore"):
        high = (x2 / np.where(values > x2, values, x2)) ** beta
    return np.where(values < x1, low, np.where(values <= x2, mid, high))


@lru_cache(maxsize=32)
def kernel_g_peak(
    alpha: float = DEFAULT_ALPHA,
    beta: float = DEFAULT_BETA,
    x1: float = DEFAULT_X1,
    x2: float = DEFAULT_X2,
) -> float:
    """Maximum value of :func:`kernel_g`, reached between the knots."""

    result = optimize.minimize_scalar(
        lambda x: -float(kernel_g(x, alpha, beta, x1, x2)),
        bounds=(x1, x2),
        method="bounded",
        options={"xatol": 1e-10},
    )
    return float(-result.fun)


def kernel_h(
    x: ArrayLike,
    lambda_max: float,
    design_k: float = DEFAULT_DESIGN_K,
    gamma: Optional[float] = None,
) -> NDArray[np.float64]:
    """Low-pass scaling kernel gamma * exp(-(x / (0.6 lambda_min))^4)."""

    if lambda_max <= 0:
        raise TransformError(f"lambda_max must be positive, got {lambda_max}")
    amplitude = kernel_g_peak() if gamma is None else gamma
    lambda_min = lambda_max / design_k
    values = np.asarray(x, dtype=np.float64)
    return amplitude * np.exp(-((values / (SCALING_WIDTH * lambda_min)) ** 4))


def select_scales(
    lambda_max: float,
    n_scales: int,
    design_k: float = DEFAULT_DESIGN_K,
    x1: float = DEFAULT_X1,
    x2: float = DEFAULT_X2,
) -> Tuple[float, ...]:
    """Log-spaced scales from x2 / lambda_min down to x1 / lambda_max."""

    if lambda_max <= 0:
        raise TransformError("cannot place wavelet scales on a graph with lambda_max = 0")
    if n_scales < 1:
        raise TransformError(f"at least one scale is required, got {n_scales}")
    lambda_min = lambda_max / design_k
    t_max = x2 / lambda_min
    t_min = x1 / lambda_max
    return tuple(float(t) for t in np.geomspace(t_max, t_min, n_scales))


@dataclass(frozen=True)
class KernelSpec:
    """Wavelet kernel g, scaling kernel h and the scales t_1 > ... > t_J."""

    lambda_max: float
    scales: Tuple[float, ...]
    design_k: float = DEFAULT_DESIGN_K
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    x1: float = DEFAULT_X1
    x2: float = DEFAULT_X2

    def __post_init__(self) -> None:
        if not self.scales:
            raise TransformError("a kernel spec needs at least one scale")
        if any(t <= 0 for t in self.scales):
            raise TransformError(f"scales must be positive: {self.scales}")
        if any(a <= b for a, b in zip(self.scales, self.scales[1:])):
            raise TransformError(f"scales must be strictly descending: {self.scales}")

    @classmethod
    def design(
        cls,
        lambda_max: float,
        n_scales: int,
        design_k: float = DEFAULT_DESIGN_K,
    ) -> "KernelSpec":
        scales = select_scales(lambda_max, n_scales, design_k)
        return cls(lambda_max=lambda_max, scales=scales, design_k=design_k)

    @property
    def n_scales(self) -> int:
        return len(self.scales)

    @property
    def gamma(self) -> float:
        return kernel_g_peak(self.alpha, self.beta, self.x1, self.x2)

    def scaling(self, x: ArrayLike) -> NDArray[np.float64]:
        return kernel_h(x, self.lambda_max, self.design_k, self.gamma)

    def wavelet(self, j: int, x: ArrayLike) -> NDArray[np.float64]:
        t = self.scales[j]
        return kernel_g(t * np.asarray(x, dtype=np.float64), self.alpha, self.beta, self.x1, self.x2)

    def kernels(self) -> List[Kernel]:
        """Scaling kernel first, then the wavelet kernels from coarse to fine."""

        kernels: List[Kernel] = [self.scaling]
        kernels.extend(lambda x, j=j: self.wavelet(j, x) for j in range(self.n_scales))
        return kernels

    def evaluate(self, x: ArrayLike) -> NDArray[np.float64]:
        return np.vstack([kernel(np.asarray(x, dtype=np.float64)) for kernel in self.kernels()])


@dataclass(frozen=True, eq=False)
class WaveletCoefficients:
    """Scaling plane followed by the J wavelet planes of one channel."""

    planes: NDArray[np.float64]
    channel: str = ""

    def __post_init__(self) -> None:
        if self.planes.ndim != 2 or self.planes.shape[0] < 2:
            raise ValueError(f"expected (J + 1, N) planes, got shape {self.planes.shape}")

    @property
    def scaling(self) -> NDArray[np.float64]:
        return self.planes[0]

    @property
    def wavelets(self) -> NDArray[np.float64]:
        return self.planes[1:]

    @property
    def n_scales(self) -> int:
        return int(self.planes.shape[0] - 1)

    @property
    def n_vertices(self) -> int:
        return int(self.planes.shape[1])

    def with_wavelets(self, wavelets: NDArray[np.float64]) -> "WaveletCoefficients":
        return WaveletCoefficients(
            planes=np.vstack([self.scaling[None, :], wavelets]), channel=self.channel
        )


@dataclass(frozen=True, eq=False)
class ChebyshevApprox:
    """Truncated Chebyshev series of every kernel on [0, lambda_max bound]."""

    order: int
    coefficients: NDArray[np.float64]
    interval: Tuple[float, float]

    def __post_init__(self) -> None:
        if self.order < 3:
            raise TransformError(f"Chebyshev order must be at least 3, got {self.order}")
        if not np.all(np.isfinite(self.coefficients)):
            raise TransformError("Chebyshev coefficients must be finite")

    @classmethod
    def of_spec(cls, spec: KernelSpec, order: int, bound: float) -> "ChebyshevApprox":
        interval = (0.0, bound)
        coefficients = np.vstack(
            [chebyshev_coeffs(kernel, order, interval) for kernel in spec.kernels()]
        )
        return cls(order=order, coefficients=coefficients, interval=interval)

    def evaluate(self, x: ArrayLike) -> NDArray[np.float64]:
        """Values of the truncated series, one row per kernel."""

        lo, hi = self.interval
        u = (np.asarray(x, dtype=np.float64) - 0.5 * (hi + lo)) / (0.5 * (hi - lo))
        return np.vstack([npcheb.chebval(u, row) for row in self.coefficients])


def chebyshev_coeffs(
    kernel: Kernel,
    order: int,
    interval: Tuple[float, float],
    n_samples: Optional[int] = None,
) -> NDArray[np.float64]:
    """Coefficients c_0..c_M with kernel(x) ~ c_0 + sum_k c_k T_k(shifted x).

    Computed by the trapezoid rule over the cosine substitution with at
    least 10 * M samples.
    """
    if order < 3:
        raise TransformError(f"Chebyshev order must be at least 3, got {order}")
    lo, hi = interval
    if not hi > lo:
        raise TransformError(f"degenerate Chebyshev interval [{lo}, {hi}]")
    samples = max(QUADRATURE_FACTOR * order, n_samples or 0)
    theta = np.linspace(0.0, math.pi, samples + 1)
    half_width = 0.5 * (hi - lo)
    center = 0.5 * (hi + lo)
    values = np.asarray(kernel(half_width * np.cos(theta) + center), dtype=np.float64)
    cosines = np.cos(np.outer(np.arange(order + 1), theta))
    coefficients = (2.0 / math.pi) * integrate.trapezoid(values * cosines, theta, axis=1)
    coefficients[0] *= 0.5
    return coefficients


def _chebyshev_terms(L, block: NDArray[np.float64], order: int, interval: Tuple[float, float]):
    """Yield T_k(shifted L) @ block for k = 0..order."""

    lo, hi = interval
    half_width = 0.5 * (hi - lo)
    center = 0.5 * (hi + lo)
    previous = block
    yield previous
    current = (L @ block - center * block) / half_width
    yield current
    for _ in range(2, order + 1):
        following = 2.0 * (L @ current - center * current) / half_width - previous
        yield following
        previous, current = current, following


def chebyshev_apply(
    L,
    coefficients: NDArray[np.float64],
    f: ArrayLike,
    interval: Tuple[float, float],
) -> NDArray[np.float64]:
    """Apply every kernel's series to ``f`` with one shared recurrence.

    Returns an array with one row per kernel.
    """
    coefficients = np.atleast_2d(coefficients)
    signal = np.asarray(f, dtype=np.float64)
    order = coefficients.shape[1] - 1
    out = np.zeros((coefficients.shape[0], signal.shape[0]))
    for k, term in enumerate(_chebyshev_terms(L, signal, order, interval)):
        out += np.outer(coefficients[:, k], term)
    return out


def forward_exact(
    f: ArrayLike,
    basis: SpectralBasis,
    spec: KernelSpec,
    channel: str = "",
) -> WaveletCoefficients:
    """W_f(t, n) = sum_l g(t lambda_l) f_hat(l) chi_l(n), scaling plane likewise with h."""

    f_hat = gft(f, basis)
    response = spec.evaluate(basis.eigenvalues)
    planes = (response * f_hat) @ basis.eigenvectors.T
    return WaveletCoefficients(planes=planes, channel=channel)


def forward_chebyshev(
    f: ArrayLike,
    L,
    lambda_max_bound: float,
    spec: KernelSpec,
    order: int,
    channel: str = "",
    approx: Optional[ChebyshevApprox] = None,
) -> WaveletCoefficients:
    signal = np.asarray(f, dtype=np.float64)
    if signal.shape[0] != L.shape[0]:
        raise ValueError(f"signal has length {signal.shape[0]}, expected {L.shape[0]}")
    if approx is None:
        approx = ChebyshevApprox.of_spec(spec, order, lambda_max_bound)
    planes = chebyshev_apply(L, approx.coefficients, signal, approx.interval)
    return WaveletCoefficients(planes=planes, channel=channel)


@dataclass(frozen=True, eq=False)
class WaveletTransform:
    """Immutable transform context for one graph: kernels plus the exact or Chebyshev path."""

    spec: KernelSpec
    laplacian: sparse.csr_matrix = field(repr=False)
    basis: Optional[SpectralBasis] = field(default=None, repr=False)
    approx: Optional[ChebyshevApprox] = field(default=None, repr=False)
    cg_tolerance: float = 1e-8
    cg_max_iterations: int = 2000

    def __post_init__(self) -> None:
        if (self.basis is None) == (self.approx is None):
            raise TransformError("a transform needs exactly one of a spectral basis or a Chebyshev approximation")

    @classmethod
    def exact(
        cls,
        L,
        n_scales: int = 3,
        design_k: float = DEFAULT_DESIGN_K,
        basis: Optional[SpectralBasis] = None,
        max_vertices: int = 5000,
        cg_tolerance: float = 1e-8,
        cg_max_iterations: int = 2000,
    ) -> "WaveletTransform":
        basis = basis if basis is not None else eigendecompose(L, max_vertices=max_vertices)
        spec = KernelSpec.design(basis.lambda_max, n_scales, design_k)
        return cls(
            spec=spec,
            laplacian=sparse.csr_matrix(L),
            basis=basis,
            cg_tolerance=cg_tolerance,
            cg_max_iterations=cg_max_iterations,
        )

    @classmethod
    def chebyshev(
        cls,
        L,
        n_scales: int = 3,
        order: int = 50,
        design_k: float = DEFAULT_DESIGN_K,
        lambda_max_bound: Optional[float] = None,
        cg_tolerance: float = 1e-8,
        cg_max_iterations: int = 2000,
    ) -> "WaveletTransform":
        bound = lambda_max_bound if lambda_max_bound is not None else estimate_lambda_max(L)
        spec = KernelSpec.design(bound, n_scales, design_k)
        return cls(
            spec=spec,
            laplacian=sparse.csr_matrix(L),
            approx=ChebyshevApprox.of_spec(spec, order, bound),
            cg_tolerance=cg_tolerance,
            cg_max_iterations=cg_max_iterations,
        )

    @classmethod
    def from_params(cls, L, params: TransformParams) -> "WaveletTransform":
        if params.exact:
            return cls.exact(
                L,
                n_scales=params.scales,
                design_k=params.design_k,
                max_vertices=params.exact_cap,
                cg_tolerance=params.cg_tolerance,
                cg_max_iterations=params.cg_max_iterations,
            )
        return cls.chebyshev(
            L,
            n_scales=params.scales,
            order=params.chebyshev_order,
            design_k=params.design_k,
            cg_tolerance=params.cg_tolerance,
            cg_max_iterations=params.cg_max_iterations,
        )

    @property
    def path(self) -> str:
        return "exact" if self.basis is not None else "chebyshev"

    @property
    def n_vertices(self) -> int:
        return int(self.laplacian.shape[0])

    @property
    def lambda_max_bound(self) -> float:
        return self.spec.lambda_max

    def forward(self, f: ArrayLike, channel: str = "") -> WaveletCoefficients:
        if self.basis is not None:
            return forward_exact(f, self.basis, self.spec, channel)
        return forward_chebyshev(
            f,
            self.laplacian,
            self.spec.lambda_max,
            self.spec,
            self.approx.order,
            channel,
            approx=self.approx,
        )

    def adjoint(self, coeffs: Union[WaveletCoefficients, NDArray[np.float64]]) -> NDArray[np.float64]:
        """T^T c: sum over kernels of each kernel applied to its own plane."""

        planes = coeffs.planes if isinstance(coeffs, WaveletCoefficients) else np.asarray(coeffs)
        if planes.shape != (self.spec.n_scales + 1, self.n_vertices):
            raise ValueError(
                f"coefficient planes of shape {planes.shape} do not match "
                f"{(self.spec.n_scales + 1, self.n_vertices)}"
            )
        if self.basis is not None:
            response = self.spec.evaluate(self.basis.eigenvalues)
            spectral = planes @ self.basis.eigenvectors
            return self.basis.eigenvectors @ np.sum(response * spectral, axis=0)
        out = np.zeros(self.n_vertices)
        terms = _chebyshev_terms(self.laplacian, planes.T, self.approx.order, self.approx.interval)
        for k, term in enumerate(terms):
            out += term @ self.approx.coefficients[:, k]
        return out

    def normal(self, f: ArrayLike) -> NDArray[np.float64]:
        return self.adjoint(self.forward(f))

    def frame_bounds(self) -> Tuple[float, float]:
        """Min and max over the spectrum of the sum of squared kernel responses."""

        if self.basis is not None:
            response = self.spec.evaluate(self.basis.eigenvalues)
        else:
            grid = np.linspace(0.0, self.approx.interval[1], FRAME_GRID)
            response = self.approx.evaluate(grid)
        energy = np.sum(response * response, axis=0)
        return float(energy.min()), float(energy.max())

    def inverse(
        self,
        coeffs: WaveletCoefficients,
        x0: Optional[ArrayLike] = None,
    ) -> NDArray[np.float64]:
        return inverse(coeffs, self, x0=x0)


def forward_image(
    image: ArrayLike,
    context: WaveletTransform,
    channel_names: Sequence[str] = ("R", "G", "B"),
    threads: int = 1,
) -> List[WaveletCoefficients]:
    """Transform each channel of an (H, W, C) image over the pixel graph."""

    pixels = np.asarray(image, dtype=np.float64)
    if pixels.shape[0] * pixels.shape[1] != context.n_vertices:
        raise ValueError(
            f"image with {pixels.shape[0] * pixels.shape[1]} pixels does not match "
            f"a {context.n_vertices}-vertex graph"
        )

    def run(c: int) -> WaveletCoefficients:
        LOGGER.debug("forward transform of channel %s", channel_names[c])
        return context.forward(pixels[..., c].ravel(), channel_names[c])

    with ThreadPoolExecutor(max_workers=max(1, min(threads, pixels.shape[-1]))) as pool:
        return list(pool.map(run, range(pixels.shape[-1])))


def adjoint(coeffs: WaveletCoefficients, context: WaveletTransform) -> NDArray[np.float64]:
    return context.adjoint(coeffs)


def frame_bounds(context: WaveletTransform) -> Tuple[float, float]:
    return context.frame_bounds()


def inverse(
    coeffs: WaveletCoefficients,
    context: WaveletTransform,
    x0: Optional[ArrayLike] = None,
) -> NDArray[np.float64]:
    """Least-squares signal for the coefficients via CG on T^T T f = T^T c."""

    lower, upper = context.frame_bounds()
    if lower <= FRAME_FLOOR * max(upper, 1.0):
        raise TransformError(
            f"frame lower bound {lower:.3g} is numerically zero; the transform is not invertible"
        )
    rhs = context.adjoint(coeffs)
    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0:
        return np.zeros(context.n_vertices)

    n = context.n_vertices
    operator = LinearOperator((n, n), matvec=context.normal, dtype=np.float64)
    start = None if x0 is None else np.asarray(x0, dtype=np.float64)
    solution, info = cg(
        operator,
        rhs,
        x0=start,
        rtol=context.cg_tolerance,
        atol=0.0,
        maxiter=context.cg_max_iterations,
    )
    residual = float(np.linalg.norm(rhs - context.normal(solution)) / rhs_norm)
    if info != 0:
        raise ConvergenceError(
            f"conjugate gradient stopped with relative residual {residual:.3e} "
            f"after {context.cg_max_iterations} iterations",
            residual=residual,
        )
    LOGGER.debug("inverse converged, relative residual %.3e", residual)
    return solution


@dataclass
class ScaleEnergy:
    """Quadratic forms q_tau per channel (scaling plane first) and their channel mean."""

    per_channel: Dict[str, List[float]]
    mean: List[float]


def per_scale_quadratic_forms(
    coeffs: Union[WaveletCoefficients, Sequence[WaveletCoefficients]],
    L,
) -> ScaleEnergy:
    channels = [coeffs] if isinstance(coeffs, WaveletCoefficients) else list(coeffs)
    if not channels:
        raise ValueError("no coefficient sets given")
    per_channel: Dict[str, List[float]] = {}
    for position, channel_coeffs in enumerate(channels):
        if channel_coeffs.n_vertices != L.shape[0]:
            raise ValueError(
                f"planes have {channel_coeffs.n_vertices} vertices, Laplacian has {L.shape[0]}"
            )
        name = channel_coeffs.channel or str(position)
        per_channel[name] = [quadratic_form(plane, L) for plane in channel_coeffs.planes]
    mean = np.mean(np.array(list(per_channel.values())), axis=0)
    return ScaleEnergy(per_channel=per_channel, mean=[float(v) for v in mean])


__all__ = [
    "ChebyshevApprox",
    "ConvergenceError",
    "KernelSpec",
    "ScaleEnergy",
    "TransformError",
    "WaveletCoefficients",
    "WaveletTransform",
    "adjoint",
    "chebyshev_apply",
    "chebyshev_coeffs",
    "forward_chebyshev",
    "forward_exact",
    "forward_image",
    "frame_bounds",
    "inverse",
    "kernel_g",
    "kernel_g_peak",
    "kernel_h",
    "per_scale_quadratic_forms",
    "select_scales",
]
