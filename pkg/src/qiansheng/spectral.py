"""Uniform periodic grid on [0, 2pi)^d and its Fourier-multiplier operators.

Fields are plain numpy arrays whose trailing ``d`` axes are the grid axes.
Leading axes index components: ``()`` for scalars, ``(d,)`` for vectors,
``(d, d)`` for matrices.  Spectral arrays use the unnormalised FFT
convention of :mod:`scipy.fft`; the Fourier coefficient of mode ``k`` is
``fft(f)[k] / n**d`` and ``||f||_L2^2 = (2pi)^d * sum_k |coef_k|^2``.
"""

from __future__ import annotations

import itertools
import os
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import DimensionError

TWO_PI = 2.0 * np.pi
# Relative slack on the mollifier radius so that |k| == 1/eps survives
# rounding of 1/eps.
CUTOFF_RTOL = 1e-12


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("QS_THREADS", "1")))
    except ValueError:
        return 1


def multi_indices(d: int, s: int, start: int = 0):
    """All multi-indices alpha in N^d with start <= |alpha| <= s."""
    for order in range(start, s + 1):
        for combo in itertools.combinations_with_replacement(range(d), order):
            alpha = [0] * d
            for ax in combo:
                alpha[ax] += 1
            yield tuple(alpha)


class Grid:
    """Periodic grid with ``n`` points per direction in ``d`` dimensions."""

    def __init__(self, d: int, n: int, workers: int | None = None):
        if d not in (2, 3):
            raise DimensionError(f"d must be 2 or 3, got {d}")
        if n < 8 or n % 2 or n & (n - 1):
            raise DimensionError(f"n must be a power of two >= 8, got {n}")
        self.d = d
        self.n = n
        self.workers = default_workers() if workers is None else workers
        self.shape = (n,) * d
        self.axes = tuple(range(-d, 0))
        self.dx = TWO_PI / n
        self.volume = TWO_PI**d
        k1 = sfft.fftfreq(n, 1.0 / n)
        self.k = np.stack(np.meshgrid(*([k1] * d), indexing="ij"))
        self.ksq = np.sum(self.k**2, axis=0)
        # First-derivative wavenumbers: the Nyquist mode has no odd derivative.
        kd = self.k.copy()
        kd[self.k == -n // 2] = 0.0
        self.kd = kd
        kd_sq = np.sum(kd**2, axis=0)
        self._kd_sq_safe = np.where(kd_sq == 0, 1.0, kd_sq)
        self._kd_zero = kd_sq == 0
        self._weights: dict[tuple[int, bool], np.ndarray] = {}

    def __repr__(self) -> str:
        return f"Grid(d={self.d}, n={self.n})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Grid) and (self.d, self.n) == (other.d, other.n)

    def __hash__(self):
        return hash((self.d, self.n))

    @cached_property
    def x(self) -> np.ndarray:
        x1 = np.arange(self.n) * self.dx
        return np.stack(np.meshgrid(*([x1] * self.d), indexing="ij"))

    def zeros(self, *components: int) -> np.ndarray:
        return np.zeros(tuple(components) + self.shape)

    def check(self, f: np.ndarray) -> None:
        if f.shape[-self.d:] != self.shape:
            raise DimensionError(f"field shape {f.shape} does not end with grid shape {self.shape}")

    # -- transforms -------------------------------------------------------

    def forward(self, f: np.ndarray) -> np.ndarray:
        self.check(f)
        return sfft.fftn(f, axes=self.axes, workers=self.workers)

    def inverse(self, fh: np.ndarray) -> np.ndarray:
        self.check(fh)
        return sfft.ifftn(fh, axes=self.axes, workers=self.workers).real

    # -- spectral-space operators -----------------------------------------

    def ddx_hat(self, fh: np.ndarray, axis: int) -> np.ndarray:
        if not 0 <= axis < self.d:
            raise DimensionError(f"axis {axis} out of range for d={self.d}")
        return 1j * self.kd[axis] * fh

    def laplacian_hat(self, fh: np.ndarray) -> np.ndarray:
        return -self.ksq * fh

    def gradient_hat(self, fh: np.ndarray) -> np.ndarray:
        """Append a derivative axis last among components: ``(..., d, grid)``."""
        return np.stack([self.ddx_hat(fh, i) for i in range(self.d)], axis=-self.d - 1)

    def divergence_hat(self, vh: np.ndarray) -> np.ndarray:
        """Contract the last component axis with the derivative: ``sum_j d_j V_..j``."""
        return sum(self.ddx_hat(np.take(vh, j, axis=-self.d - 1), j) for j in range(self.d))

    def leray_hat(self, uh: np.ndarray) -> np.ndarray:
        """Remove the gradient part ``k (k . u) / |k|^2`` mode by mode."""
        kdotu = np.sum(self.kd * uh, axis=0)
        corr = self.kd * (kdotu / self._kd_sq_safe)
        corr[:, self._kd_zero] = 0.0
        return uh - corr

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """Two-thirds rule: keep modes with every ``|k_i| <= n/3``."""
        return np.all(np.abs(self.k) <= self.n / 3.0, axis=0)

    def mollify_mask(self, eps: float) -> np.ndarray:
        """Sharp cutoff ``|k| <= 1/eps``; ``eps == 0`` keeps everything."""
        if eps < 0:
            raise ValueError(f"eps must be positive, got {eps}")
        if eps == 0:
            return np.ones(self.shape, dtype=bool)
        r = (1.0 / eps) * (1.0 + CUTOFF_RTOL)
        return self.ksq <= r * r

    def sobolev_weight(self, s: int, homogeneous: bool = False) -> np.ndarray:
        """``sum_alpha prod_i k_i^(2 alpha_i)`` over distinct multi-indices."""
        if s < 0:
            raise ValueError(f"s must be >= 0, got {s}")
        key = (s, homogeneous)
        if key in self._weights:
            return self._weights[key]
        w = np.zeros(self.shape)
        for alpha in multi_indices(self.d, s, start=1 if homogeneous else 0):
            term = np.ones(self.shape)
            for ax, p in enumerate(alpha):
                if p:
                    term = term * self.k[ax] ** (2 * p)
            w += term
        self._weights[key] = w
        return w

    def norm_sq_hat(self, fh: np.ndarray, s: int = 0, homogeneous: bool = False) -> float:
        """Squared (homogeneous) Sobolev norm from spectral coefficients.

        Component axes are summed, so a matrix field gives ``sum_ij ||f_ij||^2``.
        """
        w = self.sobolev_weight(s, homogeneous)
        scale = self.volume / float(self.n**self.d) ** 2
        return float(scale * np.sum(w * (fh.real**2 + fh.imag**2)))

    # -- physical-space conveniences --------------------------------------

    def derivative(self, f: np.ndarray, axis: int) -> np.ndarray:
        return self.inverse(self.ddx_hat(self.forward(f), axis))

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        return self.inverse(self.laplacian_hat(self.forward(f)))

    def divergence(self, v: np.ndarray) -> np.ndarray:
        return self.inverse(self.divergence_hat(self.forward(v)))

    def leray_project(self, u: np.ndarray) -> np.ndarray:
        if u.shape[0] != self.d:
            raise DimensionError(f"vector field needs {self.d} components, got {u.shape[0]}")
        return self.inverse(self.leray_hat(self.forward(u)))

    def mollify(self, f: np.ndarray, eps: float) -> np.ndarray:
        if eps <= 0:
            raise ValueError(f"mollifier parameter must be > 0, got {eps}")
        return self.inverse(self.mollify_mask(eps) * self.forward(f))

    def dealias(self, f: np.ndarray) -> np.ndarray:
        return self.inverse(self.dealias_mask * self.forward(f))

    def sobolev_norm(self, f: np.ndarray, s: int) -> float:
        return float(np.sqrt(self.norm_sq_hat(self.forward(f), s)))

    def hs_dot_norm(self, f: np.ndarray, s: int) -> float:
        return float(np.sqrt(self.norm_sq_hat(self.forward(f), s, homogeneous=True)))

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        """L2 inner product by the rectangle rule (exact for trigonometric data)."""
        return float(np.sum(f * g) * self.dx**self.d)

    def integrate(self, f: np.ndarray) -> float:
        return float(np.sum(f) * self.dx**self.d)
