"""Dirichlet box grid, sampled fields and the 3-D sine transform.

A field lives on the ``M**3`` interior nodes ``x_i = i*h`` (``i = 1..M``,
``h = L/(M+1)``) of the box ``(0, L)**3``; the boundary value is implicitly
zero.  Spectral coefficients ``c_k`` are the amplitudes of the expansion

    u(x_i) = sum_k c_k sin(k1 pi x/L) sin(k2 pi y/L) sin(k3 pi z/L)

so that the discrete Laplacian with these boundary conditions is diagonal,
``-lambda_k = -pi**2 |k|**2 / L**2``.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft


def fft_workers() -> int:
    """Thread count for transforms, from ``POTWELL_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("POTWELL_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class BoxDomain:
    L: float
    M: int

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"side length must be positive, got {self.L}")
        if self.M < 4 or self.M % 2:
            raise ValueError(f"M must be even and >= 4, got {self.M}")

    @property
    def h(self) -> float:
        return self.L / (self.M + 1)

    @property
    def cell_volume(self) -> float:
        return self.h ** 3

    @cached_property
    def nodes(self) -> np.ndarray:
        return self.h * np.arange(1, self.M + 1)

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """``lambda_k`` on the ``(M, M, M)`` mode grid (all positive)."""
        k2 = (np.pi * np.arange(1, self.M + 1) / self.L) ** 2
        return k2[:, None, None] + k2[None, :, None] + k2[None, None, :]

    @property
    def mode_weight(self) -> float:
        # h * sum_n sin^2(k pi n / (M+1)) = L/2 per axis, exactly
        return (self.L / 2.0) ** 3

    def mesh(self):
        return np.meshgrid(self.nodes, self.nodes, self.nodes, indexing="ij")


@dataclass(eq=False)
class Field:
    domain: BoxDomain
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        M = self.domain.M
        if self.values.size != M ** 3:
            raise ValueError(f"expected {M ** 3} values, got {self.values.size}")
        self.values = self.values.reshape(M, M, M)

    def _like(self, values) -> "Field":
        return Field(self.domain, values)

    def __mul__(self, c) -> "Field":
        return self._like(self.values * c)

    __rmul__ = __mul__

    def __truediv__(self, c) -> "Field":
        return self._like(self.values / c)

    def __neg__(self) -> "Field":
        return self._like(-self.values)

    def __add__(self, other: "Field") -> "Field":
        _check_same(self, other)
        return self._like(self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        _check_same(self, other)
        return self._like(self.values - other.values)

    def copy(self) -> "Field":
        return self._like(self.values.copy())

    @property
    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))


@dataclass(eq=False)
class SpectralField:
    domain: BoxDomain
    coeffs: np.ndarray = field(repr=False)

    def __mul__(self, c) -> "SpectralField":
        return SpectralField(self.domain, self.coeffs * c)

    __rmul__ = __mul__

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same(self, other)
        return SpectralField(self.domain, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same(self, other)
        return SpectralField(self.domain, self.coeffs - other.coeffs)

    def norm_sq(self) -> float:
        """Squared L2 norm through Parseval (equals ``norm(u, 2)**2``)."""
        return float(self.domain.mode_weight * np.sum(self.coeffs ** 2))


def _check_same(a, b):
    if a.domain != b.domain:
        raise ValueError(f"domain mismatch: {a.domain} vs {b.domain}")


def zeros(domain: BoxDomain) -> Field:
    return Field(domain, np.zeros((domain.M,) * 3))


def from_function(domain: BoxDomain, fn) -> Field:
    """Sample ``fn(x, y, z)`` (vectorised) at the interior nodes."""
    X, Y, Z = domain.mesh()
    return Field(domain, fn(X, Y, Z))


def sine_mode(domain: BoxDomain, k=(1, 1, 1), amplitude: float = 1.0) -> Field:
    """Single Dirichlet eigenfunction with peak amplitude ``amplitude``."""
    L = domain.L
    k1, k2, k3 = k
    return from_function(
        domain,
        lambda x, y, z: amplitude
        * np.sin(k1 * np.pi * x / L)
        * np.sin(k2 * np.pi * y / L)
        * np.sin(k3 * np.pi * z / L),
    )


def dst_forward(u: Field) -> SpectralField:
    M = u.domain.M
    c = sfft.dstn(u.values, type=1, workers=fft_workers()) / (M + 1) ** 3
    return SpectralField(u.domain, c)


def dst_inverse(uh: SpectralField) -> Field:
    v = sfft.dstn(uh.coeffs, type=1, workers=fft_workers()) / 8.0
    return Field(uh.domain, v)


def laplacian_apply(uh: SpectralField) -> SpectralField:
    return SpectralField(uh.domain, -uh.domain.eigenvalues * uh.coeffs)


def norm(u: Field, p: float = 2) -> float:
    """Discrete ``L^p`` norm with the rectangle rule over interior nodes."""
    a = np.abs(u.values)
    if p == np.inf:
        return float(a.max()) if a.size else 0.0
    if p < 1:
        raise ValueError(f"norm exponent must be >= 1, got {p}")
    s = u.domain.cell_volume * np.sum(a ** p)
    return float(s ** (1.0 / p))


def grad_norm_sq(u: Field | SpectralField) -> float:
    """Dirichlet energy ``A(u)`` evaluated spectrally."""
    uh = u if isinstance(u, SpectralField) else dst_forward(u)
    d = uh.domain
    return float(d.mode_weight * np.sum(d.eigenvalues * uh.coeffs ** 2))
