"""Riesz potential ``Phi(x) = int f(y) |x - y|^-mu dy`` on the box grid.

The potential is a linear (non-periodic) convolution, evaluated by zero
padding to ``(2M)**3`` and a real FFT.  The singular ``x = 0`` kernel sample
is replaced by the mean of ``|x - y|^-mu`` over pairs of points drawn from
one grid cell, i.e. the self-interaction of a cell-wise constant density.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .grid import BoxDomain, Field, fft_workers


def check_mu(mu: float) -> float:
    mu = float(mu)
    if not 0.0 < mu < 3.0:
        raise ValueError(f"mu must lie in (0, 3), got {mu}")
    return mu


@lru_cache(maxsize=64)
def unit_cell_pair_mean(mu: float, n: int = 48) -> float:
    """Mean of ``|x - y|^-mu`` for ``x, y`` uniform in the unit cube.

    The difference ``z = x - y`` has density ``prod(1 - |z_i|)`` on
    ``[-1, 1]^3``.  By symmetry the integral is 48 times the part over the
    pyramid ``z1 >= z2, z3 >= 0``; substituting ``z = t (1, s, r)`` leaves a
    polynomial in ``t`` against ``t^(2 - mu)``, integrated in closed form, and a
    smooth integrand in ``(s, r)`` handled by Gauss-Legendre.
    """
    x, w = np.polynomial.legendre.leggauss(n)
    x, w = 0.5 * (x + 1.0), 0.5 * w
    S, R = np.meshgrid(x, x, indexing="ij")
    a = 2.0 - mu
    t_part = 1 / (a + 1) - (1 + S + R) / (a + 2) + (S + R + S * R) / (a + 3) - S * R / (a + 4)
    return float(24.0 * np.sum(np.outer(w, w) * (1 + S * S + R * R) ** (-mu / 2) * t_part))


def self_cell_weight(h: float, mu: float) -> float:
    """``h^-3 int_cell int_cell |x - y|^-mu dx dy``, which scales like ``h^(3 - mu)``."""
    return unit_cell_pair_mean(mu) * h ** (3.0 - mu)


def offsets_1d(M: int, h: float) -> np.ndarray:
    """Signed offsets of the doubled periodic grid: 0, h, .., Mh, -(M-1)h, .., -h."""
    j = np.arange(2 * M)
    return h * np.where(j <= M, j, j - 2 * M)


@dataclass(eq=False)
class RieszKernel:
    mu: float
    domain: BoxDomain
    padded_spectrum: np.ndarray = field(repr=False)
    self_cell_weight: float
    # the kernel is even, so its transform is real up to rounding
    real_spectrum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.real_spectrum = np.ascontiguousarray(self.padded_spectrum.real)

    @property
    def self_sample(self) -> float:
        """Value that stands in for the singular sample at zero offset."""
        return self.self_cell_weight / self.domain.cell_volume


def kernel_samples(domain: BoxDomain, mu: float) -> np.ndarray:
    """Regularised kernel on the ``(2M)**3`` offset grid."""
    d = offsets_1d(domain.M, domain.h)
    r2 = d[:, None, None] ** 2 + d[None, :, None] ** 2 + d[None, None, :] ** 2
    with np.errstate(divide="ignore"):
        k = r2 ** (-mu / 2.0)
    k[0, 0, 0] = self_cell_weight(domain.h, mu) / domain.cell_volume
    return k


@lru_cache(maxsize=16)
def _cached_kernel(domain: BoxDomain, mu: float) -> RieszKernel:
    k = kernel_samples(domain, mu)
    spectrum = sfft.rfftn(k, workers=fft_workers())
    spectrum.setflags(write=False)
    return RieszKernel(mu, domain, spectrum, self_cell_weight(domain.h, mu))


def kernel_build(domain: BoxDomain, mu: float) -> RieszKernel:
    return _cached_kernel(domain, check_mu(mu))


def riesz_apply(kernel: RieszKernel, f: Field | np.ndarray) -> Field:
    """``Phi_i = h^3 sum_j k(x_i - x_j) f_j`` for every interior node."""
    d = kernel.domain
    values = f.values if isinstance(f, Field) else np.asarray(f, dtype=float)
    if isinstance(f, Field) and f.domain != d:
        raise ValueError("field and kernel live on different grids")
    M = d.M
    fh = sfft.rfftn(values, s=(2 * M,) * 3, workers=fft_workers())
    conv = sfft.irfftn(fh * kernel.real_spectrum, s=(2 * M,) * 3, workers=fft_workers())
    return Field(d, d.cell_volume * conv[:M, :M, :M])


def bilinear(kernel: RieszKernel, f: Field, g: Field) -> float:
    """``D(f, g) = h^3 sum f * Phi[g]``."""
    return float(kernel.domain.cell_volume * np.sum(f.values * riesz_apply(kernel, g).values))
