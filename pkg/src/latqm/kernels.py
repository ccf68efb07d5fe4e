"""Hamiltonian kernels for the free lattice particle.

A kernel is a real even table ``c_m`` of dimensionless hop coefficients; the
Hamiltonian acts as ``(H psi)(x) = hbar^2/(M ell^2) * sum_m c_m psi(x - m ell)``
with periodic wrap of the site index.  Three variants exist:

``exact-truncated``
    c_0 = pi^2/6, c_m = (-1)^m / m^2 for 1 <= |m| <= m_max.
``exact-finite``
    the finite-N transform of hbar^2 k^2 / 2M; c_0 = (pi^2/6)(1 + 2/N^2),
    c_m = (-1)^m pi^2 / (N^2 sin^2(m pi / N)).
``central``
    the three-point stencil, c_0 = 1, c_{+-1} = -1/2.

On the ring the hops +N/2 and -N/2 land on the same site; that slot holds the
coefficient once.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg

from latqm.errors import InvalidArgument
from latqm.lattice import Lattice, WaveFunction, forward, inverse


class Variant(str, Enum):
    EXACT_TRUNCATED = "exact-truncated"
    EXACT_FINITE = "exact-finite"
    CENTRAL = "central"


# Lattices larger than this use the FFT engine under engine="auto".
DIRECT_MAX_N = 128


@dataclass(frozen=True, eq=False)
class Kernel:
    variant: Variant
    lattice: Lattice
    coeffs: np.ndarray  # one-sided: coeffs[m] = c_m = c_{-m}, m = 0..m_max

    @property
    def m_max(self) -> int:
        return len(self.coeffs) - 1

    @property
    def diagonal(self) -> float:
        return float(self.coeffs[0])

    def coefficient(self, m: int) -> float:
        m = abs(int(m))
        return float(self.coeffs[m]) if m <= self.m_max else 0.0

    def hops(self) -> tuple[np.ndarray, np.ndarray]:
        """Signed hop distances and their coefficients, each ring slot once."""
        N = self.lattice.N
        pos = np.arange(1, self.m_max + 1)
        neg = -pos[pos < N // 2]
        m = np.concatenate([neg[::-1], [0], pos])
        return m, self.coeffs[np.abs(m)]

    def circular_row(self) -> np.ndarray:
        """row[j] = coefficient for hop distance j (mod N)."""
        row = np.zeros(self.lattice.N)
        m, c = self.hops()
        row[m % self.lattice.N] = c
        return row

    def _weights(self) -> np.ndarray:
        w = np.full(self.m_max + 1, 2.0)
        w[0] = 1.0
        if self.m_max == self.lattice.N // 2:
            w[-1] = 1.0
        return w

    def symbol(self, k) -> np.ndarray:
        """Dimensionless dispersion sum_m c_m e^{-i k m ell} (real part)."""
        k = np.asarray(k, dtype=float)
        m = np.arange(self.m_max + 1)
        phase = np.multiply.outer(k * self.lattice.ell, m)
        return np.cos(phase) @ (self._weights() * self.coeffs)

    def grid_symbol(self) -> np.ndarray:
        """Symbol at the lattice momenta, in site (ascending k) order."""
        return np.fft.fftshift(np.fft.fft(self.circular_row()).real)

    def fft_symbol(self) -> np.ndarray:
        """Symbol at ``np.fft.fftfreq`` momenta, for raw circular convolution."""
        return np.fft.fft(self.circular_row()).real


def _exact_truncated(m_max: int) -> np.ndarray:
    m = np.arange(1, m_max + 1, dtype=float)
    return np.concatenate([[np.pi**2 / 6], (-1.0) ** m / m**2])


def _exact_finite(N: int) -> np.ndarray:
    m = np.arange(1, N // 2 + 1, dtype=float)
    off = (-1.0) ** m * np.pi**2 / (N**2 * np.sin(m * np.pi / N) ** 2)
    return np.concatenate([[np.pi**2 / 6 * (1 + 2 / N**2)], off])


def build_kernel(variant, lat: Lattice, m_max: int | None = None) -> Kernel:
    variant = Variant(variant)
    if variant is Variant.EXACT_TRUNCATED:
        if m_max is None:
            m_max = lat.N // 2
        if not 1 <= m_max <= lat.N // 2:
            raise InvalidArgument(f"m_max must lie in 1..{lat.N // 2}, got {m_max}")
        coeffs = _exact_truncated(int(m_max))
    elif variant is Variant.EXACT_FINITE:
        coeffs = _exact_finite(lat.N)
    else:
        coeffs = np.array([1.0, -0.5])
    coeffs.setflags(write=False)
    return Kernel(variant, lat, coeffs)


def dispersion(kernel: Kernel, k):
    """Single-particle energy of ``kernel`` at wavenumber(s) ``k``."""
    eps = kernel.lattice.energy_unit * kernel.symbol(k)
    return float(eps) if np.ndim(eps) == 0 else eps


def free_energy(lat: Lattice, k):
    """Continuum energy hbar^2 k^2 / 2M."""
    return lat.hbar**2 * np.asarray(k) ** 2 / (2 * lat.mass)


def _check_lattice(kernel: Kernel, psi: WaveFunction):
    if kernel.lattice != psi.lattice:
        raise InvalidArgument("kernel and wavefunction live on different lattices")


def direct_operator(kernel: Kernel):
    """Callable applying the dimensionless kernel by explicit hop sums."""
    m, c = kernel.hops()
    if len(m) <= 16:
        def apply(values):
            out = np.zeros_like(values)
            for shift, coeff in zip(m, c):
                out += coeff * np.roll(values, shift)
            return out
        return apply
    # c[(i - j) mod N] laid out as a dense circulant.
    matrix = scipy.linalg.circulant(kernel.circular_row())
    return matrix.__matmul__


def spectral_operator(kernel: Kernel):
    """Callable applying the dimensionless kernel through the FFT."""
    sym = kernel.fft_symbol()

    def apply(values):
        return np.fft.ifft(sym * np.fft.fft(values))

    return apply


def apply_direct(kernel: Kernel, psi: WaveFunction) -> WaveFunction:
    _check_lattice(kernel, psi)
    out = direct_operator(kernel)(np.array(psi.amplitudes))
    return psi.with_amplitudes(kernel.lattice.energy_unit * out)


def apply_spectral(kernel: Kernel, psi: WaveFunction) -> WaveFunction:
    _check_lattice(kernel, psi)
    out = inverse(kernel.grid_symbol() * forward(psi.amplitudes))
    return psi.with_amplitudes(kernel.lattice.energy_unit * out)


def choose_engine(N: int, engine: str = "auto") -> str:
    if engine == "auto":
        return "spectral" if N > DIRECT_MAX_N else "direct"
    if engine not in ("direct", "spectral"):
        raise InvalidArgument(f"unknown engine {engine!r}")
    return engine


def apply(kernel: Kernel, psi: WaveFunction, engine: str = "auto") -> WaveFunction:
    if choose_engine(kernel.lattice.N, engine) == "direct":
        return apply_direct(kernel, psi)
    return apply_spectral(kernel, psi)


def kernel_tail_sum(m_max: int) -> float:
    """Partial sum of (-1)^m / m^2 for m = 1..m_max (limit -pi^2/12)."""
    if m_max < 1:
        raise InvalidArgument(f"m_max must be >= 1, got {m_max}")
    m = np.arange(m_max, 0, -1, dtype=float)  # smallest terms first
    return float(np.sum((-1.0) ** m / m**2))


@dataclass(frozen=True, eq=False)
class SeparableKernel:
    """A D-dimensional kernel that applies one 1D kernel along every axis."""

    axis_kernel: Kernel
    dim: int

    @property
    def diagonal(self) -> float:
        return self.dim * self.axis_kernel.diagonal

    def symbol(self, *k_axes) -> np.ndarray:
        if len(k_axes) != self.dim:
            raise InvalidArgument(f"need {self.dim} momentum components")
        return sum(self.axis_kernel.symbol(k) for k in k_axes)

    def apply(self, values: np.ndarray) -> np.ndarray:
        """(H psi) on an N^D site array, using the FFT along each axis."""
        values = np.asarray(values, dtype=complex)
        N = self.axis_kernel.lattice.N
        if values.shape != (N,) * self.dim:
            raise InvalidArgument(f"expected shape {(N,) * self.dim}, got {values.shape}")
        sym = self.axis_kernel.fft_symbol()
        out = np.zeros_like(values)
        for axis in range(self.dim):
            shape = [1] * self.dim
            shape[axis] = N
            out += np.fft.ifft(sym.reshape(shape) * np.fft.fft(values, axis=axis), axis=axis)
        return self.axis_kernel.lattice.energy_unit * out


def build_kernel_dd(variant, lat: Lattice, D: int, m_max: int | None = None) -> SeparableKernel:
    if D not in (1, 2, 3):
        raise InvalidArgument(f"dimension must be 1, 2 or 3, got {D}")
    return SeparableKernel(build_kernel(variant, lat, m_max), D)


def benchmark_engines(variant, sizes, repeats: int = 200, seed: int = 0) -> list[dict]:
    """Wall-clock seconds per application for both engines at each N."""
    rng = np.random.default_rng(seed)
    rows = []
    for N in sizes:
        kernel = build_kernel(variant, Lattice(N))
        values = rng.normal(size=N) + 1j * rng.normal(size=N)
        row = {"N": N}
        for name, op in (("direct", direct_operator(kernel)), ("spectral", spectral_operator(kernel))):
            op(values)
            start = time.perf_counter()
            for _ in range(repeats):
                op(values)
            row[name] = (time.perf_counter() - start) / repeats
        rows.append(row)
    return rows
