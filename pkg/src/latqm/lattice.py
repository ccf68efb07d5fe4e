"""Periodic 1D lattice, position/momentum transforms and wavefunctions.

Sites carry integer labels ``n = -N/2 .. N/2-1`` and positions ``x = n*ell``;
arrays are stored in that order, so array index ``i`` holds ``n = i - N/2``.
Momentum arrays use the same ordering for ``k = 2*pi*m/(N*ell)``.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from latqm._io import atomic_write_text, fmt
from latqm.errors import InvalidArgument


class PacketWrapWarning(UserWarning):
    """The requested packet is too wide to fit on the periodic lattice."""


@dataclass(frozen=True)
class Lattice:
    N: int
    ell: float = 1.0
    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if isinstance(self.N, bool) or int(self.N) != self.N:
            raise InvalidArgument(f"N must be an integer, got {self.N!r}")
        if self.N < 4 or self.N % 2:
            raise InvalidArgument(f"N must be even and >= 4, got {self.N}")
        for name in ("ell", "hbar", "mass"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise InvalidArgument(f"{name} must be positive, got {value!r}")
        object.__setattr__(self, "N", int(self.N))

    @property
    def L(self) -> float:
        return self.N * self.ell

    @property
    def labels(self) -> np.ndarray:
        return np.arange(-self.N // 2, self.N // 2)

    @property
    def x(self) -> np.ndarray:
        return self.labels * self.ell

    @property
    def k(self) -> np.ndarray:
        return 2.0 * np.pi * self.labels / self.L

    @property
    def dk(self) -> float:
        return 2.0 * np.pi / self.L

    @property
    def energy_unit(self) -> float:
        """hbar^2 / (M ell^2), the scale of every kernel coefficient."""
        return self.hbar**2 / (self.mass * self.ell**2)

    def site_of(self, x: float) -> int:
        """Array index of the site nearest to position ``x``."""
        return int(round(x / self.ell)) + self.N // 2

    def tau_from_time(self, t: float) -> float:
        return self.hbar * t / (self.mass * self.ell**2)

    def time_from_tau(self, tau: float) -> float:
        return tau * self.mass * self.ell**2 / self.hbar


def make_lattice(N: int, ell: float = 1.0, hbar: float = 1.0, mass: float = 1.0) -> Lattice:
    return Lattice(N, ell, hbar, mass)


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class WaveFunction:
    lattice: Lattice
    amplitudes: np.ndarray
    time: float = 0.0  # dimensionless tau = hbar t / (M ell^2)
    normalized: bool = False

    def __post_init__(self):
        amps = _frozen(self.amplitudes)
        if amps.shape != (self.lattice.N,):
            raise InvalidArgument(
                f"expected {self.lattice.N} amplitudes, got shape {amps.shape}"
            )
        object.__setattr__(self, "amplitudes", amps)

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def norm(self) -> float:
        return float(np.sum(self.probabilities))

    @property
    def physical_time(self) -> float:
        return self.lattice.time_from_tau(self.time)

    def mean_position(self) -> float:
        p = self.probabilities
        return float(np.dot(p, self.lattice.x) / p.sum())

    def normalize(self) -> "WaveFunction":
        return WaveFunction(
            self.lattice, self.amplitudes / np.sqrt(self.norm), self.time, True
        )

    def with_amplitudes(self, amplitudes, time: float | None = None) -> "WaveFunction":
        return WaveFunction(
            self.lattice, amplitudes, self.time if time is None else time
        )


@dataclass(frozen=True)
class MomentumFunction:
    lattice: Lattice
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = _frozen(self.amplitudes)
        if amps.shape != (self.lattice.N,):
            raise InvalidArgument(
                f"expected {self.lattice.N} amplitudes, got shape {amps.shape}"
            )
        object.__setattr__(self, "amplitudes", amps)

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def norm(self) -> float:
        return float(np.sum(self.probabilities))


# Site-ordered arrays put x=0 at index N/2; the shifts move it to index 0 so a
# plain FFT carries the e^{-ikx} phase with the symmetric 1/sqrt(N) scale.
def forward(values: np.ndarray) -> np.ndarray:
    return np.fft.fftshift(np.fft.fft(np.fft.ifftshift(values), norm="ortho"))


def inverse(values: np.ndarray) -> np.ndarray:
    return np.fft.fftshift(np.fft.ifft(np.fft.ifftshift(values), norm="ortho"))


def to_momentum(psi: WaveFunction) -> MomentumFunction:
    return MomentumFunction(psi.lattice, forward(psi.amplitudes))


def to_position(phi: MomentumFunction, time: float = 0.0) -> WaveFunction:
    return WaveFunction(phi.lattice, inverse(phi.amplitudes), time)


def delta_state(lat: Lattice, site: int) -> WaveFunction:
    if not 0 <= site < lat.N:
        raise InvalidArgument(f"site {site} outside 0..{lat.N - 1}")
    amps = np.zeros(lat.N, dtype=complex)
    amps[site] = 1.0
    return WaveFunction(lat, amps, normalized=True)


def plane_wave(lat: Lattice, m: int) -> WaveFunction:
    """Normalized e^{ikx}/sqrt(N) with k = 2*pi*m/L."""
    k = 2.0 * np.pi * m / lat.L
    return WaveFunction(lat, np.exp(1j * k * lat.x) / np.sqrt(lat.N), normalized=True)


def gaussian_packet(lat: Lattice, x0: float, k0: float, sigma: float) -> WaveFunction:
    """Sampled Gaussian exp[-(x-x0)^2/4sigma^2 + i k0 (x-x0)], unit discrete norm.

    Neither ``x0`` nor ``k0`` has to sit on a grid point.
    """
    if not sigma > 0:
        raise InvalidArgument(f"sigma must be positive, got {sigma!r}")
    if not -np.pi / lat.ell < k0 < np.pi / lat.ell:
        raise InvalidArgument(f"k0={k0!r} outside the Brillouin zone")
    if sigma > lat.L / 8:
        warnings.warn(
            f"sigma={sigma:g} exceeds L/8={lat.L / 8:g}; the packet wraps",
            PacketWrapWarning,
            stacklevel=2,
        )
    dx = lat.x - x0
    amps = np.exp(-(dx**2) / (4.0 * sigma**2) + 1j * k0 * dx)
    amps /= np.sqrt(np.sum(np.abs(amps) ** 2))
    return WaveFunction(lat, amps, normalized=True)


def probability_in_region(psi: WaveFunction, lo: int, hi: int) -> float:
    """Sum of |psi|^2 over array indices lo..hi inclusive."""
    N = psi.lattice.N
    if not (0 <= lo < N and 0 <= hi < N):
        raise InvalidArgument(f"region [{lo}, {hi}] outside 0..{N - 1}")
    if lo > hi:
        raise InvalidArgument(f"empty region: lo={lo} > hi={hi}")
    return float(np.sum(psi.probabilities[lo : hi + 1]))


CSV_COLUMNS = ("site_index", "x", "re", "im", "prob")


def wavefunction_csv(psi: WaveFunction) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for i, (x, a) in enumerate(zip(psi.lattice.x, psi.amplitudes)):
        writer.writerow([i, fmt(x), fmt(a.real), fmt(a.imag), fmt(abs(a) ** 2)])
    return buf.getvalue()


def write_wavefunction_csv(psi: WaveFunction, path) -> Path:
    return atomic_write_text(path, wavefunction_csv(psi))


def read_wavefunction_csv(path, lat: Lattice, time: float = 0.0) -> WaveFunction:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) != lat.N:
        raise InvalidArgument(f"{path}: {len(rows)} rows for a lattice of {lat.N} sites")
    amps = np.array([float(r["re"]) + 1j * float(r["im"]) for r in rows])
    return WaveFunction(lat, amps, time)
