"""Dense position, momentum and Hamiltonian matrices on small lattices.

Matrices are indexed by site pairs in the lattice's array order.  They exist
to check operator identities exactly, so everything here is O(N^2) memory and
capped at ``MAX_DENSE_N`` sites.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg

from latqm.errors import InvalidArgument, ResourceLimit
from latqm.kernels import Kernel
from latqm.lattice import Lattice, WaveFunction

MAX_DENSE_N = 4096
MAX_IDENTITY_N = 512


class Label(str, Enum):
    POSITION = "position"
    MOMENTUM = "momentum"
    MOMENTUM_SYMMETRIC = "momentum-symmetric"
    HAMILTONIAN = "hamiltonian"
    COMMUTATOR = "commutator"
    GENERIC = "generic"


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    lattice: Lattice
    entries: np.ndarray
    label: Label = Label.GENERIC

    def __post_init__(self):
        N = self.lattice.N
        if self.entries.shape != (N, N):
            raise InvalidArgument(f"expected a {N}x{N} matrix, got {self.entries.shape}")

    def apply(self, psi: WaveFunction) -> WaveFunction:
        return psi.with_amplitudes(self.entries @ psi.amplitudes)

    def expectation(self, psi: WaveFunction) -> complex:
        v = psi.amplitudes
        return complex(np.vdot(v, self.entries @ v) / np.vdot(v, v))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))


def _check_size(lat: Lattice, limit: int = MAX_DENSE_N):
    if lat.N > limit:
        raise ResourceLimit(f"dense operators are limited to N <= {limit}, got {lat.N}")


def fourier_matrix(lat: Lattice) -> np.ndarray:
    """Unitary F with (F psi)(k) = N^{-1/2} sum_x e^{-ikx} psi(x)."""
    _check_size(lat)
    return np.exp(-1j * np.outer(lat.k, lat.x)) / np.sqrt(lat.N)


def from_momentum_diagonal(lat: Lattice, diagonal, label=Label.GENERIC) -> OperatorMatrix:
    """F^dagger diag(values) F, i.e. an operator given by its momentum symbol."""
    F = fourier_matrix(lat)
    return OperatorMatrix(lat, F.conj().T @ (np.asarray(diagonal)[:, None] * F), label)


def separation(lat: Lattice) -> np.ndarray:
    """Signed, unwrapped site separation (x - y)/ell for every matrix entry."""
    n = lat.labels
    return n[:, None] - n[None, :]


def build_position(lat: Lattice) -> OperatorMatrix:
    _check_size(lat)
    return OperatorMatrix(lat, np.diag(lat.x).astype(complex), Label.POSITION)


def build_momentum(lat: Lattice, symmetric: bool = False) -> OperatorMatrix:
    """hbar k in the momentum basis, conjugated into the position basis.

    The symmetric variant drops the unpaired k = -pi/ell grid point.
    """
    weights = lat.hbar * lat.k
    if symmetric:
        weights = weights.copy()
        weights[0] = 0.0
    label = Label.MOMENTUM_SYMMETRIC if symmetric else Label.MOMENTUM
    return from_momentum_diagonal(lat, weights, label)


def momentum_closed_form(lat: Lattice) -> OperatorMatrix:
    """Position-basis entries -(hbar pi/L) (-1)^m (1 + i cot(m pi/N)), m = (x-y)/ell."""
    _check_size(lat)
    m = separation(lat)
    off = m != 0
    entries = np.full(m.shape, -lat.hbar * np.pi / lat.L, dtype=complex)
    cot = 1.0 / np.tan(np.pi * m[off] / lat.N)
    entries[off] = -(lat.hbar * np.pi / lat.L) * (-1.0) ** m[off] * (1 + 1j * cot)
    return OperatorMatrix(lat, entries, Label.MOMENTUM)


def build_hamiltonian(lat: Lattice, kernel: Kernel) -> OperatorMatrix:
    """Circulant matrix H[x, y] = hbar^2/(M ell^2) c_{(x-y) mod N}."""
    _check_size(lat)
    if kernel.lattice != lat:
        raise InvalidArgument("kernel was built for a different lattice")
    entries = lat.energy_unit * scipy.linalg.circulant(kernel.circular_row())
    return OperatorMatrix(lat, entries.astype(complex), Label.HAMILTONIAN)


def free_hamiltonian_spectral(lat: Lattice) -> OperatorMatrix:
    return from_momentum_diagonal(lat, lat.hbar**2 * lat.k**2 / (2 * lat.mass), Label.HAMILTONIAN)


def commutator(A: OperatorMatrix, B: OperatorMatrix) -> OperatorMatrix:
    if A.lattice != B.lattice or A.entries.shape != B.entries.shape:
        raise InvalidArgument("commutator operands act on different lattices")
    a, b = A.entries, B.entries
    return OperatorMatrix(A.lattice, a @ b - b @ a, Label.COMMUTATOR)


def _correction_weights(lat: Lattice, m: np.ndarray) -> np.ndarray:
    """(-1)^m (pi m / N)(1 + i cot(pi m / N)), with its m -> 0 limit i."""
    w = np.full(m.shape, 1j)
    off = m != 0
    t = np.pi * m[off] / lat.N
    w[off] = (-1.0) ** m[off] * t * (1 + 1j / np.tan(t))
    return w


def commutator_closed_form(lat: Lattice) -> OperatorMatrix:
    """i hbar 1 - hbar sum_m (-1)^m (pi m/N)(1 + i cot(pi m/N)) a_x^+ a_{x - m ell}.

    ``m`` is the unwrapped separation x - y: the position operator is not
    periodic, so entries pick up (x - y) itself rather than its value mod N.
    """
    _check_size(lat)
    m = separation(lat)
    entries = 1j * lat.hbar * np.eye(lat.N) - lat.hbar * _correction_weights(lat, m)
    return OperatorMatrix(lat, entries, Label.COMMUTATOR)


@dataclass(frozen=True)
class CommutatorReport:
    N: int
    max_deviation: float
    diag_norm: float
    in_scope: bool  # the closed form covers the asymmetric momentum only


def verify_commutator_identity(lat: Lattice, symmetric: bool = False) -> CommutatorReport:
    _check_size(lat, MAX_IDENTITY_N)
    C = commutator(build_position(lat), build_momentum(lat, symmetric))
    deviation = np.max(np.abs(C.entries - commutator_closed_form(lat).entries))
    return CommutatorReport(
        N=lat.N,
        max_deviation=float(deviation),
        diag_norm=float(np.max(np.abs(np.diag(C.entries)))),
        in_scope=not symmetric,
    )


def correction_sum(psi: WaveFunction) -> np.ndarray:
    """hbar sum_m (-1)^m (pi m/N)(1 + i cot(pi m/N)) psi(x - m ell), m = 0 included.

    Evaluated site by site; equals i hbar psi(x) - <x|[X, P]|psi>.
    """
    lat = psi.lattice
    N = lat.N
    out = np.empty(N, dtype=complex)
    sites = np.arange(N)
    for i in range(N):
        m = i - sites  # y = x - m ell stays on the lattice
        out[i] = np.sum(_correction_weights(lat, m) * psi.amplitudes)
    return lat.hbar * out


def smooth_commutator_action(psi: WaveFunction) -> float:
    """max_x |<x|[X, P]|psi> - i hbar psi(x)|."""
    lat = psi.lattice
    C = commutator(build_position(lat), build_momentum(lat))
    action = C.entries @ psi.amplitudes
    return float(np.max(np.abs(action - 1j * lat.hbar * psi.amplitudes)))


def momentum_alternating_part(psi: WaveFunction) -> np.ndarray:
    """-(hbar pi/L) sum_m (-1)^m psi(x - m ell): the piece the symmetric P removes."""
    lat = psi.lattice
    sign = (-1.0) ** lat.labels
    return -(lat.hbar * np.pi / lat.L) * sign * np.sum(sign * psi.amplitudes)


def discrete_derivative(psi: WaveFunction, m_max: int | None = None) -> WaveFunction:
    """sum_{0<|m|<=m_max} (-1)^m / (m ell) psi(x - m ell), periodic in the site index.

    This approximates d psi/dx for smooth states; far from the state's support
    the wrap at |m| = N/2 leaves an O(1/N) residue.
    """
    lat = psi.lattice
    if m_max is None:
        m_max = lat.N // 2
    if not 1 <= m_max <= lat.N // 2:
        raise InvalidArgument(f"m_max must lie in 1..{lat.N // 2}, got {m_max}")
    v = np.asarray(psi.amplitudes)
    out = np.zeros(lat.N, dtype=complex)
    for m in range(1, m_max + 1):
        # np.roll(v, m)[i] = v[i - m]
        out += (-1.0) ** m / (m * lat.ell) * (np.roll(v, m) - np.roll(v, -m))
    return psi.with_amplitudes(out)
