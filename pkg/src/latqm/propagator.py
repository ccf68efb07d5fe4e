"""Explicit time stepping of lattice wavefunctions.

Everything runs in the dimensionless time tau = hbar t / (M ell^2), where the
equation of motion reads ``d psi/d tau = -i (h psi + eta psi)`` with ``h`` the
kernel in units of hbar^2/(M ell^2) and ``eta = M ell^2 U / hbar^2``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from latqm import kernels as _k
from latqm.errors import InvalidArgument, NormDriftError
from latqm.kernels import Kernel
from latqm.lattice import Lattice, WaveFunction


class StabilityWarning(UserWarning):
    """dtau times the largest kernel eigenvalue is past the Euler threshold."""


@dataclass(frozen=True, eq=False)
class Potential:
    lattice: Lattice
    u: np.ndarray

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        if u.shape != (self.lattice.N,):
            raise InvalidArgument(f"potential needs {self.lattice.N} values, got {u.shape}")
        if not np.all(np.isfinite(u)):
            raise InvalidArgument("potential must be finite")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)

    @property
    def eta(self) -> np.ndarray:
        lat = self.lattice
        return lat.mass * lat.ell**2 * self.u / lat.hbar**2


def zero_potential(lat: Lattice) -> Potential:
    return Potential(lat, np.zeros(lat.N))


INTEGRATORS = ("euler", "rk4")


@dataclass(frozen=True)
class EvolutionConfig:
    dtau: float = 1e-3
    integrator: str = "euler"
    steps_per_sample: int = 1000
    norm_tolerance: float = 0.02
    renormalize: bool = False
    engine: str = "auto"

    def __post_init__(self):
        if not self.dtau > 0:
            raise InvalidArgument(f"dtau must be positive, got {self.dtau!r}")
        if self.integrator not in INTEGRATORS:
            raise InvalidArgument(f"integrator must be one of {INTEGRATORS}")
        if int(self.steps_per_sample) != self.steps_per_sample or self.steps_per_sample < 1:
            raise InvalidArgument("steps_per_sample must be a positive integer")
        if not self.norm_tolerance > 0:
            raise InvalidArgument("norm_tolerance must be positive")
        _k.choose_engine(4, self.engine)


def _check(psi: WaveFunction, kernel: Kernel, pot: Potential, dtau: float):
    if not (psi.lattice == kernel.lattice == pot.lattice):
        raise InvalidArgument("wavefunction, kernel and potential use different lattices")
    if dtau < 0:
        raise InvalidArgument(f"dtau must be non-negative, got {dtau!r}")


def check_stability(kernel: Kernel, pot: Potential, dtau: float, integrator: str = "euler") -> float:
    """Return dtau * (spectral radius); warn when it passes the threshold.

    Explicit Euler amplifies every mode by sqrt(1 + (dtau*eps)^2) so it is never
    strictly stable; past 2 the growth is catastrophic.  RK4 is stable on the
    imaginary axis up to 2*sqrt(2).
    """
    radius = float(np.max(np.abs(kernel.grid_symbol())) + np.max(np.abs(pot.eta)))
    product = dtau * radius
    limit = 2.0 if integrator == "euler" else 2.0 * np.sqrt(2.0)
    if product >= limit:
        warnings.warn(
            f"dtau*eps_max = {product:.4g} >= {limit:.4g}; {integrator} will blow up",
            StabilityWarning,
            stacklevel=3,
        )
    return product


class Stepper:
    """Raw-array stepping for one (kernel, potential, dtau) combination."""

    def __init__(self, kernel: Kernel, pot: Potential, dtau: float, engine: str = "auto"):
        self.engine = _k.choose_engine(kernel.lattice.N, engine)
        self.dtau = float(dtau)
        self.eta = pot.eta
        if self.engine == "spectral":
            sym = kernel.fft_symbol()
            self._hop = lambda v: np.fft.ifft(sym * np.fft.fft(v))
            # Euler folded into one FFT pair: b*psi + ifft(a * fft(psi)).
            self._euler_a = -1j * self.dtau * sym
        else:
            self._hop = _k.direct_operator(kernel)
            self._euler_a = None
        self._euler_b = 1.0 - 1j * self.dtau * self.eta

    def rhs(self, v: np.ndarray) -> np.ndarray:
        return -1j * (self._hop(v) + self.eta * v)

    def euler(self, v: np.ndarray) -> np.ndarray:
        if self._euler_a is not None:
            return self._euler_b * v + np.fft.ifft(self._euler_a * np.fft.fft(v))
        return v + self.dtau * self.rhs(v)

    def rk4(self, v: np.ndarray) -> np.ndarray:
        h = self.dtau
        k1 = self.rhs(v)
        k2 = self.rhs(v + 0.5 * h * k1)
        k3 = self.rhs(v + 0.5 * h * k2)
        k4 = self.rhs(v + h * k3)
        return v + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    def step_function(self, integrator: str) -> Callable[[np.ndarray], np.ndarray]:
        return self.euler if integrator == "euler" else self.rk4


def step_euler(psi: WaveFunction, kernel: Kernel, pot: Potential, dtau: float,
               engine: str = "auto") -> WaveFunction:
    _check(psi, kernel, pot, dtau)
    new = Stepper(kernel, pot, dtau, engine).euler(np.array(psi.amplitudes))
    return psi.with_amplitudes(new, time=psi.time + dtau)


def step_rk4(psi: WaveFunction, kernel: Kernel, pot: Potential, dtau: float,
             engine: str = "auto") -> WaveFunction:
    _check(psi, kernel, pot, dtau)
    new = Stepper(kernel, pot, dtau, engine).rk4(np.array(psi.amplitudes))
    return psi.with_amplitudes(new, time=psi.time + dtau)


@dataclass
class Trajectory:
    taus: list = field(default_factory=list)
    norms: list = field(default_factory=list)
    states: list = field(default_factory=list)
    engine: str = ""
    stopped_early: bool = False

    @property
    def final(self) -> WaveFunction:
        return self.states[-1]

    def __len__(self):
        return len(self.taus)


# observer(tau, amplitudes) -> True to stop the run after this sample
Observer = Callable[[float, np.ndarray], bool]


def evolve(psi: WaveFunction, kernel: Kernel, pot: Potential, cfg: EvolutionConfig,
           tau_total: float, observer: Observer | None = None,
           keep_states: bool = True) -> Trajectory:
    """Step ``psi`` up to ``tau_total``, sampling every ``cfg.steps_per_sample`` steps.

    The sample list always starts with the input state; the last sample is the
    final state even when ``tau_total`` is not a multiple of the sample spacing.
    When ``keep_states`` is false only the initial and the latest state are kept.
    """
    _check(psi, kernel, pot, cfg.dtau)
    if tau_total < 0:
        raise InvalidArgument(f"tau_total must be non-negative, got {tau_total!r}")
    check_stability(kernel, pot, cfg.dtau, cfg.integrator)

    stepper = Stepper(kernel, pot, cfg.dtau, cfg.engine)
    step = stepper.step_function(cfg.integrator)
    n_steps = int(round(tau_total / cfg.dtau))
    v = np.array(psi.amplitudes)
    norm0 = float(np.vdot(v, v).real)
    traj = Trajectory(engine=stepper.engine)

    def record(tau, values):
        norm = float(np.vdot(values, values).real)
        traj.taus.append(tau)
        traj.norms.append(norm)
        state = WaveFunction(psi.lattice, values, tau)
        if keep_states or len(traj.states) < 2:
            traj.states.append(state)
        else:
            traj.states[-1] = state
        if abs(norm - norm0) > cfg.norm_tolerance * norm0:
            raise NormDriftError(tau, norm, norm0, cfg.norm_tolerance)
        return observer is not None and observer(tau, values)

    record(psi.time, v)
    done = 0
    while done < n_steps:
        chunk = min(cfg.steps_per_sample, n_steps - done)
        for _ in range(chunk):
            v = step(v)
        done += chunk
        if cfg.renormalize:
            v = v * np.sqrt(norm0 / np.vdot(v, v).real)
        if record(psi.time + done * cfg.dtau, v):
            traj.stopped_early = done < n_steps
            break
    return traj
