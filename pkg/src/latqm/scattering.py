"""Gaussian packet against a square barrier, plus one-step hop statistics."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from latqm._io import atomic_write_text, fmt
from latqm.errors import InvalidArgument, QuadratureError, WraparoundError
from latqm.kernels import Kernel, Variant, build_kernel
from latqm.lattice import Lattice, WaveFunction, delta_state, gaussian_packet
from latqm.propagator import EvolutionConfig, Potential, evolve, step_euler, zero_potential


@dataclass(frozen=True)
class BarrierSpec:
    """Square barrier of height ``height`` starting at array index ``left_site``.

    ``width_sites`` is W/ell.  With ``closed`` (the default) the barrier covers
    the closed interval [x_left, x_left + W], i.e. width_sites + 1 sites, which
    puts a W = 10 barrier on sites 251 through 261.  With
    ``closed=False`` it covers width_sites cells.
    """

    height: float
    width_sites: int
    left_site: int
    closed: bool = True

    @property
    def n_sites(self) -> int:
        return self.width_sites + 1 if self.closed else self.width_sites

    @property
    def right_site(self) -> int:
        return self.left_site + self.n_sites - 1

    def width(self, lat: Lattice) -> float:
        return self.width_sites * lat.ell

    def validate(self, lat: Lattice):
        if not self.height >= 0:
            raise InvalidArgument(f"barrier height must be non-negative, got {self.height!r}")
        if self.width_sites < 1:
            raise InvalidArgument("barrier width must be at least one site")
        if self.left_site < lat.N / 8 or self.right_site > 7 * lat.N / 8:
            raise InvalidArgument(
                f"barrier sites {self.left_site}..{self.right_site} not inside "
                f"[N/8, 7N/8] for N={lat.N}"
            )

    def potential(self, lat: Lattice) -> Potential:
        self.validate(lat)
        u = np.zeros(lat.N)
        u[self.left_site : self.right_site + 1] = self.height
        return Potential(lat, u)

    def indicator(self, lat: Lattice) -> np.ndarray:
        mask = np.zeros(lat.N, dtype=int)
        mask[self.left_site : self.right_site + 1] = 1
        return mask


@dataclass(frozen=True)
class PacketSpec:
    x0: float
    k0: float
    sigma: float

    def build(self, lat: Lattice) -> WaveFunction:
        return gaussian_packet(lat, self.x0, self.k0, self.sigma)


@dataclass
class ScatteringResult:
    transmission: float
    reflection: float
    remainder_in_barrier: float
    theory: float | None
    norm_drift: float
    tau_stop: float
    stop_reason: str
    engine: str
    samples: list = field(default_factory=list, repr=False)
    initial: WaveFunction | None = field(default=None, repr=False)
    final: WaveFunction | None = field(default=None, repr=False)
    barrier: BarrierSpec | None = field(default=None, repr=False)

    @property
    def norm(self) -> float:
        return 1.0 + self.norm_drift

    @property
    def transmission_fraction(self) -> float:
        """Transmitted share of the current (Euler-inflated) norm."""
        return self.transmission / self.norm

    @property
    def t_stop(self) -> float:
        return self.final.lattice.time_from_tau(self.tau_stop)

    def summary(self) -> dict:
        return {
            "transmission": self.transmission,
            "reflection": self.reflection,
            "remainder": self.remainder_in_barrier,
            "theory": self.theory,
            "norm_drift": self.norm_drift,
            "tau_stop": self.tau_stop,
        }


def region_probabilities(probs: np.ndarray, barrier: BarrierSpec) -> tuple[float, float, float]:
    """(left of barrier, inside, right of barrier) probability masses."""
    left = float(np.sum(probs[: barrier.left_site]))
    inside = float(np.sum(probs[barrier.left_site : barrier.right_site + 1]))
    right = float(np.sum(probs[barrier.right_site + 1 :]))
    return left, inside, right


def run_scattering(lat: Lattice, kernel: Kernel, barrier: BarrierSpec, packet: PacketSpec,
                   cfg: EvolutionConfig, t_max: float = 400.0, plateau_tol: float = 1e-5,
                   wrap_tol: float = 1e-4, with_theory: bool = True) -> ScatteringResult:
    """Evolve the packet through the barrier until transmission settles.

    Samples are taken every ``cfg.steps_per_sample`` steps.  The run stops when
    the barrier has emptied (interior mass < 1e-3) and the transmitted mass
    changed by less than ``plateau_tol`` since the previous sample, or at the
    physical time ``t_max``.  Probability within N/16 sites of either end of
    the ring means the packet has wrapped, and aborts the run.
    """
    pot = barrier.potential(lat)
    if packet.k0 <= 0:
        raise InvalidArgument("the packet must move towards the barrier (k0 > 0)")
    barrier_x = lat.x[barrier.left_site]
    if packet.x0 + 3 * packet.sigma >= barrier_x:
        raise InvalidArgument(
            f"packet at x0={packet.x0:g} with sigma={packet.sigma:g} overlaps the "
            f"barrier starting at x={barrier_x:g}"
        )
    psi0 = packet.build(lat)
    edge = max(1, lat.N // 16)
    samples = []

    def observe(tau, values):
        probs = np.abs(values) ** 2
        left, inside, right = region_probabilities(probs, barrier)
        norm = left + inside + right
        samples.append(
            {"tau": tau, "norm": norm, "prob_left": left, "prob_barrier": inside, "prob_right": right}
        )
        edge_mass = probs[:edge].sum() + probs[-edge:].sum()
        if edge_mass > wrap_tol:
            raise WraparoundError(
                f"probability {edge_mass:.3g} reached the ring boundary at tau={tau:.6g}"
            )
        if len(samples) < 2:
            return False
        settled = inside < 1e-3 and left < 0.99 * norm
        return settled and abs(right - samples[-2]["prob_right"]) < plateau_tol

    traj = evolve(psi0, kernel, pot, cfg, lat.tau_from_time(t_max), observer=observe,
                  keep_states=False)
    final = traj.final
    left, inside, right = region_probabilities(final.probabilities, barrier)
    theory = theory_transmission(packet, barrier, lat) if with_theory else None
    return ScatteringResult(
        transmission=right,
        reflection=left,
        remainder_in_barrier=inside,
        theory=theory,
        norm_drift=traj.norms[-1] - traj.norms[0],
        tau_stop=traj.taus[-1],
        stop_reason="plateau" if traj.stopped_early else "t_max",
        engine=traj.engine,
        samples=samples,
        initial=psi0,
        final=final,
        barrier=barrier,
    )


# --- analytic transmission ---------------------------------------------------

def _sinc_sq(z2: float) -> float:
    """(sin z / z)^2 as a function of z^2; negative z^2 gives (sinh|z| / |z|)^2."""
    if abs(z2) < 1e-8:
        return 1.0 - z2 / 3.0
    if z2 > 0:
        r = math.sqrt(z2)
        return (math.sin(r) / r) ** 2
    r = math.sqrt(-z2)
    return (math.sinh(r) / r) ** 2


def transmission_coefficient(energy: float, height: float, width: float,
                             mass: float = 1.0, hbar: float = 1.0) -> float:
    """Square-barrier transmission T(E), continuous through E = U.

    With alpha^2 = 2M(E-U)/hbar^2, sin^2(alpha W)/(E-U) = (2MW^2/hbar^2) * sinc^2,
    so T = 4E / (4E + U^2 (2MW^2/hbar^2) sinc^2(alpha W)) needs no branch.
    """
    if energy <= 0:
        return 0.0
    if height == 0:
        return 1.0
    g = 2.0 * mass * width**2 / hbar**2
    alpha_w_sq = g * (energy - height)  # (alpha W)^2, negative below the barrier
    return 4.0 * energy / (4.0 * energy + height**2 * g * _sinc_sq(alpha_w_sq))


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-6, max_depth: int = 50) -> float:
    """Adaptive Simpson quadrature with Richardson correction."""

    def simpson(fa, fm, fb, a, b):
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        delta = left + right - whole
        if abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        if depth >= max_depth:
            raise QuadratureError(f"no convergence on [{a:.6g}, {b:.6g}] at depth {depth}")
        return (recurse(a, m, fa, flm, fm, left, tol / 2, depth + 1)
                + recurse(m, b, fm, frm, fb, right, tol / 2, depth + 1))

    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    return recurse(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 0)


def momentum_density(k, k0: float, sigma: float):
    """|Phi(k)|^2 of the continuum Gaussian packet; integrates to one."""
    return math.sqrt(2.0 / math.pi) * sigma * np.exp(-2.0 * sigma**2 * (k - k0) ** 2)


def theory_transmission(packet: PacketSpec, barrier: BarrierSpec, lat: Lattice,
                        tol: float = 1e-6) -> float:
    """Integral of T(k)|Phi(k)|^2 over k0 +- 8/sigma for the nominal width W."""
    if barrier.height < 0 or barrier.width_sites <= 0:
        raise InvalidArgument("theory needs a barrier with U >= 0 and W > 0")
    if barrier.height == 0:
        return 1.0
    W = barrier.width(lat)

    def integrand(k):
        energy = lat.hbar**2 * k * k / (2 * lat.mass)
        T = transmission_coefficient(energy, barrier.height, W, lat.mass, lat.hbar)
        return T * float(momentum_density(k, packet.k0, packet.sigma))

    half = 8.0 / packet.sigma
    return adaptive_simpson(integrand, packet.k0 - half, packet.k0 + half, tol)


# --- reference setup ---------------------------------------------------------

@dataclass(frozen=True)
class ScatterParams:
    """Dimensionless description of the barrier experiment (hbar = M = 1)."""

    N: int = 500
    ell: float = 1.0
    k0: float = math.pi / 6
    sigma_over_ell: float = 15.0
    E0_over_U: float = math.pi**2 / 8
    W_over_ell: int = 10
    dtau: float = 1e-3
    kernel: str = "exact-truncated"
    integrator: str = "euler"
    barrier_left: int | None = None  # None: the site just right of the centre
    x0_over_ell: float = -125.0
    t_max: float = 400.0
    sample_interval: float = 1.0
    engine: str = "spectral"
    closed_barrier: bool = True

    @classmethod
    def refined(cls, ell: float, **overrides) -> "ScatterParams":
        """Same physical packet and barrier as the ell = 1 default, on spacing ``ell``."""
        base = cls()
        scale = base.ell / ell
        N = int(round(base.N * scale))
        values = dict(
            N=N,
            ell=ell,
            sigma_over_ell=base.sigma_over_ell * scale,
            W_over_ell=int(round(base.W_over_ell * scale)),
            x0_over_ell=base.x0_over_ell * scale,
            barrier_left=N // 2 + int(round(scale)),
        )
        values.update(overrides)
        return cls(**values)

    def build(self):
        lat = Lattice(self.N, self.ell)
        E0 = lat.hbar**2 * self.k0**2 / (2 * lat.mass)
        left = self.N // 2 + 1 if self.barrier_left is None else self.barrier_left
        barrier = BarrierSpec(E0 / self.E0_over_U, int(self.W_over_ell), left, self.closed_barrier)
        packet = PacketSpec(self.x0_over_ell * self.ell, self.k0, self.sigma_over_ell * self.ell)
        steps = max(1, int(round(lat.tau_from_time(self.sample_interval) / self.dtau)))
        cfg = EvolutionConfig(self.dtau, self.integrator, steps, engine=self.engine)
        kernel = build_kernel(self.kernel, lat)
        return lat, kernel, barrier, packet, cfg


def run_params(params: ScatterParams, with_theory: bool = True) -> ScatteringResult:
    lat, kernel, barrier, packet, cfg = params.build()
    return run_scattering(lat, kernel, barrier, packet, cfg, t_max=params.t_max,
                          with_theory=with_theory)


# --- profile and sample files ---------------------------------------------------

PROFILE_COLUMNS = ("site", "prob_initial", "prob_final", "potential_indicator")
SAMPLE_COLUMNS = ("tau", "norm", "prob_left", "prob_barrier", "prob_right")


def profile_csv(result: ScatteringResult) -> str:
    lat = result.final.lattice
    indicator = result.barrier.indicator(lat)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PROFILE_COLUMNS)
    rows = zip(result.initial.probabilities, result.final.probabilities, indicator)
    for i, (p0, p1, ind) in enumerate(rows):
        writer.writerow([i, fmt(p0), fmt(p1), int(ind)])
    return buf.getvalue()


def emit_profile(result: ScatteringResult, path):
    return atomic_write_text(path, profile_csv(result))


def read_profile(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {
        "site": np.array([int(r["site"]) for r in rows]),
        "prob_initial": np.array([float(r["prob_initial"]) for r in rows]),
        "prob_final": np.array([float(r["prob_final"]) for r in rows]),
        "potential_indicator": np.array([int(r["potential_indicator"]) for r in rows]),
    }


def samples_csv(result: ScatteringResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SAMPLE_COLUMNS)
    for s in result.samples:
        writer.writerow([fmt(s[c]) for c in SAMPLE_COLUMNS])
    return buf.getvalue()


# --- hopping -------------------------------------------------------------------

@dataclass(frozen=True)
class HopStatistics:
    m: np.ndarray  # signed hop distance, 0 excluded, each ring slot once
    measured: np.ndarray
    predicted: np.ndarray
    dtau: float
    lattice: Lattice

    @property
    def mean_sq_raw(self) -> float:
        """sum_m (m ell)^2 Prob_m, the unconditioned second moment."""
        return float(np.sum((self.m * self.lattice.ell) ** 2 * self.measured))

    @property
    def mean_sq_conditional(self) -> float:
        """Second moment given that a hop happened."""
        return self.mean_sq_raw / float(np.sum(self.measured))

    @property
    def mean_sq_infinite_lattice(self) -> float:
        """(hbar pi dt / (sqrt(3) M ell))^2, the closed form for an unbounded lattice."""
        lat = self.lattice
        dt = lat.time_from_tau(self.dtau)
        return (lat.hbar * math.pi * dt / (math.sqrt(3) * lat.mass * lat.ell)) ** 2


def hop_statistics(lat: Lattice, dtau: float, m_max: int | None = None) -> HopStatistics:
    """One Euler step of a site-localized state under the exact kernel (default m_max = N/2)."""
    if not 0 < dtau <= 0.01:
        raise InvalidArgument(f"hop statistics need 0 < dtau <= 0.01, got {dtau!r}")
    kernel = build_kernel(Variant.EXACT_TRUNCATED, lat, m_max)
    centre = lat.N // 2
    # literal hop sums keep each |psi(m)|^2 exact to rounding; FFT noise would not
    psi = step_euler(delta_state(lat, centre), kernel, zero_potential(lat), dtau, engine="direct")
    m, _ = kernel.hops()
    m = m[m != 0]
    measured = psi.probabilities[(centre + m) % lat.N]
    predicted = (dtau / m.astype(float) ** 2) ** 2
    return HopStatistics(m, measured, predicted, dtau, lat)


def uncertainty_product(lat: Lattice, dtau: float, m_max: int | None = None) -> float:
    """(Delta P) ell / hbar from the one-step hop spread.

    Delta P = M sqrt(<m^2 ell^2>) / dt with the unconditioned second moment; on
    an unbounded lattice this is pi/sqrt(3).  The ring only holds hops up to
    N/2, which lowers the value by about 6/(pi^2 N) relative.
    """
    stats = hop_statistics(lat, dtau, m_max)
    dt = lat.time_from_tau(dtau)
    delta_p = lat.mass * math.sqrt(stats.mean_sq_raw) / dt
    return delta_p * lat.ell / lat.hbar
