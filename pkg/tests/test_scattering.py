import math

import numpy as np
import pytest
import scipy.integrate

from latqm.errors import InvalidArgument, QuadratureError, WraparoundError
from latqm.kernels import build_kernel
from latqm.lattice import Lattice, probability_in_region
from latqm.propagator import EvolutionConfig
from latqm.scattering import (
    BarrierSpec,
    PacketSpec,
    ScatterParams,
    adaptive_simpson,
    emit_profile,
    hop_statistics,
    momentum_density,
    read_profile,
    run_scattering,
    samples_csv,
    theory_transmission,
    transmission_coefficient,
    uncertainty_product,
)

from conftest import scatter_run

REFERENCE = ScatterParams()


def reference_setup():
    lat, _, barrier, packet, _ = REFERENCE.build()
    return lat, barrier, packet


def test_default_parameters():
    assert (REFERENCE.N, REFERENCE.ell, REFERENCE.sigma_over_ell, REFERENCE.W_over_ell, REFERENCE.dtau) == (500, 1.0, 15.0, 10, 1e-3)
    assert REFERENCE.k0 == math.pi / 6 and REFERENCE.E0_over_U == math.pi**2 / 8
    lat, barrier, packet = reference_setup()
    assert (barrier.left_site, barrier.right_site) == (251, 261)
    assert barrier.height == pytest.approx((math.pi / 6) ** 2 / 2 * 8 / math.pi**2)
    assert packet.x0 == -125.0


def test_refined_geometry_is_the_same_physical_setup():
    fine = ScatterParams.refined(1 / 3, kernel="central")
    lat, _, barrier, packet, cfg = fine.build()
    assert lat.N == 1500 and barrier.width(lat) == pytest.approx(10.0)
    assert packet.sigma == pytest.approx(15.0) and packet.x0 == pytest.approx(-125.0)
    assert lat.x[barrier.left_site] == pytest.approx(1.0)
    assert cfg.steps_per_sample == 9000


def test_theory_value():
    lat, barrier, packet = reference_setup()
    value = theory_transmission(packet, barrier, lat)
    assert value == pytest.approx(0.632, abs=0.005)

    def integrand(k):
        T = transmission_coefficient(k * k / 2, barrier.height, 10.0)
        return T * float(momentum_density(k, packet.k0, packet.sigma))

    ref, _ = scipy.integrate.quad(integrand, packet.k0 - 8 / 15, packet.k0 + 8 / 15,
                                  epsabs=1e-12, epsrel=1e-12, limit=200)
    assert value == pytest.approx(ref, abs=1e-6)


def test_momentum_density_normalized():
    total, _ = scipy.integrate.quad(lambda k: momentum_density(k, 0.5, 15.0), 0.5 - 1, 0.5 + 1)
    assert total == pytest.approx(1.0, abs=1e-10)


def test_transmission_continuous_at_barrier_top():
    U, W = 0.0625, 10.0
    limit = 1 / (1 + U * W**2 / 2)
    for delta in (1e-6, 1e-8):
        for sign in (1, -1):
            assert transmission_coefficient(U * (1 + sign * delta), U, W) == pytest.approx(limit, rel=1e-5)
    assert transmission_coefficient(U, U, W) == pytest.approx(limit, rel=1e-14)


def test_transmission_limits():
    assert transmission_coefficient(0.3, 0.0, 10.0) == 1.0
    assert transmission_coefficient(0.3, 1e-9, 10.0) == pytest.approx(1.0, abs=1e-12)
    assert transmission_coefficient(0.0, 0.1, 10.0) == 0.0
    # deep tunnelling decays like exp(-2 kappa W)
    t = transmission_coefficient(0.01, 1.0, 10.0)
    kappa = math.sqrt(2 * 0.99)
    assert t == pytest.approx(16 * 0.01 * 0.99 * math.exp(-2 * kappa * 10), rel=1e-3)


def test_transmission_against_textbook_form():
    E, U, W = 0.2, 0.1, 3.0
    alpha = math.sqrt(2 * (E - U))
    textbook = 1 / (1 + U**2 * math.sin(alpha * W) ** 2 / (4 * E * (E - U)))
    assert transmission_coefficient(E, U, W) == pytest.approx(textbook, rel=1e-13)


def test_adaptive_simpson():
    assert adaptive_simpson(lambda x: x**3 - 2 * x, 0.0, 2.0) == pytest.approx(0.0, abs=1e-12)
    assert adaptive_simpson(math.sin, 0.0, math.pi, tol=1e-10) == pytest.approx(2.0, abs=1e-10)
    with pytest.raises(QuadratureError):
        adaptive_simpson(lambda x: math.sin(1 / x) if x else 0.0, 0.0, 1.0, tol=1e-14, max_depth=6)


def test_theory_needs_a_barrier():
    lat, _, packet = reference_setup()
    with pytest.raises(InvalidArgument):
        theory_transmission(packet, BarrierSpec(-0.1, 10, 251), lat)
    assert theory_transmission(packet, BarrierSpec(0.0, 10, 251), lat) == 1.0


@pytest.mark.parametrize("m, expected", [(1, 1e-6), (2, 6.25e-8)])
def test_hop_probabilities(m, expected):
    stats = hop_statistics(Lattice(500), 1e-3)
    idx = np.flatnonzero(stats.m == m)[0]
    assert stats.measured[idx] == pytest.approx(expected, rel=1e-12)


def test_hop_law_and_symmetry():
    stats = hop_statistics(Lattice(500), 1e-3)
    np.testing.assert_allclose(stats.measured, stats.predicted, rtol=1e-12)
    pos = stats.m > 0
    for m in stats.m[pos & (stats.m < 250)]:
        assert stats.measured[stats.m == m][0] == stats.measured[stats.m == -m][0]
    with pytest.raises(InvalidArgument):
        hop_statistics(Lattice(500), 0.02)


def test_uncertainty_product_on_a_finite_ring():
    # sum of 1/m^2 over the ring's hop slots, N/2 once
    m = np.arange(1, 250)
    oracle = math.sqrt(2 * np.sum(1.0 / m**2) + 1 / 250**2)
    value = uncertainty_product(Lattice(500), 1e-3)
    assert value == pytest.approx(oracle, rel=1e-9)
    assert value > 0.5
    deficit = 1 - value / (math.pi / math.sqrt(3))
    assert deficit == pytest.approx(6 / (math.pi**2 * 500), rel=0.05)


def test_uncertainty_product_large_ring():
    assert uncertainty_product(Lattice(2048), 1e-3) == pytest.approx(math.pi / math.sqrt(3), abs=1e-3)


def test_uncertainty_product_short_kernel():
    m = np.arange(1, 11)
    oracle = math.sqrt(2 * np.sum(1.0 / m**2))
    value = uncertainty_product(Lattice(500), 1e-3, m_max=10)
    assert value == pytest.approx(oracle, rel=1e-9)
    assert value / (math.pi / math.sqrt(3)) == pytest.approx(0.9707, abs=1e-3)


def test_infinite_lattice_second_moment():
    stats = hop_statistics(Lattice(4096), 1e-3)
    assert stats.mean_sq_raw == pytest.approx(stats.mean_sq_infinite_lattice, rel=5e-4)
    assert stats.mean_sq_conditional > stats.mean_sq_raw


def test_barrier_geometry():
    lat = Lattice(500)
    closed = BarrierSpec(1.0, 10, 251)
    cells = BarrierSpec(1.0, 10, 251, closed=False)
    assert closed.n_sites == 11 and cells.n_sites == 10
    assert closed.indicator(lat).sum() == 11
    assert np.count_nonzero(closed.potential(lat).u) == 11
    for bad in (BarrierSpec(1.0, 10, 40), BarrierSpec(1.0, 10, 430), BarrierSpec(-1.0, 10, 251),
                BarrierSpec(1.0, 0, 251)):
        with pytest.raises(InvalidArgument):
            bad.validate(lat)


def small_setup(**kw):
    lat = Lattice(200)
    kern = build_kernel("exact-truncated", lat)
    barrier = BarrierSpec(0.05, 4, 101)
    packet = PacketSpec(kw.pop("x0", -30.0), kw.pop("k0", 0.4), 6.0)
    cfg = EvolutionConfig(0.01, "rk4", steps_per_sample=100)
    return lat, kern, barrier, packet, cfg


def test_packet_must_clear_the_barrier():
    lat, kern, barrier, _, cfg = small_setup()
    with pytest.raises(InvalidArgument):
        run_scattering(lat, kern, barrier, PacketSpec(-10.0, 0.4, 6.0), cfg)
    with pytest.raises(InvalidArgument):
        run_scattering(lat, kern, barrier, PacketSpec(-30.0, -0.4, 6.0), cfg)


def test_small_run_bookkeeping(tmp_path):
    lat, kern, barrier, packet, cfg = small_setup()
    result = run_scattering(lat, kern, barrier, packet, cfg, t_max=120.0, with_theory=False)
    for s in result.samples:
        assert s["prob_left"] + s["prob_barrier"] + s["prob_right"] == pytest.approx(s["norm"], abs=1e-12)
    total = result.transmission + result.reflection + result.remainder_in_barrier
    assert total == pytest.approx(result.final.norm, abs=1e-12)
    assert result.norm_drift == pytest.approx(result.final.norm - 1, abs=1e-12)
    assert result.theory is None and result.engine == "spectral"
    assert samples_csv(result).splitlines()[0] == "tau,norm,prob_left,prob_barrier,prob_right"
    profile = read_profile(emit_profile(result, tmp_path / "p.csv"))
    assert profile["site"].tolist() == list(range(200))
    assert profile["potential_indicator"].sum() == barrier.n_sites


def test_wraparound_is_detected():
    lat, kern, barrier, packet, cfg = small_setup()
    with pytest.raises(WraparoundError):
        run_scattering(lat, kern, barrier, packet, cfg, t_max=400.0, with_theory=False)


def test_plateau_stop():
    lat = Lattice(400)
    kern = build_kernel("exact-truncated", lat)
    barrier = BarrierSpec(0.02, 3, 201)
    result = run_scattering(lat, kern, barrier, PacketSpec(-40.0, 0.8, 6.0),
                            EvolutionConfig(0.01, "rk4", steps_per_sample=200), t_max=300.0, with_theory=False)
    assert result.stop_reason == "plateau"
    assert result.tau_stop < 300.0
    assert result.remainder_in_barrier < 1e-3


def test_reference_run_profile_lobes(tmp_path):
    result = scatter_run(REFERENCE)
    profile = read_profile(emit_profile(result, tmp_path / "profile.csv"))
    b = result.barrier
    right = profile["prob_final"][b.right_site + 1:].sum()
    left = profile["prob_final"][: b.left_site].sum()
    assert right == pytest.approx(result.transmission, abs=1e-9)
    assert left == pytest.approx(result.reflection, abs=1e-9)
    assert probability_in_region(result.final, b.right_site + 1, 499) == pytest.approx(result.transmission, abs=1e-12)
    assert result.stop_reason == "t_max" and result.t_stop == pytest.approx(400.0)


def test_free_run_transmits_everything():
    result = scatter_run(ScatterParams(E0_over_U=math.inf))
    assert result.barrier.height == 0.0 and result.theory == 1.0
    assert result.transmission_fraction == pytest.approx(1.0, abs=1e-3)
    final = result.final.probabilities
    above = np.flatnonzero(final > 1e-6 * final.max())
    assert np.all(np.diff(above) == 1)  # one connected lobe
    assert result.final.mean_position() == pytest.approx(-125 + 400 * math.pi / 6, abs=2.0)


def test_central_transmits_less_than_exact():
    assert scatter_run(ScatterParams(kernel="central")).transmission < scatter_run(REFERENCE).transmission


def test_refining_central_moves_towards_theory():
    coarse = scatter_run(ScatterParams(kernel="central"))
    fine = scatter_run(ScatterParams.refined(1 / 3, kernel="central"))
    assert fine.transmission > coarse.transmission
    assert abs(fine.transmission - coarse.theory) < abs(coarse.transmission - coarse.theory)


def test_exact_kernel_insensitive_to_spacing():
    # cell-counted barrier so both spacings cover the same physical width; t = 360 keeps the
    # fine run clear of Euler's zone-edge growth, which scales like tau*dtau and so like 1/ell^2
    coarse = scatter_run(ScatterParams(closed_barrier=False, t_max=360.0))
    fine = scatter_run(ScatterParams.refined(0.5, closed_barrier=False, t_max=360.0))
    assert abs(fine.transmission - coarse.transmission) < 0.005


@pytest.mark.parametrize("x0", [-100.0, -150.0])
def test_start_offset_sensitivity(x0):
    # shift the stopping time by the travel time so runs are compared after the same interaction
    t_max = 400.0 + (-125.0 - x0) / (math.pi / 6)
    shifted = scatter_run(ScatterParams(x0_over_ell=x0, t_max=t_max))
    print(f"x0={x0:g}: transmission {shifted.transmission:.6f}")
    assert abs(shifted.transmission - scatter_run(REFERENCE).transmission) < 0.002
