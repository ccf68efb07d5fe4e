import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latqm.errors import InvalidArgument
from latqm.kernels import (
    DIRECT_MAX_N,
    Variant,
    apply,
    apply_direct,
    apply_spectral,
    benchmark_engines,
    build_kernel,
    build_kernel_dd,
    choose_engine,
    dispersion,
    free_energy,
    kernel_tail_sum,
)
from latqm.lattice import Lattice, WaveFunction, delta_state, plane_wave

from conftest import random_state

VARIANTS = list(Variant)


def finite_coefficient_oracle(N, m):
    # (1/2N) sum_k (k ell)^2 e^{i k m ell} over the N grid momenta
    lat = Lattice(N)
    return float(np.sum(lat.k**2 * np.exp(1j * lat.k * m)).real / (2 * N))


def test_truncated_coefficients():
    kern = build_kernel("exact-truncated", Lattice(500))
    assert kern.coefficient(1) == -1.0
    assert kern.coefficient(2) == 0.25
    assert kern.coefficient(-3) == pytest.approx(-1 / 9)
    assert kern.diagonal == pytest.approx(math.pi**2 / 6)
    assert kern.m_max == 250


def test_central_stencil():
    kern = build_kernel("central", Lattice(16))
    assert [kern.coefficient(m) for m in (-1, 0, 1)] == [-0.5, 1.0, -0.5]
    assert kern.coefficient(2) == 0.0


def test_finite_four_site_coefficient():
    kern = build_kernel("exact-finite", Lattice(4))
    assert finite_coefficient_oracle(4, 1) == pytest.approx(-math.pi**2 / 8, rel=1e-14)
    assert kern.coefficient(1) == pytest.approx(-math.pi**2 / 8, rel=1e-14)


@pytest.mark.parametrize("N", [4, 6, 10, 64])
def test_finite_coefficients_match_direct_sum(N):
    kern = build_kernel("exact-finite", Lattice(N))
    for m in range(N // 2 + 1):
        assert kern.coefficient(m) == pytest.approx(finite_coefficient_oracle(N, m), abs=1e-13)


def test_finite_diagonal_approaches_continuum():
    for N in (8, 64, 500, 4096):
        c0 = build_kernel("exact-finite", Lattice(N)).diagonal
        assert c0 - math.pi**2 / 6 == pytest.approx(math.pi**2 / 6 * 2 / N**2, rel=1e-9)


@pytest.mark.parametrize("m_max", [0, 251, -1])
def test_truncation_out_of_range(m_max):
    with pytest.raises(InvalidArgument):
        build_kernel("exact-truncated", Lattice(500), m_max)


def test_unknown_variant():
    with pytest.raises(ValueError):
        build_kernel("upwind", Lattice(8))


def test_central_dispersion():
    lat = Lattice(500)
    kern = build_kernel("central", lat)
    assert dispersion(kern, 0.0) == 0.0
    k = np.linspace(-math.pi, math.pi, 41)
    np.testing.assert_allclose(dispersion(kern, k), 1 - np.cos(k), atol=1e-15)
    rel = abs(dispersion(kern, 0.35) - 0.35**2 / 2) / (0.35**2 / 2)
    assert rel < 0.011


def test_finite_dispersion_matches_inverse_transform_oracle():
    # build a kernel from the inverse transform of k^2/2, transform it back
    lat = Lattice(500)
    k_fft = 2 * np.pi * np.fft.fftfreq(lat.N)
    row = np.fft.ifft(k_fft**2 / 2).real
    kern = build_kernel("exact-finite", lat)
    np.testing.assert_allclose(kern.circular_row(), row, atol=1e-13)
    eps = dispersion(kern, lat.k)
    assert np.max(np.abs(eps - lat.k**2 / 2)) <= 1e-10 * math.pi**2 / 2
    np.testing.assert_allclose(np.fft.fft(row).real, k_fft**2 / 2, atol=1e-12)


def test_truncated_dispersion_tracks_continuum_away_from_zone_edge():
    lat = Lattice(500)
    kern = build_kernel("exact-truncated", lat)
    k = lat.k[np.abs(lat.k) < 2.5]
    # truncation at N/2 leaves an O(1/N) error, largest near the zone edge
    assert np.max(np.abs(dispersion(kern, k) - k**2 / 2)) < 5e-3
    # k = 0: pi^2/6 + 2 S_250 - c_250, the N/2 slot counted once
    expected = 2 * (kernel_tail_sum(250) + math.pi**2 / 12) - 1 / 250**2
    assert dispersion(kern, 0.0) == pytest.approx(expected, abs=1e-14)
    assert abs(expected) < 1e-7


def test_dispersion_scales_with_energy_unit():
    base = build_kernel("central", Lattice(32))
    scaled = build_kernel("central", Lattice(32, ell=0.5, hbar=2.0, mass=3.0))
    assert dispersion(scaled, 0.7) == pytest.approx(4 / (3 * 0.25) * base.symbol(0.35))


def test_constant_is_a_zero_mode_of_central():
    lat = Lattice(40)
    psi = WaveFunction(lat, np.ones(40))
    np.testing.assert_allclose(apply_direct(build_kernel("central", lat), psi).amplitudes, 0, atol=1e-15)


def test_delta_reproduces_kernel_column():
    lat = Lattice(16)
    kern = build_kernel("exact-finite", lat)
    out = apply_direct(kern, delta_state(lat, 0)).amplitudes
    m = np.arange(16)
    np.testing.assert_allclose(out.real, [kern.coefficient(min(j, 16 - j)) for j in m], atol=1e-15)


def test_plane_wave_is_an_eigenvector():
    lat = Lattice(500)
    kern = build_kernel("exact-truncated", lat)
    for m in (0, 7, 83, -200):
        psi = plane_wave(lat, m)
        k = 2 * np.pi * m / lat.L
        out = apply_direct(kern, psi).amplitudes
        np.testing.assert_allclose(out, dispersion(kern, k) * psi.amplitudes, atol=1e-10)


@pytest.mark.parametrize("variant", VARIANTS)
def test_engines_agree(variant, rng):
    lat = Lattice(64)
    kern = build_kernel(variant, lat)
    for _ in range(20):
        psi = WaveFunction(lat, random_state(rng, 64))
        d = apply_direct(kern, psi).amplitudes
        s = apply_spectral(kern, psi).amplitudes
        assert np.max(np.abs(d - s)) < 1e-10


@settings(max_examples=30, deadline=None)
@given(variant=st.sampled_from(VARIANTS), seed=st.integers(0, 2**32 - 1),
       a=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False))
def test_linearity_and_hermiticity(variant, seed, a):
    rng = np.random.default_rng(seed)
    lat = Lattice(32)
    kern = build_kernel(variant, lat)
    u, v = random_state(rng, 32), random_state(rng, 32)
    H = lambda w: apply(kern, WaveFunction(lat, w)).amplitudes  # noqa: E731
    np.testing.assert_allclose(H(a * u + v), a * H(u) + H(v), atol=1e-10 * (1 + abs(a)))
    assert np.vdot(u, H(v)) == pytest.approx(np.conj(np.vdot(v, H(u))), abs=1e-10)


def test_lattice_mismatch():
    kern = build_kernel("central", Lattice(16))
    with pytest.raises(InvalidArgument):
        apply_direct(kern, delta_state(Lattice(18), 0))
    with pytest.raises(InvalidArgument):
        apply_spectral(kern, delta_state(Lattice(16, ell=2.0), 0))


def test_engine_choice():
    assert choose_engine(DIRECT_MAX_N) == "direct"
    assert choose_engine(DIRECT_MAX_N + 2) == "spectral"
    assert choose_engine(8, "spectral") == "spectral"
    with pytest.raises(InvalidArgument):
        choose_engine(8, "gpu")


def test_benchmark_reports_both_engines():
    rows = benchmark_engines("central", [16, 32], repeats=3)
    assert [r["N"] for r in rows] == [16, 32]
    assert all(r["direct"] > 0 and r["spectral"] > 0 for r in rows)


def test_tail_sums():
    assert kernel_tail_sum(1) == -1.0
    assert kernel_tail_sum(2) == -0.75
    assert abs(kernel_tail_sum(10_000) + math.pi**2 / 12) < 1e-8
    with pytest.raises(InvalidArgument):
        kernel_tail_sum(0)


def test_separable_diagonals():
    lat = Lattice(64)
    assert build_kernel_dd("exact-truncated", lat, 3).diagonal == pytest.approx(math.pi**2 / 2)
    assert build_kernel_dd("exact-truncated", lat, 2).diagonal == pytest.approx(math.pi**2 / 3)
    one = build_kernel_dd("exact-truncated", lat, 1)
    np.testing.assert_array_equal(one.axis_kernel.coeffs, build_kernel("exact-truncated", lat).coeffs)
    with pytest.raises(InvalidArgument):
        build_kernel_dd("central", lat, 4)


def test_separable_apply_matches_kronecker_sum(rng):
    lat = Lattice(6)
    kern = build_kernel_dd("exact-finite", lat, 2)
    H1 = np.array([apply_direct(kern.axis_kernel, delta_state(lat, j)).amplitudes for j in range(6)]).T
    H2 = np.kron(H1, np.eye(6)) + np.kron(np.eye(6), H1)
    v = random_state(rng, 36)
    np.testing.assert_allclose(kern.apply(v.reshape(6, 6)).ravel(), H2 @ v, atol=1e-12)
    assert kern.symbol(0.3, -1.1) == pytest.approx(kern.axis_kernel.symbol(0.3) + kern.axis_kernel.symbol(-1.1))


def test_free_energy():
    lat = Lattice(8, hbar=2.0, mass=4.0)
    assert free_energy(lat, 3.0) == pytest.approx(4.0 * 9.0 / 8.0)
