import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mslab.fields import TimeSampledField, random_band_limited, random_vector_field
from mslab.kleingordon import current_density, current_density_array, kg_propagate, wave_propagate
from mslab.spectral import ScalarField, SpectralGrid, VectorField, SobolevIndex, sobolev_norm
from oracles import kg_duhamel_direct

seeds = st.integers(0, 2**31 - 1)


def _mode_field(g, m, comp=0):
    a = np.zeros((g.dims,) + g.shape)
    a[comp] = g.plane_wave(m).real
    return VectorField(g, a)


def test_homogeneous_closed_form():
    g = SpectralGrid(2, 16)
    m = (0, 3)
    A0 = _mode_field(g, m)
    A1 = _mode_field(g, m) * 0.5
    w = np.sqrt(1 + 9.0)
    dt, steps = 0.05, 40
    B, dB = kg_propagate(A0, A1, None, dt, steps)
    for n in (0, 7, 40):
        t = n * dt
        exact = (np.cos(w * t) + 0.5 * np.sin(w * t) / w) * A0.values
        dexact = (-w * np.sin(w * t) + 0.5 * np.cos(w * t)) * A0.values
        assert np.max(np.abs(B.data[n] - exact)) < 1e-13
        assert np.max(np.abs(dB.data[n] - dexact)) < 1e-12


def test_constant_source_second_order():
    g = SpectralGrid(2, 16)
    f = _mode_field(g, (1, 1))
    w = np.sqrt(3.0)
    T = 1.0
    exact = (1 - np.cos(w * T)) / w**2 * f.values
    errs = []
    for steps in (20, 40, 80):
        dt = T / steps
        src = TimeSampledField.constant(f, dt, steps)
        B, _ = kg_propagate(VectorField.zeros(g), VectorField.zeros(g), src, dt)
        errs.append(np.max(np.abs(B.data[-1] - exact)))
    assert 3.8 < errs[0] / errs[1] < 4.2 and 3.8 < errs[1] / errs[2] < 4.2


def test_wave_zero_mode_exact():
    g = SpectralGrid(2, 8)
    dt, steps = 0.1, 15
    a, b, c = 0.7, -0.3, 2.0
    src = TimeSampledField.constant(ScalarField(g, np.full(g.shape, c, complex)), dt, steps)
    lam, dlam = wave_propagate(ScalarField(g, np.full(g.shape, a, complex)),
                               ScalarField(g, np.full(g.shape, b, complex)), src, dt)
    t = np.arange(steps + 1) * dt
    assert np.max(np.abs(lam.data[:, 0, 0] - (a + b * t + c * t**2 / 2))) < 1e-13
    assert np.max(np.abs(dlam.data[:, 0, 0] - (b + c * t))) < 1e-13


@settings(max_examples=10)
@given(seeds)
def test_homogeneous_energy_conserved(seed):
    g = SpectralGrid(2, 16)
    A0 = random_vector_field(g, [seed, 0], decay=1.0)
    A1 = random_vector_field(g, [seed, 1], decay=1.0)
    B, dB = kg_propagate(A0, A1, None, 0.03, 30)

    def energy(n):
        b = VectorField(g, B.data[n])
        db = VectorField(g, dB.data[n])
        return sum(sobolev_norm(ScalarField(g, c), SobolevIndex(1, 2)) ** 2 for c in b.values) + \
            sum(sobolev_norm(ScalarField(g, c), SobolevIndex(0, 2)) ** 2 for c in db.values)

    e0 = energy(0)
    assert max(abs(energy(n) - e0) for n in (10, 30)) <= 1e-12 * e0


def test_velocity_matches_finite_differences():
    g = SpectralGrid(2, 16)
    A0 = random_vector_field(g, 1, decay=3.0)
    A1 = random_vector_field(g, 2, decay=3.0)
    t = np.arange(401) * 1e-3
    f = np.sin(3 * t)[:, None, None, None] * random_vector_field(g, 3, decay=3.0).values
    dt = 1e-3
    B, dB = kg_propagate(A0, A1, TimeSampledField(g, dt, f, vector=True), dt)
    fd = (B.data[2:] - B.data[:-2]) / (2 * dt)
    assert np.max(np.abs(fd - dB.data[1:-1])) < 1e-4 * np.max(np.abs(dB.data))


def test_duhamel_matches_direct_quadrature():
    g = SpectralGrid(2, 8)
    dt, steps = 0.05, 12
    f = np.stack([random_band_limited(g, [7, j], real=True).physical() for j in range(steps + 1)])
    x0 = random_band_limited(g, 8, real=True)
    x1 = random_band_limited(g, 9, real=True)
    lam, _ = wave_propagate(x0, x1, TimeSampledField(g, dt, f), dt)
    freq = np.sqrt(g.k2)
    fh = np.stack([g.fft(x) for x in f])
    nonzero = freq > 0
    ref = kg_duhamel_direct(g.fft(x0.physical())[nonzero], g.fft(x1.physical())[nonzero],
                            fh[:, nonzero], dt, freq[nonzero])
    got = np.stack([g.fft(x)[nonzero] for x in lam.data])
    assert np.max(np.abs(got - ref)) <= 1e-12 * np.max(np.abs(ref))


@settings(max_examples=10)
@given(seeds, st.floats(-3, 3))
def test_propagator_is_linear_in_data_and_source(seed, c):
    g = SpectralGrid(2, 8)
    dt, steps = 0.1, 5
    A0 = random_vector_field(g, [seed, 0])
    A1 = random_vector_field(g, [seed, 1])
    f = TimeSampledField(g, dt, np.stack([random_vector_field(g, [seed, 2, j]).values
                                          for j in range(steps + 1)]), vector=True)
    B1, _ = kg_propagate(A0, A1, f, dt)
    B2, _ = kg_propagate(A0 * c, A1 * c, TimeSampledField(g, dt, f.data * c, vector=True), dt)
    assert np.max(np.abs(B2.data - c * B1.data)) <= 1e-12 * (1 + np.max(np.abs(B2.data)))


def test_lattice_mismatch_rejected():
    g = SpectralGrid(2, 8)
    src = TimeSampledField.zeros(g, 0.1, 4, vector=True)
    with pytest.raises(ValueError):
        kg_propagate(VectorField.zeros(g), VectorField.zeros(g), src, 0.2)
    with pytest.raises(ValueError):
        kg_propagate(VectorField.zeros(g), VectorField.zeros(g), None, 0.1)


def test_current_of_plane_wave():
    g = SpectralGrid(2, 16)
    m = np.array([2, -1])
    u = ScalarField(g, 0.5 * g.plane_wave(tuple(m)))
    a = np.array([0.3, 0.2])
    A = VectorField(g, np.broadcast_to(a[:, None, None], (2,) + g.shape).copy())
    J = current_density(u, A).values
    for i in range(2):
        assert np.max(np.abs(J[i] - 2 * 0.25 * (m[i] - a[i]))) < 1e-13
    assert np.max(np.abs(current_density(ScalarField.zeros(g), A).values)) == 0


def test_current_gauge_invariance_under_lattice_gauge():
    g = SpectralGrid(2, 32)
    u = random_band_limited(g, 1, decay=2.0, max_mode_fraction=0.2)
    A = random_vector_field(g, 2, decay=2.0, max_mode_fraction=0.2)
    k = np.array([1, 2])
    lam = np.tensordot(k, g.coordinates(), axes=1)
    u2 = np.exp(1j * lam) * u.physical()
    A2 = A.values + k[:, None, None]
    j1 = current_density_array(g, u.physical(), A.values)
    j2 = current_density_array(g, u2, A2)
    assert np.max(np.abs(j1 - j2)) <= 1e-12 * np.max(np.abs(j1))


def test_wave_single_mode_and_zero_mode_examples():
    g = SpectralGrid(2, 16)
    m = (2, 1)
    lam, _ = wave_propagate(ScalarField(g, g.plane_wave(m)), ScalarField.zeros(g), None, 0.1, 20)
    for n in (0, 5, 20):
        assert np.max(np.abs(lam.data[n] - np.cos(n * 0.1 * np.sqrt(5)) * g.plane_wave(m))) < 1e-13
    lam, _ = wave_propagate(ScalarField.zeros(g), ScalarField(g, np.full(g.shape, 0.4, complex)),
                            None, 0.1, 20)
    assert np.max(np.abs(lam.data - 0.4 * 0.1 * np.arange(21)[:, None, None])) < 1e-13


def test_current_examples():
    g = SpectralGrid(2, 16)
    z = VectorField.zeros(g)
    u = random_band_limited(g, 1, real=True)
    assert np.max(np.abs(current_density(u, z).values)) < 1e-13
    J = current_density(ScalarField(g, g.plane_wave((1, -2))), z).values
    assert np.max(np.abs(J[0] - 2)) < 1e-13 and np.max(np.abs(J[1] + 4)) < 1e-13


def test_current_gauge_invariance_under_smooth_gauge():
    g = SpectralGrid(2, 64)
    u = random_band_limited(g, 1, decay=3.0, max_mode_fraction=0.1)
    A = random_vector_field(g, 2, decay=3.0, max_mode_fraction=0.1)
    lam = random_band_limited(g, 3, decay=3.0, max_mode_fraction=0.1, real=True, amplitude=0.5)
    lr = lam.physical().real
    grad = np.stack([g.ifft(1j * g.kd[j] * g.fft(lr)).real for j in range(2)])
    j1 = current_density_array(g, u.physical(), A.values)
    j2 = current_density_array(g, np.exp(1j * lr) * u.physical(), A.values + grad)
    assert np.max(np.abs(j1 - j2)) <= 1e-10 * np.max(np.abs(j1))
