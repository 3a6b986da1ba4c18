"""Transforms between the Coulomb, Lorentz and temporal gauges.

A gauge function lam acts by (u, phi, A) -> (e^{i lam} u, phi - d_t lam, A + grad lam).
Starting from a Lorentz datum, the Coulomb datum is obtained with
lam_j = Lap^{-1} div A_j; the Lorentz solution is recovered by solving
(d_t^2 - Lap) lam = d_t phi^C for lam along the Coulomb solution.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .fields import (
    CoulombState,
    LorentzData,
    TimeSampledField,
    charge_density_array,
    make_coulomb_data,
)
from .kleingordon import current_density_array, wave_propagate
from .schrodinger import apply_covariant_hamiltonian
from .spectral import (
    ScalarField,
    SpectralGrid,
    VectorField,
    divergence_hat,
    gradient_hat,
    inverse_laplacian_hat,
)

__all__ = [
    "LorentzState",
    "TemporalState",
    "lorentz_to_coulomb_data",
    "build_lambda",
    "build_lambda_direct",
    "coulomb_to_lorentz",
    "coulomb_to_temporal",
    "gauge_residuals",
    "observables",
    "lorentz_equation_residuals",
    "phi_lorentz_duhamel",
    "Observables",
]


@dataclass(eq=False)
class LorentzState:
    u: TimeSampledField
    phi: TimeSampledField
    A: TimeSampledField
    dA: TimeSampledField
    dphi: TimeSampledField

    @property
    def grid(self) -> SpectralGrid:
        return self.u.grid

    @property
    def dt(self) -> float:
        return self.u.dt


@dataclass(eq=False)
class TemporalState:
    u: TimeSampledField
    A: TimeSampledField
    dA: TimeSampledField
    lam: TimeSampledField

    @property
    def grid(self) -> SpectralGrid:
        return self.u.grid

    @property
    def dt(self) -> float:
        return self.u.dt

    @property
    def phi(self) -> TimeSampledField:
        return TimeSampledField.zeros(self.grid, self.dt, self.u.n_steps)


def _phi_track(state) -> TimeSampledField:
    return state.phi() if isinstance(state, CoulombState) else state.phi


def _real_scalar(g: SpectralGrid, f_hat: np.ndarray) -> np.ndarray:
    return g.ifft(f_hat).real


def _grad_track(g: SpectralGrid, lam: np.ndarray) -> np.ndarray:
    return np.stack([g.ifft(gradient_hat(g, g.fft(x.real))).real for x in lam])


def lorentz_to_coulomb_data(yd: LorentzData):
    """Coulomb datum (e^{-i lam0} u0, P A0, P A1) with lam_j = Lap^{-1} div A_j."""
    g = yd.grid
    lam = []
    for a in (yd.A0, yd.A1):
        lam.append(ScalarField(g, _real_scalar(g, inverse_laplacian_hat(
            g, divergence_hat(g, a.coefficients())))))
    lam0, lam1 = lam
    u0 = ScalarField(g, np.exp(-1j * lam0.physical().real) * yd.u0.physical())
    data = make_coulomb_data(u0, yd.A0, yd.A1, yd.s, yd.sigma, project=True)
    return data, lam0, lam1


def build_lambda(lam0: ScalarField, lam1: ScalarField, phiC: TimeSampledField, dt: float):
    """Solve (d_t^2 - Lap) lam = d_t phi^C without differentiating phi^C.

    With mu solving (d_t^2 - Lap) mu = phi^C from zero data, d_t mu solves the
    target equation with data (0, phi^C(0)). Hence lam = lam_h + d_t mu where
    lam_h carries the data (lam0, lam1 - phi^C(0)), and
    d_t lam = d_t lam_h + Lap mu + phi^C.
    """
    g = lam0.grid
    phi0 = ScalarField(g, phiC.data[0].real)
    lam_h, dlam_h = wave_propagate(lam0, lam1 - phi0, None, dt, phiC.n_steps)
    zero = ScalarField.zeros(g)
    src = TimeSampledField(g, dt, phiC.data.real.astype(complex))
    mu, dmu = wave_propagate(zero, zero, src, dt)
    lap_mu = np.stack([g.ifft(-g.k2 * g.fft(m)) for m in mu.data])
    lam = (lam_h.data + dmu.data).real
    dlam = (dlam_h.data + lap_mu + phiC.data).real
    return (TimeSampledField(g, dt, lam.astype(complex)),
            TimeSampledField(g, dt, dlam.astype(complex)))


def build_lambda_direct(lam0: ScalarField, lam1: ScalarField, phiC: TimeSampledField, dt: float):
    """Cross-check form: source d_t phi^C by second-order finite differences."""
    dphi = phiC.time_derivative()
    return wave_propagate(lam0, lam1, TimeSampledField(phiC.grid, dt, dphi.data.real.astype(complex)), dt)


def coulomb_to_lorentz(state: CoulombState, lam: TimeSampledField,
                       dlam: TimeSampledField) -> LorentzState:
    """u^L = e^{i lam} u^C, A^L = A^C + grad lam, phi^L = phi^C - d_t lam.

    d_t A^L uses the stored tracks; d_t phi^L is a centered difference of phi^L.
    """
    g = state.grid
    dt = state.dt
    lr = lam.data.real
    u = np.exp(1j * lr) * state.u.data
    A = state.A.data + _grad_track(g, lr)
    dA = state.dA.data + _grad_track(g, dlam.data.real)
    phi = TimeSampledField(g, dt, (state.phi().data.real - dlam.data.real).astype(complex))
    dphi = phi.time_derivative()
    return LorentzState(TimeSampledField(g, dt, u), phi, TimeSampledField(g, dt, A, vector=True),
                        TimeSampledField(g, dt, dA, vector=True),
                        TimeSampledField(g, dt, dphi.data.real.astype(complex)))


def phi_lorentz_duhamel(state: LorentzState) -> TimeSampledField:
    """phi^L from (d_t^2 - Lap) phi = rho - mean rho with its initial data (consistency check)."""
    g = state.grid
    rho = np.stack([charge_density_array(g, uj) for uj in state.u.data])
    rho = rho - rho.mean(axis=tuple(range(1, rho.ndim)), keepdims=True)
    phi0 = ScalarField(g, state.phi.data[0].real)
    phi1 = ScalarField(g, -_real_scalar(g, divergence_hat(g, g.fft(state.A.data[0]))))
    out, _ = wave_propagate(phi0, phi1, TimeSampledField(g, state.dt, rho.astype(complex)), state.dt)
    return out


def coulomb_to_temporal(state: CoulombState, lam0: ScalarField, dt: float | None = None) -> TemporalState:
    """lam = lam0 + int_0^t phi^C (trapezoid), so that phi^T = 0."""
    g = state.grid
    dt = state.dt if dt is None else dt
    phiC = state.phi().data.real
    lam = lam0.physical().real + cumulative_trapezoid(phiC, dx=dt, axis=0, initial=0)
    u = np.exp(1j * lam) * state.u.data
    A = state.A.data + _grad_track(g, lam)
    dA = state.dA.data + _grad_track(g, phiC)
    return TemporalState(TimeSampledField(g, dt, u), TimeSampledField(g, dt, A, vector=True),
                         TimeSampledField(g, dt, dA, vector=True),
                         TimeSampledField(g, dt, lam.astype(complex)))


def _l2(g: SpectralGrid, a: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.abs(a) ** 2) * g.cell_volume))


def _div_track(g: SpectralGrid, A: np.ndarray) -> np.ndarray:
    return np.stack([_real_scalar(g, divergence_hat(g, g.fft(a))) for a in A])


def gauge_residuals(state, kind: str) -> dict:
    """Max-over-time L^2 norm of the gauge condition of ``kind``."""
    g = state.grid
    if kind == "coulomb":
        div = _div_track(g, state.A.data)
        return {"div_A": max(_l2(g, d) for d in div)}
    if kind == "lorentz":
        res = state.dphi.data.real + _div_track(g, state.A.data)
        return {"lorentz": max(_l2(g, r) for r in res)}
    if kind == "temporal":
        phi = state.phi.data
        out = {"phi": max(_l2(g, p) for p in phi)}
        rho = np.stack([charge_density_array(g, uj) for uj in state.u.data])
        rho = rho - rho.mean(axis=tuple(range(1, rho.ndim)), keepdims=True)
        stored = -_div_track(g, state.dA.data) - rho
        fd = -_div_track(g, state.A.time_derivative().data) - rho
        out["constraint_stored"] = max(_l2(g, r) for r in stored)
        out["constraint_fd"] = max(_l2(g, r) for r in fd)
        return out
    raise ValueError(f"unknown gauge kind {kind!r}")


@dataclass(eq=False)
class Observables:
    rho: TimeSampledField
    J: TimeSampledField
    E: TimeSampledField
    B: TimeSampledField | None


def observables(state) -> Observables:
    """rho = |u|^2, J, E = -grad phi - d_t A and the magnetic field curl A (none in 1D)."""
    g = state.grid
    dt = state.dt
    phi = _phi_track(state).data.real
    u, A, dA = state.u.data, state.A.data, state.dA.data
    rho = np.stack([charge_density_array(g, uj) for uj in u])
    J = np.stack([current_density_array(g, uj, aj) for uj, aj in zip(u, A)])
    E = -_grad_track(g, phi) - dA
    B = None
    if g.dims == 2:
        B = np.stack([_real_scalar(g, 1j * (g.kd[0] * g.fft(a[1]) - g.kd[1] * g.fft(a[0]))) for a in A])
        B = TimeSampledField(g, dt, B.astype(complex))
    elif g.dims == 3:
        comps = []
        for a in A:
            ah = g.fft(a)
            k = g.kd
            c = 1j * np.stack([k[1] * ah[2] - k[2] * ah[1], k[2] * ah[0] - k[0] * ah[2],
                               k[0] * ah[1] - k[1] * ah[0]])
            comps.append(g.ifft(c).real)
        B = TimeSampledField(g, dt, np.stack(comps), vector=True)
    return Observables(TimeSampledField(g, dt, rho.astype(complex)),
                       TimeSampledField(g, dt, J, vector=True),
                       TimeSampledField(g, dt, E, vector=True), B)


def lorentz_equation_residuals(state: LorentzState) -> dict:
    """Interior max L^2 residuals of the Lorentz-gauge system, centered time differences.

    i d_t u = -(grad - iA)^2 u + phi u, (d_t^2 - Lap) phi = rho - mean, (d_t^2 - Lap) A = J.
    """
    g = state.grid
    dt = state.dt
    u, phi, A = state.u.data, state.phi.data.real, state.A.data
    m = len(u) - 1
    if m < 2:
        raise ValueError("need at least three samples")
    rs, rp, ra = [], [], []
    for j in range(1, m):
        dtu = (u[j + 1] - u[j - 1]) / (2 * dt)
        hu = apply_covariant_hamiltonian(ScalarField(g, u[j]), VectorField(g, A[j]),
                                         ScalarField(g, phi[j])).physical()
        rs.append(_l2(g, 1j * dtu - hu))
        rho = charge_density_array(g, u[j])
        d2phi = (phi[j + 1] - 2 * phi[j] + phi[j - 1]) / dt**2
        rp.append(_l2(g, d2phi + _real_scalar(g, g.k2 * g.fft(phi[j])) - (rho - rho.mean())))
        d2a = (A[j + 1] - 2 * A[j] + A[j - 1]) / dt**2
        ra.append(_l2(g, d2a + g.ifft(g.k2 * g.fft(A[j])).real - current_density_array(g, u[j], A[j])))
    return {"schrodinger": max(rs), "phi_wave": max(rp), "A_wave": max(ra)}
