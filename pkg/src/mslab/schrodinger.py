"""Magnetic Schrodinger propagator with frozen potentials.

The discrete Hamiltonian is

    H v = -Lap v + Pi[ 2i (Pi A).grad(Pi v) + (|Pi A|^2 + phi) Pi v ],

where Pi is the 2/3-rule truncation. Because Pi A and Pi v share the truncated
cube, the A.grad product is alias-free inside it and, with div A = 0, H is
self-adjoint on the whole grid space. Crank-Nicolson with a self-adjoint
midpoint operator is then exactly unitary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fields import TimeSampledField, divergence_residual
from .spectral import ScalarField, SpectralGrid, VectorField, sobolev_norm, SobolevIndex

__all__ = [
    "NonCoulombPotentialError",
    "TimeStepTooLargeError",
    "PotentialTrack",
    "apply_hamiltonian",
    "apply_covariant_hamiltonian",
    "evolve",
    "evolve_inhomogeneous",
    "evolve_reverse",
    "charge",
]

DIV_TOL = 1e-10
INNER_TOL = 1e-12
MAX_SWEEPS = 200


class NonCoulombPotentialError(ValueError):
    pass


class TimeStepTooLargeError(RuntimeError):
    def __init__(self, step: int, sweeps: int):
        super().__init__(f"time step too large: inner iteration did not converge in {sweeps} "
                         f"sweeps at step {step}")
        self.step = step


@dataclass(eq=False)
class PotentialTrack:
    """Frozen coefficients (A, phi) sampled on [0, T]."""

    A: TimeSampledField
    phi: TimeSampledField
    validate: bool = True

    def __post_init__(self):
        if not self.A.vector or self.phi.vector:
            raise ValueError("A must be a vector track and phi a scalar track")
        if len(self.A) != len(self.phi) or abs(self.A.dt - self.phi.dt) > 1e-14 * self.A.dt:
            raise ValueError("A and phi must share a time lattice")
        if self.validate:
            for j, a in enumerate(self.A.data):
                if divergence_residual(VectorField(self.A.grid, a)) > DIV_TOL:
                    raise NonCoulombPotentialError(f"non-Coulomb potential at sample {j}")

    @property
    def grid(self) -> SpectralGrid:
        return self.A.grid

    @property
    def T(self) -> float:
        return self.A.T

    @classmethod
    def zero(cls, grid: SpectralGrid, dt: float, n_steps: int) -> "PotentialTrack":
        return cls(TimeSampledField.zeros(grid, dt, n_steps, vector=True),
                   TimeSampledField.zeros(grid, dt, n_steps), validate=False)

    @classmethod
    def static(cls, A: VectorField, phi: ScalarField, dt: float, n_steps: int) -> "PotentialTrack":
        return cls(TimeSampledField.constant(A, dt, n_steps),
                   TimeSampledField(phi.grid, dt, np.broadcast_to(
                       phi.physical().real, (n_steps + 1,) + phi.grid.shape).astype(complex)))


class _MagneticOperator:
    """Raw-array kernel for V = Pi[2i a.grad + b]Pi acting on spectral coefficients."""

    def __init__(self, grid: SpectralGrid):
        self.grid = grid
        self.mask = grid.dealias_mask
        self.ikd = 1j * grid.kd

    def truncated(self, a_phys: np.ndarray) -> np.ndarray:
        g = self.grid
        return g.ifft(self.mask * g.fft(a_phys)).real

    def apply(self, z_hat: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        g = self.grid
        zt = self.mask * z_hat
        z = g.ifft(zt)
        acc = b * z
        for j in range(g.dims):
            acc += 2j * a[j] * g.ifft(self.ikd[j] * zt)
        return self.mask * g.fft(acc)


def apply_hamiltonian(v: ScalarField, A: VectorField, phi: ScalarField,
                      check: bool = True) -> ScalarField:
    """(H(A) + phi) v for divergence-free A, with 2/3-dealiased products."""
    g = v.grid
    if check and divergence_residual(A) > DIV_TOL:
        raise NonCoulombPotentialError("non-Coulomb potential: div A exceeds tolerance")
    op = _MagneticOperator(g)
    a = np.stack([op.truncated(c) for c in A.values])
    b = np.sum(a**2, axis=0) + phi.physical().real
    vh = v.coefficients()
    out = g.k2 * vh + op.apply(vh, a, b)
    return ScalarField(g, g.ifft(out))


def apply_covariant_hamiltonian(v: ScalarField, A: VectorField, phi: ScalarField) -> ScalarField:
    """-(grad - iA)^2 v + phi v for arbitrary A, no dealiasing (residual checks)."""
    g = v.grid
    vp = v.physical()
    out = phi.physical() * vp
    for j in range(g.dims):
        dj = g.ifft(1j * g.kd[j] * g.fft(vp)) - 1j * A.values[j] * vp
        out -= g.ifft(1j * g.kd[j] * g.fft(dj)) - 1j * A.values[j] * dj
    return ScalarField(g, out)


class _CrankNicolson:
    def __init__(self, track: PotentialTrack, dt: float, inner_tol: float, max_sweeps: int):
        self.grid = g = track.grid
        self.dt = dt
        self.inner_tol = inner_tol
        self.max_sweeps = max_sweeps
        n = track.T / dt
        self.n_steps = int(round(n))
        if self.n_steps < 1 or abs(self.n_steps - n) > 1e-9 * max(n, 1):
            raise ValueError(f"dt = {dt} does not divide the track interval T = {track.T}")
        self.op = _MagneticOperator(g)
        self.track = track
        self._a_cache: dict[int, np.ndarray] = {}

    def _sample_a(self, j: int) -> np.ndarray:
        a = self._a_cache.get(j)
        if a is None:
            a = np.stack([self.op.truncated(c) for c in self.track.A.data[j]])
            self._a_cache = {j: a, **{k: v for k, v in self._a_cache.items() if abs(k - j) <= 2}}
        return a

    def _value_at(self, t: float):
        """Linear interpolation of (Pi A, phi) at time t."""
        tr = self.track
        x = t / tr.A.dt
        i0 = min(int(math.floor(x + 1e-12)), tr.A.n_steps)
        w = x - i0
        if w < 1e-12 or i0 == tr.A.n_steps:
            return self._sample_a(i0), tr.phi.data[i0].real
        a = (1 - w) * self._sample_a(i0) + w * self._sample_a(i0 + 1)
        phi = (1 - w) * tr.phi.data[i0].real + w * tr.phi.data[i0 + 1].real
        return a, phi

    def midpoint(self, n: int):
        a, phi = self._value_at((n + 0.5) * self.dt)
        return a, np.sum(a**2, axis=0) + phi

    def step(self, v_hat: np.ndarray, n: int, direction: int = 1,
             source_hat: np.ndarray | None = None) -> np.ndarray:
        """One CN step across [t_n, t_{n+1}] (forward) or back (direction = -1).

        The Laplacian is treated exactly; the remaining part is resolved by the
        fixed-point sweep w <- (1 + i h K)^{-1} [(1 - i h K) v - i h V(v + w) + src].
        """
        g = self.grid
        h = direction * self.dt / 2
        a, b = self.midpoint(n)
        denom = 1.0 + 1j * h * g.k2
        rhs = (1.0 - 1j * h * g.k2) * v_hat
        if source_hat is not None:
            rhs = rhs + source_hat
        w = rhs / denom
        vnorm = max(np.linalg.norm(v_hat), 1e-300)
        for sweep in range(1, self.max_sweeps + 1):
            w_new = (rhs - 1j * h * self.op.apply(v_hat + w, a, b)) / denom
            delta = np.linalg.norm(w_new - w)
            w = w_new
            if not np.isfinite(delta):
                break
            if delta <= self.inner_tol * max(np.linalg.norm(w), vnorm):
                return w
        raise TimeStepTooLargeError(n, self.max_sweeps)


def _run(v0: ScalarField, track: PotentialTrack, dt: float, f: TimeSampledField | None,
         inner_tol: float, max_sweeps: int) -> TimeSampledField:
    cn = _CrankNicolson(track, dt, inner_tol, max_sweeps)
    g = cn.grid
    m = cn.n_steps
    if f is not None and len(f) != m + 1:
        raise ValueError("source must be sampled on the solution lattice")
    out = np.empty((m + 1,) + g.shape, complex)
    v_hat = v0.coefficients().copy()
    out[0] = v0.physical()
    f_prev = g.fft(f.data[0]) if f is not None else None
    for n in range(m):
        src = None
        if f is not None:
            f_next = g.fft(f.data[n + 1])
            src = -0.5j * dt * (f_prev + f_next)
            f_prev = f_next
        v_hat = cn.step(v_hat, n, 1, src)
        out[n + 1] = g.ifft(v_hat)
    return TimeSampledField(g, dt, out)


def evolve(v0: ScalarField, track: PotentialTrack, dt: float,
           inner_tol: float = INNER_TOL, max_sweeps: int = MAX_SWEEPS) -> TimeSampledField:
    """Solve i dv/dt = (H(A) + phi) v, v(0) = v0, on the track interval by Crank-Nicolson."""
    return _run(v0, track, dt, None, inner_tol, max_sweeps)


def evolve_inhomogeneous(v0: ScalarField, track: PotentialTrack, f: TimeSampledField | None,
                         dt: float, inner_tol: float = INNER_TOL,
                         max_sweeps: int = MAX_SWEEPS) -> TimeSampledField:
    """Solve i dv/dt = (H(A) + phi) v + f with the trapezoid rule on the source.

    A missing or identically zero source takes exactly the homogeneous path.
    """
    if f is None or not np.any(f.data):
        return _run(v0, track, dt, None, inner_tol, max_sweeps)
    return _run(v0, track, dt, f, inner_tol, max_sweeps)


def evolve_reverse(vT: ScalarField, track: PotentialTrack, dt: float,
                   inner_tol: float = INNER_TOL, max_sweeps: int = MAX_SWEEPS) -> TimeSampledField:
    """Step backwards from t = T to 0 with the same midpoint potentials.

    Returned samples are in forward time order; sample M is ``vT``.
    """
    cn = _CrankNicolson(track, dt, inner_tol, max_sweeps)
    g = cn.grid
    m = cn.n_steps
    out = np.empty((m + 1,) + g.shape, complex)
    v_hat = vT.coefficients().copy()
    out[m] = vT.physical()
    for n in reversed(range(m)):
        v_hat = cn.step(v_hat, n, -1)
        out[n] = g.ifft(v_hat)
    return TimeSampledField(g, dt, out)


def charge(v: ScalarField) -> float:
    """||v||_2 by Parseval."""
    return sobolev_norm(v, SobolevIndex(0, 2))
