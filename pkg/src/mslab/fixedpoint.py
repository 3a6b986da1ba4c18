"""Picard iteration of the linearized map for the Coulomb-gauge system.

Given a space-time iterate (u, A), the map solves

    i dv/dt = (H(A) + phi(u)) v,           v(0) = u0
    (d_t^2 - Lap + 1) B = P J(u, A) + A,   B(0) = A0, dB(0) = A1

and returns (v, B). Its fixed points solve the Coulomb-gauge system. The
iteration runs over whole trajectories on [0, T]; if it stalls, T is halved.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .fields import (
    CoulombData,
    CoulombState,
    TimeSampledField,
    charge_density_array,
)
from .kleingordon import current_density_array, kg_propagate
from .schrodinger import INNER_TOL, PotentialTrack, _MagneticOperator, evolve
from .spectral import (
    ScalarField,
    SobolevIndex,
    SpectralGrid,
    VectorField,
    inverse_laplacian_hat,
    leray_project_hat,
    time_lebesgue,
    vector_sobolev_norm,
)

__all__ = [
    "Iterate",
    "ContractionReport",
    "NoContractionError",
    "MetricUndefinedError",
    "initial_iterate",
    "phi_map",
    "metric_d",
    "metric_tilde_d",
    "tilde_exponents",
    "PicardRun",
    "HalvingSolver",
    "solve_msc",
    "residual_msc",
    "energy",
    "energy_series",
    "potential_track",
]

log = logging.getLogger(__name__)


class NoContractionError(RuntimeError):
    def __init__(self, message: str, report: "ContractionReport"):
        super().__init__(message)
        self.report = report


class MetricUndefinedError(ValueError):
    pass


@dataclass(eq=False)
class Iterate:
    """Space-time pair (u, A) with the A time-derivative track."""

    u: TimeSampledField
    A: TimeSampledField
    dA: TimeSampledField

    @property
    def grid(self) -> SpectralGrid:
        return self.u.grid

    @property
    def dt(self) -> float:
        return self.u.dt

    @property
    def n_steps(self) -> int:
        return self.u.n_steps

    @property
    def T(self) -> float:
        return self.u.T

    def to_state(self) -> CoulombState:
        return CoulombState(self.u, self.A, self.dA)

    def arrays(self) -> dict:
        return {"u": self.u.data, "A": self.A.data, "dA": self.dA.data}

    @classmethod
    def from_arrays(cls, grid: SpectralGrid, dt: float, arrays: dict) -> "Iterate":
        return cls(TimeSampledField(grid, dt, arrays["u"]),
                   TimeSampledField(grid, dt, arrays["A"], vector=True),
                   TimeSampledField(grid, dt, arrays["dA"], vector=True))


def initial_iterate(data: CoulombData, dt: float, n_steps: int) -> Iterate:
    """Constant-in-time extension: u = u0, A = A0, dA = A1 at every sample."""
    return Iterate(TimeSampledField.constant(data.u0, dt, n_steps),
                   TimeSampledField.constant(data.A0, dt, n_steps),
                   TimeSampledField.constant(data.A1, dt, n_steps))


def potential_track(x: Iterate) -> PotentialTrack:
    """(A, phi(u)) with phi(u) the Newtonian potential of the dealiased density."""
    g = x.grid
    phi = np.empty(x.u.data.shape, complex)
    for j, uj in enumerate(x.u.data):
        rho_hat = g.fft(charge_density_array(g, uj))
        phi[j] = g.ifft(-inverse_laplacian_hat(g, rho_hat)).real
    return PotentialTrack(x.A, TimeSampledField(g, x.dt, phi), validate=False)


def kg_source(x: Iterate) -> TimeSampledField:
    """P J(u, A) + A along the iterate."""
    g = x.grid
    src = np.empty(x.A.data.shape)
    for j in range(len(x.A)):
        a = x.A.data[j]
        jh = g.fft(current_density_array(g, x.u.data[j], a))
        src[j] = g.ifft(leray_project_hat(g, jh)).real + a
    return TimeSampledField(g, x.dt, src, vector=True)


def phi_map(x: Iterate, data: CoulombData, dt: float | None = None,
            inner_tol: float = INNER_TOL) -> Iterate:
    """One application of the linearized map."""
    if not x.grid.same_as(data.grid):
        raise ValueError("iterate and data live on different grids")
    dt = x.dt if dt is None else dt
    if abs(dt - x.dt) > 1e-14 * dt:
        raise ValueError("requested dt differs from the iterate lattice")
    v = evolve(data.u0, potential_track(x), dt, inner_tol=inner_tol)
    B, dB = kg_propagate(data.A0, data.A1, kg_source(x), dt)
    return Iterate(v, B, dB)


# ---------------------------------------------------------------- metrics

def _check_pair(x: Iterate, y: Iterate):
    if len(x.u) != len(y.u) or abs(x.dt - y.dt) > 1e-14 * x.dt:
        raise ValueError("iterates live on different time lattices")


def metric_components(x: Iterate, y: Iterate) -> dict:
    """The three norms entering d: u in L^inf L^2, A in L^inf H^{1/2} and L^4 L^4."""
    _check_pair(x, y)
    du = (x.u - y.u).norm_series(SobolevIndex(0, 2))
    dA = x.A - y.A
    return {
        "u_Linf_L2": time_lebesgue(du, x.dt, math.inf),
        "A_Linf_H1/2": time_lebesgue(dA.norm_series(SobolevIndex(0.5, 2)), x.dt, math.inf),
        "A_L4_L4": time_lebesgue(dA.norm_series(SobolevIndex(0, 4)), x.dt, 4),
    }


def metric_d(x: Iterate, y: Iterate) -> float:
    return max(metric_components(x, y).values())


def tilde_exponents(s: float) -> tuple[float, float]:
    """(q, r) = (6/(2s-1), 3/(2-s)); r = inf at s = 2."""
    return 6.0 / (2 * s - 1), (math.inf if s == 2 else 3.0 / (2 - s))


def tilde_components(x: Iterate, y: Iterate, s: float) -> dict:
    if not (5 / 3 - 1e-12 <= s <= 2):
        raise MetricUndefinedError(f"metric undefined for this s = {s} (need 5/3 <= s <= 2)")
    _check_pair(x, y)
    du = x.u - y.u
    ddu = du.time_derivative()
    dA = x.A - y.A
    ddA = x.dA - y.dA
    comps = {
        "u_Linf_H^{s-1}": time_lebesgue(du.norm_series(SobolevIndex(s - 1, 2)), x.dt, math.inf),
        "dtu_Linf_H^{s-3}": time_lebesgue(ddu.norm_series(SobolevIndex(s - 3, 2)), x.dt, math.inf),
        "A_L2_Linf": time_lebesgue(dA.norm_series(SobolevIndex(0, math.inf)), x.dt, 2),
        "A_Linf_H1": time_lebesgue(dA.norm_series(SobolevIndex(1, 2)), x.dt, math.inf),
        "dtA_Linf_L2": time_lebesgue(ddA.norm_series(SobolevIndex(0, 2)), x.dt, math.inf),
    }
    if s != 2:
        q, r = tilde_exponents(s)
        comps["A_Lq_H^{2-s,r}"] = time_lebesgue(dA.norm_series(SobolevIndex(2 - s, r)), x.dt, q)
    return comps


def metric_tilde_d(x: Iterate, y: Iterate, s: float) -> float:
    """The refined metric for 5/3 <= s <= 2; the L^q H^{2-s,r} term is dropped at s = 2."""
    return max(tilde_components(x, y, s).values())


def _metric(kind):
    if kind == "d":
        return metric_d
    if isinstance(kind, (tuple, list)) and kind[0] == "tilde":
        s = float(kind[1])
        if not (5 / 3 - 1e-12 <= s <= 2):
            raise MetricUndefinedError(f"metric undefined for this s = {s}")
        return lambda x, y: metric_tilde_d(x, y, s)
    raise ValueError(f"unknown metric kind {kind!r}")


def metric_name(kind) -> str:
    return "d" if kind == "d" else f"tilde_d(s={float(kind[1])})"


# ---------------------------------------------------------------- iteration

@dataclass
class ContractionReport:
    metric: str = "d"
    T: float = 0.0
    dt: float = 0.0
    distances: list = field(default_factory=list)
    converged: bool = False
    halving_history: list = field(default_factory=list)
    ball_norms: dict = field(default_factory=dict)

    @property
    def iteration_count(self) -> int:
        return len(self.distances)

    @property
    def ratios(self) -> list:
        d = self.distances
        return [d[k + 1] / d[k] for k in range(len(d) - 1) if d[k] > 0]

    @property
    def ratio(self) -> float:
        r = self.ratios
        return float(np.median(r)) if r else float("nan")

    @property
    def diverged(self) -> bool:
        return bool(self.ratios) and self.ratio >= 1

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(iteration_count=self.iteration_count, ratio=self.ratio,
                   ratios=self.ratios, diverged=self.diverged)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ContractionReport":
        keys = {"metric", "T", "dt", "distances", "converged", "halving_history", "ball_norms"}
        return cls(**{k: v for k, v in d.items() if k in keys})


def _ball_norms(x: Iterate) -> dict:
    """Measured sizes of the iterate (logged in place of the unquantified ball radii)."""
    u_h = x.u.norm_series(SobolevIndex(2, 2))
    a_h = x.A.norm_series(SobolevIndex(1, 2))
    return {"u_Linf_H2": float(np.max(u_h)), "A_Linf_H1": float(np.max(a_h)),
            "dA_Linf_L2": float(np.max(x.dA.norm_series(SobolevIndex(0, 2))))}


class PicardRun:
    """Resumable Picard iteration x_{k+1} = Phi(x_k) at fixed T."""

    def __init__(self, data: CoulombData, dt: float, n_steps: int, metric="d",
                 x: Iterate | None = None, distances=None, inner_tol: float = INNER_TOL):
        self.data = data
        self.dt = dt
        self.n_steps = n_steps
        self.metric_kind = metric
        self.metric = _metric(metric)
        self.x = x if x is not None else initial_iterate(data, dt, n_steps)
        self.distances = list(distances or [])
        self.inner_tol = inner_tol

    @property
    def T(self) -> float:
        return self.n_steps * self.dt

    def step(self) -> float:
        y = phi_map(self.x, self.data, self.dt, self.inner_tol)
        dist = self.metric(y, self.x)
        self.distances.append(dist)
        self.x = y
        return dist

    def run(self, n: int) -> list:
        return [self.step() for _ in range(n)]

    def report(self, converged=False) -> ContractionReport:
        return ContractionReport(metric_name(self.metric_kind), self.T, self.dt,
                                 list(self.distances), converged)


def _stalled(distances: list) -> bool:
    if not all(math.isfinite(d) for d in distances):
        return True
    if len(distances) < 4:
        return False
    tail = distances[-4:]
    ratios = [tail[i + 1] / tail[i] for i in range(3) if tail[i] > 0]
    return bool(ratios) and float(np.median(ratios)) >= 1


class HalvingSolver:
    """Picard iteration with geometric T-halving, resumable between iterations.

    Stops when metric(x_{k+1}, x_k) <= tol. If the iteration stalls (median of the
    last three ratios >= 1) or max_iter is exhausted, T is halved and the
    iteration restarts from the constant extension, at most ``max_halvings`` times.
    """

    def __init__(self, data: CoulombData, T: float, dt: float, tol: float = 1e-10,
                 max_iter: int = 50, metric_kind="d", max_halvings: int = 8,
                 inner_tol: float = INNER_TOL):
        if not tol > 0:
            raise ValueError("tol must be positive")
        self.data = data
        self.dt = dt
        self.tol = tol
        self.max_iter = max_iter
        self.metric_kind = metric_kind
        self.max_halvings = max_halvings
        self.inner_tol = inner_tol
        _metric(metric_kind)
        self.attempt = 0
        self.history: list = []
        self.status = "running"
        self.run = PicardRun(data, dt, max(1, int(round(T / dt))), metric_kind, inner_tol=inner_tol)

    @property
    def iterations(self) -> int:
        return len(self.run.distances)

    def _close_attempt(self, converged: bool):
        rep = self.run.report(converged)
        self.history.append({"T": self.run.T, "distances": list(self.run.distances),
                             "converged": converged, "ratio": rep.ratio})

    def step(self) -> str:
        """One Picard iteration plus any halving decision; returns the status."""
        if self.status != "running":
            return self.status
        dist = self.run.step()
        log.debug("T=%g iteration %d: distance %.3e", self.run.T, self.iterations, dist)
        if dist <= self.tol:
            self._close_attempt(True)
            self.status = "converged"
        elif _stalled(self.run.distances) or self.iterations >= self.max_iter:
            self._close_attempt(False)
            n = self.run.n_steps
            if n == 1 or self.attempt >= self.max_halvings:
                self.status = "failed"
            else:
                self.attempt += 1
                self.run = PicardRun(self.data, self.dt, max(1, n // 2), self.metric_kind,
                                     inner_tol=self.inner_tol)
        return self.status

    def advance(self, budget: int | None = None) -> str:
        """Iterate until done or ``budget`` iterations have been spent in this call."""
        spent = 0
        while self.status == "running" and (budget is None or spent < budget):
            self.step()
            spent += 1
        return self.status

    def report(self) -> ContractionReport:
        last = self.history[-1] if self.history and self.status != "running" else None
        rep = ContractionReport(metric_name(self.metric_kind), self.run.T, self.dt,
                                list(last["distances"] if last else self.run.distances),
                                self.status == "converged", [dict(h) for h in self.history])
        if self.status == "converged":
            rep.ball_norms = _ball_norms(self.run.x)
        return rep

    def result(self):
        if self.status == "failed":
            raise NoContractionError("no contraction at minimal interval", self.report())
        if self.status != "converged":
            raise RuntimeError("iteration has not finished")
        return self.run.x.to_state(), self.report()

    # checkpointing: arrays go to the binary container, the rest to JSON
    def checkpoint(self) -> tuple[dict, dict]:
        arrays = dict(self.run.x.arrays())
        meta = {"attempt": self.attempt, "history": self.history, "status": self.status,
                "n_steps": self.run.n_steps, "distances": list(self.run.distances),
                "dt": self.dt, "tol": self.tol, "max_iter": self.max_iter,
                "metric_kind": self.metric_kind, "max_halvings": self.max_halvings,
                "inner_tol": self.inner_tol}
        return arrays, meta

    @classmethod
    def restore(cls, data: CoulombData, arrays: dict, meta: dict) -> "HalvingSolver":
        mk = meta["metric_kind"]
        mk = tuple(mk) if isinstance(mk, list) else mk
        obj = cls(data, meta["n_steps"] * meta["dt"], meta["dt"], meta["tol"], meta["max_iter"],
                  mk, meta["max_halvings"], meta["inner_tol"])
        obj.attempt = meta["attempt"]
        obj.history = [dict(h) for h in meta["history"]]
        obj.status = meta["status"]
        x = Iterate.from_arrays(data.grid, meta["dt"], arrays)
        if x.n_steps != meta["n_steps"]:
            raise ValueError("checkpoint iterate does not match its recorded lattice")
        obj.run = PicardRun(data, meta["dt"], meta["n_steps"], mk, x=x,
                            distances=meta["distances"], inner_tol=meta["inner_tol"])
        return obj


def solve_msc(data: CoulombData, T: float, dt: float, tol: float = 1e-10,
              max_iter: int = 50, metric_kind="d", max_halvings: int = 8,
              inner_tol: float = INNER_TOL):
    """Picard iteration from the constant extension of the data, halving T on stalls.

    Returns (CoulombState, ContractionReport); raises NoContractionError with
    the full report when the halvings are exhausted.
    """
    solver = HalvingSolver(data, T, dt, tol, max_iter, metric_kind, max_halvings, inner_tol)
    solver.advance()
    return solver.result()


# ---------------------------------------------------------------- diagnostics

def _hamiltonian_array(grid, op, u_hat, a_phys, phi):
    a = np.stack([op.truncated(c) for c in a_phys])
    b = np.sum(a**2, axis=0) + phi
    return grid.k2 * u_hat + op.apply(u_hat, a, b)


def residual_msc(state: CoulombState, dt: float | None = None) -> dict:
    """Max-over-interior-times L^2 residuals of both Coulomb-gauge equations.

    Time derivatives are centered differences of the stored samples.
    """
    g = state.grid
    dt = state.dt if dt is None else dt
    op = _MagneticOperator(g)
    phi = state.phi().data.real
    u, A = state.u.data, state.A.data
    m = len(u) - 1
    if m < 2:
        raise ValueError("need at least three samples for second differences")
    vol = g.volume / g.npoints**2
    res_s, res_m = [], []
    for j in range(1, m):
        uh = g.fft(u[j])
        dtu_h = g.fft(u[j + 1] - u[j - 1]) / (2 * dt)
        rs = 1j * dtu_h - _hamiltonian_array(g, op, uh, A[j], phi[j])
        res_s.append(math.sqrt(np.sum(np.abs(rs) ** 2) * vol))
        ah = g.fft(A[j])
        d2a = g.fft(A[j + 1] - 2 * A[j] + A[j - 1]) / dt**2
        pj = leray_project_hat(g, g.fft(current_density_array(g, u[j], A[j])))
        rm = d2a + g.k2 * ah - pj
        res_m.append(math.sqrt(np.sum(np.abs(rm) ** 2) * vol))
    return {"schrodinger": max(res_s), "maxwell": max(res_m)}


def energy(u: ScalarField, A: VectorField, dA: VectorField) -> float:
    """||(grad - iA)u||^2 + 1/2 ||dA||^2 + 1/2 ||grad A||^2 + 1/2 <phi(u), |u|^2>."""
    g = u.grid
    up = u.physical()
    uh = g.fft(up)
    kin = 0.0
    for j in range(g.dims):
        dj = g.ifft(1j * g.kd[j] * uh) - 1j * A.values[j] * up
        kin += float(np.sum(np.abs(dj) ** 2))
    kin *= g.cell_volume
    ah = A.coefficients()
    grad_a = float(np.sum(g.k2 * np.abs(ah) ** 2)) * g.volume / g.npoints**2
    dta = vector_sobolev_norm(dA, SobolevIndex(0, 2)) ** 2
    rho = charge_density_array(g, up)
    phi = g.ifft(-inverse_laplacian_hat(g, g.fft(rho))).real
    hartree = float(np.sum(phi * rho)) * g.cell_volume
    return kin + 0.5 * dta + 0.5 * grad_a + 0.5 * hartree


def energy_series(state: CoulombState) -> np.ndarray:
    return np.array([energy(state.u[j], state.A[j], state.dA[j]) for j in range(len(state.u))])
