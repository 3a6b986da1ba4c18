"""Randomized stress tests of multilinear Sobolev inequalities and the H^2 energy estimate.

Each inequality LHS <~ RHS is sampled over band-limited random fields and the
ratios LHS/RHS are recorded. "Bounded" is read as: the maximum ratio over the
ensemble grows by less than 1.5x when the grid is refined once.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .fields import CoulombState, random_band_limited, random_vector_field
from .schrodinger import apply_hamiltonian
from .spectral import (
    ScalarField,
    SobolevIndex,
    SpectralGrid,
    inverse_laplacian_hat,
    leray_project_hat,
    sobolev_norm,
    vector_sobolev_norm,
)

__all__ = [
    "RatioSweep",
    "IndexRegionError",
    "hartree_region",
    "magnetic_gradient_region",
    "norm_equivalence_region",
    "norm_equivalence_reverse_region",
    "projection_region",
    "test_hartree_estimate",
    "test_magnetic_gradient_estimate",
    "test_norm_equivalence",
    "test_projection_commutator",
    "test_energy_inequality",
    "refinement_growth",
    "scale_covariance",
    "write_sweeps",
    "EnergyFit",
    "INEQUALITIES",
]

RHS_GUARD = 1e-300
EPS = 1e-12


class IndexRegionError(ValueError):
    pass


@dataclass
class RatioSweep:
    inequality: str
    indices: tuple
    n_samples: int
    ratios: list
    grid_n: int
    seed: int
    dims: int = 3
    discarded: int = 0
    in_region: bool = True
    extra: dict = field(default_factory=dict)

    @property
    def max(self) -> float:
        return float(np.max(self.ratios)) if self.ratios else 0.0

    @property
    def median(self) -> float:
        return float(np.median(self.ratios)) if self.ratios else 0.0

    def to_dict(self) -> dict:
        out = asdict(self)
        out["indices"] = list(self.indices)
        out.update(max=self.max, median=self.median)
        return out


# ---------------------------------------------------------------- index regions

def _ge(a, b):
    return a >= b - EPS


def _close(a, b):
    return abs(a - b) <= EPS


def hartree_region(s, s1, s2, s3) -> bool:
    """Admissible (s, s1, s2, s3) for ||w^{-2}(u1 u2) u3; H^s|| <~ prod ||u_j; H^{s_j}||."""
    if not (_ge(s, 0) and _ge(s3, s)):
        return False
    if not _ge(min(s1, s2), max(s - 2, 0)) or not s1 + s2 > 0:
        return False
    lhs = s1 + s2 + min(s3, 1.5)
    strict = any(_close(x, 1.5) for x in (s1, s2, s3)) or (_close(s, s3) and s3 < 1.5 - EPS)
    return lhs > s + 1 + EPS if strict else _ge(lhs, s + 1)


def magnetic_gradient_region(*idx) -> bool:
    """(s, sigma) for the plain form, (s, s1, s2, sigma) for the weighted form."""
    if len(idx) == 2:
        s, sigma = idx
        if not _ge(sigma, max(s, 0.5, -s - 1)):
            return False
        return not any(_close(s, a) and _close(sigma, b) for a, b in ((0.5, 0.5), (-1.5, 0.5)))
    s, s1, s2, sigma = idx
    if not (_ge(s, 0) and _ge(min(s1, s2), s) and _ge(s1 + s2, s + 1.5)):
        return False
    if (_close(s1, s) and _close(s2, 1.5)) or (_close(s1, 1.5) and _close(s2, s)):
        return False
    if not _ge(sigma, max(s2, 0.5)):
        return False
    return not (_close(sigma, 0.5) and _close(s2, 0.5))


def norm_equivalence_region(s, sigma) -> bool:
    if not _ge(s, 0):
        return False
    if not _ge(sigma, max(0.75 - s / 2, 0.5, s / 2 - 0.25, s - 2)):
        return False
    return not any(_close(s, a) and _close(sigma, b) for a, b in ((3.5, 1.5), (1.5, 0.5), (0.5, 0.5)))


def norm_equivalence_reverse_region(s, sigma) -> bool:
    return s > 0 and sigma > max(0.5, 0.75 - s / 2)


def projection_region(s, sigma, p) -> bool:
    if not (s > 1 and _ge(sigma, 0) and math.isfinite(p)):
        return False
    if not _ge(p, max(3 / (s - 1), 2)):
        return False
    return not (_close(s, 2.5) and _close(p, 2))


def _check_region(ok: bool, name: str, indices, allow_outside: bool) -> bool:
    if ok:
        return True
    if not allow_outside:
        raise IndexRegionError(f"indices outside lemma region: {name} {tuple(indices)}")
    warnings.warn(f"indices outside lemma region: {name} {tuple(indices)}", stacklevel=3)
    return False


# ---------------------------------------------------------------- norm helpers

def _hs(g: SpectralGrid, f: np.ndarray, s: float, p: float = 2) -> float:
    return sobolev_norm(ScalarField(g, f), SobolevIndex(s, p))


def _hs_vec(g: SpectralGrid, a: np.ndarray, s: float, p: float = 2) -> float:
    return vector_sobolev_norm(a, SobolevIndex(s, p), g)


def _japanese(x: float) -> float:
    return math.sqrt(1.0 + x * x)


def _grad(g: SpectralGrid, f: np.ndarray) -> np.ndarray:
    fh = g.fft(f)
    return np.stack([g.ifft(1j * g.kd[j] * fh) for j in range(g.dims)])


def _scalar(g, seed, decay, frac):
    return random_band_limited(g, seed, decay, frac).physical()


def _vector(g, seed, decay, frac):
    return random_vector_field(g, seed, decay, frac, solenoidal=True).values


# Each term function maps (grid, indices, fields) to (lhs, rhs); fields are drawn
# by a matching sampler so scaling probes can rescale individual slots.

def _hartree_terms(g, idx, f):
    s, s1, s2, s3 = idx
    u1, u2, u3 = f["u1"], f["u2"], f["u3"]
    pot = g.ifft(-inverse_laplacian_hat(g, g.fft(u1 * u2)))
    lhs = _hs(g, pot * u3, s)
    rhs = _hs(g, u1, s1) * _hs(g, u2, s2) * _hs(g, u3, s3)
    return lhs, rhs


def _magnetic_terms(g, idx, f):
    v, a = f["v"], f["A"]
    gv = _grad(g, v)
    cov = gv - 1j * a * v
    if len(idx) == 2:
        s, sigma = idx
        lhs = _hs_vec(g, cov, s)
        rhs = _hs(g, v, s + 1) * _japanese(_hs_vec(g, a, sigma))
    else:
        s, s1, s2, sigma = idx
        w = f["w"]
        lhs = _hs_vec(g, w * cov, s)
        rhs = _hs(g, w, s1) * _hs(g, v, s2 + 1) * _japanese(_hs_vec(g, a, sigma))
    return lhs, rhs


def _hamiltonian_exact(g, v, a, u):
    """(-(grad - iA)^2 + phi(u)) v with div A = 0, products left unfiltered."""
    vh = g.fft(v)
    lap = g.ifft(g.k2 * vh)
    adv = sum(a[j] * g.ifft(1j * g.kd[j] * vh) for j in range(g.dims))
    phi = g.ifft(-inverse_laplacian_hat(g, g.fft(np.abs(u) ** 2)))
    return lap + 2j * adv + np.sum(a**2, axis=0) * v + phi * v


def _equivalence_parts(g, idx, f):
    s, sigma = idx
    v, a, u = f["v"], f["A"], f["u"]
    hv = _hs(g, _hamiltonian_exact(g, v, a, u), s - 2)
    size = _japanese(max(_hs_vec(g, a, sigma), _hs(g, u, max(s - 1, 0))))
    return hv, _hs(g, v, s), size, _hs(g, v, 0)


def _equivalence_terms(g, idx, f):
    hv, vs, size, _ = _equivalence_parts(g, idx, f)
    return hv, vs * size**2


def _projection_terms(g, idx, f):
    s, sigma, p = idx
    u, v = f["u"], f["v"]
    prod = u * _grad(g, v)
    proj = g.ifft(leray_project_hat(g, g.fft(prod)))
    q = p / (p - 1)
    lhs = _hs_vec(g, proj, sigma, q)
    rhs = _hs(g, u, sigma) * _hs(g, v, s) + _hs(g, u, s) * _hs(g, v, sigma)
    return lhs, rhs


@dataclass(frozen=True)
class _Inequality:
    name: str
    region: Callable
    terms: Callable
    slots: dict          # slot -> "scalar" | "vector"
    degree: int          # polynomial degree of the products (sets the band limit)
    homogeneous: Callable  # indices -> slots in which LHS and RHS are jointly homogeneous
    power: Callable        # indices -> joint homogeneity degree when those slots are scaled


INEQUALITIES = {
    "hartree": _Inequality("hartree", hartree_region, _hartree_terms,
                           {"u1": "scalar", "u2": "scalar", "u3": "scalar"}, 3,
                           lambda idx: ("u1", "u2", "u3"), lambda idx: 3),
    # the weight w only enters the four-index form
    "magnetic_gradient": _Inequality("magnetic_gradient", magnetic_gradient_region, _magnetic_terms,
                                     {"v": "scalar", "A": "vector", "w": "scalar"}, 3,
                                     lambda idx: ("v", "w") if len(idx) == 4 else ("v",),
                                     lambda idx: 2 if len(idx) == 4 else 1),
    "norm_equivalence": _Inequality("norm_equivalence", norm_equivalence_region, _equivalence_terms,
                                    {"v": "scalar", "A": "vector", "u": "scalar"}, 3,
                                    lambda idx: ("v",), lambda idx: 1),
    "projection": _Inequality("projection", projection_region, _projection_terms,
                              {"u": "scalar", "v": "scalar"}, 2,
                              lambda idx: ("u", "v"), lambda idx: 2),
}


def _decay_for(indices) -> float:
    """Spectral decay making every norm in the sweep converge in 3D with room to spare."""
    return max(abs(x) for x in indices if math.isfinite(x)) + 3.0


def _draw(ineq: _Inequality, g: SpectralGrid, seed: int, i: int, decay: float) -> dict:
    frac = min(0.9 / ineq.degree, 2 / 3)
    out = {}
    for j, (slot, kind) in enumerate(ineq.slots.items()):
        sd = [seed, i, j]
        out[slot] = _vector(g, sd, decay, frac) if kind == "vector" else _scalar(g, sd, decay, frac)
    return out


def _sweep(name: str, indices, n_samples: int, grid: SpectralGrid, seed: int,
           allow_outside: bool, decay: float | None, extra_fn=None) -> RatioSweep:
    ineq = INEQUALITIES[name]
    indices = tuple(float(x) for x in indices)
    in_region = _check_region(ineq.region(*indices), name, indices, allow_outside)
    decay = _decay_for(indices) if decay is None else decay
    ratios, discarded, extras = [], 0, []
    for i in range(n_samples):
        f = _draw(ineq, grid, seed, i, decay)
        lhs, rhs = ineq.terms(grid, indices, f)
        if not rhs > max(RHS_GUARD, EPS * abs(lhs)):
            discarded += 1
            continue
        ratios.append(lhs / rhs)
        if extra_fn is not None:
            extras.append(extra_fn(grid, indices, f))
    sweep = RatioSweep(name, indices, n_samples, ratios, grid.n, seed, grid.dims, discarded, in_region)
    sweep.extra["decay"] = decay
    if extras:
        sweep.extra.update(_reduce_extras(extras))
    return sweep


def test_hartree_estimate(indices, n_samples: int = 100, grid: SpectralGrid | None = None,
                          seed: int = 0, allow_outside: bool = False, decay: float | None = None):
    """Ratios ||w^{-2}(u1 u2) u3; H^s|| / prod ||u_j; H^{s_j}|| for (s, s1, s2, s3)."""
    grid = grid or SpectralGrid(3, 32)
    return _sweep("hartree", indices, n_samples, grid, seed, allow_outside, decay)


def test_magnetic_gradient_estimate(indices, n_samples: int = 100, grid: SpectralGrid | None = None,
                                    seed: int = 0, allow_outside: bool = False,
                                    decay: float | None = None):
    """||(grad - iA)v; H^s|| against ||v; H^{s+1}|| <||A; H^sigma||>, optionally weighted by w."""
    grid = grid or SpectralGrid(3, 32)
    return _sweep("magnetic_gradient", indices, n_samples, grid, seed, allow_outside, decay)


ALPHA_GRID = (1, 2, 4, 8)


def _reverse_extra(g, idx, f):
    hv, vs, size, l2 = _equivalence_parts(g, idx, f)
    return {a: vs / (hv + size**a * l2) for a in ALPHA_GRID}


def _reduce_extras(extras: list) -> dict:
    best = {a: max(e[a] for e in extras) for a in ALPHA_GRID}
    alpha = min(ALPHA_GRID, key=lambda a: (best[a], a))
    return {"reverse_max_ratio": {str(a): best[a] for a in ALPHA_GRID}, "fitted_alpha": alpha}


def test_norm_equivalence(indices, n_samples: int = 100, grid: SpectralGrid | None = None,
                          seed: int = 0, allow_outside: bool = False, decay: float | None = None):
    """Forward ratios ||(H(A)+phi(u))v; H^{s-2}|| / (||v; H^s|| <.>^2).

    When the reverse hypotheses hold, the reverse bound is also sampled for each
    alpha in {1, 2, 4, 8}; the alpha with the smallest maximum ratio is reported.
    """
    grid = grid or SpectralGrid(3, 32)
    extra = _reverse_extra if norm_equivalence_reverse_region(*indices) else None
    return _sweep("norm_equivalence", indices, n_samples, grid, seed, allow_outside, decay, extra)


def test_projection_commutator(indices, n_samples: int = 100, grid: SpectralGrid | None = None,
                               seed: int = 0, allow_outside: bool = False,
                               decay: float | None = None):
    """||P(u grad v); H^{sigma,p'}|| against ||u; H^sigma|| ||v; H^s|| + ||u; H^s|| ||v; H^sigma||."""
    grid = grid or SpectralGrid(3, 32)
    return _sweep("projection", indices, n_samples, grid, seed, allow_outside, decay)


SWEEPS = {
    "hartree": test_hartree_estimate,
    "magnetic_gradient": test_magnetic_gradient_estimate,
    "norm_equivalence": test_norm_equivalence,
    "projection": test_projection_commutator,
}


def refinement_growth(name: str, indices, n_samples: int = 100, n_coarse: int = 32,
                      dims: int = 3, seed: int = 0):
    """Max ratio at 2N over max ratio at N; returns (growth, coarse, fine)."""
    fn = SWEEPS[name]
    coarse = fn(indices, n_samples, SpectralGrid(dims, n_coarse), seed)
    fine = fn(indices, n_samples, SpectralGrid(dims, 2 * n_coarse), seed)
    growth = fine.max / coarse.max if coarse.max > 0 else float("nan")
    return growth, coarse, fine


def scale_covariance(name: str, indices, grid: SpectralGrid, t: float = 3.0,
                     seed: int = 0, sample: int = 0) -> dict:
    """Scale the homogeneous slots by t and compare LHS, RHS and their ratio."""
    ineq = INEQUALITIES[name]
    indices = tuple(float(x) for x in indices)
    decay = _decay_for(indices)
    f = _draw(ineq, grid, seed, sample, decay)
    lhs, rhs = ineq.terms(grid, indices, f)
    slots = ineq.homogeneous(indices)
    scaled = {k: (t * v if k in slots else v) for k, v in f.items()}
    lhs_t, rhs_t = ineq.terms(grid, indices, scaled)
    factor = t**ineq.power(indices)
    return {"lhs_rel_err": abs(lhs_t / (factor * lhs) - 1) if lhs else abs(lhs_t),
            "rhs_rel_err": abs(rhs_t / (factor * rhs) - 1),
            "ratio_rel_err": abs((lhs_t / rhs_t) / (lhs / rhs) - 1) if lhs else abs(lhs_t / rhs_t)}


def write_sweeps(sweeps, json_path, csv_path=None) -> None:
    """One JSON record per sweep (JSON lines) and optionally a CSV of raw ratios."""
    json_path = Path(json_path)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    with open(json_path, "w") as fh:
        for sw in sweeps:
            fh.write(json.dumps(sw.to_dict()) + "\n")
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["inequality", "indices", "grid_n", "sample", "ratio"])
            for sw in sweeps:
                tag = " ".join(repr(x) for x in sw.indices)
                for i, r in enumerate(sw.ratios):
                    w.writerow([sw.inequality, tag, sw.grid_n, i, repr(float(r))])


# ---------------------------------------------------------------- energy estimate

@dataclass
class EnergyFit:
    C: float
    C_from_start: float
    valid: bool
    lhs: list
    weight: list
    l_bound: float

    def to_dict(self) -> dict:
        return asdict(self)


def _pair_constant(log_lhs: np.ndarray, weight: np.ndarray, start_only: bool) -> float:
    """max |log L(b) - log L(a)| / (G(b) - G(a)) over a < b (or a = 0 only)."""
    if start_only:
        rise = np.maximum(log_lhs[1:] - log_lhs[0], 0.0)
        dw = weight[1:] - weight[0]
    else:
        rise = np.abs(log_lhs[None, :] - log_lhs[:, None])
        dw = np.abs(weight[None, :] - weight[:, None])
    bad = (rise > 1e-13) & (dw <= 0)
    if np.any(bad):
        return math.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(dw > 0, rise / np.where(dw > 0, dw, 1.0), 0.0)
    return float(np.max(q)) if q.size else 0.0


def test_energy_inequality(state: CoulombState, c_max: float = 1e6) -> EnergyFit:
    """Smallest C with ||H(A)u(t)|| + <l>^4 ||u(t)|| <= (same at t0) exp(C G) along a run.

    G is int ||u; H^{3/4}||^2 + int ||d_t A||_3 between t0 and t, and l = ||A; L^inf H^1||.
    The estimate holds from any initial time and the flow is reversible, so C is
    fitted over every pair of samples; ``C_from_start`` uses t0 = 0 only.
    """
    g = state.grid
    dt = state.dt
    zero = ScalarField.zeros(g)
    l_bound = float(np.max(state.A.norm_series(SobolevIndex(1, 2))))
    wl4 = (1 + l_bound**2) ** 2
    lhs = np.array([
        sobolev_norm(apply_hamiltonian(state.u[j], state.A[j], zero, check=False), SobolevIndex(0, 2))
        + wl4 * sobolev_norm(state.u[j], SobolevIndex(0, 2))
        for j in range(len(state.u))])
    u34 = state.u.norm_series(SobolevIndex(0.75, 2)) ** 2
    da3 = state.dA.norm_series(SobolevIndex(0, 3))
    weight = cumulative_trapezoid(u34, dx=dt, initial=0) + cumulative_trapezoid(da3, dx=dt, initial=0)
    if np.all(lhs == 0):
        C = C0 = 0.0
    elif np.any(lhs == 0):
        C = C0 = math.inf
    else:
        log_lhs = np.log(lhs)
        C = _pair_constant(log_lhs, weight, start_only=False)
        C0 = _pair_constant(log_lhs, weight, start_only=True)
    return EnergyFit(C, C0, bool(C <= c_max), lhs.tolist(), weight.tolist(), l_bound)
