"""Gauge-specific data bundles, constraint validation, mollification, random fields.

Wherever |u|^2 acts as a source (Newtonian potential, the Lorentz and temporal
constraints) it is the 2/3-dealiased density with its mean removed: on the
torus Delta phi and div A are mean-free, so the uniform part of the charge is
absorbed into a neutralizing background.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import struct
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .spectral import (
    ScalarField,
    SobolevIndex,
    SpectralGrid,
    VectorField,
    divergence_hat,
    gradient_hat,
    inverse_laplacian_hat,
    leray_project_hat,
    sobolev_norm,
    vector_sobolev_norm,
)

__all__ = [
    "ConstraintError",
    "ContainerError",
    "TimeSampledField",
    "CoulombData",
    "LorentzData",
    "TemporalData",
    "CoulombState",
    "charge_density",
    "neutral_density",
    "divergence_residual",
    "in_theorem_region",
    "make_coulomb_data",
    "make_lorentz_data",
    "make_temporal_data",
    "mollifier_symbol",
    "mollify",
    "random_band_limited",
    "random_vector_field",
    "save_container",
    "load_container",
]


class ConstraintError(ValueError):
    pass


class ContainerError(ValueError):
    pass


CONSTRAINT_TOL = 1e-10


# ---------------------------------------------------------------- densities

def charge_density_array(grid: SpectralGrid, u: np.ndarray) -> np.ndarray:
    """Dealiased |u|^2 as a real physical array."""
    return grid.ifft(grid.dealias(grid.fft(np.abs(u) ** 2))).real


def charge_density(u: ScalarField) -> ScalarField:
    return ScalarField(u.grid, charge_density_array(u.grid, u.physical()))


def neutral_density(u: ScalarField) -> ScalarField:
    rho = charge_density_array(u.grid, u.physical())
    return ScalarField(u.grid, rho - rho.mean())


def _gradient_scale(a: VectorField) -> float:
    g = a.grid
    ah = a.coefficients()
    return float(np.max(np.sqrt(np.sum(g.kd**2, axis=0)) * np.sqrt(np.sum(np.abs(ah) ** 2, axis=0))))


def divergence_residual(a: VectorField, reference: VectorField | None = None) -> float:
    """max_k |k.a_hat| / max_k |k||a_hat|, 0 for a field with no gradient content.

    ``reference`` supplies the denominator instead, e.g. the field before a projection
    removed nearly all of its content.
    """
    g = a.grid
    div = np.abs(divergence_hat(g, a.coefficients()))
    scale = _gradient_scale(a if reference is None else reference)
    if scale == 0:
        return 0.0
    return float(np.max(div) / scale)


def _derivative_bound(a: VectorField) -> np.ndarray:
    """sum_k |k||a_hat(k)| / N^d, an upper bound on every first derivative of ``a``.

    Used as the scale of a divergence so that roundoff in a divergence-free field
    is measured against the field itself rather than against a vanishing term.
    """
    g = a.grid
    ah = a.coefficients()
    w = np.sqrt(np.sum(g.kd**2, axis=0)) * np.sqrt(np.sum(np.abs(ah) ** 2, axis=0))
    return np.array(float(np.sum(w)) / g.npoints)


def _relative(residual: np.ndarray, terms: Iterable[np.ndarray]) -> float:
    scale = max((float(np.max(np.abs(t))) for t in terms), default=0.0)
    r = float(np.max(np.abs(residual)))
    if scale == 0:
        return r
    return r / scale


# ---------------------------------------------------------------- time tracks

@dataclass(eq=False)
class TimeSampledField:
    """Samples of a scalar (complex) or vector (real) field at t_j = j*dt, j = 0..M."""

    grid: SpectralGrid
    dt: float
    data: np.ndarray
    vector: bool = False

    def __post_init__(self):
        expect = ((self.grid.dims,) if self.vector else ()) + self.grid.shape
        if self.data.ndim != len(expect) + 1 or self.data.shape[1:] != expect:
            raise ValueError(f"track shape {self.data.shape} does not match field shape {expect}")
        if self.data.shape[0] < 1:
            raise ValueError("track needs at least one sample")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    @property
    def n_steps(self) -> int:
        return self.data.shape[0] - 1

    @property
    def T(self) -> float:
        return self.n_steps * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def __len__(self) -> int:
        return self.data.shape[0]

    def __getitem__(self, j: int) -> Union[ScalarField, VectorField]:
        if self.vector:
            return VectorField(self.grid, self.data[j])
        return ScalarField(self.grid, self.data[j])

    def norm_series(self, idx: SobolevIndex) -> np.ndarray:
        if self.vector:
            return np.array([vector_sobolev_norm(d, idx, self.grid) for d in self.data])
        return np.array([sobolev_norm(ScalarField(self.grid, d), idx) for d in self.data])

    def __sub__(self, other: "TimeSampledField") -> "TimeSampledField":
        self._check_lattice(other)
        return TimeSampledField(self.grid, self.dt, self.data - other.data, self.vector)

    def __add__(self, other: "TimeSampledField") -> "TimeSampledField":
        self._check_lattice(other)
        return TimeSampledField(self.grid, self.dt, self.data + other.data, self.vector)

    def scaled(self, c: float) -> "TimeSampledField":
        return TimeSampledField(self.grid, self.dt, self.data * c, self.vector)

    def _check_lattice(self, other):
        if len(self) != len(other) or abs(self.dt - other.dt) > 1e-14 * self.dt:
            raise ValueError("tracks live on different time lattices")

    def time_derivative(self) -> "TimeSampledField":
        """Centered differences inside, second-order one-sided at the endpoints."""
        d = np.gradient(self.data, self.dt, axis=0, edge_order=2)
        return TimeSampledField(self.grid, self.dt, d, self.vector)

    @classmethod
    def constant(cls, f: Union[ScalarField, VectorField], dt: float, n_steps: int) -> "TimeSampledField":
        vector = isinstance(f, VectorField)
        vals = f.values if vector else f.physical()
        data = np.broadcast_to(vals, (n_steps + 1,) + vals.shape).copy()
        return cls(f.grid, dt, data, vector)

    @classmethod
    def from_fields(cls, fields: Sequence, dt: float) -> "TimeSampledField":
        vector = isinstance(fields[0], VectorField)
        data = np.stack([f.values if vector else f.physical() for f in fields])
        return cls(fields[0].grid, dt, data, vector)

    @classmethod
    def zeros(cls, grid: SpectralGrid, dt: float, n_steps: int, vector=False) -> "TimeSampledField":
        shape = (n_steps + 1,) + ((grid.dims,) if vector else ()) + grid.shape
        return cls(grid, dt, np.zeros(shape, float if vector else complex), vector)


# ---------------------------------------------------------------- data bundles

def in_theorem_region(s: float, sigma: float) -> bool:
    """Index region of the Coulomb-gauge existence theorem."""
    if s < 5 / 3:
        return False
    lo = max(4 / 3, s - 2, (2 * s - 1) / 4)
    hi = min(s + 1, (5 * s - 2) / 3)
    return lo <= sigma <= hi and (s, sigma) not in {(5 / 2, 7 / 2), (7 / 2, 3 / 2)}


def _warn_region(s, sigma):
    if not in_theorem_region(s, sigma):
        warnings.warn(f"(s, sigma) = ({s}, {sigma}) lies outside the proven well-posedness region",
                      stacklevel=3)


def _same_grid(*fields):
    g = fields[0].grid
    for f in fields[1:]:
        if not g.same_as(f.grid):
            raise ValueError("all fields must live on one grid")
    return g


@dataclass(eq=False)
class CoulombData:
    u0: ScalarField
    A0: VectorField
    A1: VectorField
    s: float = 2.0
    sigma: float = 1.5
    seeds: dict = field(default_factory=dict)

    @property
    def grid(self) -> SpectralGrid:
        return self.u0.grid

    def residuals(self, ref0: VectorField | None = None, ref1: VectorField | None = None) -> dict:
        return {"div_A0": divergence_residual(self.A0, ref0),
                "div_A1": divergence_residual(self.A1, ref1)}


@dataclass(eq=False)
class LorentzData:
    u0: ScalarField
    phi0: ScalarField
    phi1: ScalarField
    A0: VectorField
    A1: VectorField
    s: float = 2.0
    sigma: float = 1.5
    seeds: dict = field(default_factory=dict)

    @property
    def grid(self) -> SpectralGrid:
        return self.u0.grid

    def residuals(self) -> dict:
        g = self.grid
        div0 = g.ifft(divergence_hat(g, self.A0.coefficients())).real
        div1 = g.ifft(divergence_hat(g, self.A1.coefficients())).real
        phi1 = self.phi1.physical().real
        lap0 = g.ifft(-g.k2 * self.phi0.coefficients()).real
        rho = neutral_density(self.u0).physical().real
        return {
            "lorentz_A0": _relative(div0 + phi1, [_derivative_bound(self.A0), phi1]),
            "lorentz_A1": _relative(div1 + lap0 + rho, [_derivative_bound(self.A1), lap0, rho]),
        }


@dataclass(eq=False)
class TemporalData:
    u0: ScalarField
    A0: VectorField
    A1: VectorField
    s: float = 2.0
    sigma: float = 1.5
    seeds: dict = field(default_factory=dict)

    @property
    def grid(self) -> SpectralGrid:
        return self.u0.grid

    def residuals(self) -> dict:
        g = self.grid
        div1 = g.ifft(divergence_hat(g, self.A1.coefficients())).real
        rho = neutral_density(self.u0).physical().real
        return {"temporal_A1": _relative(div1 + rho, [_derivative_bound(self.A1), rho])}


def make_coulomb_data(u0: ScalarField, A0: VectorField, A1: VectorField,
                      s: float = 2.0, sigma: float = 1.5, project: bool = False,
                      tol: float = CONSTRAINT_TOL, seeds: dict | None = None) -> CoulombData:
    """Validated X^{s,sigma} datum; ``project=True`` applies the Leray projection first."""
    g = _same_grid(u0, A0, A1)
    _warn_region(s, sigma)
    refs = (None, None)
    if project:
        refs = (A0, A1)
        A0 = VectorField.from_coefficients(g, leray_project_hat(g, A0.coefficients()))
        A1 = VectorField.from_coefficients(g, leray_project_hat(g, A1.coefficients()))
    data = CoulombData(u0, A0, A1, s, sigma, dict(seeds or {}))
    res = data.residuals(*refs)
    if max(res.values()) > tol:
        raise ConstraintError(f"not in X^{{s,sigma}}: divergence residuals {res}")
    return data


def repair_lorentz(u0, phi0, phi1, A0, A1):
    g = u0.grid
    phi1 = ScalarField(g, -g.ifft(divergence_hat(g, A0.coefficients())).real)
    src = neutral_density(u0).coefficients() + divergence_hat(g, A1.coefficients())
    phi0 = ScalarField(g, g.ifft(inverse_laplacian_hat(g, -src)).real)
    return phi0, phi1


def make_lorentz_data(u0, phi0, phi1, A0, A1, s: float = 2.0, sigma: float = 1.5,
                      repair: bool = False, tol: float = CONSTRAINT_TOL,
                      seeds: dict | None = None) -> LorentzData:
    """Validated Y^{s,sigma} datum.

    Repair mode sets phi1 = -div A0 and solves Delta phi0 = -|u0|^2_neutral - div A1
    for the mean-zero phi0; the incoming phi0, phi1 are discarded.
    """
    _same_grid(u0, phi0, phi1, A0, A1)
    _warn_region(s, sigma)
    if repair:
        phi0, phi1 = repair_lorentz(u0, phi0, phi1, A0, A1)
    data = LorentzData(u0, phi0, phi1, A0, A1, s, sigma, dict(seeds or {}))
    res = data.residuals()
    if max(res.values()) > tol:
        raise ConstraintError(f"not in Y^{{s,sigma}}: residuals {res}")
    return data


def repair_temporal(u0, A1):
    g = u0.grid
    rho_hat = neutral_density(u0).coefficients()
    corr = gradient_hat(g, inverse_laplacian_hat(g, -rho_hat))
    return VectorField.from_coefficients(g, leray_project_hat(g, A1.coefficients()) + corr)


def make_temporal_data(u0, A0, A1, s: float = 2.0, sigma: float = 1.5,
                       repair: bool = False, tol: float = CONSTRAINT_TOL,
                       seeds: dict | None = None) -> TemporalData:
    """Validated temporal-gauge datum; repair replaces A1 by P A1 + grad Delta^{-1}(-|u0|^2_neutral)."""
    _same_grid(u0, A0, A1)
    _warn_region(s, sigma)
    if repair:
        A1 = repair_temporal(u0, A1)
    data = TemporalData(u0, A0, A1, s, sigma, dict(seeds or {}))
    res = data.residuals()
    if max(res.values()) > tol:
        raise ConstraintError(f"not in the temporal data space: residuals {res}")
    return data


# ---------------------------------------------------------------- states

@dataclass(eq=False)
class CoulombState:
    """Sampled MS-C solution; phi(t) is derived from |u(t)|^2 on demand."""

    u: TimeSampledField
    A: TimeSampledField
    dA: TimeSampledField

    @property
    def grid(self) -> SpectralGrid:
        return self.u.grid

    @property
    def dt(self) -> float:
        return self.u.dt

    def phi(self) -> TimeSampledField:
        from .spectral import newtonian_potential
        g = self.grid
        data = np.stack([newtonian_potential(ScalarField(g, charge_density_array(g, uj))).physical()
                         for uj in self.u.data])
        return TimeSampledField(g, self.dt, data)

    def max_divergence_residual(self) -> float:
        return max(divergence_residual(VectorField(self.grid, a)) for a in self.A.data)


# ---------------------------------------------------------------- mollifier

def mollifier_symbol(xi_abs: np.ndarray) -> np.ndarray:
    """Radial bump: 1 on |xi| <= 1, exp(1 - 1/(1 - (|xi|-1)^2)) on 1 < |xi| < 2, 0 beyond."""
    xi_abs = np.asarray(xi_abs, dtype=float)
    out = np.zeros_like(xi_abs)
    out[xi_abs <= 1] = 1.0
    band = (xi_abs > 1) & (xi_abs < 2)
    x = xi_abs[band] - 1.0
    out[band] = np.exp(1.0 - 1.0 / (1.0 - x**2))
    return out


def mollify(f, delta: float):
    """eta_delta * f, realized as the multiplier (F eta)(delta k)."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    g = f.grid
    m = mollifier_symbol(delta * np.sqrt(g.k2))
    if isinstance(f, VectorField):
        return VectorField.from_coefficients(g, m * f.coefficients())
    out = m * f.coefficients()
    return ScalarField(g, out, True) if f.spectral else ScalarField(g, g.ifft(out))


# ---------------------------------------------------------------- random fields

def _ball_modes(grid: SpectralGrid, fraction: float) -> np.ndarray:
    """Integer modes with |m| <= fraction * N/2 in an N-independent canonical order."""
    rad = fraction * grid.n / 2
    r = int(math.floor(rad))
    rng1 = np.arange(-r, r + 1)
    mm = np.stack(np.meshgrid(*([rng1] * grid.dims), indexing="ij")).reshape(grid.dims, -1).T
    mm = mm[np.sum(mm**2, axis=1) <= rad**2 + 1e-9]
    # sort by |m|^2, then lexicographically: coarse-grid balls are prefixes of fine ones
    order = np.lexsort(tuple(mm[:, i] for i in reversed(range(grid.dims))) + (np.sum(mm**2, axis=1),))
    return mm[order]


def random_band_limited(grid: SpectralGrid, seed, decay: float = 2.0,
                        max_mode_fraction: float = 0.5, real: bool = False,
                        amplitude: float | None = None) -> ScalarField:
    """Random field with i.i.d. complex Gaussian Fourier coefficients.

    Series coefficients are scaled by (1+|k|^2)^(-decay/2) and vanish outside the
    mode ball |m| <= max_mode_fraction * N/2. The draw for a given mode does not
    depend on N, so refining the grid only appends new high modes. ``real`` takes
    the real part; ``amplitude`` rescales to that L^2 norm.
    """
    if decay < 0:
        raise ValueError("decay exponent must be >= 0")
    if not (0 < max_mode_fraction <= 2 / 3 + 1e-12):
        raise ValueError("max_mode_fraction must lie in (0, 2/3]")
    rng = np.random.default_rng(seed)
    modes = _ball_modes(grid, max_mode_fraction)
    z = rng.standard_normal((len(modes), 2))
    c = (z[:, 0] + 1j * z[:, 1]) / math.sqrt(2)
    k2 = np.sum(((2 * np.pi / grid.box_length) * modes) ** 2, axis=1)
    c = c * (1.0 + k2) ** (-decay / 2)
    coeffs = np.zeros(grid.shape, complex)
    coeffs[tuple((modes % grid.n).T)] = c * grid.npoints
    f = ScalarField(grid, grid.ifft(coeffs))
    if real:
        f = ScalarField(grid, f.physical().real)
    if amplitude is not None:
        norm = sobolev_norm(f, SobolevIndex(0, 2))
        if norm > 0:
            f = f * (amplitude / norm)
    return f


def random_vector_field(grid: SpectralGrid, seed, decay: float = 2.0,
                        max_mode_fraction: float = 0.5, solenoidal: bool = True,
                        amplitude: float | None = None) -> VectorField:
    """Real vector field from independent component draws; optionally Leray-projected."""
    comps = [random_band_limited(grid, [seed, 7919 * (i + 1)], decay, max_mode_fraction, real=True)
             for i in range(grid.dims)]
    a = VectorField.from_components(comps)
    if solenoidal and grid.dims > 1:
        a = VectorField.from_coefficients(grid, leray_project_hat(grid, a.coefficients()))
    if amplitude is not None:
        norm = vector_sobolev_norm(a, SobolevIndex(0, 2))
        if norm > 0:
            a = a * (amplitude / norm)
    return a


# ---------------------------------------------------------------- container

MAGIC = b"MSLABF01"
CONTAINER_VERSION = 1


def _atomic_write(path: Path, blob: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_container(path, grid: SpectralGrid, arrays: dict, view: str = "physical",
                   meta: dict | None = None, sidecar: dict | None = None) -> Path:
    """Write named arrays as little-endian complex128 (double pairs) with a JSON header.

    Layout: magic, uint64 header length, UTF-8 JSON header, payload. The header
    records grid metadata, the view flag, each array's shape/realness/offset and a
    SHA-256 of the payload. ``sidecar`` is written next to it as ``<path>.json``.
    """
    path = Path(path)
    entries, chunks, offset = [], [], 0
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        raw = np.ascontiguousarray(arr, dtype="<c16").tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "real": not np.iscomplexobj(arr),
                        "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    payload = b"".join(chunks)
    header = {"version": CONTAINER_VERSION, "grid": grid.metadata(), "view": view,
              "arrays": entries, "meta": meta or {},
              "sha256": hashlib.sha256(payload).hexdigest()}
    hb = json.dumps(header, sort_keys=True).encode()
    _atomic_write(path, MAGIC + struct.pack("<Q", len(hb)) + hb + payload)
    if sidecar is not None:
        _atomic_write(path.with_suffix(path.suffix + ".json"),
                      json.dumps(sidecar, indent=2, sort_keys=True).encode())
    return path


def load_container(path):
    """Return (grid, arrays, header); raises ContainerError on any inconsistency."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise ContainerError(f"cannot read container {path}: {exc}") from exc
    if len(blob) < 16 or blob[:8] != MAGIC:
        raise ContainerError(f"{path}: bad magic, not a field container")
    (hlen,) = struct.unpack("<Q", blob[8:16])
    if 16 + hlen > len(blob):
        raise ContainerError(f"{path}: truncated header")
    try:
        header = json.loads(blob[16:16 + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerError(f"{path}: corrupted header") from exc
    if header.get("version") != CONTAINER_VERSION:
        raise ContainerError(f"{path}: unsupported container version {header.get('version')}")
    payload = blob[16 + hlen:]
    if hashlib.sha256(payload).hexdigest() != header.get("sha256"):
        raise ContainerError(f"{path}: payload checksum mismatch")
    grid = SpectralGrid(**header["grid"])
    arrays = {}
    for e in header["arrays"]:
        chunk = payload[e["offset"]:e["offset"] + e["nbytes"]]
        arr = np.frombuffer(chunk, dtype="<c16").reshape(e["shape"]).astype(complex)
        arrays[e["name"]] = arr.real.copy() if e["real"] else arr
    return grid, arrays, header
