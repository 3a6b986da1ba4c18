"""Periodic-torus discretization, Fourier multipliers, Leray projection and norms.

All fields live on the torus [0, L)^d with N points per axis. Spectral
coefficients are plain (unnormalized) DFT coefficients; ``coefficients / N**d``
are the Fourier series coefficients of the field.

Nyquist conventions: the raw wavenumber table ``grid.k`` carries the Nyquist
mode at -N/2 (numpy ordering) and is used for every even symbol (|k|, Omega,
omega, Laplacian). Odd-order derivatives use ``grid.kd``, where the Nyquist
entry is zeroed so that derivatives of real fields stay real and the table is
exactly antisymmetric under index negation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
import scipy.fft as sfft

__all__ = [
    "SpectralGrid",
    "ScalarField",
    "VectorField",
    "SobolevIndex",
    "SingularMultiplierError",
    "DegenerateProjectionError",
    "InadmissibleExponentError",
    "fourier_multiplier",
    "sobolev_norm",
    "vector_sobolev_norm",
    "leray_project",
    "newtonian_potential",
    "spacetime_norm",
    "admissible_pair_beta",
    "admissible_pair_q",
    "bessel_symbol",
    "riesz_symbol",
]


class SingularMultiplierError(ValueError):
    pass


class DegenerateProjectionError(ValueError):
    pass


class InadmissibleExponentError(ValueError):
    pass


def fftn(a: np.ndarray, ndim: int) -> np.ndarray:
    return sfft.fftn(a, axes=tuple(range(-ndim, 0)))


def ifftn(a: np.ndarray, ndim: int) -> np.ndarray:
    return sfft.ifftn(a, axes=tuple(range(-ndim, 0)))


@dataclass(frozen=True, eq=False)
class SpectralGrid:
    """Uniform periodic grid with wavenumber tables.

    ``k`` has shape ``(dims, N, ..., N)``; ``k2 = |k|^2``. ``dealias_mask`` keeps
    modes with ``3|m_i| < N`` on every axis (the 2/3 rule).
    """

    dims: int = 3
    n: int = 32
    box_length: float = 2 * math.pi
    k: np.ndarray = field(init=False, repr=False)
    kd: np.ndarray = field(init=False, repr=False)
    k2: np.ndarray = field(init=False, repr=False)
    modes: np.ndarray = field(init=False, repr=False)
    dealias_mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.dims not in (1, 2, 3):
            raise ValueError(f"dims must be 1, 2 or 3, got {self.dims}")
        if self.n < 8 or self.n % 2:
            raise ValueError(f"points per axis must be even and >= 8, got {self.n}")
        if not self.box_length > 0:
            raise ValueError("box_length must be positive")
        m1 = np.fft.fftfreq(self.n, d=1.0 / self.n)  # integers, Nyquist at -N/2
        axes = np.meshgrid(*([m1] * self.dims), indexing="ij")
        modes = np.stack(axes).astype(int)
        k = (2 * np.pi / self.box_length) * modes.astype(float)
        kd = k.copy()
        kd[modes == -self.n // 2] = 0.0
        mask = np.all(3 * np.abs(modes) < self.n, axis=0)
        for name, val in (("modes", modes), ("k", k), ("kd", kd),
                          ("k2", np.sum(k**2, axis=0)), ("dealias_mask", mask)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dims

    @property
    def volume(self) -> float:
        return self.box_length**self.dims

    @property
    def dx(self) -> float:
        return self.box_length / self.n

    @property
    def cell_volume(self) -> float:
        return self.dx**self.dims

    @property
    def npoints(self) -> int:
        return self.n**self.dims

    def coordinates(self) -> np.ndarray:
        x1 = np.arange(self.n) * self.dx
        return np.stack(np.meshgrid(*([x1] * self.dims), indexing="ij"))

    def same_as(self, other: "SpectralGrid") -> bool:
        return (self.dims, self.n, self.box_length) == (other.dims, other.n, other.box_length)

    def metadata(self) -> dict:
        return {"dims": self.dims, "n": self.n, "box_length": self.box_length}

    # raw-array helpers used by the solvers
    def fft(self, a: np.ndarray) -> np.ndarray:
        return fftn(a, self.dims)

    def ifft(self, a: np.ndarray) -> np.ndarray:
        return ifftn(a, self.dims)

    def dealias(self, a_hat: np.ndarray) -> np.ndarray:
        return a_hat * self.dealias_mask

    def plane_wave(self, mode) -> np.ndarray:
        """exp(i k.x) for the integer multi-index ``mode`` (physical values)."""
        mode = np.asarray(mode, dtype=float).reshape((self.dims,) + (1,) * self.dims)
        kx = (2 * np.pi / self.box_length) * mode * self.coordinates()
        return np.exp(1j * np.sum(kx, axis=0))


Symbol = Union[Callable[[np.ndarray], np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Complex grid function in physical (default) or spectral view."""

    grid: SpectralGrid
    values: np.ndarray
    spectral: bool = False

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != self.grid.shape:
            raise ValueError(f"shape {vals.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "values", vals)

    def physical(self) -> np.ndarray:
        return self.grid.ifft(self.values) if self.spectral else self.values

    def coefficients(self) -> np.ndarray:
        return self.values if self.spectral else self.grid.fft(self.values)

    def to_spectral(self) -> "ScalarField":
        return self if self.spectral else ScalarField(self.grid, self.coefficients(), True)

    def to_physical(self) -> "ScalarField":
        return ScalarField(self.grid, self.physical(), False) if self.spectral else self

    def real(self) -> np.ndarray:
        return self.physical().real

    def is_real(self, rtol: float = 1e-12) -> bool:
        c = self.coefficients()
        axes = tuple(range(self.grid.dims))
        flipped = np.conj(np.roll(np.flip(c), (1,) * len(axes), axis=axes))
        scale = max(np.max(np.abs(c)), 1e-300)
        return np.max(np.abs(c - flipped)) <= rtol * scale

    def _combine(self, other, op):
        if isinstance(other, ScalarField):
            if not self.grid.same_as(other.grid):
                raise ValueError("fields live on different grids")
            return ScalarField(self.grid, op(self.physical(), other.physical()))
        return ScalarField(self.grid, op(self.physical(), other))

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, other):
        return self._combine(other, np.multiply)

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values, self.spectral)

    @classmethod
    def zeros(cls, grid: SpectralGrid) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape, complex))


@dataclass(frozen=True, eq=False)
class VectorField:
    """Real vector field; ``values`` has shape ``(dims, N, ..., N)``."""

    grid: SpectralGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values)
        if np.iscomplexobj(vals):
            if np.max(np.abs(vals.imag), initial=0.0) > 1e-10 * max(np.max(np.abs(vals)), 1.0):
                raise ValueError("vector field components must be real")
            vals = vals.real
        vals = vals.astype(float)
        if vals.shape != (self.grid.dims,) + self.grid.shape:
            raise ValueError(f"shape {vals.shape} does not match grid")
        object.__setattr__(self, "values", vals)

    @property
    def components(self) -> list[ScalarField]:
        return [ScalarField(self.grid, c) for c in self.values]

    def coefficients(self) -> np.ndarray:
        return self.grid.fft(self.values)

    @classmethod
    def from_components(cls, comps) -> "VectorField":
        grid = comps[0].grid
        if any(not grid.same_as(c.grid) for c in comps):
            raise ValueError("components must share one grid")
        return cls(grid, np.stack([c.physical() for c in comps]))

    @classmethod
    def from_coefficients(cls, grid: SpectralGrid, coeffs: np.ndarray) -> "VectorField":
        return cls(grid, grid.ifft(coeffs).real)

    @classmethod
    def zeros(cls, grid: SpectralGrid) -> "VectorField":
        return cls(grid, np.zeros((grid.dims,) + grid.shape))

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.grid, self.values + other.values)

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> "VectorField":
        return VectorField(self.grid, self.values * c)

    __rmul__ = __mul__


@dataclass(frozen=True)
class SobolevIndex:
    """Regularity ``s`` and integrability ``p`` of H^{s,p} (p may be inf)."""

    s: float = 0.0
    p: float = 2.0

    def __post_init__(self):
        if not (self.p >= 1):
            raise ValueError(f"integrability p must be in [1, inf], got {self.p}")


# ---------------------------------------------------------------- symbols

def bessel_symbol(s: float) -> Callable[[np.ndarray], np.ndarray]:
    """Omega^s = (1 - Laplacian)^{s/2} as a function of |k|^2."""
    return lambda k2: (1.0 + k2) ** (s / 2)


def riesz_symbol(s: float) -> Callable[[np.ndarray], np.ndarray]:
    """omega^s = (-Laplacian)^{s/2}; the caller must supply a zero-mode rule."""
    def sym(k2):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(k2 > 0, k2 ** (s / 2), np.inf if s < 0 else 0.0)
    return sym


def _symbol_values(grid: SpectralGrid, symbol: Symbol) -> np.ndarray:
    if callable(symbol):
        return np.asarray(symbol(grid.k2))
    return np.asarray(symbol)


def _apply_zero_rule(grid, sym, zero_mode):
    sym = np.array(np.broadcast_to(sym, grid.shape), dtype=complex)
    origin = (0,) * grid.dims
    if zero_mode == "annihilate":
        sym[origin] = 0.0
    elif zero_mode == "keep":
        sym[origin] = 1.0
    elif zero_mode == "symbol":
        pass
    else:
        sym[origin] = complex(zero_mode)
    bad = ~np.isfinite(sym)
    if bad.any():
        idx = tuple(int(i[0]) for i in np.nonzero(bad))
        mode = tuple(int(grid.modes[(a,) + idx]) for a in range(grid.dims))
        raise SingularMultiplierError(f"singular multiplier: non-finite symbol at mode {mode}")
    return sym


def multiplier_array(grid: SpectralGrid, symbol: Symbol, zero_mode="symbol") -> np.ndarray:
    """Evaluate ``symbol`` on the grid's modes with an explicit zero-mode rule.

    ``zero_mode`` is ``"symbol"`` (use the symbol's own value at k = 0),
    ``"annihilate"``, ``"keep"`` (value 1) or a number.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = _symbol_values(grid, symbol)
    return _apply_zero_rule(grid, raw, zero_mode)


def fourier_multiplier(f: ScalarField, symbol: Symbol, zero_mode="symbol") -> ScalarField:
    """Return g with g_hat(k) = symbol(k) f_hat(k).

    ``symbol`` is either an array over the modes or a callable of |k|^2. The view
    (physical/spectral) of the result matches the input.
    """
    sym = multiplier_array(f.grid, symbol, zero_mode)
    out = sym * f.coefficients()
    if f.spectral:
        return ScalarField(f.grid, out, True)
    return ScalarField(f.grid, f.grid.ifft(out))


# ---------------------------------------------------------------- calculus

def gradient_hat(grid: SpectralGrid, f_hat: np.ndarray) -> np.ndarray:
    return 1j * grid.kd * f_hat


def divergence_hat(grid: SpectralGrid, a_hat: np.ndarray) -> np.ndarray:
    return 1j * np.sum(grid.kd * a_hat, axis=0)


def gradient(f: ScalarField) -> VectorField:
    return VectorField(f.grid, f.grid.ifft(gradient_hat(f.grid, f.coefficients())).real)


def complex_gradient(f: ScalarField) -> np.ndarray:
    return f.grid.ifft(gradient_hat(f.grid, f.coefficients()))


def divergence(a: VectorField) -> ScalarField:
    return ScalarField(a.grid, a.grid.ifft(divergence_hat(a.grid, a.coefficients())))


def laplacian(f: ScalarField) -> ScalarField:
    return fourier_multiplier(f, -f.grid.k2)


def inverse_laplacian_hat(grid: SpectralGrid, f_hat: np.ndarray) -> np.ndarray:
    """Delta^{-1} with the mean-zero convention (k = 0 annihilated)."""
    inv = np.zeros(grid.shape)
    nz = grid.k2 > 0
    inv[nz] = -1.0 / grid.k2[nz]
    return inv * f_hat


def curl(a: VectorField) -> Union[ScalarField, VectorField]:
    """Scalar curl in 2D, vector curl in 3D."""
    g = a.grid
    ah = a.coefficients()
    if g.dims == 2:
        c = 1j * (g.kd[0] * ah[1] - g.kd[1] * ah[0])
        return ScalarField(g, g.ifft(c).real)
    if g.dims == 3:
        k = g.kd
        c = 1j * np.stack([k[1] * ah[2] - k[2] * ah[1],
                           k[2] * ah[0] - k[0] * ah[2],
                           k[0] * ah[1] - k[1] * ah[0]])
        return VectorField(g, g.ifft(c).real)
    raise DegenerateProjectionError("curl undefined in 1D")


def dealiased_product(grid: SpectralGrid, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pointwise product with the 2/3-rule applied to the output (physical in/out)."""
    return grid.ifft(grid.dealias(grid.fft(a * b)))


# ---------------------------------------------------------------- projection

def leray_project_hat(grid: SpectralGrid, a_hat: np.ndarray) -> np.ndarray:
    kd = grid.kd
    kk = np.sum(kd**2, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(kk > 0, 1.0 / kk, 0.0)
    kdota = np.sum(kd * a_hat, axis=0)
    return a_hat - kd * (kdota * inv)


def leray_project(a: VectorField) -> VectorField:
    """Solenoidal projection a - grad div Delta^{-1} a, zero mode unchanged."""
    if a.grid.dims == 1:
        raise DegenerateProjectionError("projection degenerate in 1D")
    return VectorField.from_coefficients(a.grid, leray_project_hat(a.grid, a.coefficients()))


def newtonian_potential(rho: ScalarField) -> ScalarField:
    """phi = (-Delta)^{-1} rho with phi_hat(0) = 0 (uniform neutralizing background)."""
    g = rho.grid
    phi_hat = -inverse_laplacian_hat(g, rho.coefficients())
    return ScalarField(g, g.ifft(phi_hat).real)


# ---------------------------------------------------------------- norms

def _lp(grid: SpectralGrid, mag: np.ndarray, p: float) -> float:
    if math.isinf(p):
        return float(np.max(mag))
    return float((np.sum(mag**p) * grid.cell_volume) ** (1.0 / p))


def sobolev_norm(f: ScalarField, idx: SobolevIndex) -> float:
    """||Omega^s f||_p; Parseval for p = 2, grid quadrature otherwise."""
    g = f.grid
    c = f.coefficients()
    if idx.p == 2:
        w = (1.0 + g.k2) ** idx.s
        return float(math.sqrt(np.sum(w * np.abs(c) ** 2) * g.volume) / g.npoints)
    vals = c if idx.s == 0 else bessel_symbol(idx.s)(g.k2) * c
    return _lp(g, np.abs(g.ifft(vals)), idx.p)


def vector_sobolev_norm(a: Union[VectorField, np.ndarray], idx: SobolevIndex,
                        grid: SpectralGrid | None = None) -> float:
    """H^{s,p} norm of a vector field: L^p of the pointwise Euclidean length of Omega^s a."""
    if isinstance(a, VectorField):
        grid, vals = a.grid, a.values
    else:
        vals = a
    c = grid.fft(vals)
    if idx.p == 2:
        w = (1.0 + grid.k2) ** idx.s
        return float(math.sqrt(np.sum(w * np.abs(c) ** 2) * grid.volume) / grid.npoints)
    if idx.s != 0:
        c = bessel_symbol(idx.s)(grid.k2) * c
    comps = grid.ifft(c)
    mag = np.sqrt(np.sum(np.abs(comps) ** 2, axis=0))
    return _lp(grid, mag, idx.p)


def time_lebesgue(values: np.ndarray, dt: float, q: float) -> float:
    """L^q norm in time of sampled nonnegative values by the trapezoid rule."""
    values = np.asarray(values, dtype=float)
    if math.isinf(q):
        return float(np.max(values))
    w = np.full(values.shape, dt)
    w[0] = w[-1] = dt / 2
    return float(np.sum(w * values**q) ** (1.0 / q))


def spacetime_norm(traj, q: float, idx: SobolevIndex) -> float:
    """L^q(I; H^{s,p}) norm of a time-sampled scalar or vector field."""
    if len(traj) < 2:
        raise ValueError("trajectory needs at least two samples")
    if q < 1:
        raise ValueError("time exponent q must be >= 1")
    norms = traj.norm_series(idx)
    return time_lebesgue(norms, traj.dt, q)


def admissible_pair_beta(r: float) -> float:
    """beta(r) = 1 - 2/r for Strichartz-admissible r in [2, inf)."""
    if not (2 <= r < math.inf):
        raise InadmissibleExponentError(f"inadmissible exponent r = {r}")
    return 1.0 - 2.0 / r


def admissible_pair_q(r: float) -> float:
    """Time exponent q = 2/beta(r) paired with r (inf when r = 2)."""
    beta = admissible_pair_beta(r)
    return math.inf if beta == 0 else 2.0 / beta
