"""Pseudospectral laboratory for the Maxwell-Schrodinger system on a periodic torus."""
from .spectral import (
    SpectralGrid,
    ScalarField,
    VectorField,
    SobolevIndex,
    fourier_multiplier,
    sobolev_norm,
    vector_sobolev_norm,
    leray_project,
    newtonian_potential,
    spacetime_norm,
    admissible_pair_beta,
    admissible_pair_q,
)
from .fields import (
    TimeSampledField,
    CoulombData,
    LorentzData,
    TemporalData,
    CoulombState,
    make_coulomb_data,
    make_lorentz_data,
    make_temporal_data,
    mollify,
    random_band_limited,
    random_vector_field,
    save_container,
    load_container,
)
from .schrodinger import PotentialTrack, apply_hamiltonian, evolve, evolve_inhomogeneous, charge
from .kleingordon import kg_propagate, wave_propagate, current_density
from .fixedpoint import (
    Iterate,
    ContractionReport,
    phi_map,
    metric_d,
    metric_tilde_d,
    solve_msc,
    residual_msc,
    energy,
)

__version__ = "0.1.0"

__all__ = [
    "SpectralGrid",
    "ScalarField",
    "VectorField",
    "SobolevIndex",
    "fourier_multiplier",
    "sobolev_norm",
    "vector_sobolev_norm",
    "leray_project",
    "newtonian_potential",
    "spacetime_norm",
    "admissible_pair_beta",
    "admissible_pair_q",
    "TimeSampledField",
    "CoulombData",
    "LorentzData",
    "TemporalData",
    "CoulombState",
    "make_coulomb_data",
    "make_lorentz_data",
    "make_temporal_data",
    "mollify",
    "random_band_limited",
    "random_vector_field",
    "save_container",
    "load_container",
    "PotentialTrack",
    "apply_hamiltonian",
    "evolve",
    "evolve_inhomogeneous",
    "charge",
    "kg_propagate",
    "wave_propagate",
    "current_density",
    "Iterate",
    "ContractionReport",
    "phi_map",
    "metric_d",
    "metric_tilde_d",
    "solve_msc",
    "residual_msc",
    "energy",
]
