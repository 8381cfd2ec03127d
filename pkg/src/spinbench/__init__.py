"""Spin-Hamiltonian spectra, relaxation models, pulse simulation and fitting
for electron-nuclear spin systems in low-symmetry crystals."""

from .constants import DEFAULT_CONSTANTS, PhysicalConstants
from .core import (
    Orientation,
    SpinSystem,
    SubsiteFamily,
    c2_conjugate,
    field_vector,
    load_spin_systems,
    make_subsite_family,
)
from .dynamics import (
    ELECTRON_FLIPFLOP,
    NUCLEAR_FLIPFLOP,
    FlipFlopModel,
    SlrModel,
    boltzmann_populations,
    effective_g,
    effective_zeeman_temperature,
    flipflop_rate,
    slr_rate,
)
from .fitting import (
    EchoDecayTrace,
    FitResult,
    fit_exponential_decay,
    fit_exponential_recovery,
    fit_flipflop_model,
    fit_mims,
    fit_slr_model,
)
from .hamiltonian import EigenSystem, build_hamiltonian, diagonalize, eigensystem
from .pulsesim import PulseSequence, RelaxationSpec, davies_endor, run_sequence
from .spectra import (
    StickSpectrum,
    Transition,
    enumerate_transitions,
    resonance_fields,
    rotation_pattern,
    transition_dipole,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_CONSTANTS",
    "PhysicalConstants",
    "EigenSystem",
    "build_hamiltonian",
    "diagonalize",
    "eigensystem",
    "PulseSequence",
    "RelaxationSpec",
    "davies_endor",
    "run_sequence",
    "Orientation",
    "SpinSystem",
    "SubsiteFamily",
    "c2_conjugate",
    "field_vector",
    "load_spin_systems",
    "make_subsite_family",
    "ELECTRON_FLIPFLOP",
    "NUCLEAR_FLIPFLOP",
    "FlipFlopModel",
    "SlrModel",
    "boltzmann_populations",
    "effective_g",
    "effective_zeeman_temperature",
    "flipflop_rate",
    "slr_rate",
    "EchoDecayTrace",
    "FitResult",
    "fit_exponential_decay",
    "fit_exponential_recovery",
    "fit_flipflop_model",
    "fit_mims",
    "fit_slr_model",
    "StickSpectrum",
    "Transition",
    "enumerate_transitions",
    "resonance_fields",
    "rotation_pattern",
    "transition_dipole",
]
