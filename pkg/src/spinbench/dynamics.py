"""Thermal populations and temperature-dependent relaxation models.

Two rate laws are provided:

* direct-process spin-lattice relaxation, ``1/T1 = A coth(dE / 2 kB T)``;
* indirect flip-flop decoherence summed over subensembles with effective
  Zeeman temperatures ``T_i``::

      1/T2 = sum_i C / ((1 + exp(T_i/T)) (1 + exp(-T_i/T))) + D

Both are written with decaying exponentials only, so they stay finite
for ``T_i / T`` in the hundreds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .constants import DEFAULT_CONSTANTS, PhysicalConstants

__all__ = [
    "SlrModel",
    "FlipFlopModel",
    "boltzmann_populations",
    "effective_g",
    "effective_zeeman_temperature",
    "zeeman_temperature_from_frequency",
    "slr_rate",
    "slr_t1",
    "flipflop_terms",
    "flipflop_terms_cosh",
    "flipflop_rate",
    "flipflop_t2_us",
    "nuclear_flipflop_rate",
    "ELECTRON_FLIPFLOP",
    "NUCLEAR_FLIPFLOP",
]


def _check_temperature(T) -> np.ndarray:
    t = np.asarray(T, dtype=float)
    if np.any(~(t > 0)):
        raise ValueError("temperature must be positive")
    return t


@dataclass(frozen=True)
class SlrModel:
    """Direct-process SLR parameters.

    ``slr_prefactor`` in s^-1, ``transition_energy`` as a frequency in GHz.
    """

    slr_prefactor: float
    transition_energy: float

    def __post_init__(self):
        if not self.slr_prefactor > 0:
            raise ValueError("slr_prefactor must be positive")
        if not self.transition_energy > 0:
            raise ValueError("transition_energy must be positive")


@dataclass(frozen=True)
class FlipFlopModel:
    """Flip-flop decoherence parameters; rates in ms^-1, temperatures in K."""

    coupling_C: float
    residual_D: float
    zeeman_temperatures: tuple[float, ...]

    def __post_init__(self):
        temps = tuple(float(t) for t in self.zeeman_temperatures)
        object.__setattr__(self, "zeeman_temperatures", temps)
        if self.coupling_C < 0 or self.residual_D < 0:
            raise ValueError("C and D must be non-negative")
        if len(temps) != 4:
            raise ValueError("exactly four subsite Zeeman temperatures are required")
        if any(not t > 0 for t in temps):
            raise ValueError("Zeeman temperatures must be positive")


def boltzmann_populations(
    energies_mhz, T: float, constants: PhysicalConstants = DEFAULT_CONSTANTS
) -> np.ndarray:
    """Normalized thermal populations for level energies in MHz."""
    if not T > 0:
        raise ValueError("temperature must be positive")
    e = np.asarray(energies_mhz, dtype=float)
    x = -(e - e.min()) / (constants.k_b_mhz_per_k * T)
    w = np.exp(x)
    return w / w.sum()


def effective_g(g_matrix, direction) -> float:
    """|g^T n| = sqrt(n . g g^T . n) for a unit field direction n."""
    n = np.asarray(direction, dtype=float).reshape(3)
    if abs(np.linalg.norm(n) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    g = np.asarray(g_matrix, dtype=float)
    return float(math.sqrt(n @ g @ g.T @ n))


def effective_zeeman_temperature(
    g_eff: float, field_mT: float, constants: PhysicalConstants = DEFAULT_CONSTANTS
) -> float:
    """T_i = g_eff muB B / kB in K."""
    if field_mT < 0:
        raise ValueError("field must be non-negative")
    return g_eff * constants.mu_b_mhz_per_mt * field_mT / constants.k_b_mhz_per_k


def zeeman_temperature_from_frequency(
    frequency_ghz: float, constants: PhysicalConstants = DEFAULT_CONSTANTS
) -> float:
    """h nu / kB in K."""
    return frequency_ghz / constants.boltzmann_over_h


def _coth_stable(x: np.ndarray) -> np.ndarray:
    # coth(x) = (1 + e^-2x) / (1 - e^-2x); exactly 1 once e^-2x underflows against 1
    q = np.exp(-2.0 * x)
    out = (1.0 + q) / (-np.expm1(-2.0 * x))
    return np.where(x > 50, 1.0, out)


def slr_rate(model: SlrModel, T, constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """1/T1 in s^-1."""
    t = _check_temperature(T)
    x = model.transition_energy / (2.0 * constants.boltzmann_over_h * t)
    rate = model.slr_prefactor * _coth_stable(x)
    return float(rate) if np.ndim(rate) == 0 else rate


def slr_t1(model: SlrModel, T, constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """T1 in s."""
    return 1.0 / slr_rate(model, T, constants)


def flipflop_terms(zeeman_temperatures: Sequence[float], T) -> np.ndarray:
    """Per-subensemble weights 1/((1+e^x)(1+e^-x)), x = T_i/T.

    Shape ``(len(T), n_sub)`` for array ``T``. Written as
    e^-x / (1 + e^-x)^2, which underflows cleanly to 0 for large x.
    """
    t = _check_temperature(T)
    ti = np.asarray(zeeman_temperatures, dtype=float)
    x = ti[None, :] / np.atleast_1d(t)[:, None]
    q = np.exp(-x)
    return q / (1.0 + q) ** 2


def flipflop_terms_cosh(zeeman_temperatures: Sequence[float], T) -> np.ndarray:
    """Same weights as :func:`flipflop_terms` via 1/(2 + 2 cosh x); cross-check only."""
    t = _check_temperature(T)
    ti = np.asarray(zeeman_temperatures, dtype=float)
    x = ti[None, :] / np.atleast_1d(t)[:, None]
    with np.errstate(over="ignore"):
        return 1.0 / (2.0 + 2.0 * np.cosh(x))


def flipflop_rate(model: FlipFlopModel, T):
    """1/T2 in ms^-1."""
    terms = flipflop_terms(model.zeeman_temperatures, T)
    rate = model.coupling_C * terms.sum(axis=1) + model.residual_D
    return float(rate[0]) if np.ndim(T) == 0 else rate


def flipflop_t2_us(model: FlipFlopModel, T):
    """T2 in microseconds."""
    return 1e3 / flipflop_rate(model, T)


def nuclear_flipflop_rate(model: FlipFlopModel, T):
    """Nuclear coherence rate; identical law with the nuclear (C, D)."""
    return flipflop_rate(model, T)


# Fitted values reported for the 781 mT / 9.56 GHz working point; the first
# Zeeman temperature is h*9.56 GHz / kB.
_REPORTED_ZEEMAN_TEMPS = (zeeman_temperature_from_frequency(9.56), 5.19, 5.91, 7.35)
ELECTRON_FLIPFLOP = FlipFlopModel(60.4, 7.92, _REPORTED_ZEEMAN_TEMPS)
NUCLEAR_FLIPFLOP = FlipFlopModel(22.3, 0.723, _REPORTED_ZEEMAN_TEMPS)
