"""Physical constants expressed as frequencies.

Energies in this package are carried as frequencies (E/h), so the only
constants needed are the magnetons and Boltzmann's constant divided by
Planck's constant. Values are CODATA 2018 via :mod:`scipy.constants`.
"""

from dataclasses import dataclass, replace

from scipy.constants import physical_constants as _pc

__all__ = ["PhysicalConstants", "DEFAULT_CONSTANTS"]


@dataclass(frozen=True)
class PhysicalConstants:
    """Magneton and Boltzmann constants divided by h.

    Attributes
    ----------
    bohr_magneton_over_h : float
        GHz/T (numerically equal to MHz/mT).
    nuclear_magneton_over_h : float
        MHz/T.
    boltzmann_over_h : float
        GHz/K.
    """

    bohr_magneton_over_h: float = _pc["Bohr magneton in Hz/T"][0] * 1e-9
    nuclear_magneton_over_h: float = _pc["nuclear magneton in MHz/T"][0]
    boltzmann_over_h: float = _pc["Boltzmann constant in Hz/K"][0] * 1e-9

    @property
    def mu_b_mhz_per_mt(self) -> float:
        return self.bohr_magneton_over_h

    @property
    def mu_n_mhz_per_mt(self) -> float:
        return self.nuclear_magneton_over_h * 1e-3

    @property
    def k_b_mhz_per_k(self) -> float:
        return self.boltzmann_over_h * 1e3

    def with_overrides(self, **overrides) -> "PhysicalConstants":
        unknown = set(overrides) - set(self.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown constant(s): {sorted(unknown)}")
        return replace(self, **{k: float(v) for k, v in overrides.items()})


DEFAULT_CONSTANTS = PhysicalConstants()
