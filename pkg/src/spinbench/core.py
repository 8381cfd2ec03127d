"""Spin systems, lab-frame orientations and C2-related subsites.

The lab frame is the orthogonal optical-extinction frame (D1, D2, b),
indexed 0, 1, 2. Matrices are stored in that frame: g dimensionless,
hyperfine and quadrupole couplings in MHz. Fields are in mT.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

__all__ = [
    "SpinSystem",
    "Orientation",
    "SubsiteFamily",
    "PLANES",
    "C2_ROTATION_B",
    "make_subsite_family",
    "c2_conjugate",
    "field_vector",
    "load_spin_systems",
    "spin_system_from_dict",
    "spin_system_to_dict",
]

# 180 degree rotation about b
C2_ROTATION_B = np.diag([-1.0, -1.0, 1.0])

PLANES = ("bD1", "bD2", "D1D2")

_SYM_RTOL = 1e-9


def _as_spin(value: Any) -> float:
    spin = float(Fraction(str(value))) if isinstance(value, str) else float(value)
    if spin < 0 or abs(2 * spin - round(2 * spin)) > 1e-12:
        raise ValueError(f"spin quantum number must be a non-negative multiple of 1/2, got {value!r}")
    return spin


def _as_matrix(value: Any, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.shape == (9,):
        arr = arr.reshape(3, 3)
    if arr.shape != (3, 3):
        raise ValueError(f"{name} must be 3x3 or a row-major 9-element array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


def _check_symmetric(m: np.ndarray, name: str) -> None:
    scale = max(np.abs(m).max(), 1.0)
    if np.abs(m - m.T).max() > _SYM_RTOL * scale:
        raise ValueError(f"{name} must be symmetric")


@dataclass(frozen=True, eq=False)
class SpinSystem:
    """One electron spin coupled to one nucleus at a single dopant subsite.

    Parameters
    ----------
    electron_spin, nuclear_spin : float
        Half-integer spin quantum numbers (``nuclear_spin=0`` for an even isotope).
    g_matrix : (3, 3) array
        Electron Zeeman matrix.
    hyperfine_matrix, quadrupole_matrix : (3, 3) array
        Couplings in MHz; both symmetric, quadrupole traceless.
    g_n : float
        Nuclear g factor.
    site_label : str
        Free-form subsite identifier, e.g. ``"I.1"``.
    """

    electron_spin: float = 0.5
    nuclear_spin: float = 0.0
    g_matrix: np.ndarray = field(default_factory=lambda: 2.0 * np.eye(3))
    hyperfine_matrix: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    quadrupole_matrix: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    g_n: float = 0.0
    site_label: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "electron_spin", _as_spin(self.electron_spin))
        object.__setattr__(self, "nuclear_spin", _as_spin(self.nuclear_spin))
        if self.electron_spin == 0:
            raise ValueError("electron_spin must be positive")
        for name in ("g_matrix", "hyperfine_matrix", "quadrupole_matrix"):
            object.__setattr__(self, name, _as_matrix(getattr(self, name), name))
        _check_symmetric(self.hyperfine_matrix, "hyperfine_matrix")
        _check_symmetric(self.quadrupole_matrix, "quadrupole_matrix")
        q = self.quadrupole_matrix
        if abs(np.trace(q)) > _SYM_RTOL * max(np.abs(q).max(), 1.0):
            raise ValueError("quadrupole_matrix must be traceless")
        object.__setattr__(self, "g_n", float(self.g_n))
        object.__setattr__(self, "site_label", str(self.site_label))

    @property
    def electron_dim(self) -> int:
        return int(round(2 * self.electron_spin)) + 1

    @property
    def nuclear_dim(self) -> int:
        return int(round(2 * self.nuclear_spin)) + 1

    @property
    def dim(self) -> int:
        return self.electron_dim * self.nuclear_dim

    def transformed(self, rotation: np.ndarray, site_label: str | None = None) -> "SpinSystem":
        """Return a copy with every interaction matrix conjugated by ``rotation``."""
        r = np.asarray(rotation, dtype=float)
        return SpinSystem(
            electron_spin=self.electron_spin,
            nuclear_spin=self.nuclear_spin,
            g_matrix=r @ self.g_matrix @ r.T,
            hyperfine_matrix=_symmetrize(r @ self.hyperfine_matrix @ r.T),
            quadrupole_matrix=_symmetrize(r @ self.quadrupole_matrix @ r.T),
            g_n=self.g_n,
            site_label=self.site_label if site_label is None else site_label,
            metadata=dict(self.metadata),
        )

    def __repr__(self):
        return (
            f"SpinSystem(S={self.electron_spin:g}, I={self.nuclear_spin:g}, "
            f"site_label={self.site_label!r})"
        )


def _symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def c2_conjugate(matrix: np.ndarray) -> np.ndarray:
    """Conjugate a 3x3 matrix by the C2 rotation about b."""
    r = C2_ROTATION_B
    return r @ np.asarray(matrix, dtype=float) @ r.T


@dataclass(frozen=True)
class SubsiteFamily:
    """A crystallographic site and its C2 partner subsite."""

    base: SpinSystem
    partner: SpinSystem

    @property
    def members(self) -> tuple[SpinSystem, SpinSystem]:
        return (self.base, self.partner)


def _partner_label(label: str) -> str:
    if label.endswith(".1"):
        return label[:-2] + ".2"
    return f"{label}'" if label else "partner"


def make_subsite_family(base: SpinSystem, partner_label: str | None = None) -> SubsiteFamily:
    """Build the magnetically inequivalent partner of ``base`` by C2 about b.

    Symmetry of the hyperfine and quadrupole matrices is enforced by the
    :class:`SpinSystem` constructor, so non-symmetric input never reaches here.
    """
    label = _partner_label(base.site_label) if partner_label is None else partner_label
    return SubsiteFamily(base=base, partner=base.transformed(C2_ROTATION_B, site_label=label))


@dataclass(frozen=True, eq=False)
class Orientation:
    """Static-field direction in the (D1, D2, b) frame.

    Build with :meth:`from_plane` for in-plane sweeps (keeps the plane and
    angle, which fix the default microwave polarization) or
    :meth:`from_vector` for an arbitrary direction.
    """

    direction: np.ndarray
    plane: str | None = None
    angle_deg: float | None = None

    def __post_init__(self):
        d = np.array(self.direction, dtype=float).reshape(3)
        norm = np.linalg.norm(d)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"direction must have unit norm, got |d| = {norm!r}")
        d.setflags(write=False)
        object.__setattr__(self, "direction", d)

    @classmethod
    def from_vector(cls, vector: Sequence[float]) -> "Orientation":
        v = np.asarray(vector, dtype=float).reshape(3)
        norm = np.linalg.norm(v)
        if norm == 0:
            raise ValueError("direction vector must be non-zero")
        return cls(v / norm)

    @classmethod
    def from_plane(cls, plane: str, angle_deg: float) -> "Orientation":
        """Direction at ``angle_deg`` in a lab plane.

        ``bD1`` and ``bD2`` angles are measured from b towards D1 / D2;
        ``D1D2`` angles from D1 towards D2.
        """
        d, _ = _plane_vectors(plane, angle_deg)
        return cls(d, plane=plane, angle_deg=float(angle_deg))

    def default_e_perp(self) -> np.ndarray:
        """Unit vector perpendicular to the field used as MW polarization.

        In-plane normal when the orientation came from a plane sweep,
        otherwise the lab axis least aligned with the field,
        orthogonalized against it.
        """
        if self.plane is not None:
            return _plane_vectors(self.plane, self.angle_deg)[1]
        d = self.direction
        axis = np.eye(3)[int(np.argmin(np.abs(d)))]
        e = axis - d * np.dot(axis, d)
        return e / np.linalg.norm(e)


def _plane_vectors(plane: str, angle_deg: float) -> tuple[np.ndarray, np.ndarray]:
    t = math.radians(angle_deg)
    c, s = math.cos(t), math.sin(t)
    if plane == "bD1":
        return np.array([s, 0.0, c]), np.array([c, 0.0, -s])
    if plane == "bD2":
        return np.array([0.0, s, c]), np.array([0.0, c, -s])
    if plane == "D1D2":
        return np.array([c, s, 0.0]), np.array([-s, c, 0.0])
    raise ValueError(f"unknown plane {plane!r}; expected one of {PLANES}")


def field_vector(orientation: Orientation, magnitude: float) -> np.ndarray:
    """Static field vector in mT."""
    if magnitude < 0:
        raise ValueError("field magnitude must be non-negative")
    return float(magnitude) * orientation.direction


# -- parameter files ---------------------------------------------------------

def spin_system_from_dict(d: dict) -> SpinSystem:
    """Build a :class:`SpinSystem` from a parameter-file record."""
    missing = {"electron_spin", "nuclear_spin", "g"} - set(d)
    if missing:
        raise ValueError(f"spin-system record missing keys: {sorted(missing)}")
    known = {"electron_spin", "nuclear_spin", "g", "A_MHz", "Q_MHz", "g_n", "site_label", "c2_partner"}
    return SpinSystem(
        electron_spin=d["electron_spin"],
        nuclear_spin=d["nuclear_spin"],
        g_matrix=d["g"],
        hyperfine_matrix=d.get("A_MHz", np.zeros(9)),
        quadrupole_matrix=d.get("Q_MHz", np.zeros(9)),
        g_n=d.get("g_n", 0.0),
        site_label=d.get("site_label", ""),
        metadata={k: v for k, v in d.items() if k not in known},
    )


def spin_system_to_dict(system: SpinSystem) -> dict:
    out = {
        "electron_spin": system.electron_spin,
        "nuclear_spin": system.nuclear_spin,
        "g": system.g_matrix.ravel().tolist(),
        "A_MHz": system.hyperfine_matrix.ravel().tolist(),
        "Q_MHz": system.quadrupole_matrix.ravel().tolist(),
        "g_n": system.g_n,
        "site_label": system.site_label,
    }
    out.update(system.metadata)
    return out


def load_spin_systems(path: str | Path) -> list[SpinSystem]:
    """Read one or more spin systems from a JSON parameter file.

    Accepts a single record, a list of records, or an object with a
    ``"systems"`` list. Records flagged ``"c2_partner": true`` also
    contribute their C2 partner.
    """
    with open(path) as fh:
        doc = json.load(fh)
    return spin_systems_from_json(doc)


def spin_systems_from_json(doc: Any) -> list[SpinSystem]:
    if isinstance(doc, dict) and "systems" in doc:
        records: Iterable = doc["systems"]
    elif isinstance(doc, dict):
        records = [doc]
    else:
        records = doc
    systems = []
    for rec in records:
        system = spin_system_from_dict(rec)
        systems.append(system)
        if rec.get("c2_partner"):
            systems.append(make_subsite_family(system).partner)
    if not systems:
        raise ValueError("parameter file defines no spin systems")
    return systems
