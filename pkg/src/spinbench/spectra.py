"""EPR transition moments, line classification and resonance-field search.

Resonances at fixed microwave frequency are located by scanning every
level pair over a field grid and refining each sign change of
``f(B) = E_j(B) - E_i(B) - nu`` with Brent's method. Transition frequencies of a
strongly mixed hyperfine system are not monotonic in B, so no analytic
inversion is attempted.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from ._parallel import max_workers
from .constants import DEFAULT_CONSTANTS, PhysicalConstants
from .core import Orientation, SpinSystem, SubsiteFamily
from .hamiltonian import (
    EigenSystem,
    build_hamiltonian,
    eigensystem,
    hamiltonian_terms,
    spin_operators,
)

__all__ = [
    "Transition",
    "StickLine",
    "StickSpectrum",
    "RotationPattern",
    "ResonanceSearchWarning",
    "moment_operator",
    "moment_matrix",
    "transition_dipole",
    "classify",
    "enumerate_transitions",
    "nmr_transitions",
    "resonance_fields",
    "rotation_pattern",
    "apparent_g",
    "DEFAULT_GRID_STEP_MT",
    "DEFAULT_MOMENT_FLOOR",
]

DEFAULT_GRID_STEP_MT = 0.5
DEFAULT_MOMENT_FLOOR = 1e-4
ROOT_XTOL_MT = 1e-9
EPR_KINDS = ("allowed", "forbidden")


class ResonanceSearchWarning(UserWarning):
    """Two roots of one level pair fell within a grid step of each other."""


@dataclass(frozen=True)
class Transition:
    """A level pair with its frequency (MHz) and moment (units of muB)."""

    lower_index: int
    upper_index: int
    frequency: float
    dipole_moment: float
    kind: str
    delta_MI: int
    delta_MS: int = 1
    lower_label: tuple | None = None
    upper_label: tuple | None = None


def classify(delta_ms: float, delta_mi: float) -> str:
    if abs(abs(delta_ms) - 1) < 1e-9:
        if abs(delta_mi) < 1e-9:
            return "allowed"
        if abs(abs(delta_mi) - 1) < 1e-9:
            return "forbidden"
    return "other"


def moment_operator(system: SpinSystem, e_perp) -> np.ndarray:
    """e.g.S, the Zeeman coupling to a unit oscillating field along ``e_perp``.

    This is the operator that multiplies muB*B1 in the Hamiltonian, so it
    reduces to S.g.e for the usual symmetric g matrix.
    """
    S = spin_operators(system).S
    coeff = np.asarray(e_perp, dtype=float) @ system.g_matrix
    return coeff[0] * S[0] + coeff[1] * S[1] + coeff[2] * S[2]


def _check_e_perp(e_perp, field_direction) -> np.ndarray:
    e = np.asarray(e_perp, dtype=float).reshape(3)
    if abs(np.linalg.norm(e) - 1.0) > 1e-9:
        raise ValueError("e_perp must be a unit vector")
    if field_direction is not None:
        d = np.asarray(field_direction, dtype=float).reshape(3)
        nd = np.linalg.norm(d)
        if nd > 0 and abs(np.dot(e, d / nd)) > 1e-9:
            raise ValueError("e_perp is not perpendicular to the static field")
    return e


def moment_matrix(eig: EigenSystem, system: SpinSystem, e_perp, field_direction=None) -> np.ndarray:
    """Matrix of |<a_i| e.g.S |a_j>| over all eigenstate pairs, exactly symmetric."""
    e = _check_e_perp(e_perp, field_direction)
    v = eig.states
    m = np.abs(v.conj().T @ moment_operator(system, e) @ v)
    upper = np.triu(m)
    return upper + np.triu(m, 1).T


def transition_dipole(
    eig: EigenSystem, i: int, j: int, system: SpinSystem, e_perp, field_direction=None
) -> float:
    """Magnetic transition moment between eigenstates ``i`` and ``j`` in muB."""
    if i == j:
        raise ValueError("transition needs two distinct states")
    e = _check_e_perp(e_perp, field_direction)
    v = eig.states
    i, j = min(i, j), max(i, j)
    return float(abs(v[:, i].conj() @ moment_operator(system, e) @ v[:, j]))


def _require_labels(eig: EigenSystem):
    if eig.ms is None:
        raise ValueError("eigensystem has no (M_S, M_I) labels; diagonalize with the spin system")


def _make_transition(eig, i, j, moments) -> Transition:
    lo, hi = (i, j) if eig.energies[i] <= eig.energies[j] else (j, i)
    dms = eig.ms[hi] - eig.ms[lo]
    dmi = eig.mi[hi] - eig.mi[lo]
    return Transition(
        lower_index=int(lo),
        upper_index=int(hi),
        frequency=float(eig.energies[hi] - eig.energies[lo]),
        dipole_moment=float(moments[lo, hi]),
        kind=classify(dms, dmi),
        delta_MI=int(round(dmi)),
        delta_MS=int(round(dms)),
        lower_label=(float(eig.ms[lo]), float(eig.mi[lo])),
        upper_label=(float(eig.ms[hi]), float(eig.mi[hi])),
    )


def enumerate_transitions(
    eig: EigenSystem,
    system: SpinSystem,
    e_perp,
    moment_floor: float = DEFAULT_MOMENT_FLOOR,
    field_direction=None,
) -> list[Transition]:
    """All |dM_S| = 1 pairs whose moment reaches ``moment_floor``, by frequency."""
    if moment_floor < 0:
        raise ValueError("moment_floor must be non-negative")
    _require_labels(eig)
    moments = moment_matrix(eig, system, e_perp, field_direction)
    out = []
    n = len(eig)
    for i in range(n):
        for j in range(i + 1, n):
            if abs(abs(eig.ms[j] - eig.ms[i]) - 1) > 1e-9:
                continue
            if moments[i, j] < moment_floor:
                continue
            out.append(_make_transition(eig, i, j, moments))
    out.sort(key=lambda t: (t.frequency, t.lower_index, t.upper_index))
    return out


def nmr_transitions(eig: EigenSystem, max_delta_mi: int = 1) -> list[Transition]:
    """Pairs inside one M_S manifold with |dM_I| <= ``max_delta_mi``.

    Moments are left at zero: nuclear drive strength is specified directly
    as an RF Rabi frequency in the pulse engine.
    """
    _require_labels(eig)
    zeros = np.zeros((len(eig), len(eig)))
    out = []
    for i in range(len(eig)):
        for j in range(i + 1, len(eig)):
            if abs(eig.ms[i] - eig.ms[j]) > 1e-9:
                continue
            if 0 < abs(eig.mi[i] - eig.mi[j]) <= max_delta_mi + 1e-9:
                out.append(_make_transition(eig, i, j, zeros))
    out.sort(key=lambda t: t.frequency)
    return out


@dataclass(frozen=True)
class StickLine:
    field_mT: float
    moment: float
    lower: int
    upper: int
    kind: str
    delta_MI: int
    subsite: str = ""
    angle_deg: float = float("nan")
    lower_label: tuple | None = None
    upper_label: tuple | None = None


@dataclass(frozen=True)
class StickSpectrum:
    """Resonance lines sorted by field."""

    lines: tuple[StickLine, ...]
    mw_frequency_ghz: float
    field_range: tuple[float, float]
    warnings: tuple[str, ...] = ()

    def __len__(self):
        return len(self.lines)

    def __iter__(self):
        return iter(self.lines)

    @property
    def fields(self) -> np.ndarray:
        return np.array([ln.field_mT for ln in self.lines])

    @property
    def moments(self) -> np.ndarray:
        return np.array([ln.moment for ln in self.lines])

    def count(self, kind: str) -> int:
        return sum(1 for ln in self.lines if ln.kind == kind)

    @classmethod
    def merge(cls, spectra: Sequence["StickSpectrum"]) -> "StickSpectrum":
        lines = sorted(
            (ln for s in spectra for ln in s.lines),
            key=lambda ln: (ln.field_mT, ln.subsite, ln.lower, ln.upper),
        )
        first = spectra[0]
        warns = tuple(w for s in spectra for w in s.warnings)
        return cls(tuple(lines), first.mw_frequency_ghz, first.field_range, warns)


def _field_grid(field_range, grid_step) -> np.ndarray:
    lo, hi = (float(x) for x in field_range)
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo < 0 or hi <= lo:
        raise ValueError(f"field_range must satisfy 0 <= low < high, got {field_range!r}")
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    return np.append(np.arange(lo, hi, grid_step), hi)


def _resonance_search(
    system: SpinSystem,
    orientation: Orientation,
    mw_frequency_ghz: float,
    field_range,
    grid_step: float,
    moment_floor: float,
    kinds,
    e_perp,
    subsite: str | None,
    constants: PhysicalConstants,
) -> StickSpectrum:
    if mw_frequency_ghz <= 0:
        raise ValueError("microwave frequency must be positive")
    nu = 1e3 * float(mw_frequency_ghz)
    grid = _field_grid(field_range, grid_step)
    direction = orientation.direction
    e = orientation.default_e_perp() if e_perp is None else e_perp
    e = _check_e_perp(e, direction)
    h0, z = hamiltonian_terms(system, constants)
    zdir = np.tensordot(direction, z, axes=1)

    def gap(b, i, j):
        ev = np.linalg.eigvalsh(h0 + b * zdir)
        return ev[j] - ev[i] - nu

    h_grid = h0[None] + grid[:, None, None] * zdir[None]
    e_grid = np.linalg.eigvalsh(h_grid)
    n = system.dim
    label = system.site_label if subsite is None else subsite
    lines, messages = [], []
    for i in range(n):
        for j in range(i + 1, n):
            f = e_grid[:, j] - e_grid[:, i] - nu
            cells = np.nonzero((f[:-1] * f[1:] < 0) | (f[:-1] == 0))[0]
            if f[-1] == 0:
                cells = np.append(cells, len(f) - 1)
            roots = []
            for k in cells:
                if f[k] == 0:
                    roots.append(grid[k])
                    continue
                roots.append(brentq(gap, grid[k], grid[k + 1], args=(i, j), xtol=ROOT_XTOL_MT))
            for r0, r1 in zip(roots, roots[1:]):
                if r1 - r0 < grid_step:
                    messages.append(
                        f"pair ({i},{j}) of {label or 'system'}: roots at {r0:.4f} and {r1:.4f} mT "
                        f"closer than grid step {grid_step} mT; crossings may be missed"
                    )
            for root in roots:
                bvec = root * direction
                eig = eigensystem(build_hamiltonian(system, bvec, constants), system, bvec)
                v = eig.states
                moment = float(abs(v[:, i].conj() @ moment_operator(system, e) @ v[:, j]))
                dms = eig.ms[j] - eig.ms[i]
                dmi = eig.mi[j] - eig.mi[i]
                kind = classify(dms, dmi)
                if kinds is not None and kind not in kinds:
                    continue
                if moment < moment_floor:
                    continue
                lines.append(
                    StickLine(
                        field_mT=float(root),
                        moment=moment,
                        lower=i,
                        upper=j,
                        kind=kind,
                        delta_MI=int(round(dmi)),
                        subsite=label,
                        angle_deg=float("nan") if orientation.angle_deg is None else orientation.angle_deg,
                        lower_label=(float(eig.ms[i]), float(eig.mi[i])),
                        upper_label=(float(eig.ms[j]), float(eig.mi[j])),
                    )
                )
    lines.sort(key=lambda ln: (ln.field_mT, ln.lower, ln.upper))
    lo, hi = float(field_range[0]), float(field_range[1])
    return StickSpectrum(tuple(lines), float(mw_frequency_ghz), (lo, hi), tuple(messages))


def resonance_fields(
    system: SpinSystem,
    orientation: Orientation,
    mw_frequency_ghz: float,
    field_range=(0.0, 1500.0),
    grid_step: float = DEFAULT_GRID_STEP_MT,
    moment_floor: float = DEFAULT_MOMENT_FLOOR,
    kinds: Iterable[str] | None = EPR_KINDS,
    e_perp=None,
    subsite: str | None = None,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
) -> StickSpectrum:
    """Field-swept stick spectrum at fixed microwave frequency.

    Parameters
    ----------
    mw_frequency_ghz : float
        Microwave frequency.
    field_range : (low, high)
        Search interval in mT.
    kinds : iterable of str or None
        Line classes to keep; ``None`` keeps every pair including
        ``"other"`` (|dM_I| > 1 or dM_S != +-1).
    e_perp : 3-vector, optional
        MW polarization; defaults to :meth:`Orientation.default_e_perp`.

    Emits :class:`ResonanceSearchWarning` when two roots of one pair are
    closer than ``grid_step``.
    """
    kinds = None if kinds is None else tuple(kinds)
    spec = _resonance_search(
        system, orientation, mw_frequency_ghz, field_range, grid_step,
        moment_floor, kinds, e_perp, subsite, constants,
    )
    for msg in spec.warnings:
        warnings.warn(msg, ResonanceSearchWarning, stacklevel=2)
    return spec


@dataclass(frozen=True)
class RotationPattern:
    plane: str
    angles: np.ndarray
    spectra: tuple[StickSpectrum, ...]
    mw_frequency_ghz: float = 0.0
    subsites: tuple[str, ...] = field(default=())

    def lines(self) -> list[StickLine]:
        return [ln for s in self.spectra for ln in s.lines]


def _as_system_list(systems) -> list[SpinSystem]:
    if isinstance(systems, SpinSystem):
        return [systems]
    if isinstance(systems, SubsiteFamily):
        return list(systems.members)
    out = []
    for s in systems:
        out.extend(_as_system_list(s))
    return out


def rotation_pattern(
    systems,
    plane: str,
    angle_grid,
    mw_frequency_ghz: float,
    field_range=(0.0, 1500.0),
    grid_step: float = DEFAULT_GRID_STEP_MT,
    moment_floor: float = DEFAULT_MOMENT_FLOOR,
    kinds: Iterable[str] | None = EPR_KINDS,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
) -> RotationPattern:
    """Resonance fields of every subsite over a grid of in-plane angles.

    ``systems`` may be a :class:`SpinSystem`, a :class:`SubsiteFamily` or a
    list of either. Angles are independent and are evaluated on a thread
    pool capped by ``SPINBENCH_THREADS``; output order follows the grid.
    """
    angles = np.asarray(angle_grid, dtype=float)
    if angles.ndim != 1 or len(angles) == 0:
        raise ValueError("angle grid must be a non-empty 1-D sequence")
    if np.any(np.diff(angles) <= 0):
        raise ValueError("angle grid must be strictly increasing")
    if angles[0] < 0 or angles[-1] >= 180:
        raise ValueError("angles must lie in [0, 180) degrees")
    members = _as_system_list(systems)
    labels = [m.site_label or f"site{k}" for k, m in enumerate(members)]
    kinds = None if kinds is None else tuple(kinds)

    def at_angle(angle):
        orient = Orientation.from_plane(plane, angle)
        parts = [
            _resonance_search(
                m, orient, mw_frequency_ghz, field_range, grid_step,
                moment_floor, kinds, None, lab, constants,
            )
            for m, lab in zip(members, labels)
        ]
        return StickSpectrum.merge(parts)

    workers = max_workers()
    if workers > 1 and len(angles) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            spectra = list(pool.map(at_angle, angles))
    else:
        spectra = [at_angle(a) for a in angles]
    for angle, spec in zip(angles, spectra):
        for msg in spec.warnings:
            warnings.warn(f"angle {angle:g} deg: {msg}", ResonanceSearchWarning, stacklevel=2)
    return RotationPattern(
        plane=plane, angles=angles, spectra=tuple(spectra),
        mw_frequency_ghz=float(mw_frequency_ghz), subsites=tuple(labels),
    )


def apparent_g(field_mT: float, mw_frequency_ghz: float, constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """g value that would put a bare Zeeman line at ``field_mT``: h nu / (muB B)."""
    return 1e3 * mw_frequency_ghz / (constants.mu_b_mhz_per_mt * field_mT)
