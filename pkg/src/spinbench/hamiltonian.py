"""Spin Hamiltonian construction and labelled eigensystems.

    H = muB B.g.S + I.A.S + I.Q.I - mun gn B.I

All terms are in MHz with B in mT. Because H is linear in B it is split
into a field-independent part plus three field-linear operators, which
makes dense field sweeps cheap (see :func:`hamiltonian_terms`).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import linear_sum_assignment

from .constants import DEFAULT_CONSTANTS, PhysicalConstants
from .core import SpinSystem

__all__ = [
    "SpinOperators",
    "EigenSystem",
    "spin_matrices",
    "spin_operators",
    "hamiltonian_terms",
    "build_hamiltonian",
    "build_hamiltonians",
    "eigensystem",
    "diagonalize",
    "DEGENERACY_TOL_MHZ",
]

DEGENERACY_TOL_MHZ = 1e-6


@lru_cache(maxsize=None)
def _spin_matrices(two_j: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    j = two_j / 2
    m = j - np.arange(two_j + 1)
    jz = np.diag(m).astype(complex)
    # <m+1|J+|m>
    jp = np.zeros((two_j + 1, two_j + 1), dtype=complex)
    for k in range(1, two_j + 1):
        jp[k - 1, k] = np.sqrt(j * (j + 1) - m[k] * (m[k] + 1))
    jm = jp.conj().T
    jx = 0.5 * (jp + jm)
    jy = -0.5j * (jp - jm)
    for a in (jx, jy, jz):
        a.setflags(write=False)
    return jx, jy, jz


def spin_matrices(j: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Angular-momentum matrices (Jx, Jy, Jz) in the basis m = j, j-1, ..., -j."""
    return _spin_matrices(int(round(2 * j)))


@dataclass(frozen=True, eq=False)
class SpinOperators:
    """Electron and nuclear spin operators on the product space.

    ``S[k]`` and ``I[k]`` are the k-th Cartesian components, ordered like
    the lab frame (D1, D2, b). Product states are ordered with M_S major,
    both projections descending.
    """

    S: tuple[np.ndarray, np.ndarray, np.ndarray]
    I: tuple[np.ndarray, np.ndarray, np.ndarray]

    @property
    def Sx(self):
        return self.S[0]

    @property
    def Sy(self):
        return self.S[1]

    @property
    def Sz(self):
        return self.S[2]

    @property
    def Ix(self):
        return self.I[0]

    @property
    def Iy(self):
        return self.I[1]

    @property
    def Iz(self):
        return self.I[2]


@lru_cache(maxsize=None)
def _operators(two_s: int, two_i: int) -> SpinOperators:
    es = np.eye(two_s + 1)
    ei = np.eye(two_i + 1)
    s_ops = tuple(np.kron(a, ei) for a in _spin_matrices(two_s))
    i_ops = tuple(np.kron(es, a) for a in _spin_matrices(two_i))
    for a in s_ops + i_ops:
        a.setflags(write=False)
    return SpinOperators(S=s_ops, I=i_ops)


def spin_operators(system: SpinSystem) -> SpinOperators:
    return _operators(int(round(2 * system.electron_spin)), int(round(2 * system.nuclear_spin)))


def hamiltonian_terms(
    system: SpinSystem, constants: PhysicalConstants = DEFAULT_CONSTANTS
) -> tuple[np.ndarray, np.ndarray]:
    """Split H into ``(H0, Z)`` with ``H(B) = H0 + sum_k B[k] * Z[k]``.

    ``H0`` holds the hyperfine and quadrupole terms; ``Z`` has shape
    ``(3, dim, dim)`` and holds both Zeeman interactions per mT.
    """
    ops = spin_operators(system)
    S, I = ops.S, ops.I
    A, Q, g = system.hyperfine_matrix, system.quadrupole_matrix, system.g_matrix
    dim = system.dim
    h0 = np.zeros((dim, dim), dtype=complex)
    if system.nuclear_spin > 0:
        for i in range(3):
            for j in range(3):
                if A[i, j]:
                    h0 += A[i, j] * (I[i] @ S[j])
                if Q[i, j]:
                    h0 += Q[i, j] * (I[i] @ I[j])
    mu_b = constants.mu_b_mhz_per_mt
    mu_n = constants.mu_n_mhz_per_mt
    z = np.empty((3, dim, dim), dtype=complex)
    for k in range(3):
        z[k] = mu_b * sum(g[k, j] * S[j] for j in range(3)) - mu_n * system.g_n * I[k]
    return h0, z


def build_hamiltonian(
    system: SpinSystem, field_mT, constants: PhysicalConstants = DEFAULT_CONSTANTS
) -> np.ndarray:
    """Hermitian spin Hamiltonian in MHz for a field vector in mT."""
    b = np.asarray(field_mT, dtype=float).reshape(3)
    h0, z = hamiltonian_terms(system, constants)
    h = h0 + np.tensordot(b, z, axes=1)
    return 0.5 * (h + h.conj().T)


def build_hamiltonians(
    system: SpinSystem, fields_mT, constants: PhysicalConstants = DEFAULT_CONSTANTS
) -> np.ndarray:
    """Stack of Hamiltonians, shape ``(n, dim, dim)``, for ``(n, 3)`` field vectors."""
    b = np.atleast_2d(np.asarray(fields_mT, dtype=float))
    h0, z = hamiltonian_terms(system, constants)
    h = h0[None] + np.einsum("nk,kij->nij", b, z)
    return 0.5 * (h + np.conj(np.swapaxes(h, -1, -2)))


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Ordered eigen-decomposition with optional (M_S, M_I) labels.

    Attributes
    ----------
    energies : (n,) array
        Eigenfrequencies in MHz, ascending.
    states : (n, n) array
        Column eigenvectors in the product basis.
    ms, mi : (n,) array or None
        Dominant electron / nuclear projections per state.
    overlap : (n,) array or None
        Squared overlap of each state with its assigned product state.
    degenerate_groups : list of tuples
        Runs of states whose adjacent gaps are below the degeneracy tolerance.
    """

    energies: np.ndarray
    states: np.ndarray
    ms: np.ndarray | None = None
    mi: np.ndarray | None = None
    overlap: np.ndarray | None = None
    degenerate_groups: tuple = ()

    @property
    def labels(self) -> list[tuple[float, float]] | None:
        if self.ms is None:
            return None
        return list(zip(self.ms.tolist(), self.mi.tolist()))

    @property
    def ambiguous(self) -> bool:
        """True when degeneracies make the label assignment arbitrary."""
        return len(self.degenerate_groups) > 0

    def __len__(self):
        return len(self.energies)

    def frequency(self, i: int, j: int) -> float:
        return float(abs(self.energies[j] - self.energies[i]))


def _degenerate_groups(energies: np.ndarray, tol: float) -> tuple:
    groups, run = [], [0]
    for k in range(1, len(energies)):
        if energies[k] - energies[k - 1] < tol:
            run.append(k)
        else:
            if len(run) > 1:
                groups.append(tuple(run))
            run = [k]
    if len(run) > 1:
        groups.append(tuple(run))
    return tuple(groups)


def _axis_basis(j: float, axis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvectors of axis.J ordered by descending projection."""
    jx, jy, jz = spin_matrices(j)
    op = axis[0] * jx + axis[1] * jy + axis[2] * jz
    vals, vecs = np.linalg.eigh(op)
    order = np.argsort(-vals)
    return np.round(vals[order] * 2) / 2, vecs[:, order]


def quantization_axes(system: SpinSystem, field_mT) -> tuple[np.ndarray, np.ndarray]:
    """Electron and nuclear quantization axes used for labelling.

    The electron axis is the direction of the effective Zeeman field g^T B.
    The nuclear axis is the hyperfine field A n_e it experiences, falling
    back to the static field (or b) when the hyperfine field vanishes; the
    same axis is used in every M_S manifold so that an unchanged nuclear
    state keeps its M_I across an EPR transition.
    """
    b = np.asarray(field_mT, dtype=float).reshape(3)
    zhat = np.array([0.0, 0.0, 1.0])
    eff = system.g_matrix.T @ b
    n_e = eff / np.linalg.norm(eff) if np.linalg.norm(eff) > 1e-12 else zhat
    u = system.hyperfine_matrix @ n_e
    if np.linalg.norm(u) > 1e-9:
        n_n = u / np.linalg.norm(u)
    elif np.linalg.norm(b) > 1e-12:
        n_n = b / np.linalg.norm(b)
    else:
        n_n = n_e
    return n_e, n_n


def eigensystem(
    H: np.ndarray,
    system: SpinSystem | None = None,
    field_mT=None,
    degeneracy_tol: float = DEGENERACY_TOL_MHZ,
) -> EigenSystem:
    """Diagonalize a Hermitian matrix and, given the system, label its states.

    Labels come from the product basis |M_S, M_I> quantized along
    :func:`quantization_axes`. Each eigenstate receives a distinct product
    label by maximizing the summed squared overlap (an assignment problem),
    which coincides with the per-state maximum whenever that is unique.
    """
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("H must be a square matrix")
    scale = max(np.abs(H).max(), 1.0)
    if np.abs(H - H.conj().T).max() > 1e-10 * scale:
        raise ValueError("H is not Hermitian")
    energies, states = np.linalg.eigh(H)
    groups = _degenerate_groups(energies, degeneracy_tol)
    if system is None:
        return EigenSystem(energies=energies, states=states, degenerate_groups=groups)
    if system.dim != H.shape[0]:
        raise ValueError("H dimension does not match the spin system")
    n_e, n_n = quantization_axes(system, np.zeros(3) if field_mT is None else field_mT)
    ms_vals, ve = _axis_basis(system.electron_spin, n_e)
    mi_vals, vn = _axis_basis(system.nuclear_spin, n_n)
    basis = np.kron(ve, vn)
    overlaps = np.abs(basis.conj().T @ states) ** 2
    rows, cols = linear_sum_assignment(-overlaps)
    ms = np.empty(len(energies))
    mi = np.empty(len(energies))
    ov = np.empty(len(energies))
    n_i = len(mi_vals)
    for r, c in zip(rows, cols):
        ms[c] = ms_vals[r // n_i]
        mi[c] = mi_vals[r % n_i]
        ov[c] = overlaps[r, c]
    return EigenSystem(
        energies=energies, states=states, ms=ms, mi=mi, overlap=ov, degenerate_groups=groups
    )


def diagonalize(
    system: SpinSystem, field_mT, constants: PhysicalConstants = DEFAULT_CONSTANTS
) -> EigenSystem:
    """Build the Hamiltonian at ``field_mT`` and return its labelled eigensystem."""
    return eigensystem(build_hamiltonian(system, field_mT, constants), system, field_mT)
