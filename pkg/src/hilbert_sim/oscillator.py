"""Truncated harmonic-oscillator fibres with deformation-dependent parameters.

H = omega(c, kappa) (N + 1/2) + drive(c, kappa) (a + a^dagger) on the lowest
``n_levels`` Fock states. Leakage into the top two levels is monitored and
raises instead of being projected away.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._parallel import map_node_chunks
from .errors import ConstitutiveError, InputShapeError, TruncationError, UnitarityError
from .kinematics import MaterialGrid
from .qubit import unitarity_defect

NORM_TOL = 1e-10


@lru_cache(maxsize=16)
def _ladder(n_levels):
    a = np.diag(np.sqrt(np.arange(1, n_levels, dtype=float)), k=1).astype(complex)
    adag = a.conj().T
    num = adag @ a
    for m in (a, adag, num):
        m.setflags(write=False)
    return a, adag, num


def ladder_matrices(n_levels: int):
    """(annihilation, creation, number) operators truncated to ``n_levels``."""
    if n_levels < 2:
        raise ValueError("need at least two Fock levels")
    return tuple(m.copy() for m in _ladder(int(n_levels)))


@dataclass(frozen=True)
class OscillatorPreset:
    """Frequency and drive as functions of (c, kappa).

    ``tension-tuned``: omega = omega0 sqrt(c) (1 + L_c |kappa|), drive = drive * omega0.
    ``fixed``: omega = omega0, drive = drive * omega0 (macro-independent).
    """

    name: str
    omega0: float
    coupling_length: float
    n_levels: int
    drive: float = 0.0
    truncation_threshold: float = 1e-8

    def __post_init__(self):
        if self.name not in OSCILLATOR_PRESETS:
            raise ConstitutiveError(f"unknown oscillator preset {self.name!r}")
        if self.n_levels < 4:
            raise ValueError("n_levels must be at least 4")
        if not self.omega0 > 0:
            raise ConstitutiveError("omega0 must be positive")

    def parameters(self, c, kappa):
        c = np.asarray(c, dtype=float)
        kappa = np.asarray(kappa, dtype=float)
        shape = np.broadcast(c, kappa).shape
        if self.name == "tension-tuned":
            omega = self.omega0 * np.sqrt(c) * (1.0 + self.coupling_length * np.abs(kappa))
        else:
            omega = np.full(shape, self.omega0)
        drive = np.full(shape, self.drive * self.omega0)
        return np.broadcast_to(omega, shape), drive


OSCILLATOR_PRESETS = ("tension-tuned", "fixed")


def _hamiltonians(n_levels, omega, drive):
    a, adag, num = _ladder(n_levels)
    diag = np.diag(num).real + 0.5
    H = np.zeros(omega.shape + (n_levels, n_levels), dtype=complex)
    idx = np.arange(n_levels)
    H[..., idx, idx] = omega[..., None] * diag
    x = a + adag
    H += drive[..., None, None] * x
    return H


def oscillator_hamiltonian(preset: OscillatorPreset, c, kappa) -> np.ndarray:
    omega, drive = preset.parameters(c, kappa)
    if not (np.all(np.isfinite(omega)) and np.all(np.isfinite(drive))):
        raise ConstitutiveError("oscillator parameters are not finite")
    if np.any(omega <= 0):
        raise ConstitutiveError("oscillator frequency must be positive")
    return _hamiltonians(preset.n_levels, np.asarray(omega), np.asarray(drive))


def hermitian_exponential(H, dt) -> np.ndarray:
    """exp(-i H dt) for stacked Hermitian H via eigendecomposition."""
    vals, vecs = np.linalg.eigh(H)
    phases = np.exp(-1j * vals * dt)
    return (vecs * phases[..., None, :]) @ np.conj(np.swapaxes(vecs, -1, -2))


def tail_occupation(psi) -> np.ndarray:
    return np.abs(psi[..., -1]) ** 2 + np.abs(psi[..., -2]) ** 2


@dataclass(frozen=True)
class OscillatorField:
    grid: MaterialGrid
    psi: np.ndarray
    U: np.ndarray
    psi0: np.ndarray

    @classmethod
    def initial(cls, grid: MaterialGrid, n_levels: int, level: int = 0) -> "OscillatorField":
        if not 0 <= level < n_levels - 2:
            raise InputShapeError("initial Fock level must lie below the monitored tail")
        psi = np.zeros((grid.n_nodes, n_levels), dtype=complex)
        psi[:, level] = 1.0
        U = np.tile(np.eye(n_levels, dtype=complex), (grid.n_nodes, 1, 1))
        return cls(grid, psi, U, psi.copy())

    @property
    def dim(self) -> int:
        return self.psi.shape[1]

    @property
    def p_up(self) -> np.ndarray:
        """Excited population 1 - |psi_0|^2."""
        return 1.0 - np.abs(self.psi[:, 0]) ** 2

    @property
    def fidelity(self) -> np.ndarray:
        return np.abs(np.sum(np.conj(self.psi0) * self.psi, axis=1)) ** 2

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.psi) ** 2

    def norm_drift(self) -> np.ndarray:
        return np.abs(np.linalg.norm(self.psi, axis=1) - 1.0)

    def consistency_defect(self) -> np.ndarray:
        return np.max(np.abs(self.psi - np.einsum("nij,nj->ni", self.U, self.psi0)), axis=1)

    def with_state(self, psi, U) -> "OscillatorField":
        return OscillatorField(self.grid, psi, U, self.psi0)


def oscillator_step(field: OscillatorField, c_mid, kappa_mid, preset: OscillatorPreset, dt: float,
                    time: float = float("nan"), workers: int = 1) -> OscillatorField:
    if not dt > 0:
        raise ValueError("dt must be positive")
    c_mid = np.asarray(c_mid, dtype=float)
    kappa_mid = np.asarray(kappa_mid, dtype=float)
    n = field.grid.n_nodes
    if c_mid.shape != (n,) or kappa_mid.shape != (n,):
        raise InputShapeError("macro fields and fibre field live on different grids")
    if field.dim != preset.n_levels:
        raise InputShapeError("fibre truncation differs from preset n_levels")

    def advance(sl):
        V = hermitian_exponential(oscillator_hamiltonian(preset, c_mid[sl], kappa_mid[sl]), dt)
        psi = (V @ field.psi[sl][..., None])[..., 0]
        return V @ field.U[sl], psi

    U, psi = map_node_chunks(advance, n, workers)
    drift = np.abs(np.linalg.norm(psi, axis=1) - 1.0)
    if np.max(drift) > NORM_TOL:
        raise UnitarityError(f"oscillator state norm drifted by {np.max(drift):.2e}")
    if np.max(unitarity_defect(U)) > 1e-10:
        raise UnitarityError("oscillator propagator lost unitarity")
    tail = tail_occupation(psi)
    if np.max(tail) > preset.truncation_threshold:
        node = int(np.argmax(tail))
        raise TruncationError(node, time, float(tail[node]))
    return field.with_state(psi, U)
