"""Qubit fibres driven by the local macro state.

Each node carries a two-level state and its accumulated propagator. The
Hamiltonian is a0 I + ax sx + ay sy + az sz with real coefficients taken
from a constitutive preset evaluated at the node's (c, kappa); hbar = 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np

from ._parallel import map_node_chunks
from .errors import ConstitutiveError, InputShapeError, ModeError, UnitarityError
from .kinematics import MaterialGrid

SIGMA_0 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

UNITARITY_TOL = 1e-12

INITIAL_STATES = {
    "up": (1.0, 0.0),
    "down": (0.0, 1.0),
    "plus": (2**-0.5, 2**-0.5),
    "minus": (2**-0.5, -(2**-0.5)),
    "plus-i": (2**-0.5, 1j * 2**-0.5),
    "minus-i": (2**-0.5, -1j * 2**-0.5),
}


@dataclass(frozen=True)
class ConstitutivePreset:
    """Coefficient functions (g0, gx, gy, gz) of (c, kappa).

    ``mu`` is the angular-frequency scale and ``coupling_length`` the length
    that converts |kappa| into the dimensionless factor L_c / R.
    """

    name: str
    mu: float
    coupling_length: float
    gain: float = 1.0

    def __post_init__(self):
        if self.name not in PRESETS:
            raise ConstitutiveError(f"unknown qubit preset {self.name!r}; known: {sorted(PRESETS)}")

    @property
    def sigma_x_only(self) -> bool:
        return self.name in SIGMA_X_PRESETS

    def coefficients(self, c, kappa):
        c = np.asarray(c, dtype=float)
        kappa = np.asarray(kappa, dtype=float)
        return PRESETS[self.name](self, c, kappa)


def _curvature_rabi(p, c, kappa):
    zero = np.zeros(np.broadcast(c, kappa).shape)
    return zero, p.mu * (1.0 + p.coupling_length * np.abs(kappa)), zero, zero


def _flat(p, c, kappa):
    zero = np.zeros(np.broadcast(c, kappa).shape)
    return zero, p.mu + zero, zero, zero


def _curvature_phase(p, c, kappa):
    zero = np.zeros(np.broadcast(c, kappa).shape)
    bend = p.coupling_length * np.abs(kappa)
    return p.gain * p.mu * bend, p.mu * (1.0 + bend), zero, zero


def _stretch_coupled(p, c, kappa):
    strain = c - 1.0
    return (
        p.gain * p.mu * strain,
        p.mu * (1.0 + p.coupling_length * np.abs(kappa)),
        np.zeros(np.broadcast(c, kappa).shape),
        p.gain * p.mu * strain,
    )


PRESETS: Dict[str, Callable] = {
    "paper-example": _curvature_rabi,
    "flat": _flat,
    "curvature-phase": _curvature_phase,
    "stretch-coupled": _stretch_coupled,
}
SIGMA_X_PRESETS = frozenset({"paper-example", "flat"})


def build_hamiltonian(preset: ConstitutivePreset, c, kappa):
    """Pauli coefficients (a0, ax, ay, az) at the given macro scalars."""
    c = np.asarray(c, dtype=float)
    if np.any(c <= 0):
        raise ConstitutiveError("Cauchy-Green measure c must be positive")
    coeffs = tuple(np.asarray(a, dtype=float) for a in preset.coefficients(c, kappa))
    for name, a in zip(("g0", "gx", "gy", "gz"), coeffs):
        if not np.all(np.isfinite(a)):
            raise ConstitutiveError(f"{preset.name}: {name} is not finite")
    return coeffs


def hamiltonian_matrix(a0, ax, ay, az) -> np.ndarray:
    a0, ax, ay, az = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a0, ax, ay, az)))
    H = np.empty(a0.shape + (2, 2), dtype=complex)
    H[..., 0, 0] = a0 + az
    H[..., 0, 1] = ax - 1j * ay
    H[..., 1, 0] = ax + 1j * ay
    H[..., 1, 1] = a0 - az
    return H


def pauli_exponential(a0, ax, ay, az, dt) -> np.ndarray:
    """exp(-i dt (a0 I + a . sigma)) in closed form, stacked over inputs."""
    a0, ax, ay, az = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a0, ax, ay, az)))
    norm = np.sqrt(ax * ax + ay * ay + az * az)
    angle = norm * dt
    cos = np.cos(angle)
    # sin(|a| dt) / |a|, finite at |a| = 0
    sin_over = dt * np.sinc(angle / np.pi)
    phase = np.exp(-1j * a0 * dt)
    U = np.empty(a0.shape + (2, 2), dtype=complex)
    U[..., 0, 0] = phase * (cos - 1j * sin_over * az)
    U[..., 0, 1] = phase * (-1j * sin_over * (ax - 1j * ay))
    U[..., 1, 0] = phase * (-1j * sin_over * (ax + 1j * ay))
    U[..., 1, 1] = phase * (cos + 1j * sin_over * az)
    return U


def mul2(A, B):
    """Stacked 2x2 product written out entrywise (no batch-size dependence)."""
    out = np.empty(np.broadcast_shapes(A.shape, B.shape), dtype=complex)
    out[..., 0, 0] = A[..., 0, 0] * B[..., 0, 0] + A[..., 0, 1] * B[..., 1, 0]
    out[..., 0, 1] = A[..., 0, 0] * B[..., 0, 1] + A[..., 0, 1] * B[..., 1, 1]
    out[..., 1, 0] = A[..., 1, 0] * B[..., 0, 0] + A[..., 1, 1] * B[..., 1, 0]
    out[..., 1, 1] = A[..., 1, 0] * B[..., 0, 1] + A[..., 1, 1] * B[..., 1, 1]
    return out


def apply2(A, psi):
    out = np.empty(psi.shape, dtype=complex)
    out[..., 0] = A[..., 0, 0] * psi[..., 0] + A[..., 0, 1] * psi[..., 1]
    out[..., 1] = A[..., 1, 0] * psi[..., 0] + A[..., 1, 1] * psi[..., 1]
    return out


def unitarity_defect(U) -> np.ndarray:
    """Per-node max entry of |U^dagger U - I| (any square size)."""
    U = np.asarray(U)
    G = np.conj(np.swapaxes(U, -1, -2)) @ U
    G = G - np.eye(U.shape[-1])
    return np.max(np.abs(G), axis=(-1, -2))


@dataclass(frozen=True)
class FibreField:
    """Per-node state, accumulated propagator and initial state."""

    grid: MaterialGrid
    psi: np.ndarray
    U: np.ndarray
    psi0: np.ndarray

    @classmethod
    def initial(cls, grid: MaterialGrid, state="up") -> "FibreField":
        vec = np.asarray(INITIAL_STATES[state] if isinstance(state, str) else state, dtype=complex)
        if vec.shape != (2,):
            raise InputShapeError("qubit state needs two amplitudes")
        vec = vec / np.linalg.norm(vec)
        psi = np.tile(vec, (grid.n_nodes, 1))
        U = np.tile(np.eye(2, dtype=complex), (grid.n_nodes, 1, 1))
        return cls(grid, psi, U, psi.copy())

    @property
    def dim(self) -> int:
        return 2

    @property
    def p_up(self) -> np.ndarray:
        """Population of the second basis state, |psi_1|^2."""
        return np.abs(self.psi[:, 1]) ** 2

    @property
    def fidelity(self) -> np.ndarray:
        return np.abs(np.sum(np.conj(self.psi0) * self.psi, axis=1)) ** 2

    def norm_drift(self) -> np.ndarray:
        return np.abs(np.linalg.norm(self.psi, axis=1) - 1.0)

    def consistency_defect(self) -> np.ndarray:
        return np.max(np.abs(self.psi - apply2(self.U, self.psi0)), axis=1)

    def with_state(self, psi, U) -> "FibreField":
        return FibreField(self.grid, psi, U, self.psi0)


def _check_macro(field, c_mid, kappa_mid):
    c_mid = np.asarray(c_mid, dtype=float)
    kappa_mid = np.asarray(kappa_mid, dtype=float)
    if c_mid.shape != (field.grid.n_nodes,) or kappa_mid.shape != (field.grid.n_nodes,):
        raise InputShapeError("macro fields and fibre field live on different grids")
    return c_mid, kappa_mid


def fibre_step(field: FibreField, c_mid, kappa_mid, preset: ConstitutivePreset, dt: float, workers: int = 1):
    """Second-order (midpoint Magnus) step using the macro state at mid-step."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    c_mid, kappa_mid = _check_macro(field, c_mid, kappa_mid)

    def advance(sl):
        coeffs = build_hamiltonian(preset, c_mid[sl], kappa_mid[sl])
        V = pauli_exponential(*coeffs, dt)
        return mul2(V, field.U[sl]), apply2(V, field.psi[sl])

    U, psi = map_node_chunks(advance, field.grid.n_nodes, workers)
    defect = unitarity_defect(U)
    if np.max(defect) > UNITARITY_TOL:
        node = int(np.argmax(defect))
        raise UnitarityError(f"propagator at node {node} lost unitarity ({defect[node]:.2e})")
    return field.with_state(psi, U)


def sigma_x_rotation(angle) -> np.ndarray:
    angle = np.asarray(angle, dtype=float)
    return pauli_exponential(np.zeros_like(angle), angle, np.zeros_like(angle), np.zeros_like(angle), 1.0)


def commuting_exact_step(field: FibreField, gx_history, dt: float, preset: ConstitutivePreset = None):
    """Exact evolution for sigma_x-only Hamiltonians.

    ``gx_history`` holds g_x per node on a uniform time grid of spacing
    ``dt`` (shape (n_times, n_nodes)); the accumulated angle is its
    trapezoid integral.
    """
    if preset is not None and not preset.sigma_x_only:
        raise ModeError(f"preset {preset.name!r} is not sigma_x-only; exact commuting mode unavailable")
    g = np.asarray(gx_history, dtype=float)
    if g.ndim != 2 or g.shape[1] != field.grid.n_nodes:
        raise InputShapeError("gx_history must have shape (n_times, n_nodes)")
    if g.shape[0] < 2:
        angle = np.zeros(field.grid.n_nodes)
    else:
        angle = dt * (0.5 * g[0] + np.sum(g[1:-1], axis=0) + 0.5 * g[-1])
    V = sigma_x_rotation(angle)
    return field.with_state(apply2(V, field.psi), mul2(V, field.U)), angle


def accumulated_angle(U) -> np.ndarray:
    """Rotation angle Theta of U = exp(-i sigma_x Theta), branch (-pi, pi]."""
    U = np.asarray(U)
    # cos(T) - i sin(T) = U00 + U01
    return -np.angle(U[..., 0, 0] + U[..., 0, 1])
