"""Fibre-to-macro coupling through the referential gradient of the unitary field.

W = U^dagger dU/ds is antihermitian for an exact unitary field. Only its
trace survives in the coupling: w = |tr W| per node, and the bending
stiffness is raised to B0 (1 + beta w^2). Note that tr W sees only the
global-phase gradient of U, so fields generated by traceless Hamiltonians
never feed back.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DiscretizationError, InputShapeError
from .kinematics import MaterialGrid, nodal_derivative

LAWS = ("multiplicative-quadratic",)


@dataclass(frozen=True)
class BackCouplingLaw:
    beta: float
    B0: float
    kind: str = "multiplicative-quadratic"

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("coupling gain beta must be non-negative")
        if not self.B0 > 0:
            raise ValueError("base stiffness must be positive")
        if self.kind not in LAWS:
            raise ValueError(f"unknown back-coupling law {self.kind!r}")


@dataclass(frozen=True)
class CouplingField:
    W: np.ndarray
    trace: np.ndarray
    w_norm: np.ndarray
    B: np.ndarray
    defect: float = 0.0  # max|M + M^dagger| / max|M| over the field


def unitary_gradient(U_field, grid: MaterialGrid) -> np.ndarray:
    U = np.asarray(U_field)
    if U.ndim != 3 or U.shape[0] != grid.n_nodes:
        raise InputShapeError(f"U field shape {U.shape} does not match {grid.n_nodes} nodes")
    return nodal_derivative(U, grid.spacing)


def hermitian_defect(M) -> np.ndarray:
    Mh = np.conj(np.swapaxes(M, -1, -2))
    defect = np.max(np.abs(M + Mh), axis=(-1, -2))
    scale = np.max(np.abs(M), axis=(-1, -2))
    return defect, scale


def compute_W(U, dU, rtol: float = 1e-2, atol: float = 1e-8, check: bool = True) -> np.ndarray:
    """Antihermitian part of U^dagger dU, after checking the Hermitian part is noise.

    Works on a single matrix or a stack. Raises when the Hermitian defect
    at any node exceeds ``atol + rtol * max|U^dagger dU|``, the maximum taken
    over the whole stack: kinks of |kappa| make the per-node gradient vanish
    while the O(h) defect there does not.
    """
    U = np.asarray(U)
    dU = np.asarray(dU)
    M = np.conj(np.swapaxes(U, -1, -2)) @ dU
    Mh = np.conj(np.swapaxes(M, -1, -2))
    defect, scale = hermitian_defect(M)
    bad = defect > atol + rtol * np.max(scale)
    if check and np.any(bad):
        where = np.flatnonzero(np.atleast_1d(bad))
        node = int(where[0])
        d = float(np.atleast_1d(defect)[node])
        raise DiscretizationError(
            f"U^dagger dU has Hermitian part {d:.3e} at node {node}; refine the grid"
        )
    return 0.5 * (M - Mh)


def trace_norm_field(W) -> np.ndarray:
    W = np.asarray(W)
    tr = np.trace(W, axis1=-2, axis2=-1)
    scale = np.max(np.abs(W), axis=(-1, -2)) if W.size else 0.0
    if np.any(np.abs(tr.real) > 1e-8 * np.maximum(scale, 1.0)):
        raise DiscretizationError("trace of W is not purely imaginary")
    return np.abs(tr.imag)


def update_stiffness(law: BackCouplingLaw, w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if np.any(w < 0):
        raise ValueError("coupling norm must be non-negative")
    if law.beta == 0:
        return np.full(w.shape, law.B0)
    return law.B0 * (1.0 + law.beta * w * w)


def compute_coupling(U_field, grid: MaterialGrid, law: BackCouplingLaw, rtol: float = 1e-2,
                     strict: bool = True) -> CouplingField:
    """W, tr W, w and the updated stiffness for a whole propagator field.

    With ``strict=False`` an unresolved gradient is reported through
    ``defect`` instead of raising; callers use this when w does not feed back.
    """
    U = np.asarray(U_field)
    dU = unitary_gradient(U, grid)
    M = np.conj(np.swapaxes(U, -1, -2)) @ dU
    defect, scale = hermitian_defect(M)
    rel = float(np.max(defect) / max(float(np.max(scale)), 1e-300))
    W = compute_W(U, dU, rtol=rtol, check=strict)
    trace = np.trace(W, axis1=-2, axis2=-1)
    w = trace_norm_field(W)
    return CouplingField(W=W, trace=trace, w_norm=w, B=update_stiffness(law, w), defect=rel)
