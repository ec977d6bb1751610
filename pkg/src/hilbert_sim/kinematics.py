"""Discrete body chart, placements and the pointwise 1-jet of a deformation.

The sheet is reduced to a planar extensible rod parameterised by the
reference arc coordinate ``s``. Every per-node quantity lives on the same
uniform node set so that macro and fibre fields stay aligned.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDeformationError, InputShapeError


@dataclass(frozen=True)
class MaterialGrid:
    n_nodes: int
    sheet_length: float

    def __post_init__(self):
        if int(self.n_nodes) != self.n_nodes or self.n_nodes < 5 or self.n_nodes % 2 == 0:
            raise InputShapeError(f"n_nodes must be an odd integer >= 5, got {self.n_nodes!r}")
        if not (np.isfinite(self.sheet_length) and self.sheet_length > 0):
            raise InputShapeError(f"sheet_length must be positive, got {self.sheet_length!r}")

    @property
    def spacing(self) -> float:
        return self.sheet_length / (self.n_nodes - 1)

    @property
    def s(self) -> np.ndarray:
        return np.arange(self.n_nodes) * self.spacing

    @property
    def mid(self) -> int:
        return self.n_nodes // 2

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights; they sum to ``sheet_length``."""
        w = np.full(self.n_nodes, self.spacing)
        w[0] = w[-1] = 0.5 * self.spacing
        return w

    def check(self, values, name="field"):
        values = np.asarray(values)
        if values.ndim == 0 or values.shape[0] != self.n_nodes:
            raise InputShapeError(
                f"{name} has {values.shape[0] if values.ndim else 0} nodes, grid has {self.n_nodes}"
            )
        return values


def trapezoid_positions(grid: MaterialGrid, theta, eps):
    """Cumulative trapezoid integral of (1+eps)(cos theta, sin theta)."""
    stretch = 1.0 + np.asarray(eps, dtype=float)
    tx = stretch * np.cos(theta)
    tz = stretch * np.sin(theta)
    half = 0.5 * grid.spacing
    x = np.concatenate(([0.0], np.cumsum(half * (tx[1:] + tx[:-1]))))
    z = np.concatenate(([0.0], np.cumsum(half * (tz[1:] + tz[:-1]))))
    return x, z


@dataclass(frozen=True)
class Placement:
    """Per-node position, tangent angle and axial stretch of the rod."""

    grid: MaterialGrid
    x: np.ndarray
    z: np.ndarray
    theta: np.ndarray
    eps: np.ndarray

    def __post_init__(self):
        for name in ("x", "z", "theta", "eps"):
            arr = np.asarray(getattr(self, name), dtype=float)
            self.grid.check(arr, name)
            object.__setattr__(self, name, arr)
        if not np.all(self.eps > -1.0):
            raise DegenerateDeformationError("stretch eps must exceed -1 at every node")

    @classmethod
    def from_angles(cls, grid: MaterialGrid, theta, eps=None) -> "Placement":
        theta = np.asarray(theta, dtype=float)
        eps = np.zeros(grid.n_nodes) if eps is None else np.asarray(eps, dtype=float)
        grid.check(theta, "theta")
        grid.check(eps, "eps")
        if not np.all(eps > -1.0):
            raise DegenerateDeformationError("stretch eps must exceed -1 at every node")
        x, z = trapezoid_positions(grid, theta, eps)
        return cls(grid, x, z, theta, eps)

    @classmethod
    def flat(cls, grid: MaterialGrid, eps=0.0) -> "Placement":
        return cls.from_angles(grid, np.zeros(grid.n_nodes), np.full(grid.n_nodes, float(eps)))

    @property
    def end_distance(self) -> float:
        return float(self.x[-1] - self.x[0])


@dataclass(frozen=True)
class DeformationGradient1D:
    stretch: np.ndarray
    theta: np.ndarray

    def matrix(self) -> np.ndarray:
        """Stacked 2x2 matrices stretch * R(theta)."""
        c, s = np.cos(self.theta), np.sin(self.theta)
        out = np.empty(self.stretch.shape + (2, 2))
        out[..., 0, 0] = c
        out[..., 0, 1] = -s
        out[..., 1, 0] = s
        out[..., 1, 1] = c
        return out * self.stretch[..., None, None]

    def det(self) -> np.ndarray:
        return self.stretch**2


@dataclass(frozen=True)
class CauchyGreenRecord:
    """Scalar right Cauchy-Green measure c = lambda^2 and its 3-D invariants.

    The transverse directions of the embedded sheet carry unit stretch, so
    C = diag(c, 1, 1).
    """

    c: np.ndarray

    @property
    def i1(self):
        return self.c + 2.0

    @property
    def i2(self):
        return 2.0 * self.c + 1.0

    @property
    def i3(self):
        return self.c


@dataclass(frozen=True)
class CurvatureField:
    kappa: np.ndarray

    @property
    def radius(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 1.0 / np.abs(self.kappa)


def nodal_derivative(values, spacing: float) -> np.ndarray:
    """First derivative along axis 0 on a uniform node set.

    Central differences in the interior, one-sided three-point second-order
    stencils at both ends. Trailing axes are differentiated entrywise.
    """
    f = np.asarray(values)
    if f.shape[0] < 3:
        raise InputShapeError("need at least 3 nodes to differentiate")
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * spacing)
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * spacing)
    out[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * spacing)
    return out


def compute_curvature(theta, grid: MaterialGrid) -> CurvatureField:
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1:
        raise InputShapeError("theta must be one value per node")
    grid.check(theta, "theta")
    return CurvatureField(nodal_derivative(theta, grid.spacing))


def compute_deformation_gradient(placement: Placement) -> DeformationGradient1D:
    stretch = 1.0 + placement.eps
    if not np.all(stretch > 0):
        raise DegenerateDeformationError("stretch 1+eps must be positive")
    return DeformationGradient1D(stretch.copy(), placement.theta.copy())


def cauchy_green(F: DeformationGradient1D) -> CauchyGreenRecord:
    return CauchyGreenRecord(F.stretch**2)


def macro_scalars(placement: Placement):
    """(c, kappa) per node: the macro fields a fibre Hamiltonian reads."""
    c = cauchy_green(compute_deformation_gradient(placement)).c
    kappa = compute_curvature(placement.theta, placement.grid).kappa
    return c, kappa


@dataclass(frozen=True)
class JetSummary:
    """Per-node (xi, F, U, grad U) together with the Cauchy-Green record."""

    position: np.ndarray
    F: DeformationGradient1D
    C: CauchyGreenRecord
    U: np.ndarray
    dU: np.ndarray


def jet_record(placement: Placement, U_field) -> JetSummary:
    from .coupling import unitary_gradient

    U = np.asarray(getattr(U_field, "U", U_field))
    grid = getattr(U_field, "grid", placement.grid)
    if grid != placement.grid:
        raise InputShapeError("placement and propagator field live on different grids")
    placement.grid.check(U, "U field")
    F = compute_deformation_gradient(placement)
    return JetSummary(
        position=np.column_stack([placement.x, placement.z]),
        F=F,
        C=cauchy_green(F),
        U=U.copy(),
        dU=unitary_gradient(U, placement.grid),
    )
