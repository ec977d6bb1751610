"""Quasi-static extensible elastica between two clamped, converging bars.

Unknowns are the nodal tangent angles and axial stretches. The end-to-end
distance and zero end-height are enforced through two Lagrange multipliers,
and the stationarity (KKT) system is solved with a damped Newton method.

Everything inside the solver is dimensionless: lengths are divided by the
sheet length and energies by ``B_ref / sheet_length`` with ``B_ref`` the mean
bending stiffness.

The bending energy is not the plain sum of squared node-centred curvatures.
That quadrature annihilates the odd/even (zig-zag) angle mode in the
interior and buckles into it at about a quarter of the Euler load. Instead
the energy is

    1/(2h) * sum_m a_m * sum_j q_j B_j (delta^m theta)_j^2,   a = 1, 1/12, 1/90, 1/560

with ``delta`` the forward difference. Its Fourier symbol is the Taylor
series of (2 arcsin(kh/2))^2 truncated after the 8th power, so it is
8th-order consistent with int B theta'^2 and strictly positive on every
non-constant mode. Ghost angles beyond each clamped end come from odd
reflection about the boundary value.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.special

from .errors import InputShapeError, SolverError
from .kinematics import MaterialGrid, Placement

_DIFF_WEIGHTS = (1.0, 1.0 / 12.0, 1.0 / 90.0, 1.0 / 560.0)
_GHOSTS = 2


@dataclass(frozen=True)
class ElasticaProblem:
    grid: MaterialGrid
    bending_stiffness: np.ndarray
    axial_stiffness: float
    end_distance: float
    d_slack: float = 1e-9
    bc: str = "clamped"

    def __post_init__(self):
        B = np.asarray(self.bending_stiffness, dtype=float)
        if B.ndim == 0:
            B = np.full(self.grid.n_nodes, float(B))
        self.grid.check(B, "bending_stiffness")
        object.__setattr__(self, "bending_stiffness", B)
        if not np.all(np.isfinite(B)) or np.any(B <= 0):
            raise ValueError("bending stiffness must be positive at every node")
        if not (self.axial_stiffness > 0):
            raise ValueError("axial stiffness must be positive")
        ell = self.grid.sheet_length
        if not (0 < self.end_distance <= ell * (1 + self.d_slack)):
            raise ValueError(
                f"end distance {self.end_distance!r} outside (0, {ell}*(1+d_slack)]"
            )
        if self.bc != "clamped":
            raise NotImplementedError("only clamped-clamped bars are supported")

    def with_distance(self, d: float) -> "ElasticaProblem":
        return ElasticaProblem(self.grid, self.bending_stiffness, self.axial_stiffness, d, self.d_slack)

    def with_stiffness(self, B) -> "ElasticaProblem":
        return ElasticaProblem(self.grid, B, self.axial_stiffness, self.end_distance, self.d_slack)

    @property
    def b_ref(self) -> float:
        return float(np.mean(self.bending_stiffness))


@dataclass(frozen=True)
class ElasticaSolution:
    placement: Placement
    multipliers: tuple
    residual_norm: float
    newton_iterations: int
    branch_sign: int  # 0 for the flat branch


@dataclass(frozen=True)
class SolverSettings:
    tol: float = 1e-10
    max_newton: int = 50
    max_halvings: int = 30
    seed_amplitude: float = 0.01  # fraction of sheet length
    branch_sign: int = 1
    continuation_halvings: int = 20
    check_stability: bool = True


# --------------------------------------------------------------------------
# discrete operators


def _ghost_map(n: int) -> np.ndarray:
    """Linear map from nodal angles to the odd-reflected extended vector."""
    g = _GHOSTS
    P = np.zeros((n + 2 * g, n))
    P[g : g + n] = np.eye(n)
    for k in range(1, g + 1):
        P[g - k, 0] += 2.0
        P[g - k, k] -= 1.0
        P[g + n - 1 + k, n - 1] += 2.0
        P[g + n - 1 + k, n - 1 - k] -= 1.0
    return P


@lru_cache(maxsize=8)
def _difference_blocks(n: int):
    """Per difference order: (matrix on nodal angles, quadrature weights, centring)."""
    P = _ghost_map(n)
    blocks = []
    for m in range(1, len(_DIFF_WEIGHTS) + 1):
        stencil = np.array([(-1.0) ** (m - r) * scipy.special.comb(m, r) for r in range(m + 1)])
        if m % 2 == 0:
            centres = np.arange(n)
            start = centres - m // 2
            q = np.ones(n)
            q[0] = q[-1] = 0.5
        else:
            centres = np.arange(n - 1)
            start = centres - (m - 1) // 2
            q = np.ones(n - 1)
        G = np.zeros((len(centres), n + 2 * _GHOSTS))
        for row, s0 in enumerate(start):
            G[row, _GHOSTS + s0 : _GHOSTS + s0 + m + 1] = stencil
        blocks.append((G @ P, q, m % 2 == 0))
    return tuple(blocks)


def bending_matrix(B_scaled, n: int) -> np.ndarray:
    """Dimensionless stiffness K with bending energy 0.5 * theta^T K theta."""
    h = 1.0 / (n - 1)
    B_scaled = np.asarray(B_scaled, dtype=float)
    B_half = 0.5 * (B_scaled[1:] + B_scaled[:-1])
    K = np.zeros((n, n))
    for a_m, (D, q, at_nodes) in zip(_DIFF_WEIGHTS, _difference_blocks(n)):
        wq = q * (B_scaled if at_nodes else B_half)
        K += (a_m / h) * (D.T * wq) @ D
    return K


_K_CACHE: dict = {}


def _cached_bending_matrix(B_scaled):
    # the stiffness field is constant across many solves when decoupled
    key = B_scaled.tobytes()
    K = _K_CACHE.get(key)
    if K is None:
        if len(_K_CACHE) > 16:
            _K_CACHE.clear()
        K = bending_matrix(B_scaled, len(B_scaled))
        K.setflags(write=False)
        _K_CACHE[key] = K
    return K


class _Scaled:
    """Dimensionless view of a problem."""

    def __init__(self, problem: ElasticaProblem):
        g = problem.grid
        self.problem = problem
        self.n = g.n_nodes
        self.ell = g.sheet_length
        self.b_ref = problem.b_ref
        self.B = problem.bending_stiffness / self.b_ref
        self.S = problem.axial_stiffness * self.ell**2 / self.b_ref
        self.d = problem.end_distance / self.ell
        self.w = g.weights / self.ell
        self.K = _cached_bending_matrix(self.B)
        self.force_scale = self.b_ref / self.ell**2
        self.interior = slice(1, self.n - 1)


def total_energy(problem: ElasticaProblem, placement: Placement) -> float:
    """Discrete strain energy (bending + stretching) of a placement."""
    if placement.grid != problem.grid:
        raise InputShapeError("placement and problem use different grids")
    sc = _Scaled(problem)
    th = placement.theta
    e = 0.5 * th @ sc.K @ th + 0.5 * sc.S * np.sum(sc.w * placement.eps**2)
    return float(e * sc.b_ref / sc.ell)


def energy_gradient(problem: ElasticaProblem, placement: Placement):
    """Gradient of ``total_energy`` with respect to (theta, eps), physical units."""
    sc = _Scaled(problem)
    g_theta = sc.K @ placement.theta * (sc.b_ref / sc.ell)
    g_eps = sc.S * sc.w * placement.eps * (sc.b_ref / sc.ell)
    return g_theta, g_eps


def _kkt(sc: _Scaled, theta, eps, lam, want_jacobian=True):
    """Residual of [grad_x L; -g] over x = (interior theta, eps) and its Jacobian."""
    w, K = sc.w, sc.K
    lx, lz = lam
    st = 1.0 + eps
    c, sn = np.cos(theta), np.sin(theta)
    g_th = K @ theta + lx * w * st * sn - lz * w * st * c
    g_ep = sc.S * w * eps - lx * w * c - lz * w * sn
    gx = np.sum(w * st * c) - sc.d
    gz = np.sum(w * st * sn)
    I = sc.interior
    res = np.concatenate([g_th[I], g_ep, [-gx, -gz]])
    scale = np.concatenate([w[I], w, [1.0, 1.0]])
    if not want_jacobian:
        return res, scale, None
    n = sc.n
    ni = n - 2
    N = ni + n
    J = np.zeros((N + 2, N + 2))
    Htt = K[I, I] + np.diag((w * st * (lx * c + lz * sn))[I])
    J[:ni, :ni] = Htt
    hte = (w * (lx * sn - lz * c))[I]
    J[np.arange(ni), ni + 1 + np.arange(ni)] = hte
    J[ni + 1 + np.arange(ni), np.arange(ni)] = hte
    J[ni + np.arange(n), ni + np.arange(n)] = sc.S * w
    A = np.zeros((2, N))
    A[0, :ni] = (-w * st * sn)[I]
    A[0, ni:] = w * c
    A[1, :ni] = (w * st * c)[I]
    A[1, ni:] = w * sn
    J[:N, N:] = -A.T
    J[N:, :N] = -A
    return res, scale, J


def kkt_residual(problem: ElasticaProblem, placement: Placement, multipliers):
    """Scaled KKT residual vector (dimensionless) and its Jacobian.

    ``multipliers`` are physical forces (F_x, F_z). Exposed for verification.
    """
    sc = _Scaled(problem)
    lam = np.asarray(multipliers, dtype=float) / sc.force_scale
    return _kkt(sc, placement.theta, placement.eps, lam)


def lagrangian(problem: ElasticaProblem, theta, eps, multipliers) -> float:
    """Dimensionless Lagrangian E - F . g, matching ``_kkt``'s gradient."""
    sc = _Scaled(problem)
    lx, lz = np.asarray(multipliers, dtype=float) / sc.force_scale
    st = 1.0 + eps
    E = 0.5 * theta @ sc.K @ theta + 0.5 * sc.S * np.sum(sc.w * eps**2)
    gx = np.sum(sc.w * st * np.cos(theta)) - sc.d
    gz = np.sum(sc.w * st * np.sin(theta))
    return float(E - lx * gx - lz * gz)


def _unpack(sc, x):
    ni = sc.n - 2
    theta = np.zeros(sc.n)
    theta[1:-1] = x[:ni]
    eps = x[ni : ni + sc.n]
    lam = x[ni + sc.n :]
    return theta, eps, lam


def _newton(sc: _Scaled, theta, eps, lam, settings: SolverSettings):
    """Damped Newton on the KKT system; returns (theta, eps, lam, residual, iters, ok)."""
    theta = np.array(theta, dtype=float)
    theta[0] = theta[-1] = 0.0
    x = np.concatenate([theta[1:-1], eps, lam])
    res, scale, J = _kkt(sc, *_unpack(sc, x))
    rnorm = np.max(np.abs(res / scale))
    merit = np.linalg.norm(res / scale)
    for it in range(settings.max_newton + 1):
        if not np.isfinite(rnorm):
            break
        if rnorm <= settings.tol:
            return (*_unpack(sc, x), rnorm, it, True)
        if it == settings.max_newton:
            break
        try:
            dx = np.linalg.solve(J, -res)
        except np.linalg.LinAlgError:
            break
        alpha = 1.0
        for _ in range(settings.max_halvings + 1):
            x_try = x + alpha * dx
            th, ep, lm = _unpack(sc, x_try)
            if np.all(ep > -1.0):
                r_try, s_try, _ = _kkt(sc, th, ep, lm, want_jacobian=False)
                m_try = np.linalg.norm(r_try / s_try)
                if np.isfinite(m_try) and m_try < (1.0 - 1e-4 * alpha) * merit:
                    break
            alpha *= 0.5
        else:
            break
        x = x_try
        res, scale, J = _kkt(sc, *_unpack(sc, x))
        rnorm = np.max(np.abs(res / scale))
        merit = np.linalg.norm(res / scale)
    return (*_unpack(sc, x), rnorm, it, False)


def _is_stable(sc: _Scaled, theta, eps, lam) -> bool:
    """Second-order check: reduced Hessian positive definite on the constraint tangent space.

    Uses Sylvester's law of inertia: with two independent constraints the
    KKT matrix has inertia In(Z^T H Z) + (2, 2, 0), so the reduced Hessian is
    positive definite exactly when the KKT matrix has 2 negative eigenvalues
    and no zero ones.
    """
    _, _, J = _kkt(sc, theta, eps, lam)
    _, D, _ = scipy.linalg.ldl(J, lower=True, hermitian=True)
    diag = np.diag(D)
    off = np.diag(D, -1)
    two = np.flatnonzero(off != 0.0)
    in_block = np.zeros(len(diag), dtype=bool)
    in_block[two] = in_block[two + 1] = True
    singles = diag[~in_block]
    tiny = 1e-13 * max(1.0, float(np.max(np.abs(diag))))
    dets = diag[two] * diag[two + 1] - off[two] ** 2
    if np.any(np.abs(singles) <= tiny) or np.any(np.abs(dets) <= tiny**2):
        return False
    # a 2x2 pivot with negative determinant has one eigenvalue of each sign;
    # otherwise both share the sign of its trace
    trace = diag[two] + diag[two + 1]
    n_neg = int(np.sum(singles < 0)) + int(np.sum(dets < 0)) + 2 * int(np.sum((dets > 0) & (trace < 0)))
    return n_neg == 2


# --------------------------------------------------------------------------
# flat branch and its stability


def flat_solution(problem: ElasticaProblem) -> ElasticaSolution:
    grid = problem.grid
    eps = problem.end_distance / grid.sheet_length - 1.0
    placement = Placement.flat(grid, eps)
    sc = _Scaled(problem)
    lam = np.array([sc.S * eps, 0.0])
    res, scale, _ = _kkt(sc, placement.theta, placement.eps, lam, want_jacobian=False)
    return ElasticaSolution(
        placement=placement,
        multipliers=(float(lam[0] * sc.force_scale), 0.0),
        residual_norm=float(np.max(np.abs(res / scale))),
        newton_iterations=0,
        branch_sign=0,
    )


_CRITICAL_CACHE: dict = {}


def critical_load(problem: ElasticaProblem):
    """Lowest compressive load at which the flat branch loses stability.

    Returns (load, mode) where ``mode`` is the nodal angle eigenvector. The
    load is in physical force units; for uniform B it approaches 4 pi^2 B / l^2.
    """
    sc = _Scaled(problem)
    key = (sc.B.tobytes(), sc.n)
    if key not in _CRITICAL_CACHE:
        I = sc.interior
        wr = sc.w[I]
        # first-order zero end height: sum(w theta) = 0
        Q, _ = np.linalg.qr(wr[:, None], mode="complete")
        Z = Q[:, 1:]
        vals, vecs = scipy.linalg.eigh(Z.T @ sc.K[I, I] @ Z, (Z.T * wr) @ Z)
        mode = np.zeros(sc.n)
        mode[1:-1] = Z @ vecs[:, 0]
        if len(_CRITICAL_CACHE) > 32:
            _CRITICAL_CACHE.clear()
        _CRITICAL_CACHE[key] = (float(vals[0]), mode)
    p, mode = _CRITICAL_CACHE[key]
    return p * sc.force_scale, mode.copy()


def critical_distance(problem: ElasticaProblem) -> float:
    """End distance below which the compressed flat state is unstable."""
    load, _ = critical_load(problem)
    ratio = load / problem.axial_stiffness
    disc = 1.0 - 4.0 * ratio
    if disc <= 0:
        return 0.0
    e_cr = 0.5 * (-1.0 + np.sqrt(disc))
    return problem.grid.sheet_length * (1.0 + e_cr)


# --------------------------------------------------------------------------
# buckled branch


def _seed(sc: _Scaled, amplitude: float, sign: int, lam_x: float):
    """Angles of z = a (1 - cos(2 pi s)), with the matching stretch and multipliers."""
    s = np.linspace(0.0, 1.0, sc.n)
    theta = np.arctan(sign * amplitude * 2.0 * np.pi * np.sin(2.0 * np.pi * s))
    theta[0] = theta[-1] = 0.0
    lam = np.array([lam_x, 0.0])
    eps = lam_x * np.cos(theta) / sc.S
    return theta, eps, lam


def _package(sc: _Scaled, theta, eps, lam, rnorm, iters) -> ElasticaSolution:
    placement = Placement.from_angles(sc.problem.grid, theta, eps)
    zmid = _mid_height(sc, theta, eps)
    sign = int(np.sign(zmid)) if abs(zmid) > 1e-12 else 0
    return ElasticaSolution(
        placement=placement,
        multipliers=(float(lam[0] * sc.force_scale), float(lam[1] * sc.force_scale)),
        residual_norm=float(rnorm),
        newton_iterations=int(iters),
        branch_sign=sign,
    )


def _mid_height(sc, theta, eps):
    half = 0.5 / (sc.n - 1)
    f = (1.0 + eps) * np.sin(theta)
    m = sc.n // 2
    return float(np.sum(half * (f[1 : m + 1] + f[:m])))


def _attempt(sc, theta, eps, lam, settings, need_stability):
    th, ep, lm, rnorm, iters, ok = _newton(sc, theta, eps, lam, settings)
    if not ok:
        return None, rnorm, iters
    zmid = _mid_height(sc, th, ep)
    if np.sign(zmid) != settings.branch_sign or abs(zmid) < 1e-10:
        return None, rnorm, iters
    if need_stability and not _is_stable(sc, th, ep, lm):
        return None, rnorm, iters
    return (th, ep, lm, rnorm), rnorm, iters


def solve_equilibrium(
    problem: ElasticaProblem,
    initial_guess: Optional[ElasticaSolution] = None,
    settings: SolverSettings = SolverSettings(),
) -> ElasticaSolution:
    """Stable equilibrium on the requested branch at the problem's end distance.

    Above the buckling distance the compressed flat state is returned
    directly. Otherwise Newton is tried from the warm start (if any), then
    from a seeded first-mode shape, and finally by continuation in the end
    distance starting just past the threshold.
    """
    if settings.branch_sign not in (1, -1):
        raise ValueError("branch_sign must be +1 or -1")
    d_cr = critical_distance(problem)
    if problem.end_distance >= d_cr:
        return flat_solution(problem)

    sc = _Scaled(problem)
    total_iters = 0
    last_res = np.inf

    if initial_guess is not None and initial_guess.branch_sign == settings.branch_sign:
        p = initial_guess.placement
        lam0 = np.asarray(initial_guess.multipliers, dtype=float) / sc.force_scale
        got, last_res, it = _attempt(sc, p.theta, p.eps, lam0, settings, settings.check_stability)
        total_iters += it
        if got is not None:
            return _package(sc, *got, total_iters)

    e_cr = d_cr / sc.ell - 1.0
    lam_x0 = sc.S * e_cr
    gap = d_cr / sc.ell - sc.d
    a_target = np.sqrt(max(gap, 0.0)) / np.pi
    got, last_res, it = _attempt(sc, *_seed(sc, a_target, settings.branch_sign, lam_x0), settings, True)
    total_iters += it
    if got is not None:
        return _package(sc, *got, total_iters)

    # continuation from just past the threshold
    a0 = settings.seed_amplitude
    d_start = d_cr / sc.ell - (np.pi * a0) ** 2
    if d_start <= sc.d:
        raise SolverError("Newton failed from the seeded shape", last_res)
    got, last_res, it = _attempt(
        _Scaled(problem.with_distance(d_start * sc.ell)),
        *_seed(sc, a0, settings.branch_sign, lam_x0),
        settings,
        True,
    )
    total_iters += it
    if got is None:
        raise SolverError("Newton failed at the first continuation point", last_res)
    state, d_now, rnorm = got[:3], d_start, got[3]
    step = (d_now - sc.d) / 8.0
    halvings = 0
    while d_now > sc.d:
        d_next = max(sc.d, d_now - step)
        sub = _Scaled(problem.with_distance(d_next * sc.ell))
        got, last_res, it = _attempt(sub, *state, settings, False)
        total_iters += it
        if got is None:
            halvings += 1
            if halvings > settings.continuation_halvings:
                raise SolverError("continuation in end distance stalled", last_res)
            step *= 0.5
            continue
        state, d_now = got[:3], d_next
        rnorm = got[3]
    if not _is_stable(sc, *state):
        raise SolverError("continuation ended on an unstable equilibrium", rnorm)
    return _package(sc, *state, rnorm, total_iters)


def solve_sequence(problem: ElasticaProblem, distances, settings: SolverSettings = SolverSettings()):
    """Warm-started solves along a list of end distances (pure-macro reference run)."""
    out = []
    prev = None
    for d in distances:
        prev = solve_equilibrium(problem.with_distance(float(d)), prev, settings)
        out.append(prev)
    return out


def linearized_mode_shape(grid: MaterialGrid, amplitude: float) -> np.ndarray:
    """Small-deflection first clamped mode z = a (1 - cos(2 pi s / l))."""
    return amplitude * (1.0 - np.cos(2.0 * np.pi * grid.s / grid.sheet_length))


__all__ = [
    "ElasticaProblem",
    "ElasticaSolution",
    "SolverSettings",
    "bending_matrix",
    "critical_distance",
    "critical_load",
    "energy_gradient",
    "flat_solution",
    "kkt_residual",
    "lagrangian",
    "linearized_mode_shape",
    "solve_equilibrium",
    "solve_sequence",
    "total_energy",
]
