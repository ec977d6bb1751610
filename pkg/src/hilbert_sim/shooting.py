"""Pendulum-shooting reference for the uniform clamped elastica.

Integrates the continuous equilibrium equations

    B theta'' = (1 + eps) (F_x sin theta - F_z cos theta),
    eps       = (F_x cos theta + F_z sin theta) / S,
    x' = (1 + eps) cos theta,  z' = (1 + eps) sin theta,

with an 8th-order Dormand-Prince integrator and shoots on
(theta'(0), F_x, F_z) so that theta(l) = 0, x(l) = d, z(l) = 0. Used only
to verify the discrete solver; shares no code with it.
"""
from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import root

from .errors import OracleError
from .kinematics import Placement


def _rhs(S_inv, B):
    def f(s, y, fx, fz):
        th, om = y[0], y[1]
        c, sn = np.cos(th), np.sin(th)
        st = 1.0 + (fx * c + fz * sn) * S_inv
        return [om, st * (fx * sn - fz * c) / B, st * c, st * sn]

    return f


def _integrate(p, S_inv, B, s_eval=None):
    om0, fx, fz = p
    sol = solve_ivp(
        _rhs(S_inv, B),
        (0.0, 1.0),
        [0.0, om0, 0.0, 0.0],
        method="DOP853",
        rtol=1e-13,
        atol=1e-14,
        args=(fx, fz),
        t_eval=s_eval,
    )
    if not sol.success:
        raise OracleError(f"integration failed: {sol.message}")
    return sol


def _mismatch(p, S_inv, B, d):
    y = _integrate(p, S_inv, B).y[:, -1]
    return [y[0], y[2] - d, y[3]]


def shooting_oracle(problem, inextensible: bool = False, branch_sign: int = 1, d_step: float = 0.02) -> Placement:
    """Clamped-clamped equilibrium of a uniform rod by shooting.

    ``problem`` supplies the grid, the (uniform) bending stiffness, the axial
    stiffness and the end distance.
    """
    B_nodes = np.asarray(problem.bending_stiffness, dtype=float)
    if not np.allclose(B_nodes, B_nodes[0], rtol=0, atol=0):
        raise OracleError("shooting oracle needs uniform bending stiffness")
    grid = problem.grid
    ell = grid.sheet_length
    B0 = float(B_nodes[0])
    # dimensionless: s in [0, 1], forces in B0 / l^2
    S = problem.axial_stiffness * ell**2 / B0
    S_inv = 0.0 if inextensible else 1.0 / S
    d = problem.end_distance / ell

    p_cr = 4.0 * np.pi**2
    if inextensible:
        e_cr = 0.0
    else:
        disc = 1.0 - 4.0 * p_cr / S
        if disc <= 0:
            raise OracleError("axial stiffness too small for a buckled branch")
        e_cr = 0.5 * (-1.0 + np.sqrt(disc))
    d_cr = 1.0 + e_cr

    if d >= d_cr:
        if inextensible and d < 1.0:
            raise OracleError("inextensible rod cannot stay flat below d = l")
        eps = 0.0 if inextensible else d - 1.0
        return Placement.flat(grid, eps)

    def guess(d_target):
        a = np.sqrt(max(d_cr - d_target, 0.0)) / np.pi
        return np.array([branch_sign * 4.0 * np.pi**2 * a, -p_cr, 0.0])

    # march in d from just past the threshold; each solve warm-starts the next
    d_now = d_cr - min(1e-3, 0.5 * (d_cr - d))
    p = guess(d_now)
    targets = list(np.arange(d_now, d, -d_step)[1:]) + [d]
    for d_k in [d_now] + targets:
        sol = root(_mismatch, p, args=(S_inv, 1.0, d_k), method="hybr", options={"xtol": 1e-14})
        if not sol.success and np.max(np.abs(sol.fun)) > 1e-11:
            raise OracleError(f"shooting did not converge at d={d_k * ell!r}: {sol.message}")
        p = sol.x
    if np.sign(p[0]) != branch_sign:
        raise OracleError("shooting converged onto the wrong branch")

    traj = _integrate(p, S_inv, 1.0, s_eval=grid.s / ell)
    theta = traj.y[0].copy()
    theta[0] = 0.0
    fx, fz = p[1], p[2]
    eps = (fx * np.cos(theta) + fz * np.sin(theta)) * S_inv
    return Placement.from_angles(grid, theta, eps)
