"""Staggered time loop coupling the elastica, the fibre field and the back-coupling.

One step from t_n to t_{n+1}:

1. d <- schedule(t_{n+1})
2. equilibrium at d with the current stiffness field, warm-started from t_n
3. mid-step macro fields (c, kappa) as the average of the t_n and t_{n+1} fields
4. fibre step
5. coupling fields and stiffness update

With ``fp_enabled`` and beta > 0, steps 2-5 are repeated from the same t_n
state until the stiffness field stops changing.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from ._parallel import resolve_workers
from .config import SimConfig, fock_level
from .coupling import BackCouplingLaw, CouplingField, compute_coupling
from .elastica import ElasticaProblem, ElasticaSolution, SolverSettings, solve_equilibrium, total_energy
from .errors import CouplingDivergenceError, HilbertSimError, StepError, UnitarityError
from .kinematics import MaterialGrid, Placement, macro_scalars
from .oscillator import OscillatorField, OscillatorPreset, oscillator_step
from .qubit import ConstitutivePreset, FibreField, fibre_step, unitarity_defect

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Schedule:
    kind: str
    T: float
    dt: float
    sheet_length: float
    d_final: float
    points: tuple = ()

    @classmethod
    def from_config(cls, cfg: SimConfig) -> "Schedule":
        s = cfg.schedule
        return cls(s.kind, s.T, s.dt, cfg.sheet.sheet_length, s.d_final, s.points)

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    def time(self, n: int) -> float:
        return n * self.dt

    def d(self, t: float) -> float:
        if self.kind == "ramp":
            frac = min(max(t / self.T, 0.0), 1.0)
            return self.sheet_length + (self.d_final - self.sheet_length) * frac
        if self.kind == "hold":
            return self.d_final
        ts, ds = zip(*self.points)
        return float(np.interp(t, ts, ds))


@dataclass(frozen=True)
class MacroState:
    solution: ElasticaSolution
    c: np.ndarray
    kappa: np.ndarray
    B: np.ndarray
    energy: float

    @property
    def placement(self) -> Placement:
        return self.solution.placement


@dataclass(frozen=True)
class Snapshot:
    step: int
    t: float
    d: float
    s: np.ndarray
    x: np.ndarray
    z: np.ndarray
    theta: np.ndarray
    eps: np.ndarray
    kappa: np.ndarray
    B: np.ndarray
    w_norm: np.ndarray
    p_up: np.ndarray
    fidelity: np.ndarray
    U: np.ndarray
    psi: np.ndarray
    elastic_energy: float
    newton_iters: int
    inner_iters: int

    @property
    def max_abs_kappa(self) -> float:
        return float(np.max(np.abs(self.kappa)))

    @property
    def max_w(self) -> float:
        return float(np.max(self.w_norm))

    @property
    def min_w(self) -> float:
        return float(np.min(self.w_norm))

    @property
    def min_fidelity(self) -> float:
        return float(np.min(self.fidelity))


@dataclass
class TrajectoryRecord:
    config: SimConfig
    snapshots: List[Snapshot] = field(default_factory=list)
    inner_history: List[List[float]] = field(default_factory=list)
    macro_history: List[ElasticaSolution] = field(default_factory=list)

    @property
    def times(self):
        return np.array([s.t for s in self.snapshots])


@dataclass(frozen=True)
class StepState:
    macro: MacroState
    fibre: object
    coupling: CouplingField


class _Model:
    """Bundles the per-run objects so one step can be re-executed during fixed-point iteration."""

    def __init__(self, cfg: SimConfig, workers: Optional[int] = None):
        self.cfg = cfg
        self.grid = MaterialGrid(cfg.sheet.n_nodes, cfg.sheet.sheet_length)
        self.schedule = Schedule.from_config(cfg)
        self.law = BackCouplingLaw(cfg.coupling.beta, cfg.sheet.bending_stiffness, cfg.coupling.law)
        nm = cfg.numerics
        self.settings = SolverSettings(
            tol=nm.newton_tol,
            max_newton=nm.max_newton,
            seed_amplitude=nm.seed_amplitude,
            branch_sign=nm.branch_sign,
        )
        self.workers = resolve_workers(self.grid.n_nodes, workers)
        self.warned = False
        fb = cfg.fibre
        if fb.kind == "qubit":
            self.preset = ConstitutivePreset(fb.preset, fb.mu, fb.coupling_length, fb.gain)
            self.unitarity_tol = 1e-12
        else:
            self.preset = OscillatorPreset(
                fb.preset, fb.mu, fb.coupling_length, fb.N_f, fb.drive, fb.truncation_threshold
            )
            self.unitarity_tol = 1e-10

    def initial_fibre(self):
        fb = self.cfg.fibre
        if fb.kind == "qubit":
            return FibreField.initial(self.grid, fb.initial_state)
        return OscillatorField.initial(self.grid, fb.N_f, fock_level(fb.initial_state))

    def fibre_step(self, fibre, c_mid, kappa_mid, t):
        dt = self.schedule.dt
        if isinstance(fibre, FibreField):
            return fibre_step(fibre, c_mid, kappa_mid, self.preset, dt, self.workers)
        return oscillator_step(fibre, c_mid, kappa_mid, self.preset, dt, time=t, workers=self.workers)

    def macro(self, d, B, warm: Optional[ElasticaSolution]) -> MacroState:
        problem = ElasticaProblem(self.grid, B, self.cfg.sheet.axial_stiffness, d)
        sol = solve_equilibrium(problem, warm, self.settings)
        c, kappa = macro_scalars(sol.placement)
        return MacroState(sol, c, kappa, B, total_energy(problem, sol.placement))

    def coupling(self, fibre) -> CouplingField:
        # with beta = 0 the gradient is a diagnostic only, so an unresolved
        # field is logged rather than fatal
        strict = self.law.beta > 0
        field_ = compute_coupling(
            fibre.U, self.grid, self.law, rtol=self.cfg.coupling.antihermitian_rtol, strict=strict
        )
        if not strict and field_.defect > self.cfg.coupling.antihermitian_rtol and not self.warned:
            log.warning(
                "fibre gradient unresolved on this grid (relative Hermitian defect %.2e); "
                "w_norm is unreliable but does not feed back since beta = 0",
                field_.defect,
            )
            self.warned = True
        return field_


def single_pass(model: _Model, state: StepState, d_next: float, t_next: float, B_in) -> StepState:
    macro = model.macro(d_next, B_in, state.macro.solution)
    c_mid = 0.5 * (state.macro.c + macro.c)
    kappa_mid = 0.5 * (state.macro.kappa + macro.kappa)
    fibre = model.fibre_step(state.fibre, c_mid, kappa_mid, t_next)
    return StepState(macro, fibre, model.coupling(fibre))


def fixed_point_iterate(pass_fn: Callable, B_start, B0: float, fp_tol: float, max_inner: int, enabled: bool = True):
    """Repeat ``pass_fn(B)`` until max|B_out - B_in| / B0 <= fp_tol.

    Returns (state, iterations, history of relative stiffness changes).
    A single pass is made when disabled or when the pass leaves B unchanged.
    """
    B_in = B_start
    history = []
    for it in range(1, max_inner + 1):
        state = pass_fn(B_in)
        B_out = state.coupling.B
        delta = float(np.max(np.abs(B_out - B_in)) / B0)
        history.append(delta)
        if not enabled or delta <= fp_tol:
            return state, it, history
        B_in = B_out
    raise CouplingDivergenceError(
        f"fixed-point coupling did not converge in {max_inner} iterations "
        f"(last relative change {history[-1]:.3e}); reduce dt or beta"
    )


def _audit(model: _Model, state: StepState):
    fibre = state.fibre
    defect = float(np.max(unitarity_defect(fibre.U)))
    if defect > model.unitarity_tol:
        raise UnitarityError(f"accumulated propagator defect {defect:.2e}")
    if float(np.max(fibre.consistency_defect())) > 1e-9:
        raise UnitarityError("state no longer equals propagator applied to the initial state")
    if np.any(state.coupling.B < model.law.B0):
        raise UnitarityError("stiffness fell below the base value")


def _snapshot(model, step, t, d, state: StepState, newton_iters, inner_iters) -> Snapshot:
    _audit(model, state)
    p = state.macro.placement
    return Snapshot(
        step=step,
        t=t,
        d=d,
        s=model.grid.s,
        x=p.x.copy(),
        z=p.z.copy(),
        theta=p.theta.copy(),
        eps=p.eps.copy(),
        kappa=state.macro.kappa.copy(),
        B=state.macro.B.copy(),
        w_norm=state.coupling.w_norm.copy(),
        p_up=state.fibre.p_up.copy(),
        fidelity=state.fibre.fidelity.copy(),
        U=state.fibre.U.copy(),
        psi=state.fibre.psi.copy(),
        elastic_energy=state.macro.energy,
        newton_iters=newton_iters,
        inner_iters=inner_iters,
    )


def run(cfg: SimConfig, workers: Optional[int] = None, keep_macro: bool = False) -> TrajectoryRecord:
    model = _Model(cfg, workers)
    sched = model.schedule
    stride = cfg.schedule.snapshot_stride
    record = TrajectoryRecord(cfg)
    B0 = cfg.sheet.bending_stiffness

    t0, d0 = sched.time(0), sched.d(sched.time(0))
    try:
        macro = model.macro(d0, np.full(model.grid.n_nodes, B0), None)
        fibre = model.initial_fibre()
        state = StepState(macro, fibre, model.coupling(fibre))
    except HilbertSimError as exc:
        raise StepError(0, t0, exc) from exc
    if keep_macro:
        record.macro_history.append(macro.solution)
    if stride:
        record.snapshots.append(_snapshot(model, 0, t0, d0, state, macro.solution.newton_iterations, 0))

    n_steps = sched.n_steps
    for n in range(n_steps):
        t1 = sched.time(n + 1)
        d1 = sched.d(t1)
        try:
            state, inner, history = fixed_point_iterate(
                lambda B: single_pass(model, state, d1, t1, B),
                state.coupling.B,
                B0,
                cfg.coupling.fp_tol,
                cfg.coupling.max_inner,
                enabled=cfg.coupling.fp_enabled and cfg.coupling.beta > 0,
            )
            record.inner_history.append(history)
            if keep_macro:
                record.macro_history.append(state.macro.solution)
            if stride and ((n + 1) % stride == 0 or n + 1 == n_steps):
                record.snapshots.append(
                    _snapshot(model, n + 1, t1, d1, state, state.macro.solution.newton_iterations, inner)
                )
        except HilbertSimError as exc:
            raise StepError(n + 1, t1, exc) from exc
    log.debug("run finished: %d steps, %d snapshots", n_steps, len(record.snapshots))
    return record
