"""Time stepping for the Galerkin system.

``step_imex`` is first-order IMEX: the biharmonic term and a linear
stabilization ``s * Delta(phi^{n+1} - phi^n)`` are implicit, everything else
is explicit.  ``step_rk4`` is a classical explicit reference used as an
oracle at small resolution.  ``run`` adds energy-based step rejection.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import model
from .diagnostics import DiagnosticsRecord, record
from .errors import BlowUpError, DissipationFailure
from .model import Evaluation, ModelParams
from .spectral import SpectralField

log = logging.getLogger(__name__)

BLOWUP_THRESHOLD = 1e8
SCHEMES = ("imex_stabilized", "rk4_reference")


class State:
    """``phi`` at a given time, with the derived fields cached on first use."""

    __slots__ = ("phi", "time", "_cache")

    def __init__(self, phi: SpectralField, time: float = 0.0):
        self.phi = phi
        self.time = float(time)
        self._cache: tuple[ModelParams, Evaluation] | None = None

    def evaluation(self, params: ModelParams) -> Evaluation:
        if self._cache is None or self._cache[0] != params:
            self._cache = (params, model.evaluate(self.phi, params))
        return self._cache[1]

    @property
    def mean(self) -> float:
        return self.phi.mean

    def __repr__(self):
        return f"State(t={self.time:.6g}, modes={self.phi.domain.modes})"


@dataclass
class IntegratorConfig:
    scheme: str = "imex_stabilized"
    dt: float = 1e-3
    dt_min: float = 1e-9
    dt_max: float = 1e-1
    stabilization_s: float = 2.0
    # allowed per-step energy increase is energy_tol * (1 + |E|)
    energy_tol: float = 1e-10
    adapt: bool = False
    t_end: float = 1.0
    checkpoint_every: int = 100
    max_steps: int | None = None
    grow_factor: float = 1.2
    shrink_factor: float = 0.5
    patience: int = 10

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if not (0 < self.dt_min <= self.dt <= self.dt_max):
            raise ValueError("need 0 < dt_min <= dt <= dt_max")
        if self.stabilization_s < 0:
            raise ValueError("stabilization_s must be nonnegative")
        if self.energy_tol < 0:
            raise ValueError("energy_tol must be nonnegative")
        if self.checkpoint_every < 1:
            raise ValueError("checkpoint_every must be >= 1")
        if not (0 < self.shrink_factor < 1 and self.grow_factor >= 1 and self.patience >= 1):
            raise ValueError("invalid adaptivity factors")


@dataclass
class Trajectory:
    records: list[DiagnosticsRecord] = field(default_factory=list)
    dts: list[float] = field(default_factory=list)
    snapshots: dict[float, State] = field(default_factory=dict)
    final_state: State | None = None
    accepted: int = 0
    rejected: int = 0
    dt_next: float = 0.0
    streak: int = 0
    step_index: int = 0

    @property
    def times(self) -> np.ndarray:
        return np.array([r.time for r in self.records])

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def _check_finite(coeffs, step, time, state):
    if not np.all(np.isfinite(coeffs)):
        raise BlowUpError(step, time, "non-finite coefficients", state)
    peak = float(np.abs(coeffs).max())
    if peak > BLOWUP_THRESHOLD:
        raise BlowUpError(step, time, f"coefficient magnitude {peak:.3g} exceeds {BLOWUP_THRESHOLD:g}", state)


def step_imex(state: State, dt: float, params: ModelParams, s: float = 2.0, step: int = 0) -> State:
    """One stabilized semi-implicit step; the mass mode is copied unchanged."""
    phi = state.phi
    dom = phi.domain
    lam = dom.eigenvalues
    c = phi.coeffs
    ev = state.evaluation(params)
    denom = 1.0 + dt * params.epsilon**2 * lam**2 + dt * s * lam
    new = (c + dt * (ev.nonlinear + s * lam * c)) / denom
    zero = (0,) * dom.dim
    new[zero] = c[zero]
    _check_finite(new, step, state.time + dt, state)
    return State(phi.with_coeffs(new), state.time + dt)


def step_rk4(state: State, dt: float, params: ModelParams, step: int = 0) -> State:
    """Classical RK4 on the Galerkin ODE; the mass mode is pinned."""
    phi = state.phi
    c = phi.coeffs
    zero = (0,) * phi.domain.dim

    def f(coeffs):
        return model.evaluate(phi.with_coeffs(coeffs), params).rhs

    k1 = state.evaluation(params).rhs
    k2 = f(c + 0.5 * dt * k1)
    k3 = f(c + 0.5 * dt * k2)
    k4 = f(c + dt * k3)
    new = c + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    new[zero] = c[zero]
    _check_finite(new, step, state.time + dt, state)
    return State(phi.with_coeffs(new), state.time + dt)


def advance(state: State, dt: float, cfg: IntegratorConfig, params: ModelParams, step: int = 0) -> State:
    if cfg.scheme == "imex_stabilized":
        return step_imex(state, dt, params, cfg.stabilization_s, step)
    return step_rk4(state, dt, params, step)


Hook = Callable[[State, Trajectory], None]


def run(initial: State, cfg: IntegratorConfig, params: ModelParams,
        hooks: Sequence[Hook] = (), snapshot_times: Sequence[float] = (),
        record_initial: bool = True, streak: int = 0, step_index: int = 0) -> Trajectory:
    """Integrate ``initial`` to ``cfg.t_end``.

    With ``cfg.adapt`` a step that raises the energy by more than
    ``energy_tol * (1 + |E|)`` is retried with a smaller step; after
    ``patience`` consecutive accepted steps the step grows again.  Hooks are
    called every ``checkpoint_every`` accepted steps and once at the end.
    ``streak`` and ``step_index`` let a resumed run continue bit-identically.
    """
    traj = Trajectory(streak=streak, step_index=step_index)
    state = initial
    pending = sorted(float(t) for t in snapshot_times)
    if record_initial:
        traj.records.append(record(state, params))
        traj.dts.append(0.0)
    while pending and pending[0] <= state.time:
        traj.snapshots[pending.pop(0)] = state

    dt = min(max(cfg.dt, cfg.dt_min), cfg.dt_max)
    streak = traj.streak
    step_index = traj.step_index
    while True:
        remaining = cfg.t_end - state.time
        if remaining <= 1e-12 * max(1.0, abs(cfg.t_end)):
            break
        if cfg.max_steps is not None and traj.accepted >= cfg.max_steps:
            break
        # land on t_end without splitting a step that already reaches it up to rounding
        step_dt = dt if dt <= remaining * (1 + 1e-9) else remaining
        energy_old = state.evaluation(params).energy if cfg.adapt else 0.0
        while True:
            new = advance(state, step_dt, cfg, params, step_index + 1)
            if not cfg.adapt:
                break
            energy_new = new.evaluation(params).energy
            if energy_new <= energy_old + cfg.energy_tol * (1.0 + abs(energy_old)):
                break
            traj.rejected += 1
            streak = 0
            step_dt *= cfg.shrink_factor
            dt = step_dt
            if step_dt < cfg.dt_min:
                raise DissipationFailure(state.time, step_dt, state)
            log.debug("rejected step at t=%.6g, retrying with dt=%.3g", state.time, step_dt)
        state = new
        step_index += 1
        traj.accepted += 1
        traj.records.append(record(state, params))
        traj.dts.append(step_dt)
        while pending and pending[0] <= state.time * (1 + 1e-12):
            traj.snapshots[pending.pop(0)] = state
        if cfg.adapt:
            streak += 1
            if streak >= cfg.patience:
                dt = min(dt * cfg.grow_factor, cfg.dt_max)
                streak = 0
        traj.final_state = state
        traj.dt_next = dt
        traj.streak = streak
        traj.step_index = step_index
        if traj.accepted % cfg.checkpoint_every == 0:
            for hook in hooks:
                hook(state, traj)

    traj.final_state = state
    traj.dt_next = dt
    traj.streak = streak
    traj.step_index = step_index
    for hook in hooks:
        hook(state, traj)
    return traj
