"""Monitored quantities and theorem-level checks on simulation output."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np

from . import model
from . import spectral as sp
from .errors import BlowUpError, DissipationFailure, FitDomainError, InsufficientDataError, StructureError
from .spectral import Domain, SpectralField

SPINODAL_THRESHOLD = math.sqrt(3.0) / 3.0
COEFF_FLOOR = 1e-14


@dataclass(frozen=True)
class DiagnosticsRecord:
    time: float
    mass: float
    energy: float
    grad_mu_sq: float
    v_sq: float
    h1_dist: float
    h2_dist: float
    h4_weighted: float
    gevrey_slope: float

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DecayFit:
    rate: float
    intercept: float
    r_squared: float
    window: tuple[float, float]
    n_samples: int = 0


def _perturbation(phi: SpectralField) -> np.ndarray:
    c = np.array(phi.coeffs)
    c[(0,) * phi.domain.dim] = 0.0
    return c


def _weighted_sq(coeffs, domain: Domain, s: float) -> float:
    return float(np.sum(coeffs**2 * (1.0 + domain.eigenvalues) ** s))


def record(state, params: model.ModelParams, lambda_floor: float = 0.0) -> DiagnosticsRecord:
    """Diagnostics of one state; reuses the state's cached evaluation."""
    phi = state.phi
    dom = phi.domain
    ev = state.evaluation(params)
    pert = _perturbation(phi)
    try:
        slope, _ = gevrey_fit(phi, lambda_floor)
    except InsufficientDataError:
        slope = float("nan")
    return DiagnosticsRecord(
        time=float(state.time),
        mass=phi.mean,
        energy=ev.energy,
        grad_mu_sq=ev.grad_mu_sq,
        v_sq=ev.v_sq,
        h1_dist=math.sqrt(_weighted_sq(pert, dom, 1)),
        h2_dist=math.sqrt(_weighted_sq(pert, dom, 2)),
        h4_weighted=float(state.time) * _weighted_sq(phi.coeffs, dom, 4),
        gevrey_slope=slope,
    )


def _linear_fit(x, y):
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot <= 1e-300:
        r2 = 1.0 if ss_res <= 1e-300 else 0.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return float(slope), float(intercept), r2


def fit_exponential_decay(times, values, window: tuple[float, float] | None = None) -> DecayFit:
    """Least-squares line through ``(t, log value)``; ``rate`` is minus the slope."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape:
        raise StructureError("times and values differ in length")
    if window is not None:
        mask = (t >= window[0]) & (t <= window[1])
        t, v = t[mask], v[mask]
    if t.size < 10:
        raise InsufficientDataError(f"need at least 10 samples in the fit window, got {t.size}")
    if np.any(~(v > 0)):
        raise FitDomainError("exponential fit needs strictly positive values")
    slope, intercept, r2 = _linear_fit(t, np.log(v))
    return DecayFit(rate=-slope, intercept=intercept, r_squared=r2,
                    window=(float(t[0]), float(t[-1])), n_samples=int(t.size))


def shell_maxima(phi: SpectralField) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalue of each shell and the largest ``|coefficient|`` on it."""
    lam_shell, index = phi.domain.shells
    peaks = np.zeros(lam_shell.size)
    np.maximum.at(peaks, index.ravel(), np.abs(phi.coeffs).ravel())
    return lam_shell, peaks


def gevrey_fit(phi: SpectralField, lambda_floor: float = 0.0) -> tuple[float, float]:
    """Slope of ``log |phi_k|`` against ``sqrt(1 + lambda_k)`` over shell maxima.

    A negative slope ``-tau`` means the coefficients decay like
    ``exp(-tau sqrt(1 + lambda))``, i.e. an analyticity band of width ~tau.
    """
    if any(p != sp.COSINE for p in phi.parity):
        raise StructureError("gevrey_fit needs a cosine-parity field")
    lam, peaks = shell_maxima(phi)
    keep = (lam > 0) & (lam >= lambda_floor) & (peaks > COEFF_FLOOR)
    if np.count_nonzero(keep) < 5:
        raise InsufficientDataError("fewer than 5 usable eigenvalue shells")
    slope, _, r2 = _linear_fit(np.sqrt(1.0 + lam[keep]), np.log(peaks[keep]))
    return slope, r2


@dataclass(frozen=True)
class ConditionsReport:
    dim: int
    mean: float
    spinodal_threshold: float
    outside_spinodal: bool
    edges: tuple[float, ...]
    edge_limit: float
    domain_condition: bool
    poincare_constant: float
    epsilon_sq: float
    poincare_below_eps_sq: bool
    initial_h2_dist_sq: float

    @property
    def small_perturbation_theorem(self) -> bool:
        """Hypotheses checkable up front (the smallness threshold is not constructive)."""
        return self.outside_spinodal

    @property
    def large_perturbation_theorem(self) -> bool:
        return self.dim == 2 and self.domain_condition

    def lines(self) -> list[str]:
        ok = {True: "satisfied", False: "violated"}
        return [
            f"mean phi = {self.mean:.6g}; spinodal threshold sqrt(3)/3 = {self.spinodal_threshold:.6g}",
            f"outside spinodal (|mean| > sqrt(3)/3): {ok[self.outside_spinodal]}",
            f"edges = {', '.join(f'{e:.6g}' for e in self.edges)}; limit eps*pi = {self.edge_limit:.6g}",
            f"domain condition (longest edge < eps*pi): {ok[self.domain_condition]}",
            f"Poincare constant C = {self.poincare_constant:.6g} vs eps^2 = {self.epsilon_sq:.6g}: "
            f"{ok[self.poincare_below_eps_sq]}",
            f"initial ||phi0 - mean||_H2^2 = {self.initial_h2_dist_sq:.6g}",
            f"small-perturbation decay hypotheses (besides smallness): "
            f"{ok[self.small_perturbation_theorem]}",
            f"large-perturbation decay hypotheses (2D only): {ok[self.large_perturbation_theorem]}",
        ]


def check_theorem_conditions(domain: Domain, phi0: SpectralField) -> ConditionsReport:
    mean = phi0.mean
    limit = domain.epsilon * math.pi
    cp = sp.poincare_constant(domain)
    return ConditionsReport(
        dim=domain.dim,
        mean=mean,
        spinodal_threshold=SPINODAL_THRESHOLD,
        outside_spinodal=abs(mean) > SPINODAL_THRESHOLD,
        edges=domain.extents,
        edge_limit=limit,
        domain_condition=max(domain.extents) < limit,
        poincare_constant=cp,
        epsilon_sq=domain.epsilon**2,
        poincare_below_eps_sq=cp < domain.epsilon**2,
        initial_h2_dist_sq=_weighted_sq(_perturbation(phi0), domain, 2),
    )


def stored_energy_density(tilde, phi2):
    """Closed form of ``int_0^tilde ((phi2 + xi)^3 - phi2^3) d xi``."""
    return 0.25 * tilde**4 + phi2 * tilde**3 + 1.5 * phi2**2 * tilde**2


def stored_energy_distance(phi1: SpectralField, phi2: SpectralField) -> float:
    """``1/2 ||grad d||^2 + 1/2 ||d||^2 + int G(d)`` with ``d = phi1 - phi2``."""
    if not phi1.domain.same_as(phi2.domain):
        raise StructureError("fields live on different domains")
    dom = phi1.domain
    d = phi1.coeffs - phi2.coeffs
    grid = tuple(2 * n for n in dom.modes)
    par = (sp.COSINE,) * dom.dim
    d_phys = sp.synthesize_array(d, par, dom.extents, grid)
    p2_phys = sp.synthesize_array(phi2.coeffs, par, dom.extents, grid)
    cell = dom.volume / float(np.prod(grid))
    g_int = float(np.sum(stored_energy_density(d_phys, p2_phys)) * cell)
    return 0.5 * float(np.sum(dom.eigenvalues * d**2)) + 0.5 * float(np.sum(d**2)) + g_int


def gronwall_bound(times, distances, mu_h2_sq, v_h1_sq, constant: float = 1.0):
    """Upper envelope ``exp(K(t)) * distance(0)`` with ``K`` the trapezoid integral of
    ``constant * (||mu||_H2^2 + ||v||_H1^2 + 1)`` along the reference run.

    Returns ``(bound, crossings)`` where ``crossings`` counts samples above it.
    """
    t = np.asarray(times, dtype=float)
    integrand = constant * (np.asarray(mu_h2_sq) + np.asarray(v_h1_sq) + 1.0)
    K = np.concatenate([[0.0], np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(t))])
    bound = np.exp(K) * float(distances[0])
    crossings = int(np.count_nonzero(np.asarray(distances) > bound * (1 + 1e-12)))
    return bound, crossings


def energy_law_residual(times, energies, grad_mu_sq, v_sq, gamma: float = 1.0) -> np.ndarray:
    """``(E_{n+1} - E_n)/dt_n + ||grad mu_n||^2 + ||v_n||^2 / gamma`` per step."""
    t = np.asarray(times, dtype=float)
    E = np.asarray(energies, dtype=float)
    diss = np.asarray(grad_mu_sq, dtype=float)
    if gamma > 0:
        diss = diss + np.asarray(v_sq, dtype=float) / gamma
    return np.diff(E) / np.diff(t) + diss[:-1]


@dataclass(frozen=True)
class SmoothingSeries:
    times: np.ndarray
    values: np.ndarray

    @property
    def max_value(self) -> float:
        return float(np.max(self.values)) if self.values.size else 0.0


def smoothing_monitor(trajectory) -> SmoothingSeries:
    """``t * ||phi(t)||_H4^2`` along a trajectory, restricted to ``t > 0``."""
    times = np.array([r.time for r in trajectory.records])
    vals = np.array([r.h4_weighted for r in trajectory.records])
    keep = times > 0
    return SmoothingSeries(times[keep], vals[keep])


def smoothing_resolution_study(coarse, fine) -> dict:
    """Compare the smoothing maxima of runs at N and 2N with the same IC spectrum."""
    a = smoothing_monitor(coarse).max_value
    b = smoothing_monitor(fine).max_value
    return {
        "modes_coarse": coarse.final_state.phi.domain.modes,
        "modes_fine": fine.final_state.phi.domain.modes,
        "max_coarse": a,
        "max_fine": b,
        "relative_difference": abs(a - b) / max(abs(b), 1e-300),
    }


def mu_h2_sq(state, params) -> float:
    ev = state.evaluation(params)
    return _weighted_sq(ev.mu, state.phi.domain, 2)


def v_h1_sq(state, params) -> float:
    ev = state.evaluation(params)
    dom = state.phi.domain
    return float(sum(_weighted_sq(c, dom, 1) for c in ev.velocity))


def h_dist_sq(phi: SpectralField, s: float) -> float:
    return _weighted_sq(_perturbation(phi), phi.domain, s)


def records_to_columns(records: Sequence[DiagnosticsRecord]) -> dict[str, np.ndarray]:
    return {name: np.array([getattr(r, name) for r in records]) for name in DiagnosticsRecord.columns()}


def bisect_threshold(predicate, lo: float, hi: float, iterations: int = 8) -> tuple[float, float]:
    """Bracket the switch of a monotone predicate: True at ``lo``, False at ``hi``."""
    if not predicate(lo):
        raise FitDomainError("predicate fails at the lower end of the bracket")
    if predicate(hi):
        return hi, hi
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if predicate(mid):
            lo = mid
        else:
            hi = mid
    return lo, hi


@dataclass(frozen=True)
class BasinProbe:
    lower: float           # largest H2 size observed to decay
    upper: float           # smallest H2 size observed not to (== lower if none failed)
    bracketed: bool


def smallness_probe(domain: Domain, mean: float, seed: int, h2_range: tuple[float, float],
                    t_end: float, params: model.ModelParams | None = None,
                    iterations: int = 6, q: float = 2.0, shrink: float = 0.1) -> BasinProbe:
    """Empirical decay basin in ``||phi0 - mean||_H2`` along one random direction.

    A perturbation counts as decaying when its H2 distance at ``t_end`` is
    below ``shrink`` times the initial one.  The result is an observation for
    this direction and horizon, not the theoretical smallness constant.
    """
    from .initial import random_perturbation
    from .integrator import IntegratorConfig, State, run

    params = params or model.ModelParams.from_domain(domain)
    cfg = IntegratorConfig(dt=1e-3, dt_max=5e-2, adapt=True, t_end=t_end, checkpoint_every=10**9)

    def decays(size):
        c = random_perturbation(domain, mean, 1.0, seed, q=q, h2_norm=size)
        try:
            final = run(State(SpectralField(domain, c)), cfg, params, record_initial=False).final_state
        except (BlowUpError, DissipationFailure):
            return False
        return h_dist_sq(final.phi, 2) < (shrink * size) ** 2

    lo, hi = bisect_threshold(decays, *h2_range, iterations=iterations)
    return BasinProbe(lower=lo, upper=hi, bracketed=hi > lo)
