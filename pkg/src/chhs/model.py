"""Right-hand side of the Cahn-Hilliard-Hele-Shaw system.

    phi_t + v . grad(phi) = Delta mu
    mu = phi^3 - phi - eps^2 Delta phi
    v  = -grad P + gamma mu grad(phi),   div v = 0,   v.n = 0

All pointwise products are formed on a midpoint grid padded by
``dealias_padding`` per axis and truncated back to the mode box.  With
padding 2 every product used here (cubic, and the two quadratic
advective products) is projected exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import spectral as sp
from .errors import NonFiniteError, StructureError
from .spectral import COSINE, Domain, SpectralField, VectorField


@dataclass(frozen=True)
class ModelParams:
    epsilon: float = 1.0
    gamma: float = 1.0
    advection_enabled: bool = True
    dealias_padding: int = 2

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.gamma >= 0:
            raise ValueError("gamma must be nonnegative")
        if self.dealias_padding not in (1, 2):
            raise ValueError("dealias_padding must be 1 or 2")

    @classmethod
    def from_domain(cls, domain: Domain, **kw) -> "ModelParams":
        return cls(epsilon=domain.epsilon, gamma=domain.gamma, **kw)


def double_well(phi_value):
    return 0.25 * (phi_value**2 - 1.0) ** 2


def double_well_prime(phi_value):
    return phi_value**3 - phi_value


def double_well_second(phi_value):
    return 3.0 * phi_value**2 - 1.0


@dataclass(frozen=True, eq=False)
class Evaluation:
    """Everything derived from one ``phi``; computed once per time level."""

    mu: np.ndarray              # cosine coefficients
    velocity: np.ndarray        # (dim, ...) sine/cosine coefficient stack
    pressure: np.ndarray        # cosine coefficients, mean zero
    nonlinear: np.ndarray       # Delta T(phi^3 - phi) - T(v . grad phi)
    rhs: np.ndarray             # Delta mu - T(v . grad phi), mass mode zeroed
    rhs_mass_residual: float    # 0-mode of rhs before zeroing
    energy: float
    grad_mu_sq: float
    v_sq: float


class _Grid:
    """Padded synthesis/analysis helpers bound to one domain."""

    def __init__(self, domain: Domain, padding: int):
        self.domain = domain
        self.grid = tuple(padding * n for n in domain.modes)
        self.cell = domain.volume / float(np.prod(self.grid))

    def synth(self, coeffs, parity=None):
        parity = parity or (COSINE,) * self.domain.dim
        return sp.synthesize_array(coeffs, parity, self.domain.extents, self.grid)

    def analyze(self, values, parity=None):
        parity = parity or (COSINE,) * self.domain.dim
        return sp.analyze_array(values, parity, self.domain.extents, self.domain.modes)


_grid_cache: dict = {}


def _grid(domain: Domain, padding: int) -> _Grid:
    key = (domain.extents, domain.modes, padding)
    g = _grid_cache.get(key)
    if g is None:
        g = _grid_cache[key] = _Grid(domain, padding)
    return g


def _check_phi(phi: SpectralField, p: ModelParams):
    if not isinstance(phi, SpectralField):
        raise StructureError("expected a SpectralField")
    if any(q != COSINE for q in phi.parity):
        raise StructureError("phi must have cosine parity on every axis")


def _cubic_part(phi_coeffs, g: _Grid):
    phys = g.synth(phi_coeffs)
    with np.errstate(over="ignore", invalid="ignore"):
        cube = phys**3
    if not np.all(np.isfinite(cube)):
        raise NonFiniteError("chemical_potential (phi^3)")
    return phys, g.analyze(cube)


def _mu_coeffs(phi_coeffs, domain, p, cube_hat):
    lam = domain.eigenvalues
    return cube_hat - phi_coeffs + p.epsilon**2 * lam * phi_coeffs


def _grad_phys(phi_coeffs, g: _Grid):
    dom = g.domain
    stack = sp.gradient_stack(phi_coeffs, dom)
    return [g.synth(stack[a], sp.velocity_parity(dom.dim, a)) for a in range(dom.dim)]


def _forcing_stack(mu_coeffs, grad_phys, p, g: _Grid):
    """Truncated sine-parity coefficients of ``gamma * mu * grad(phi)``."""
    dom = g.domain
    mu_phys = g.synth(mu_coeffs)
    return np.stack([
        g.analyze(p.gamma * mu_phys * grad_phys[a], sp.velocity_parity(dom.dim, a))
        for a in range(dom.dim)
    ])


def chemical_potential(phi: SpectralField, p: ModelParams) -> SpectralField:
    _check_phi(phi, p)
    g = _grid(phi.domain, p.dealias_padding)
    _, cube_hat = _cubic_part(phi.coeffs, g)
    return phi.with_coeffs(_mu_coeffs(phi.coeffs, phi.domain, p, cube_hat))


def velocity(phi: SpectralField, mu: SpectralField, p: ModelParams) -> VectorField:
    """Darcy velocity ``gamma * P_sigma(mu grad phi)`` in the truncated space."""
    _check_phi(phi, p)
    dom = phi.domain
    if not p.advection_enabled or p.gamma == 0:
        return VectorField.from_stack(dom, np.zeros((dom.dim,) + dom.shape))
    g = _grid(dom, p.dealias_padding)
    forcing = _forcing_stack(mu.coeffs, _grad_phys(phi.coeffs, g), p, g)
    return VectorField.from_stack(dom, sp.project_stack(forcing, dom))


def pressure(phi: SpectralField, mu: SpectralField, p: ModelParams) -> SpectralField:
    """Mean-zero ``P`` with ``Delta P = div(gamma mu grad phi)``."""
    _check_phi(phi, p)
    dom = phi.domain
    g = _grid(dom, p.dealias_padding)
    forcing = _forcing_stack(mu.coeffs, _grad_phys(phi.coeffs, g), p, g)
    return phi.with_coeffs(_pressure_from_forcing(forcing, dom))


def _pressure_from_forcing(forcing, dom):
    div = sp.divergence_stack(forcing, dom)
    inv = sp._inverse_eigenvalues(dom)
    return -div * inv


def evaluate(phi: SpectralField, p: ModelParams) -> Evaluation:
    """Chemical potential, velocity, pressure, rhs and energy in one pass."""
    _check_phi(phi, p)
    dom = phi.domain
    g = _grid(dom, p.dealias_padding)
    c = phi.coeffs
    lam = dom.eigenvalues

    phys, cube_hat = _cubic_part(c, g)
    mu = _mu_coeffs(c, dom, p, cube_hat)
    bulk = -lam * (cube_hat - c)

    if p.advection_enabled and p.gamma != 0:
        grad_phys = _grad_phys(c, g)
        forcing = _forcing_stack(mu, grad_phys, p, g)
        pres = _pressure_from_forcing(forcing, dom)
        vel = sp.project_stack(forcing, dom)
        v_phys = [g.synth(vel[a], sp.velocity_parity(dom.dim, a)) for a in range(dom.dim)]
        adv = g.analyze(sum(v_phys[a] * grad_phys[a] for a in range(dom.dim)))
    else:
        vel = np.zeros((dom.dim,) + dom.shape)
        pres = np.zeros(dom.shape)
        adv = np.zeros(dom.shape)

    nonlinear = bulk - adv
    rhs = nonlinear - p.epsilon**2 * lam**2 * c
    zero = (0,) * dom.dim
    residual = float(rhs[zero])
    nonlinear[zero] = 0.0
    rhs[zero] = 0.0
    if not np.all(np.isfinite(rhs)):
        raise NonFiniteError("rhs")

    energy = _energy_from_phys(phys, c, dom, p, g)
    return Evaluation(
        mu=mu,
        velocity=vel,
        pressure=pres,
        nonlinear=nonlinear,
        rhs=rhs,
        rhs_mass_residual=residual,
        energy=energy,
        grad_mu_sq=float(np.sum(lam * mu**2)),
        v_sq=float(np.sum(vel**2)),
    )


def rhs(phi: SpectralField, p: ModelParams) -> SpectralField:
    """``d phi / dt`` of the Galerkin system (mass mode pinned to zero)."""
    return phi.with_coeffs(evaluate(phi, p).rhs)


def _energy_from_phys(phys, coeffs, dom, p, g):
    bulk = 0.25 * np.sum((phys**2 - 1.0) ** 2) * g.cell
    grad = 0.5 * p.epsilon**2 * np.sum(dom.eigenvalues * coeffs**2)
    return float(bulk + grad)


def ginzburg_landau_energy(phi: SpectralField, p: ModelParams) -> float:
    """``1/4 int (phi^2-1)^2 + eps^2/2 int |grad phi|^2``."""
    _check_phi(phi, p)
    g = _grid(phi.domain, p.dealias_padding)
    phys = g.synth(phi.coeffs)
    return _energy_from_phys(phys, phi.coeffs, phi.domain, p, g)


def linear_growth_rate(lam, mean: float, epsilon: float = 1.0):
    """Growth rate of a small eigenmode perturbation around a constant state."""
    return -lam * double_well_second(mean) - epsilon**2 * np.asarray(lam) ** 2


def velocity_bound_ratio(phi: SpectralField, p: ModelParams) -> float:
    """``||v||_H1 / ||gamma mu grad phi||_H1`` (bounded by 1 for the truncated projection)."""
    mu = chemical_potential(phi, p)
    dom = phi.domain
    g = _grid(dom, p.dealias_padding)
    forcing = _forcing_stack(mu.coeffs, _grad_phys(phi.coeffs, g), p, g)
    denom = sp.vector_sobolev_norm(VectorField.from_stack(dom, forcing), 1)
    if denom == 0:
        return 0.0
    v = sp.project_stack(forcing, dom)
    return sp.vector_sobolev_norm(VectorField.from_stack(dom, v), 1) / denom


def mean_of(phi: SpectralField) -> float:
    return float(phi.coeffs[(0,) * phi.domain.dim]) / math.sqrt(phi.domain.volume)
