"""Initial-condition generators."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from . import spectral as sp
from .config import ICConfig, RunConfig
from .errors import ConfigError
from .integrator import State
from .snapshot import Snapshot
from .spectral import Domain, SpectralField

MAX_ABS_PHI = 10.0


def basis_peak(domain: Domain, index) -> float:
    """Value of the orthonormal basis function ``index`` where all cosines equal 1."""
    out = 1.0
    for i, L in zip(index, domain.extents):
        out *= math.sqrt((1.0 if i == 0 else 2.0) / L)
    return out


def nested_normals(domain: Domain, seed: int) -> np.ndarray:
    """Standard normals indexed by mode, independent of the resolution.

    Draws are made shell by shell (shell = largest index over the axes),
    so refining the mode box keeps every existing draw and only appends new
    ones: the coarse field is an exact truncation of the fine one.
    """
    dim = domain.dim
    m = max(domain.modes)
    idx = np.indices((m,) * dim).reshape(dim, -1)
    shell = idx.max(axis=0)
    order = np.lexsort(tuple(idx[::-1]) + (shell,))
    draws = np.random.default_rng(seed).standard_normal(idx.shape[1])
    full = np.empty(idx.shape[1])
    full[order] = draws
    full = full.reshape((m,) * dim)
    return full[tuple(slice(0, n) for n in domain.modes)].copy()


def constant_plus_modes(domain: Domain, mean: float, modes=()) -> np.ndarray:
    """``mean + sum a * prod cos(i pi x / L)`` in coefficient form."""
    c = np.zeros(domain.shape)
    for index, amp in modes:
        index = tuple(index)
        if len(index) != domain.dim or any(not 0 <= i < n for i, n in zip(index, domain.modes)):
            raise ConfigError(f"mode index {index} outside the mode box {domain.modes}", key="ic.modes")
        if all(i == 0 for i in index):
            raise ConfigError("use ic.mean for the constant mode", key="ic.modes")
        c[index] += amp / basis_peak(domain, index)
    c[(0,) * domain.dim] = mean * math.sqrt(domain.volume)
    return c


def random_perturbation(domain: Domain, mean: float, amplitude: float, seed: int,
                        q: float = 2.0, h2_norm: float | None = None) -> np.ndarray:
    """Gaussian coefficients with spectrum ``amplitude * (1 + lambda)^(-q)``.

    ``amplitude`` is in physical units (it multiplies ``sqrt(|Omega|)`` in
    coefficient space).  If ``h2_norm`` is given the perturbation is
    rescaled so that ``||phi - mean||_H2`` equals it.
    """
    lam = domain.eigenvalues
    c = amplitude * math.sqrt(domain.volume) * nested_normals(domain, seed) * (1.0 + lam) ** (-q)
    c[(0,) * domain.dim] = 0.0
    if h2_norm is not None:
        norm = math.sqrt(float(np.sum(c**2 * (1.0 + lam) ** 2)))
        if norm == 0:
            raise ConfigError("cannot rescale a zero perturbation", key="ic.h2_norm")
        c *= h2_norm / norm
    c[(0,) * domain.dim] = mean * math.sqrt(domain.volume)
    return c


def tanh_interface(domain: Domain, mean: float, x0: float | None = None, axis: int = 0,
                   amplitude: float = 1.0) -> np.ndarray:
    """``amplitude * tanh((x - x0) / (sqrt(2) eps))`` along ``axis``; mean then set exactly."""
    if not 0 <= axis < domain.dim:
        raise ConfigError(f"axis {axis} out of range", key="ic.axis")
    x0 = 0.5 * domain.extents[axis] if x0 is None else x0
    x = domain.nodes(axis)
    profile = amplitude * np.tanh((x - x0) / (math.sqrt(2.0) * domain.epsilon))
    shape = [1] * domain.dim
    shape[axis] = -1
    values = np.broadcast_to(profile.reshape(shape), domain.shape)
    c = sp.forward_transform(sp.ScalarField(domain, np.array(values))).coeffs.copy()
    c[(0,) * domain.dim] = mean * math.sqrt(domain.volume)
    return c


def generate_ic(cfg: RunConfig) -> State:
    domain = cfg.build_domain()
    ic: ICConfig = cfg.ic
    if ic.kind == "constant_plus_modes":
        c = constant_plus_modes(domain, ic.mean, ic.modes)
    elif ic.kind == "random_perturbation":
        c = random_perturbation(domain, ic.mean, ic.amplitude, ic.seed, ic.q, ic.h2_norm)
    elif ic.kind == "tanh_interface":
        c = tanh_interface(domain, ic.mean, ic.x0, ic.axis, ic.amplitude or 1.0)
    elif ic.kind == "from_snapshot":
        if not ic.snapshot:
            raise ConfigError("from_snapshot needs ic.snapshot", key="ic.snapshot")
        snap = Snapshot.load(Path(ic.snapshot))
        if not snap.domain.same_as(domain):
            raise ConfigError("snapshot domain differs from the configured domain", key="ic.snapshot")
        return State(snap.field(), snap.time)
    else:
        raise ConfigError(f"unknown kind {ic.kind!r}", key="ic.kind")
    phi = SpectralField(domain, c)
    peak = float(np.abs(sp.inverse_transform(phi).values).max())
    if peak > MAX_ABS_PHI:
        raise ConfigError(f"initial condition reaches |phi| = {peak:.3g} > {MAX_ABS_PHI:g}",
                          key="ic.amplitude")
    return State(phi, 0.0)
