"""Cosine/sine spectral machinery on Neumann boxes.

Fields live on the cell-midpoint collocation grid ``x_p = (p + 1/2) L / N``.
Coefficients are taken with respect to the orthonormal Laplacian
eigenbasis

    e_i(x) = sqrt(1/L)            (i = 0)
    e_i(x) = sqrt(2/L) cos(i pi x / L)   (i >= 1)

per axis (tensor products in 2D/3D).  Axes tagged ``SINE`` use
``sqrt(2/L) sin(i pi x / L)`` instead; index 0 of a sine axis is unused and
held at zero.  On the midpoint grid the DCT-II/DST-II are exact, so the
transforms below are fast and lossless for cosine data.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np
import scipy.fft as sfft

from .errors import StructureError

COSINE = "cos"
SINE = "sin"


_CPU_COUNT = os.cpu_count() or 1


def fft_workers() -> int:
    """Thread count for transforms, capped by ``CHHS_THREADS``."""
    raw = os.environ.get("CHHS_THREADS")
    if raw:
        try:
            return max(1, min(int(raw), _CPU_COUNT))
        except ValueError:
            pass
    return _CPU_COUNT


@dataclass(frozen=True)
class Domain:
    """Rectangle (2D) or box (3D) with its spectral resolution.

    ``extents`` and ``modes`` have one entry per axis; their length fixes the
    dimension.
    """

    extents: tuple[float, ...]
    modes: tuple[int, ...]
    epsilon: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        extents = tuple(float(v) for v in self.extents)
        modes = tuple(int(n) for n in self.modes)
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "modes", modes)
        if len(extents) not in (2, 3):
            raise StructureError(f"dimension must be 2 or 3, got {len(extents)}")
        if len(modes) != len(extents):
            raise StructureError("extents and modes must have the same length")
        if any(not (v > 0 and math.isfinite(v)) for v in extents):
            raise StructureError(f"extents must be positive, got {extents}")
        if any(n < 2 for n in modes):
            raise StructureError(f"mode counts must be >= 2, got {modes}")
        if not self.epsilon > 0:
            raise StructureError("epsilon must be positive")
        if not self.gamma >= 0:
            raise StructureError("gamma must be nonnegative")

    @classmethod
    def from_sizes(cls, dim, L, l, h=1.0, Nx=16, Ny=16, Nz=1, epsilon=1.0, gamma=1.0):
        if dim == 2:
            return cls((L, l), (Nx, Ny), epsilon, gamma)
        if dim == 3:
            return cls((L, l, h), (Nx, Ny, Nz), epsilon, gamma)
        raise StructureError(f"dimension must be 2 or 3, got {dim}")

    @property
    def dim(self) -> int:
        return len(self.extents)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.modes

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Per-axis ``i pi / L`` arrays, shaped for broadcasting."""
        out = []
        for a, (L, n) in enumerate(zip(self.extents, self.modes)):
            shape = [1] * self.dim
            shape[a] = n
            out.append((np.arange(n) * np.pi / L).reshape(shape))
        return tuple(out)

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """Neumann-Laplacian eigenvalues ``lambda_{i,j,k}`` on the mode grid."""
        lam = np.zeros(self.modes)
        for k in self.wavenumbers:
            lam = lam + k**2
        lam.flags.writeable = False
        return lam

    @cached_property
    def shells(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct eigenvalues and, for each mode, the index of its shell."""
        lam = self.eigenvalues.ravel()
        scale = max(float(lam.max()), 1.0)
        keys = np.round(lam / scale, 11)
        _, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
        return lam[first], inverse.reshape(self.modes)

    def nodes(self, axis: int, n: int | None = None) -> np.ndarray:
        """Midpoint collocation nodes along ``axis`` (``n`` points, default N)."""
        n = self.modes[axis] if n is None else n
        return (np.arange(n) + 0.5) * self.extents[axis] / n

    def same_as(self, other: "Domain") -> bool:
        return self.extents == other.extents and self.modes == other.modes


def _check_parity(parity, dim):
    if parity is None:
        return (COSINE,) * dim
    parity = tuple(parity)
    if len(parity) != dim or any(p not in (COSINE, SINE) for p in parity):
        raise StructureError(f"invalid parity {parity!r} for dimension {dim}")
    return parity


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    if arr.flags.writeable:
        arr = arr.view()
        arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Point values on the collocation grid."""

    domain: Domain
    values: np.ndarray
    parity: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "parity", _check_parity(self.parity, self.domain.dim))
        values = _readonly(self.values)
        if values.shape != self.domain.shape:
            raise StructureError(
                f"values shape {values.shape} does not match domain modes {self.domain.shape}"
            )
        object.__setattr__(self, "values", values)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Coefficients in the orthonormal cosine/sine eigenbasis."""

    domain: Domain
    coeffs: np.ndarray
    parity: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "parity", _check_parity(self.parity, self.domain.dim))
        coeffs = _readonly(self.coeffs)
        if coeffs.shape != self.domain.shape:
            raise StructureError(
                f"coeffs shape {coeffs.shape} does not match domain modes {self.domain.shape}"
            )
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def zeros(cls, domain: Domain, parity=None) -> "SpectralField":
        return cls(domain, np.zeros(domain.shape), parity)

    @classmethod
    def constant(cls, domain: Domain, value: float) -> "SpectralField":
        c = np.zeros(domain.shape)
        c[(0,) * domain.dim] = value * math.sqrt(domain.volume)
        return cls(domain, c)

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(self.domain, coeffs, self.parity)

    def _compatible(self, other: "SpectralField"):
        if not self.domain.same_as(other.domain) or self.parity != other.parity:
            raise StructureError("fields live on different domains or parities")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._compatible(other)
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._compatible(other)
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return self.with_coeffs(self.coeffs * scalar)

    __rmul__ = __mul__

    @property
    def mean(self) -> float:
        """Spatial average; only the (0,...,0) cosine mode contributes."""
        if SINE in self.parity:
            return 0.0
        return float(self.coeffs[(0,) * self.domain.dim]) / math.sqrt(self.domain.volume)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self.coeffs**2)))


@dataclass(frozen=True, eq=False)
class VectorField:
    """One field per axis; component ``a`` is sine along axis ``a``."""

    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise StructureError("empty vector field")
        dom = comps[0].domain
        if len(comps) != dom.dim:
            raise StructureError(f"expected {dom.dim} components, got {len(comps)}")
        for a, c in enumerate(comps):
            if c.parity != velocity_parity(dom.dim, a):
                raise StructureError(f"component {a} has parity {c.parity}, expected sine on axis {a}")
            if not c.domain.same_as(dom):
                raise StructureError("components live on different domains")

    @property
    def domain(self) -> Domain:
        return self.components[0].domain

    @property
    def dim(self) -> int:
        return len(self.components)

    def coeff_stack(self) -> np.ndarray:
        return np.stack([c.coeffs for c in self.components])

    @classmethod
    def from_stack(cls, domain: Domain, stack: np.ndarray) -> "VectorField":
        return cls(tuple(SpectralField(domain, stack[a], velocity_parity(domain.dim, a))
                         for a in range(domain.dim)))


def velocity_parity(dim: int, axis: int) -> tuple[str, ...]:
    return tuple(SINE if b == axis else COSINE for b in range(dim))


# ---------------------------------------------------------------------------
# array-level transforms (used directly by the model for speed)

# grids up to this many points per axis use cached dense matrices instead of
# the FFT-based DCT/DST; per-call overhead dominates there
MATRIX_BACKEND_MAX = 48


@lru_cache(maxsize=256)
def _synthesis_matrix(n: int, m: int, L: float, parity: str) -> np.ndarray:
    mat = basis_matrix(n, L, (np.arange(m) + 0.5) * L / m, parity)
    mat.flags.writeable = False
    return mat


@lru_cache(maxsize=256)
def _analysis_matrix(n: int, m: int, L: float, parity: str) -> np.ndarray:
    # midpoint quadrature: c_i = (L/m) sum_p f(x_p) e_i(x_p)
    mat = np.ascontiguousarray(_synthesis_matrix(n, m, L, parity).T * (L / m))
    mat.flags.writeable = False
    return mat


def _apply_axis(mat: np.ndarray, arr: np.ndarray, axis: int) -> np.ndarray:
    if axis == arr.ndim - 1:
        return arr @ mat.T
    if axis == arr.ndim - 2:
        return mat @ arr
    shape = arr.shape
    out = mat @ arr.reshape(shape[0], -1)
    return out.reshape((mat.shape[0],) + shape[1:])


def synthesize_array(coeffs: np.ndarray, parity, extents, grid: Sequence[int] | None = None,
                     workers: int | None = None) -> np.ndarray:
    """Evaluate a coefficient array on a midpoint grid of size ``grid``.

    ``grid[a] >= coeffs.shape[a]``; extra resolution is obtained by zero
    padding, which is how the dealiased products are formed.
    """
    out = np.asarray(coeffs, dtype=float)
    grid = out.shape if grid is None else tuple(grid)
    for a, (L, m) in enumerate(zip(extents, grid)):
        n = out.shape[a]
        if m < n:
            raise StructureError("synthesis grid smaller than mode count")
        if m <= MATRIX_BACKEND_MAX:
            out = _apply_axis(_synthesis_matrix(n, m, L, parity[a]), out, a)
            continue
        workers = workers or fft_workers()
        scale = math.sqrt(m / L)
        buf_shape = list(out.shape)
        buf_shape[a] = m
        buf = np.zeros(buf_shape)
        src = [slice(None)] * out.ndim
        dst = [slice(None)] * out.ndim
        if parity[a] == COSINE:
            dst[a] = slice(0, n)
            buf[tuple(dst)] = out * scale
            out = sfft.idct(buf, type=2, norm="ortho", axis=a, workers=workers)
        else:
            # sine index i <-> DST-II slot i-1; the slot for mode m stays empty
            src[a] = slice(1, n)
            dst[a] = slice(0, n - 1)
            buf[tuple(dst)] = out[tuple(src)] * scale
            out = sfft.idst(buf, type=2, norm="ortho", axis=a, workers=workers)
    return out


def analyze_array(values: np.ndarray, parity, extents, modes: Sequence[int] | None = None,
                  workers: int | None = None) -> np.ndarray:
    """Project grid values onto the first ``modes`` basis functions per axis.

    When the grid is finer than ``modes`` this is the exact Galerkin
    truncation of any trig polynomial that the grid resolves.
    """
    out = np.asarray(values, dtype=float)
    modes = out.shape if modes is None else tuple(modes)
    for a, (L, n) in enumerate(zip(extents, modes)):
        m = out.shape[a]
        if m <= MATRIX_BACKEND_MAX:
            out = _apply_axis(_analysis_matrix(n, m, L, parity[a]), out, a)
            continue
        workers = workers or fft_workers()
        scale = math.sqrt(L / m)
        if parity[a] == COSINE:
            out = sfft.dct(out, type=2, norm="ortho", axis=a, workers=workers)
            if n < m:
                idx = [slice(None)] * out.ndim
                idx[a] = slice(0, n)
                out = out[tuple(idx)]
            out = out * scale
        else:
            y = sfft.dst(out, type=2, norm="ortho", axis=a, workers=workers)
            res_shape = list(y.shape)
            res_shape[a] = n
            res = np.zeros(res_shape)
            src = [slice(None)] * y.ndim
            dst = [slice(None)] * y.ndim
            src[a] = slice(0, n - 1)
            dst[a] = slice(1, n)
            res[tuple(dst)] = y[tuple(src)] * scale
            out = res
    return out


def basis_matrix(n_modes: int, L: float, points: np.ndarray, parity: str = COSINE) -> np.ndarray:
    """``B[p, i]`` = value of the i-th orthonormal 1D basis function at ``points[p]``."""
    points = np.asarray(points, dtype=float)
    i = np.arange(n_modes)
    arg = np.outer(points, i * np.pi / L)
    if parity == COSINE:
        B = np.sqrt(2.0 / L) * np.cos(arg)
        B[:, 0] = np.sqrt(1.0 / L)
    else:
        B = np.sqrt(2.0 / L) * np.sin(arg)
        B[:, 0] = 0.0
    return B


def evaluate_on(field: SpectralField, points: Sequence[np.ndarray]) -> np.ndarray:
    """Direct summation of ``field`` on the tensor grid ``points[0] x points[1] ...``."""
    dom = field.domain
    if len(points) != dom.dim:
        raise StructureError("need one coordinate array per axis")
    out = field.coeffs
    for a in range(dom.dim):
        B = basis_matrix(dom.modes[a], dom.extents[a], points[a], field.parity[a])
        out = np.moveaxis(np.tensordot(B, out, axes=([1], [a])), 0, a)
    return out


# ---------------------------------------------------------------------------
# field-level operations


def forward_transform(f: ScalarField, parity=None) -> SpectralField:
    """Coefficients of ``f`` in the orthonormal eigenbasis."""
    if not isinstance(f, ScalarField):
        raise StructureError("forward_transform expects a ScalarField")
    parity = f.parity if parity is None else _check_parity(parity, f.domain.dim)
    coeffs = analyze_array(f.values, parity, f.domain.extents)
    for a, p in enumerate(parity):
        if p == SINE:
            idx = [slice(None)] * f.domain.dim
            idx[a] = 0
            coeffs[tuple(idx)] = 0.0
    return SpectralField(f.domain, coeffs, parity)


def inverse_transform(c: SpectralField) -> ScalarField:
    """Values of the truncated expansion at the collocation nodes."""
    if not isinstance(c, SpectralField):
        raise StructureError("inverse_transform expects a SpectralField")
    values = synthesize_array(c.coeffs, c.parity, c.domain.extents)
    return ScalarField(c.domain, values, c.parity)


def _require_cosine(c: SpectralField, op: str):
    if any(p != COSINE for p in c.parity):
        raise StructureError(f"{op} requires cosine parity on every axis")


def laplacian(c: SpectralField) -> SpectralField:
    _require_cosine(c, "laplacian")
    return c.with_coeffs(-c.domain.eigenvalues * c.coeffs)


def gradient_stack(coeffs: np.ndarray, domain: Domain) -> np.ndarray:
    """Sine-parity coefficients of each partial derivative of a cosine field."""
    return np.stack([-k * coeffs for k in domain.wavenumbers])


def divergence_stack(stack: np.ndarray, domain: Domain) -> np.ndarray:
    out = np.zeros(domain.shape)
    for k, comp in zip(domain.wavenumbers, stack):
        out = out + k * comp
    return out


def gradient(c: SpectralField) -> VectorField:
    """Exact derivative of the truncated cosine expansion.

    d/dx sqrt(2/L) cos(kx) = -k sqrt(2/L) sin(kx), so the sine coefficient of
    component ``a`` is ``-k_a`` times the cosine coefficient.
    """
    _require_cosine(c, "gradient")
    return VectorField.from_stack(c.domain, gradient_stack(c.coeffs, c.domain))


def divergence(v: VectorField) -> SpectralField:
    if not isinstance(v, VectorField):
        raise StructureError("divergence expects a VectorField")
    return SpectralField(v.domain, divergence_stack(v.coeff_stack(), v.domain))


def _inverse_eigenvalues(domain: Domain) -> np.ndarray:
    lam = domain.eigenvalues
    inv = np.zeros_like(lam)
    np.divide(1.0, lam, out=inv, where=lam > 0)
    return inv


def project_stack(stack: np.ndarray, domain: Domain) -> np.ndarray:
    """Leray projection on coefficient stacks: ``u - grad q`` with ``Delta q = div u``."""
    div = divergence_stack(stack, domain)
    zero = (0,) * domain.dim
    if abs(div[zero]) > 1e-12 * (1.0 + np.abs(stack).max()):
        raise StructureError("mean divergence is nonzero; input lacks velocity parity")
    q = -div * _inverse_eigenvalues(domain)
    # grad q has sine coefficient -k_a q on component a
    return np.stack([u + k * q for k, u in zip(domain.wavenumbers, stack)])


def helmholtz_leray_project(u: VectorField) -> VectorField:
    """Orthogonal projection onto divergence-free fields with ``u.n = 0``."""
    if not isinstance(u, VectorField):
        raise StructureError("projection expects a VectorField")
    return VectorField.from_stack(u.domain, project_stack(u.coeff_stack(), u.domain))


def poincare_constant(d: Domain) -> float:
    """``1 / lambda_1``: reciprocal of the smallest nonzero Neumann eigenvalue."""
    return max(d.extents) ** 2 / math.pi**2


def sobolev_norm(c: SpectralField, s: float) -> float:
    """``(sum |c_k|^2 (1 + lambda_k)^s)^(1/2)``."""
    if s < 0:
        raise ValueError(f"Sobolev index must be nonnegative, got {s}")
    _require_cosine(c, "sobolev_norm")
    return float(np.sqrt(np.sum(c.coeffs**2 * (1.0 + c.domain.eigenvalues) ** s)))


def vector_sobolev_norm(v: VectorField, s: float) -> float:
    """Same weights applied component-wise to a velocity-parity field."""
    if s < 0:
        raise ValueError(f"Sobolev index must be nonnegative, got {s}")
    w = (1.0 + v.domain.eigenvalues) ** s
    return float(np.sqrt(sum(np.sum(c.coeffs**2 * w) for c in v.components)))
