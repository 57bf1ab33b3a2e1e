import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chhs import spectral as sp
from chhs.errors import StructureError
from chhs.spectral import Domain, ScalarField, SpectralField, VectorField

from oracles import basis_1d, fd5, midpoint_rule, midpoints, tensor_eval, tensor_project

RNG = np.random.default_rng(20240611)


def random_coeffs(shape, rng=RNG, decay=1.0):
    idx = np.indices(shape).sum(axis=0)
    return rng.standard_normal(shape) * np.exp(-decay * idx / max(shape))


def random_velocity(dom, rng=RNG):
    stack = rng.standard_normal((dom.dim,) + dom.shape)
    for a in range(dom.dim):
        sl = [a] + [slice(None)] * dom.dim
        sl[1 + a] = 0
        stack[tuple(sl)] = 0.0
    return VectorField.from_stack(dom, stack)


# --- transforms against direct quadrature -------------------------------------

@pytest.mark.parametrize("modes", [(6, 2), (5, 7), (4, 3, 5), (64, 3)])
def test_forward_matches_midpoint_quadrature(modes):
    extents = (1.3, 2.0, 0.7)[: len(modes)]
    dom = Domain(extents, modes)
    pts = [midpoints(L, n) for L, n in zip(extents, modes)]
    rules = [midpoint_rule(L, n) for L, n in zip(extents, modes)]
    values = RNG.standard_normal(modes)
    ref = tensor_project(values, extents, pts, [w for _, w in rules], modes)
    got = sp.forward_transform(ScalarField(dom, values)).coeffs
    assert np.max(np.abs(got - ref)) < 1e-12 * max(1.0, np.abs(ref).max())


@pytest.mark.parametrize("parity", [("sin", "cos"), ("cos", "sin")])
def test_sine_parity_matches_direct_sum(parity):
    extents, modes = (2.0, 1.5), (7, 50)
    dom = Domain(extents, modes)
    c = random_coeffs(modes)
    for a, p in enumerate(parity):
        if p == "sin":
            idx = [slice(None)] * 2
            idx[a] = 0
            c[tuple(idx)] = 0.0
    pts = [midpoints(L, n) for L, n in zip(extents, modes)]
    ref = tensor_eval(c, extents, pts, kinds=parity)
    got = sp.inverse_transform(SpectralField(dom, c, parity)).values
    assert np.max(np.abs(got - ref)) < 1e-12 * np.abs(ref).max()
    back = sp.forward_transform(ScalarField(dom, got, parity)).coeffs
    assert np.max(np.abs(back - c)) < 1e-12 * np.abs(c).max()


def test_inverse_matches_direct_summation_3d():
    extents, modes = (1.0, 2.0, 3.0), (4, 5, 3)
    dom = Domain(extents, modes)
    c = random_coeffs(modes)
    pts = [midpoints(L, n) for L, n in zip(extents, modes)]
    assert np.allclose(sp.inverse_transform(SpectralField(dom, c)).values,
                       tensor_eval(c, extents, pts), atol=1e-12)


def test_evaluate_on_off_grid_points():
    dom = Domain((2.0, 1.0), (5, 4))
    c = random_coeffs(dom.shape)
    pts = [np.array([0.0, 0.3, 2.0]), np.array([0.0, 0.77, 1.0])]
    assert np.allclose(sp.evaluate_on(SpectralField(dom, c), pts), tensor_eval(c, dom.extents, pts), atol=1e-13)


@pytest.mark.parametrize("grid", [40, 48, 96])
@pytest.mark.parametrize("parity", ["cos", "sin"])
def test_both_backends_match_direct_sum(grid, parity):
    # grids up to 48 use dense matrices, larger ones the FFT path
    c = random_coeffs((40,))
    if parity == "sin":
        c[0] = 0.0
    vals = sp.synthesize_array(c, (parity,), (3.0,), (grid,))
    ref = sum(c[i] * basis_1d(i, 3.0, midpoints(3.0, grid), parity) for i in range(40))
    assert np.max(np.abs(vals - ref)) < 1e-12
    assert np.allclose(sp.analyze_array(vals, (parity,), (3.0,), (40,)), c, atol=1e-13)


def test_padded_analysis_is_exact_projection_of_product():
    # product of two degree-n expansions is resolved exactly on a 2n grid
    extents, n = (1.7,), 6
    a, b = random_coeffs((n,)), random_coeffs((n,))
    grid = (2 * n,)
    prod = sp.synthesize_array(a, ("cos",), extents, grid) * sp.synthesize_array(b, ("cos",), extents, grid)
    got = sp.analyze_array(prod, ("cos",), extents, (n,))
    x, w = np.polynomial.legendre.leggauss(40)
    x, w = 0.5 * 1.7 * (x + 1), 0.5 * 1.7 * w
    fa = sum(a[i] * basis_1d(i, 1.7, x) for i in range(n))
    fb = sum(b[i] * basis_1d(i, 1.7, x) for i in range(n))
    ref = np.array([np.sum(fa * fb * basis_1d(k, 1.7, x) * w) for k in range(n)])
    assert np.allclose(got, ref, atol=1e-13)


# --- derivative operators ------------------------------------------------------

def test_gradient_2d_matches_finite_differences():
    dom = Domain((1.0, 1.5), (5, 6))
    c = random_coeffs(dom.shape)
    # fine grids along a few lines: fourth-order FD error ~ h^4 k^5
    x = np.linspace(0, 1.0, 4001)
    y = np.linspace(0, 1.5, 6001)
    x0, y0 = np.array([0.0, 0.37, 0.9]), np.array([0.0, 0.5, 1.21])
    g = sp.gradient(SpectralField(dom, c))
    fx = tensor_eval(c, dom.extents, (x, y0))
    fy = tensor_eval(c, dom.extents, (x0, y))
    gx = sp.evaluate_on(g.components[0], (x[2:-2], y0))
    gy = sp.evaluate_on(g.components[1], (x0, y[2:-2]))
    assert np.max(np.abs(gx - fd5(fx, x[1] - x[0], 0))) < 1e-6
    assert np.max(np.abs(gy - fd5(fy, y[1] - y[0], 1))) < 1e-6


def test_laplacian_eigenfunctions():
    dom = Domain((2.0, 3.0), (4, 4))
    c = np.zeros(dom.shape)
    c[2, 3] = 1.0
    lap = sp.laplacian(SpectralField(dom, c))
    lam = (2 * math.pi / 2.0) ** 2 + (3 * math.pi / 3.0) ** 2
    assert lap.coeffs[2, 3] == pytest.approx(-lam, rel=1e-14)


def test_divergence_of_gradient_is_laplacian():
    dom = Domain((1.0, 2.0, 0.5), (4, 5, 3))
    c = SpectralField(dom, random_coeffs(dom.shape))
    assert np.allclose(sp.divergence(sp.gradient(c)).coeffs, sp.laplacian(c).coeffs, atol=1e-12)


def test_operators_reject_wrong_parity():
    dom = Domain((1.0, 1.0), (3, 3))
    s = SpectralField(dom, np.zeros(dom.shape), ("sin", "cos"))
    with pytest.raises(StructureError):
        sp.gradient(s)
    with pytest.raises(StructureError):
        sp.laplacian(s)
    with pytest.raises(StructureError):
        VectorField((s, s))


def test_fields_are_immutable():
    dom = Domain((1.0, 1.0), (3, 3))
    f = SpectralField(dom, np.ones((3, 3)))
    with pytest.raises(ValueError):
        f.coeffs[0, 0] = 2.0


# --- projection ----------------------------------------------------------------

@pytest.mark.parametrize("modes", [(6, 6), (7, 5), (4, 5, 3)])
def test_projection_properties(modes):
    extents = (1.0, 1.7, 0.8)[: len(modes)]
    dom = Domain(extents, modes)
    for _ in range(20):
        u = random_velocity(dom)
        pu = sp.helmholtz_leray_project(u)
        ppu = sp.helmholtz_leray_project(pu)
        scale = np.abs(u.coeff_stack()).max()
        assert np.max(np.abs(ppu.coeff_stack() - pu.coeff_stack())) < 1e-12 * scale
        assert np.max(np.abs(sp.divergence(pu).coeffs)) < 1e-12 * scale * max(dom.modes) * 10
        g = sp.gradient(SpectralField(dom, random_coeffs(dom.shape)))
        assert np.max(np.abs(sp.helmholtz_leray_project(g).coeff_stack())) < 1e-12 * np.abs(g.coeff_stack()).max()
        # orthogonality of the discarded part to divergence-free fields
        r = u.coeff_stack() - pu.coeff_stack()
        assert abs(np.sum(r * pu.coeff_stack())) < 1e-11 * scale**2 * r.size


def test_projection_against_explicit_basis():
    from oracles import divergence_free_basis_2d, gauss_rule, project_onto_family
    dom = Domain((1.3, 0.9), (6, 6))
    X, wx = gauss_rule(1.3, 30)
    Y, wy = gauss_rule(0.9, 30)
    W = np.outer(wx, wy)
    family = divergence_free_basis_2d(1.3, 0.9, dom.modes, X, Y)
    u = random_velocity(dom)
    ux = sp.evaluate_on(u.components[0], (X, Y))
    uy = sp.evaluate_on(u.components[1], (X, Y))
    px, py = project_onto_family(ux, uy, family, W)
    pu = sp.helmholtz_leray_project(u)
    assert np.max(np.abs(sp.evaluate_on(pu.components[0], (X, Y)) - px)) < 1e-10
    assert np.max(np.abs(sp.evaluate_on(pu.components[1], (X, Y)) - py)) < 1e-10


def test_zero_normal_trace():
    dom = Domain((1.0, 2.0), (7, 7))
    pu = sp.helmholtz_leray_project(random_velocity(dom))
    y = np.linspace(0, 2.0, 13)
    x = np.linspace(0, 1.0, 11)
    assert np.max(np.abs(sp.evaluate_on(pu.components[0], (np.array([0.0, 1.0]), y)))) < 1e-12
    assert np.max(np.abs(sp.evaluate_on(pu.components[1], (x, np.array([0.0, 2.0]))))) < 1e-12


# --- norms ---------------------------------------------------------------------

def test_parseval():
    dom = Domain((1.4, 0.6), (9, 7))
    c = random_coeffs(dom.shape)
    vals = sp.inverse_transform(SpectralField(dom, c)).values
    cell = dom.volume / vals.size
    assert np.sum(vals**2) * cell == pytest.approx(np.sum(c**2), rel=1e-12)


def test_sobolev_norm_h1_equals_quadrature():
    dom = Domain((1.0, 1.5), (5, 5))
    c = random_coeffs(dom.shape)
    X, wx = np.polynomial.legendre.leggauss(30)
    Y, wy = np.polynomial.legendre.leggauss(30)
    X, wx, Y, wy = 0.5 * (X + 1), 0.5 * wx, 0.75 * (Y + 1), 0.75 * wy
    f = SpectralField(dom, c)
    g = sp.gradient(f)
    W = np.outer(wx, wy)
    h1 = np.sum(W * (sp.evaluate_on(f, (X, Y)) ** 2
                     + sp.evaluate_on(g.components[0], (X, Y)) ** 2
                     + sp.evaluate_on(g.components[1], (X, Y)) ** 2))
    assert sp.sobolev_norm(f, 1) ** 2 == pytest.approx(h1, rel=1e-12)
    with pytest.raises(ValueError):
        sp.sobolev_norm(f, -1)


def test_poincare_constant_is_sharp():
    dom = Domain((3.0, 2.0), (8, 8))
    assert sp.poincare_constant(dom) == pytest.approx(9.0 / math.pi**2)
    lam = dom.eigenvalues
    assert 1.0 / lam[lam > 0].min() == pytest.approx(sp.poincare_constant(dom))


def test_domain_validation():
    with pytest.raises((ValueError, StructureError)):
        Domain((1.0, -1.0), (4, 4))
    with pytest.raises((ValueError, StructureError)):
        Domain((1.0,), (4, 4))
    with pytest.raises(StructureError):
        Domain((1.0,), (4,))
    d = Domain.from_sizes(2, 2.0, 1.0, Nx=4, Ny=3)
    assert d.shape == (4, 3) and d.volume == 2.0


# --- properties ----------------------------------------------------------------

dims = st.integers(2, 3)


@st.composite
def fields(draw):
    dim = draw(dims)
    modes = tuple(draw(st.integers(2, 7)) for _ in range(dim))
    extents = tuple(draw(st.floats(0.3, 5.0)) for _ in range(dim))
    seed = draw(st.integers(0, 2**31))
    rng = np.random.default_rng(seed)
    return Domain(extents, modes), rng


@settings(max_examples=60, deadline=None)
@given(fields())
def test_round_trip_property(arg):
    dom, rng = arg
    c = rng.standard_normal(dom.shape)
    back = sp.forward_transform(sp.inverse_transform(SpectralField(dom, c))).coeffs
    assert np.allclose(back, c, atol=1e-12 * (1 + np.abs(c).max()))


@settings(max_examples=60, deadline=None)
@given(fields())
def test_projection_property(arg):
    dom, rng = arg
    u = random_velocity(dom, rng)
    pu = sp.helmholtz_leray_project(u)
    s = 1 + np.abs(u.coeff_stack()).max()
    assert np.allclose(sp.helmholtz_leray_project(pu).coeff_stack(), pu.coeff_stack(), atol=1e-12 * s)
    kmax = max(math.pi * n / L for n, L in zip(dom.modes, dom.extents))
    assert np.max(np.abs(sp.divergence(pu).coeffs)) <= 1e-12 * s * kmax * dom.dim
    # projection never increases the L2 norm
    assert np.sum(pu.coeff_stack() ** 2) <= np.sum(u.coeff_stack() ** 2) * (1 + 1e-12)


@settings(max_examples=40, deadline=None)
@given(fields(), st.floats(0.0, 4.0), st.floats(0.0, 4.0))
def test_sobolev_monotone_in_index(arg, s1, s2):
    dom, rng = arg
    f = SpectralField(dom, rng.standard_normal(dom.shape))
    lo, hi = sorted((s1, s2))
    assert sp.sobolev_norm(f, lo) <= sp.sobolev_norm(f, hi) * (1 + 1e-12)
