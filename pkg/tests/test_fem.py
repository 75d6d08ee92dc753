import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from biotprec import fem, mesh as M
from biotprec.bench.problems import config_for, setup_problem
from biotprec.biot import derived_params
from biotprec.core_la import dense_sym_eig

from oracles import affine_triangle, triangle_rule

REF = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
SKEW = [[0.1, -0.2], [1.3, 0.4], [0.2, 0.9]]


def _single(verts):
    return M.mesh_from_arrays(2, verts, [[0, 1, 2]])


def _oracle_displacement_basis(verts):
    """Per quadrature point gradients of the [bubble(facet 0..2), P1] basis."""
    X = np.asarray(verts, dtype=float)
    J, det, grads = affine_triangle(X)
    facets = [(0, 1), (0, 2), (1, 2)]
    normals = []
    for a, b in facets:
        t = X[b] - X[a]
        normals.append(np.array([t[1], -t[0]]) / np.linalg.norm(t))
    pts, wts = triangle_rule(10)
    out = []
    for (s, t), w in zip(pts, wts):
        lam = np.array([1.0 - s - t, s, t])
        G = []
        for (a, b), n in zip(facets, normals):
            g = lam[a] * grads[b] + lam[b] * grads[a]
            G.append(np.outer(n, g))
        for v in range(3):
            for c in range(2):
                g = np.zeros((2, 2))
                g[c] = grads[v]
                G.append(g)
        out.append((w * det, np.array(G)))
    return out


def _oracle_stiffness(verts, mu, lam_):
    K = np.zeros((9, 9))
    for wq, G in _oracle_displacement_basis(verts):
        eps = 0.5 * (G + G.transpose(0, 2, 1))
        div = np.trace(G, axis1=1, axis2=2)
        K += wq * (2 * mu * np.einsum("akj,bkj->ab", eps, eps) + lam_ * np.outer(div, div))
    return K


@pytest.mark.parametrize("verts", [REF, SKEW])
def test_elasticity_quadrature_oracle(verts):
    m = _single(verts)
    A = fem.assemble_elasticity_full(m, 1.0, 1.0).toarray()
    assert np.max(np.abs(A - _oracle_stiffness(verts, 1.0, 1.0))) < 1e-12


@pytest.mark.parametrize("verts", [REF, SKEW])
def test_div_coupling_quadrature_oracle(verts):
    m = _single(verts)
    B_b, B_l, _ = fem.assemble_div_coupling(m)
    ref = np.zeros(9)
    for wq, G in _oracle_displacement_basis(verts):
        ref -= wq * np.trace(G, axis1=1, axis2=2)
    assert np.max(np.abs(B_l.toarray()[0] - ref[3:])) < 1e-13
    assert np.max(np.abs(B_b.toarray()[0] - ref[:3])) < 1e-13


@pytest.mark.parametrize("verts", [REF, SKEW])
def test_flux_mass_quadrature_oracle(verts):
    m = _single(verts)
    X = np.asarray(verts, dtype=float)
    area = 0.5 * abs(np.linalg.det(np.stack([X[1] - X[0], X[2] - X[0]], axis=1)))
    # facet opposite vertex i with unit flux along its canonical normal
    phis = []
    for f in range(3):
        a, b = m.facets[f]
        opp = ({0, 1, 2} - {a, b}).pop()
        n = m.facet_normals[f]
        s = np.sign((0.5 * (X[a] + X[b]) - X[opp]) @ n)
        phis.append((opp, s))
    pts, wts = triangle_rule(10)
    ref = np.zeros((3, 3))
    for (s_, t_), w in zip(pts, wts):
        x = X[0] + s_ * (X[1] - X[0]) + t_ * (X[2] - X[0])
        vals = [s * (x - X[o]) / (2 * area) for o, s in phis]
        ref += 2 * area * w * np.array([[vi @ vj for vj in vals] for vi in vals])
    Mw = fem.assemble_flux_mass(m, 1.0, 1.0).toarray()
    assert np.max(np.abs(Mw - ref)) < 1e-13


def test_rt0_unit_flux():
    m = _single(SKEW)
    _, _, B_w = fem.assemble_div_coupling(m)
    assert set(np.abs(B_w.toarray()).ravel().tolist()) == {1.0}
    row = B_w.toarray()[0]
    assert np.array_equal(row[m.elem_facets[0]], -m.elem_signs[0])


def test_B_w_interior_cancellation():
    m = M.build_structured_square(3)
    _, _, B_w = fem.assemble_div_coupling(m)
    colsum = np.asarray(B_w.sum(axis=0)).ravel()
    interior = np.setdiff1d(np.arange(m.n_facets), m.boundary_facets)
    assert np.all(colsum[interior] == 0.0)
    assert set(np.unique(B_w.data).tolist()) <= {-1.0, 1.0}


@pytest.mark.parametrize("build,N", [(M.build_structured_square, 3), (M.build_structured_cube, 2)])
def test_rigid_body_modes(build, N):
    m = build(N)
    A = fem.assemble_elasticity_full(m, 1.3, 7.0)
    d = m.dim
    nf = m.n_facets
    x = m.vertices
    modes = [np.eye(d)[c] * np.ones((m.n_vertices, 1)) for c in range(d)]
    R = np.zeros((m.n_vertices, d))
    R[:, 0], R[:, 1] = -x[:, 1], x[:, 0]
    modes.append(R)
    for U in modes:
        # P1 interpolation is exact for affine fields, so bubbles stay at zero
        u = np.concatenate([np.zeros(nf), U.ravel()])
        assert np.max(np.abs(A @ u)) < 1e-10 * abs(A).max()


def test_negative_mu_rejected():
    with pytest.raises(ValueError):
        fem.assemble_elasticity(M.build_structured_square(1), -1.0, 1.0)
    with pytest.raises(ValueError):
        fem.assemble_flux_mass(M.build_structured_square(1), 1.0, [1.0, 0.0])


def test_flux_mass_permeability_scaling():
    m = M.build_structured_square(2)
    M1 = fem.assemble_flux_mass(m, 1.0, 1.0)
    M2 = fem.assemble_flux_mass(m, 1.0, 2.0)
    assert abs(M1 - 2 * M2).max() < 1e-14
    w = np.linalg.eigvalsh(M1.toarray())
    assert w.min() > 0


def test_flux_mass_locality():
    m = M.build_structured_square(1)
    k = np.array([1.0, 1e-6])
    Mk = fem.assemble_flux_mass(m, 1.0, k).toarray()
    loc = fem.rt0_element_mass(m)
    ref = np.zeros((m.n_facets, m.n_facets))
    for e in range(2):
        f = m.elem_facets[e]
        ref[np.ix_(f, f)] += loc[e] / k[e]
    assert np.max(np.abs(Mk - ref)) < 1e-14 * np.abs(ref).max()


def test_p0_mass():
    m = M.build_structured_square(1)
    assert np.allclose(fem.assemble_p0_mass(m).toarray(), np.diag([0.5, 0.5]))
    m = M.build_structured_cube(1)
    Mp = fem.assemble_p0_mass(m)
    assert np.allclose(Mp.diagonal(), 1 / 6) and Mp.nnz == 6
    assert abs(fem.assemble_p0_mass(M.build_structured_cube(3)).diagonal().sum() - 1) < 1e-13


@pytest.mark.parametrize("dim", [2, 3])
def test_quadrature_exactness(dim):
    rule = fem.simplex_rule(dim, 4)
    assert abs(rule.weights.sum() - 1.0 / (2 if dim == 2 else 6)) < 1e-15
    vol = rule.weights.sum()
    for exps in np.ndindex(*(5,) * (dim + 1)):
        if sum(exps) > rule.degree:
            continue
        num = np.sum(rule.weights * np.prod(rule.points ** np.array(exps), axis=1))
        assert abs(num - fem.barycentric_monomial_integral(exps, vol, dim)) < 1e-14


def test_quadrature_against_collapsed_gauss():
    pts, wts = triangle_rule(6)
    rule = fem.simplex_rule(2, 4)
    lam = np.stack([1 - pts.sum(1), pts[:, 0], pts[:, 1]], axis=1)
    for exps in [(2, 1, 1), (0, 4, 0), (1, 1, 2)]:
        a = np.sum(wts * np.prod(lam ** np.array(exps), axis=1))
        b = np.sum(rule.weights * np.prod(rule.points ** np.array(exps), axis=1))
        assert abs(a - b) < 1e-15


def test_clamped_elasticity_spd():
    m = M.build_structured_cube(2)
    tags = M.classify_boundary(m, "footing3d")
    b = fem.apply_essential_bcs(fem.assemble_blocks(m, 1.0, 1.0, 1.0, 1.0), tags)
    assert np.linalg.eigvalsh(b.A_u.toarray()).min() > 0


def test_constrained_rows_are_unit():
    m = M.build_structured_square(2)
    tags = M.classify_boundary(m, "mandel2d")
    b = fem.apply_essential_bcs(fem.assemble_blocks(m, 1.0, 1.0, 1.0, 1.0), tags)
    for A, fixed in ((b.A_bb, b.fixed_b), (b.A_ll, b.fixed_l), (b.M_w, b.fixed_w)):
        D = A.toarray()
        for i in np.flatnonzero(fixed):
            row = np.zeros(A.shape[0])
            row[i] = 1.0
            assert np.array_equal(D[i], row) and np.array_equal(D[:, i], row)
    assert np.all(b.B_w.toarray()[:, b.fixed_w] == 0)


def test_bc_elimination_matches_reduced_solve():
    m = M.build_structured_square(1)
    tags = M.classify_boundary(m, "mandel2d")
    raw = fem.assemble_blocks(m, 1.0, 0.5, 1.0, 1.0, body_force=(0.3, -1.0))
    b = fem.apply_essential_bcs(raw, tags)
    fixed = np.concatenate([b.fixed_b, b.fixed_l])
    free = ~fixed
    A = raw.A_u.toarray()
    f = np.concatenate([raw.f_b, raw.f_l])
    u_red = np.linalg.solve(A[np.ix_(free, free)], f[free])
    u = np.linalg.solve(b.A_u.toarray(), np.concatenate([b.f_b, b.f_l]))
    assert np.max(np.abs(u[free] - u_red)) < 1e-12 * np.abs(u_red).max()
    assert np.all(u[fixed] == 0)


def test_conflicting_tags_rejected():
    m = M.build_structured_square(1)
    tags = M.classify_boundary(m, "mandel2d")
    f = next(iter(tags.labels))
    tags.labels[f] = (M.CLAMPED, M.TRACTION)
    with pytest.raises(ValueError):
        fem.constrained_dofs(m, tags)


def test_tie_dofs_rigid_plate():
    m = M.build_structured_square(2)
    tags = M.classify_boundary(m, "mandel2d")
    b = fem.apply_essential_bcs(fem.assemble_blocks(m, 1.0, 1.0, 1.0, 1.0), tags)
    tied = fem.rigid_plate_dofs(m, tags, 1)
    t = fem.tie_dofs(b, tied, load=-2.0)
    assert t.A_ll.shape[0] == b.A_ll.shape[0] - tied.size + 1
    assert t.f_l[-1] == -2.0
    u = t.expand_l(np.arange(t.A_ll.shape[0], dtype=float))
    assert np.all(u[tied] == t.A_ll.shape[0] - 1)
    assert t.l_node_sizes.sum() == t.A_ll.shape[0]


def test_traction_load_resultant():
    m = M.build_structured_square(4)
    tags = M.classify_boundary(m, "mandel2d", plate="traction")
    f_b, f_l = fem.traction_load(m, tags.facets_with(M.LOADED_NOFLUX), (0.0, -3.0))
    assert abs(f_l[1::2].sum() + 3.0) < 1e-14 and abs(f_l[0::2].sum()) < 1e-14


@pytest.mark.parametrize("nu", [0.0, 0.3, 0.49])
def test_stokes_infsup_and_divergence_bound(nu):
    gam = []
    for N in (2, 4, 8):
        _, _, b, p = setup_problem("mandel2d", N, config_for("mandel2d", nu))
        S = (b.B_u.T @ sp.diags(1.0 / b.M_p.diagonal()) @ b.B_u).toarray()
        w = dense_sym_eig(S, b.A_u.toarray())
        z2 = derived_params(p, 2).zeta ** 2
        assert w.max() <= 1.0 / z2 + 1e-10
        gam.append(w[w > 1e-10 * w.max()].min())
    assert max(gam) / min(gam) < 1.15


@pytest.mark.parametrize("build,Ns", [(M.build_structured_square, (2, 4, 8, 16)),
                                      (M.build_structured_cube, (1, 2, 3))])
def test_bubble_diagonal_equivalence(build, Ns):
    lo = []
    for N in Ns:
        m = build(N)
        A_bb, _, _ = fem.assemble_elasticity(m, 1.0, 2.0)
        w = dense_sym_eig(A_bb.toarray(), np.diag((m.dim + 1) * A_bb.diagonal()))
        assert w.min() > 0 and w.max() <= 1.0 + 1e-12
        lo.append(w.min())
    assert max(lo) / min(lo) < 1.10


@settings(max_examples=15, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(0.0, 1e3))
def test_divergence_bound_property(mu, lam_):
    m = M.build_structured_square(2)
    tags = M.classify_boundary(m, "mandel2d")
    b = fem.apply_essential_bcs(fem.assemble_blocks(m, mu, lam_, 1.0, 1.0), tags)
    S = (b.B_u.T @ sp.diags(1.0 / b.M_p.diagonal()) @ b.B_u).toarray()
    w = dense_sym_eig(S, b.A_u.toarray())
    assert w.max() * (lam_ + mu) <= 1.0 + 1e-10
