"""Assembly for the P1+bubble / RT0 / P0 triple on simplicial meshes.

Local conventions
-----------------
* Displacement unknowns are ordered ``[bubbles (one per facet), P1 (d per
  vertex, interleaved by component)]``.
* The bubble attached to facet F is ``b_F * n_F``: the product of the d
  barycentric coordinates of the facet's vertices times the facet's global
  unit normal.
* RT0 basis functions carry unit flux through their facet in the direction
  of the facet's global normal, so every divergence entry is +-1 or 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np
import scipy.sparse as sp
from scipy.special import roots_jacobi

from . import mesh as _mesh
from .core_la import as_csr, coo_to_csr, diag_matrix

_CHUNK = 4096


@dataclass(frozen=True)
class QuadratureRule:
    """Rule on the reference simplex; ``points`` are barycentric coordinates.

    Weights sum to the reference volume 1/d!.
    """

    dim: int
    points: np.ndarray
    weights: np.ndarray
    degree: int


def simplex_rule(dim: int, degree: int = 4) -> QuadratureRule:
    """Collapsed (conical product) Gauss-Jacobi rule exact to ``degree``."""
    n = degree // 2 + 1
    nodes, wts = [], []
    for k in range(dim):
        a = dim - 1 - k
        t, w = roots_jacobi(n, a, 0.0)
        nodes.append((t + 1.0) / 2.0)
        wts.append(w / 2.0 ** (a + 1))
    grids = np.meshgrid(*nodes, indexing="ij")
    wgrid = np.meshgrid(*wts, indexing="ij")
    u = [g.ravel() for g in grids]
    w = np.prod([g.ravel() for g in wgrid], axis=0)
    xs = []
    scale = np.ones_like(u[0])
    for k in range(dim):
        xs.append(u[k] * scale)
        scale = scale * (1.0 - u[k])
    x = np.stack(xs, axis=1)
    bary = np.concatenate([1.0 - x.sum(axis=1, keepdims=True), x], axis=1)
    return QuadratureRule(dim, bary, w, degree)


def barycentric_monomial_integral(exponents, volume: float, dim: int) -> float:
    """Exact integral of prod(lambda_i ** a_i) over a simplex of given volume."""
    a = np.asarray(exponents, dtype=int)
    return volume * factorial(dim) * np.prod([factorial(int(k)) for k in a]) / factorial(int(a.sum()) + dim)


@dataclass
class DofMap:
    space: str
    count: int
    boundary_mask: np.ndarray = field(repr=False)


def barycentric_gradients(mesh):
    """(ne, d+1, d) gradients of the barycentric coordinates."""
    x = mesh.vertices[mesh.elements]
    J = (x[:, 1:] - x[:, :1]).transpose(0, 2, 1)
    Jinv = np.linalg.inv(J)
    G = np.empty((mesh.n_elements, mesh.dim + 1, mesh.dim))
    G[:, 1:] = Jinv
    G[:, 0] = -Jinv.sum(axis=1)
    return G


def _displacement_gradients(mesh, G, lam, elems):
    """Gradients of the local displacement basis at one barycentric point.

    Returns ``(grad, dofs)`` with ``grad[e, a, k, j] = d phi_a,k / d x_j``.
    Local basis order: d+1 bubbles then (vertex, component) pairs.
    """
    d = mesh.dim
    ne = elems.size
    nb = (d + 1) + d * (d + 1)
    grad = np.zeros((ne, nb, d, d))
    Ge = G[elems]
    normals = mesh.facet_normals[mesh.elem_facets[elems]]  # (ne, d+1, d)
    for i in range(d + 1):
        others = [m for m in range(d + 1) if m != i]
        gb = np.zeros((ne, d))
        for m in others:
            coef = np.prod([lam[l] for l in others if l != m])
            gb += coef * Ge[:, m]
        grad[:, i] = normals[:, i, :, None] * gb[:, None, :]
    for i in range(d + 1):
        for c in range(d):
            grad[:, d + 1 + d * i + c, c, :] = Ge[:, i]
    return grad


def _displacement_dofs(mesh, elems):
    d = mesh.dim
    nf = mesh.n_facets
    bub = mesh.elem_facets[elems]
    verts = mesh.elements[elems]
    p1 = nf + d * verts[:, :, None] + np.arange(d)[None, None, :]
    return np.concatenate([bub, p1.reshape(elems.size, -1)], axis=1)


def displacement_dofmaps(mesh):
    return (DofMap("Bubble", mesh.n_facets, np.zeros(mesh.n_facets, dtype=bool)),
            DofMap("P1-vector", mesh.dim * mesh.n_vertices,
                   np.zeros(mesh.dim * mesh.n_vertices, dtype=bool)))


def _chunks(n):
    for s in range(0, n, _CHUNK):
        yield np.arange(s, min(n, s + _CHUNK))


def assemble_elasticity_full(mesh, mu: float, lam_: float, rule: QuadratureRule | None = None):
    """Stiffness of a(u, v) over the enriched space, ordered [bubbles, P1]."""
    if mu <= 0:
        raise ValueError("shear modulus must be positive")
    if lam_ < 0:
        raise ValueError("Lame lambda must be non-negative")
    rule = rule or simplex_rule(mesh.dim, 4)
    d = mesh.dim
    G = barycentric_gradients(mesh)
    n = mesh.n_facets + d * mesh.n_vertices
    rows, cols, vals = [], [], []
    for elems in _chunks(mesh.n_elements):
        nb = (d + 1) * (d + 1)
        K = np.zeros((elems.size, nb, nb))
        jac = factorial(d) * mesh.volumes[elems]
        for lam, w in zip(rule.points, rule.weights):
            g = _displacement_gradients(mesh, G, lam, elems)
            eps = 0.5 * (g + g.transpose(0, 1, 3, 2))
            div = np.trace(g, axis1=2, axis2=3)
            K += (w * jac)[:, None, None] * (
                2.0 * mu * np.einsum("eakj,ebkj->eab", eps, eps)
                + lam_ * div[:, :, None] * div[:, None, :])
        dofs = _displacement_dofs(mesh, elems)
        rows.append(np.repeat(dofs, nb, axis=1).ravel())
        cols.append(np.tile(dofs, (1, nb)).ravel())
        vals.append(K.ravel())
    A = coo_to_csr(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), (n, n))
    return as_csr(0.5 * (A + A.T))


def assemble_elasticity(mesh, mu: float, lam_: float, rule=None):
    """Return ``(A_bb, A_bl, A_ll)``; ``A_bl`` has bubble rows, P1 columns."""
    A = assemble_elasticity_full(mesh, mu, lam_, rule)
    nf = mesh.n_facets
    return as_csr(A[:nf, :nf]), as_csr(A[:nf, nf:]), as_csr(A[nf:, nf:])


def assemble_div_coupling(mesh, rule: QuadratureRule | None = None):
    """Return ``(B_b, B_l, B_w)`` for -(div ., q) with P0 test functions."""
    rule = rule or simplex_rule(mesh.dim, 4)
    d = mesh.dim
    G = barycentric_gradients(mesh)
    n_u = mesh.n_facets + d * mesh.n_vertices
    rows, cols, vals = [], [], []
    for elems in _chunks(mesh.n_elements):
        nb = (d + 1) * (d + 1)
        Bloc = np.zeros((elems.size, nb))
        jac = factorial(d) * mesh.volumes[elems]
        for lam, w in zip(rule.points, rule.weights):
            g = _displacement_gradients(mesh, G, lam, elems)
            Bloc -= (w * jac)[:, None] * np.trace(g, axis1=2, axis2=3)
        dofs = _displacement_dofs(mesh, elems)
        rows.append(np.repeat(elems[:, None], nb, axis=1).ravel())
        cols.append(dofs.ravel())
        vals.append(Bloc.ravel())
    B = coo_to_csr(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals),
                   (mesh.n_elements, n_u))
    nf = mesh.n_facets
    B_b, B_l = as_csr(B[:, :nf]), as_csr(B[:, nf:])
    ne = mesh.n_elements
    B_w = coo_to_csr(np.repeat(np.arange(ne), d + 1), mesh.elem_facets.ravel(),
                     -mesh.elem_signs.ravel().astype(float), (ne, mesh.n_facets))
    return B_b, B_l, B_w


def _check_permeability(mesh, k):
    k = np.broadcast_to(np.asarray(k, dtype=float), (mesh.n_elements,)).copy()
    if np.any(k <= 0) or not np.all(np.isfinite(k)):
        raise ValueError("permeability must be positive and finite")
    return k


def rt0_element_mass(mesh, rule: QuadratureRule | None = None):
    """Unweighted RT0 element mass matrices, shape (ne, d+1, d+1)."""
    rule = rule or simplex_rule(mesh.dim, 4)
    d = mesh.dim
    x = mesh.vertices[mesh.elements]
    vol = mesh.volumes
    coef = mesh.elem_signs / (d * vol)[:, None]  # (ne, d+1)
    M = np.zeros((mesh.n_elements, d + 1, d + 1))
    for lam, w in zip(rule.points, rule.weights):
        xq = np.einsum("i,eid->ed", lam, x)
        phi = coef[:, :, None] * (xq[:, None, :] - x)  # (ne, d+1, d)
        M += (w * factorial(d) * vol)[:, None, None] * np.einsum("eid,ejd->eij", phi, phi)
    return M


def assemble_flux_mass(mesh, mu_f: float, k, rule: QuadratureRule | None = None):
    """RT0 mass weighted by mu_f / k(x), k piecewise constant per element."""
    k = _check_permeability(mesh, k)
    Mloc = rt0_element_mass(mesh, rule) * (mu_f / k)[:, None, None]
    dofs = mesh.elem_facets
    nl = mesh.dim + 1
    A = coo_to_csr(np.repeat(dofs, nl, axis=1).ravel(), np.tile(dofs, (1, nl)).ravel(),
                   Mloc.ravel(), (mesh.n_facets, mesh.n_facets))
    return as_csr(0.5 * (A + A.T))


def assemble_p0_mass(mesh):
    return diag_matrix(mesh.volumes)


def traction_load(mesh, facets, traction):
    """Load vectors (f_b, f_l) for a constant traction on the given facets."""
    d = mesh.dim
    t = np.asarray(traction, dtype=float)
    f_b = np.zeros(mesh.n_facets)
    f_l = np.zeros(d * mesh.n_vertices)
    if len(facets) == 0:
        return f_b, f_l
    facets = np.asarray(facets, dtype=np.int64)
    area = mesh.facet_areas[facets]
    bubble_int = area * factorial(d - 1) / factorial(2 * d - 1)
    f_b[facets] = bubble_int * (mesh.facet_normals[facets] @ t)
    for v in mesh.facets[facets].T:
        for c in range(d):
            np.add.at(f_l, d * v + c, area / d * t[c])
    return f_b, f_l


def element_source(mesh, f):
    """P0 load (f, q) for an elementwise-constant or callable source."""
    if callable(f):
        vals = np.array([f(c) for c in mesh.element_centroids()], dtype=float)
    else:
        vals = np.broadcast_to(np.asarray(f, dtype=float), (mesh.n_elements,))
    return vals * mesh.volumes


def body_force_load(mesh, g, rule: QuadratureRule | None = None):
    """(g, v) for a constant vector body force over the enriched space."""
    rule = rule or simplex_rule(mesh.dim, 4)
    d = mesh.dim
    g = np.asarray(g, dtype=float)
    f_b = np.zeros(mesh.n_facets)
    f_l = np.zeros(d * mesh.n_vertices)
    vol = mesh.volumes
    # int_T lambda_i = |T|/(d+1); bubble int_T prod_{m != i} lambda_m = |T| d!/(2d)!
    for i in range(d + 1):
        for c in range(d):
            np.add.at(f_l, d * mesh.elements[:, i] + c, vol / (d + 1) * g[c])
        bint = vol * factorial(d) / factorial(2 * d)
        np.add.at(f_b, mesh.elem_facets[:, i], bint * (mesh.facet_normals[mesh.elem_facets[:, i]] @ g))
    return f_b, f_l


def flux_body_force_load(mesh, g):
    """(g, r) for a constant vector g over RT0: g . int_T phi_f."""
    d = mesh.dim
    g = np.asarray(g, dtype=float)
    x = mesh.vertices[mesh.elements]
    cen = x.mean(axis=1)
    out = np.zeros(mesh.n_facets)
    # int_T (x - x_i) = |T| (centroid - x_i)
    vals = mesh.elem_signs / d * np.einsum("eid,d->ei", cen[:, None, :] - x, g)
    np.add.at(out, mesh.elem_facets.ravel(), vals.ravel())
    return out


@dataclass
class AssembledBlocks:
    """Global blocks of the three-field system plus load vectors."""

    mesh: object
    A_bb: sp.csr_matrix
    A_bl: sp.csr_matrix
    A_ll: sp.csr_matrix
    B_b: sp.csr_matrix
    B_l: sp.csr_matrix
    B_w: sp.csr_matrix
    M_w: sp.csr_matrix
    M_p: sp.csr_matrix
    f_b: np.ndarray
    f_l: np.ndarray
    g_p: np.ndarray
    g_w: np.ndarray
    fixed_b: np.ndarray = field(default=None, repr=False)
    fixed_l: np.ndarray = field(default=None, repr=False)
    fixed_w: np.ndarray = field(default=None, repr=False)
    l_expand: sp.csr_matrix | None = field(default=None, repr=False)
    l_nodes: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self):
        return self.mesh.dim

    @property
    def sizes(self):
        return self.A_bb.shape[0], self.A_ll.shape[0], self.M_p.shape[0], self.M_w.shape[0]

    @property
    def A_u(self):
        return as_csr(sp.bmat([[self.A_bb, self.A_bl], [self.A_bl.T, self.A_ll]]))

    @property
    def B_u(self):
        return as_csr(sp.hstack([self.B_b, self.B_l]))

    @property
    def l_node_sizes(self):
        """Dofs per displacement node of the P1 block (d per vertex unless dofs were tied)."""
        if self.l_nodes is not None:
            return self.l_nodes
        return np.full(self.mesh.n_vertices, self.dim, dtype=np.int64)

    def expand_l(self, u_l):
        """P1 coefficients on every vertex component."""
        return u_l if self.l_expand is None else self.l_expand @ u_l

    def dofmaps(self):
        nb, nl, npr, nw = self.sizes
        return {
            "Bubble": DofMap("Bubble", nb, self.fixed_b),
            "P1-vector": DofMap("P1-vector", nl, self.fixed_l),
            "P0": DofMap("P0", npr, np.zeros(npr, dtype=bool)),
            "RT0": DofMap("RT0", nw, self.fixed_w),
        }


def assemble_blocks(mesh, mu, lam_, mu_f, k, traction_facets=(), traction=None,
                    body_force=None, fluid_body_force=None, source=None):
    """Assemble every block and the load data (before boundary conditions)."""
    A_bb, A_bl, A_ll = assemble_elasticity(mesh, mu, lam_)
    B_b, B_l, B_w = assemble_div_coupling(mesh)
    M_w = assemble_flux_mass(mesh, mu_f, k)
    M_p = assemble_p0_mass(mesh)
    d = mesh.dim
    f_b = np.zeros(mesh.n_facets)
    f_l = np.zeros(d * mesh.n_vertices)
    if traction is not None and len(traction_facets):
        tb, tl = traction_load(mesh, traction_facets, traction)
        f_b += tb
        f_l += tl
    if body_force is not None:
        gb, gl = body_force_load(mesh, body_force)
        f_b += gb
        f_l += gl
    g_p = element_source(mesh, source) if source is not None else np.zeros(mesh.n_elements)
    g_w = flux_body_force_load(mesh, fluid_body_force) if fluid_body_force is not None \
        else np.zeros(mesh.n_facets)
    return AssembledBlocks(mesh, A_bb, A_bl, A_ll, B_b, B_l, B_w, M_w, M_p, f_b, f_l, g_p, g_w)


def constrained_dofs(mesh, tags):
    """Boolean masks (bubble, P1, RT0) of dofs fixed by essential conditions."""
    d = mesh.dim
    fixed_b = np.zeros(mesh.n_facets, dtype=bool)
    fixed_l = np.zeros(d * mesh.n_vertices, dtype=bool)
    fixed_w = np.zeros(mesh.n_facets, dtype=bool)
    for f, lab in tags.labels.items():
        if not isinstance(lab, str):
            labs = set(lab)
            if len(labs) != 1:
                raise ValueError(f"conflicting tags {sorted(labs)} on facet {f}")
            lab = labs.pop()
        if lab not in _mesh.LABELS:
            raise ValueError(f"unknown boundary label {lab!r}")
        verts = mesh.facets[f]
        if lab == _mesh.CLAMPED:
            fixed_b[f] = True
            for c in range(d):
                fixed_l[d * verts + c] = True
            fixed_w[f] = True
        elif lab in (_mesh.SYMMETRY_X, _mesh.SYMMETRY_Y):
            c = 0 if lab == _mesh.SYMMETRY_X else 1
            fixed_b[f] = True
            fixed_l[d * verts + c] = True
            fixed_w[f] = True
        elif lab in (_mesh.LOADED_NOFLUX, _mesh.RIGID_PLATE):
            # the plate also pins the normal bubble; its vertical P1 dofs are tied separately
            if lab == _mesh.RIGID_PLATE:
                fixed_b[f] = True
            fixed_w[f] = True
    return fixed_b, fixed_l, fixed_w


def _constrain(A, fixed_rows, fixed_cols, unit_diag=False):
    A = sp.csr_matrix(A)
    if fixed_rows is not None and fixed_rows.any():
        keep = sp.diags((~fixed_rows).astype(float))
        A = keep @ A
    if fixed_cols is not None and fixed_cols.any():
        keep = sp.diags((~fixed_cols).astype(float))
        A = A @ keep
    if unit_diag and fixed_rows is not None and fixed_rows.any():
        A = A + sp.diags(fixed_rows.astype(float))
    A = as_csr(A)
    A.eliminate_zeros()
    return A


def apply_essential_bcs(blocks: AssembledBlocks, tags) -> AssembledBlocks:
    """Symmetric elimination of homogeneous essential conditions.

    Constrained rows and columns are zeroed in every block; the diagonal
    blocks A_bb, A_ll and M_w receive a unit diagonal entry and the load is
    zeroed there.
    """
    fb, fl, fw = constrained_dofs(blocks.mesh, tags)
    out = AssembledBlocks(
        blocks.mesh,
        A_bb=_constrain(blocks.A_bb, fb, fb, unit_diag=True),
        A_bl=_constrain(blocks.A_bl, fb, fl),
        A_ll=_constrain(blocks.A_ll, fl, fl, unit_diag=True),
        B_b=_constrain(blocks.B_b, None, fb),
        B_l=_constrain(blocks.B_l, None, fl),
        B_w=_constrain(blocks.B_w, None, fw),
        M_w=_constrain(blocks.M_w, fw, fw, unit_diag=True),
        M_p=blocks.M_p,
        f_b=np.where(fb, 0.0, blocks.f_b),
        f_l=np.where(fl, 0.0, blocks.f_l),
        g_p=blocks.g_p.copy(),
        g_w=np.where(fw, 0.0, blocks.g_w),
        fixed_b=fb, fixed_l=fl, fixed_w=fw,
    )
    return out


def tie_dofs(blocks: AssembledBlocks, tied, load=0.0) -> AssembledBlocks:
    """Replace the P1 dofs in ``tied`` by one shared unknown appended last.

    Models a rigid plate: all tied components move together and ``load`` is
    the resultant force acting on the plate.
    """
    nl = blocks.A_ll.shape[0]
    tied = np.zeros(nl, dtype=bool) | np.isin(np.arange(nl), tied)
    if not tied.any():
        return blocks
    if np.any(tied & blocks.fixed_l):
        raise ValueError("cannot tie a dof that is already fixed")
    keep = np.flatnonzero(~tied)
    rows = np.concatenate([keep, np.flatnonzero(tied)])
    cols = np.concatenate([np.arange(keep.size), np.full(tied.sum(), keep.size)])
    T = as_csr(sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(nl, keep.size + 1)))
    d = blocks.dim
    node = np.arange(nl) // d
    nodes = np.concatenate([np.bincount(node[keep], minlength=blocks.mesh.n_vertices), [1]])
    nodes = nodes[nodes > 0]
    f_l = T.T @ blocks.f_l
    f_l[-1] += load
    return AssembledBlocks(
        blocks.mesh, blocks.A_bb, as_csr(blocks.A_bl @ T), as_csr(T.T @ blocks.A_ll @ T),
        blocks.B_b, as_csr(blocks.B_l @ T), blocks.B_w, blocks.M_w, blocks.M_p,
        blocks.f_b.copy(), f_l, blocks.g_p.copy(), blocks.g_w.copy(),
        fixed_b=blocks.fixed_b, fixed_l=np.concatenate([blocks.fixed_l[keep], [False]]),
        fixed_w=blocks.fixed_w, l_expand=T, l_nodes=nodes.astype(np.int64))


def rigid_plate_dofs(mesh, tags, component):
    """P1 dofs of ``component`` on vertices of rigid-plate facets."""
    verts = np.unique(mesh.facets[tags.facets_with(_mesh.RIGID_PLATE)])
    return mesh.dim * verts + component
