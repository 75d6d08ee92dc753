"""Structured simplicial meshes of the unit square and unit cube."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import factorial

import numpy as np

# boundary labels
TRACTION = "traction"        # drained, traction-free
CLAMPED = "clamped"          # u = 0, w.n = 0
SYMMETRY_X = "symmetry-x"    # u_x = 0, w.n = 0
SYMMETRY_Y = "symmetry-y"    # u_y = 0, w.n = 0
LOADED = "load-patch"        # prescribed traction, drained
LOADED_NOFLUX = "loaded-noflux"  # prescribed traction, w.n = 0 (Mandel plate)
RIGID_PLATE = "rigid-plate"  # impermeable plate, uniform normal displacement
FREE = "free"

LABELS = (TRACTION, CLAMPED, SYMMETRY_X, SYMMETRY_Y, LOADED, LOADED_NOFLUX, RIGID_PLATE, FREE)


@dataclass
class SimplicialMesh:
    """Simplices with globally numbered, canonically oriented facets.

    ``elem_facets[e, i]`` is the facet opposite local vertex ``i`` and
    ``elem_signs[e, i]`` is +1 when the facet's global normal points out of
    element ``e``.
    """

    dim: int
    vertices: np.ndarray
    elements: np.ndarray
    facets: np.ndarray
    elem_facets: np.ndarray
    elem_signs: np.ndarray
    facet_normals: np.ndarray
    facet_areas: np.ndarray
    volumes: np.ndarray
    boundary_facets: np.ndarray
    n_cells: int = 0
    _facet_elements: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_elements(self):
        return self.elements.shape[0]

    @property
    def n_facets(self):
        return self.facets.shape[0]

    @property
    def h(self):
        return 1.0 / self.n_cells if self.n_cells else np.nan

    def facet_elements(self):
        """(n_facets, 2) incident element ids; -1 marks a missing neighbour."""
        if self._facet_elements is None:
            fe = -np.ones((self.n_facets, 2), dtype=np.int64)
            flat_f = self.elem_facets.ravel()
            flat_e = np.repeat(np.arange(self.n_elements), self.dim + 1)
            order = np.argsort(flat_f, kind="stable")
            f_sorted, e_sorted = flat_f[order], flat_e[order]
            first = np.ones(f_sorted.size, dtype=bool)
            first[1:] = f_sorted[1:] != f_sorted[:-1]
            fe[f_sorted[first], 0] = e_sorted[first]
            fe[f_sorted[~first], 1] = e_sorted[~first]
            self._facet_elements = fe
        return self._facet_elements

    def facet_centroids(self):
        return self.vertices[self.facets].mean(axis=1)

    def element_centroids(self):
        return self.vertices[self.elements].mean(axis=1)

    def shape_regularity(self):
        """Max over elements of circumradius / inradius."""
        x = self.vertices[self.elements]
        inr = self.dim * self.volumes / self.facet_areas[self.elem_facets].sum(axis=1)
        # circumcentre c solves 2 (x_i - x_0) . c = |x_i|^2 - |x_0|^2
        A = 2.0 * (x[:, 1:] - x[:, :1])
        rhs = (x[:, 1:] ** 2).sum(-1) - (x[:, :1] ** 2).sum(-1)
        c = np.linalg.solve(A, rhs[..., None])[..., 0]
        R = np.linalg.norm(c - x[:, 0], axis=1)
        return float(np.max(R / inr))

    def dump(self, path, tags=None):
        """Write a plain-text mesh description.

        Sections: ``vertices n`` (x y [z]), ``elements n`` (vertex ids),
        ``facets n`` (vertex ids, then tag or ``interior``).
        """
        with open(path, "w") as fh:
            fh.write(f"dim {self.dim}\n")
            fh.write(f"vertices {self.n_vertices}\n")
            for v in self.vertices:
                fh.write(" ".join(f"{c:.17g}" for c in v) + "\n")
            fh.write(f"elements {self.n_elements}\n")
            for e in self.elements:
                fh.write(" ".join(map(str, e)) + "\n")
            fh.write(f"facets {self.n_facets}\n")
            labels = tags.labels if tags is not None else {}
            bset = set(self.boundary_facets.tolist())
            for f, verts in enumerate(self.facets):
                lab = labels.get(f, "boundary" if f in bset else "interior")
                fh.write(" ".join(map(str, verts)) + f" {lab}\n")


def mesh_from_arrays(dim, vertices, elements, n_cells=0) -> SimplicialMesh:
    """Build a mesh from vertex coordinates and simplices.

    Negatively oriented simplices are reordered; ``n_cells`` only sets ``h``.
    """
    vertices = np.asarray(vertices, dtype=float)
    elements = np.array(elements, dtype=np.int64)
    x = vertices[elements]
    J = (x[:, 1:] - x[:, :1]).transpose(0, 2, 1)
    det = np.linalg.det(J)
    flip = det < 0
    if np.any(flip):
        elements[flip, 0], elements[flip, 1] = elements[flip, 1].copy(), elements[flip, 0].copy()
        det = np.abs(det)
    volumes = det / factorial(dim)

    # local facet i is opposite local vertex i
    local = np.array([[j for j in range(dim + 1) if j != i] for i in range(dim + 1)])
    all_f = np.sort(elements[:, local], axis=2).reshape(-1, dim)
    facets, inverse = np.unique(all_f, axis=0, return_inverse=True)
    elem_facets = inverse.reshape(-1, dim + 1)

    fx = vertices[facets]
    if dim == 2:
        t = fx[:, 1] - fx[:, 0]
        normals = np.stack([t[:, 1], -t[:, 0]], axis=1)
    else:
        normals = np.cross(fx[:, 1] - fx[:, 0], fx[:, 2] - fx[:, 0])
    nlen = np.linalg.norm(normals, axis=1)
    areas = nlen / (1.0 if dim == 2 else 2.0)
    normals = normals / nlen[:, None]

    # outward test: vector from the opposite vertex to the facet points outward
    opp = vertices[elements]  # (ne, d+1, d)
    fcent = fx.mean(axis=1)[elem_facets]  # (ne, d+1, d)
    outward = fcent - opp
    signs = np.sign(np.einsum("eid,eid->ei", outward, normals[elem_facets])).astype(np.int64)

    counts = np.bincount(elem_facets.ravel(), minlength=facets.shape[0])
    boundary = np.flatnonzero(counts == 1)
    return SimplicialMesh(dim=dim, vertices=vertices, elements=elements, facets=facets,
                          elem_facets=elem_facets, elem_signs=signs, facet_normals=normals,
                          facet_areas=areas, volumes=volumes, boundary_facets=boundary,
                          n_cells=n_cells)


def build_structured_square(N: int) -> SimplicialMesh:
    """Unit square, N x N cells, each split along its lower-left/upper-right diagonal."""
    if N < 1:
        raise ValueError("N must be positive")
    g = np.linspace(0.0, 1.0, N + 1)
    X, Y = np.meshgrid(g, g, indexing="xy")
    vertices = np.stack([X.ravel(), Y.ravel()], axis=1)
    i, j = np.meshgrid(np.arange(N), np.arange(N), indexing="xy")
    v00 = (j * (N + 1) + i).ravel()
    v10, v01, v11 = v00 + 1, v00 + N + 1, v00 + N + 2
    lower = np.stack([v00, v10, v11], axis=1)
    upper = np.stack([v00, v11, v01], axis=1)
    elements = np.stack([lower, upper], axis=1).reshape(-1, 3)
    return mesh_from_arrays(2, vertices, elements, N)


def build_structured_cube(N: int) -> SimplicialMesh:
    """Unit cube, N^3 cells, each split into the six Kuhn tetrahedra."""
    if N < 1:
        raise ValueError("N must be positive")
    g = np.linspace(0.0, 1.0, N + 1)
    Z, Y, X = np.meshgrid(g, g, g, indexing="ij")
    vertices = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)

    def vid(i, j, k):
        return (k * (N + 1) + j) * (N + 1) + i

    k, j, i = np.meshgrid(np.arange(N), np.arange(N), np.arange(N), indexing="ij")
    i, j, k = i.ravel(), j.ravel(), k.ravel()
    tets = []
    for perm in itertools.permutations(range(3)):
        path = [np.zeros(3, dtype=int)]
        for axis in perm:
            step = path[-1].copy()
            step[axis] += 1
            path.append(step)
        tets.append(np.stack([vid(i + p[0], j + p[1], k + p[2]) for p in path], axis=1))
    elements = np.stack(tets, axis=1).reshape(-1, 4)
    return mesh_from_arrays(3, vertices, elements, N)


@dataclass
class BoundaryTag:
    problem: str
    labels: dict

    def facets_with(self, *labels):
        return np.array(sorted(f for f, lab in self.labels.items() if lab in labels), dtype=np.int64)


def classify_boundary(mesh: SimplicialMesh, problem: str, plate: str = "rigid") -> BoundaryTag:
    """Label every boundary facet for the Mandel quadrant or the 3D footing.

    ``plate`` selects the Mandel top edge: ``rigid`` (tied vertical
    displacement) or ``traction`` (uniform load).
    """
    tol = 1e-12
    c = mesh.facet_centroids()
    labels = {}
    if problem == "mandel2d":
        if mesh.dim != 2:
            raise ValueError("mandel2d needs a 2D mesh")
        for f in mesh.boundary_facets:
            x, y = c[f]
            if abs(x) < tol:
                labels[int(f)] = SYMMETRY_X
            elif abs(y) < tol:
                labels[int(f)] = SYMMETRY_Y
            elif abs(x - 1.0) < tol:
                labels[int(f)] = TRACTION
            elif abs(y - 1.0) < tol:
                labels[int(f)] = RIGID_PLATE if plate == "rigid" else LOADED_NOFLUX
    elif problem == "footing3d":
        if mesh.dim != 3:
            raise ValueError("footing3d needs a 3D mesh")
        for f in mesh.boundary_facets:
            x, y, z = c[f]
            if abs(z) < tol:
                labels[int(f)] = CLAMPED
            elif abs(z - 1.0) < tol and abs(x - 0.5) <= 0.25 + tol and abs(y - 0.5) <= 0.25 + tol:
                labels[int(f)] = LOADED
            else:
                labels[int(f)] = TRACTION
    else:
        raise ValueError(f"unknown problem {problem!r}")
    missing = set(mesh.boundary_facets.tolist()) - set(labels)
    if missing:
        raise RuntimeError(f"{len(missing)} boundary facets left untagged")
    return BoundaryTag(problem, labels)
