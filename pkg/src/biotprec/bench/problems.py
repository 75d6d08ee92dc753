"""Mandel (2D quadrant) and footing (3D cube) problem setup."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .. import fem
from .. import mesh as msh
from ..biot import PhysicalParams


@dataclass(frozen=True)
class MandelConfig:
    a: float = 1.0
    b: float = 1.0
    F: float = 1e4
    nu: float = 0.0
    E: float = 1e4
    alpha: float = 1.0
    M: float = 1e6
    mu_f: float = 1.0
    k: float = 1e-6
    B: float = 1.0
    series_tol: float = 1e-12
    standard_shear: bool = False
    plate: str = "rigid"  # or "traction": uniform load F/a on the top edge

    def __post_init__(self):
        if self.plate not in ("rigid", "traction"):
            raise ValueError(f"unknown plate model {self.plate!r}")

    @property
    def nu_u(self):
        nu, B = self.nu, self.B
        return (3 * nu + B * (1 - 2 * nu)) / (3 - B * (1 - 2 * nu))

    def params(self) -> PhysicalParams:
        return PhysicalParams.from_E_nu(self.E, self.nu, self.standard_shear, alpha=self.alpha,
                                        M=self.M, mu_f=self.mu_f, k=self.k)


@dataclass(frozen=True)
class FootingConfig:
    sigma0: float = 3e4
    patch: float = 0.5
    nu: float = 0.2
    E: float = 1e4
    alpha: float = 1.0
    M: float = 1e6
    mu_f: float = 1.0
    k: float = 1e-6
    k_jump: float | None = None  # permeability for x >= 0.5; k applies for x < 0.5
    standard_shear: bool = False

    def __post_init__(self):
        if not 0 < self.patch <= 1:
            raise ValueError("load patch must fit inside the top face")

    def params(self) -> PhysicalParams:
        return PhysicalParams.from_E_nu(self.E, self.nu, self.standard_shear, alpha=self.alpha,
                                        M=self.M, mu_f=self.mu_f, k=self.k)


def permeability_field(mesh, k, k_jump=None):
    """Per-element permeability; ``k_jump`` applies where the centroid has x >= 0.5."""
    kk = np.full(mesh.n_elements, float(k))
    if k_jump is not None:
        kk[mesh.element_centroids()[:, 0] >= 0.5] = float(k_jump)
    return kk


def config_for(problem, nu=None, k=None, k_jump=None, standard_shear=False):
    cfg = MandelConfig() if problem == "mandel2d" else FootingConfig()
    kw = {"standard_shear": standard_shear}
    if nu is not None:
        kw["nu"] = float(nu)
    if k is not None:
        kw["k"] = float(k)
    if k_jump is not None:
        if problem != "footing3d":
            raise ValueError("permeability jumps are defined for the footing problem")
        kw["k_jump"] = float(k_jump)
    return replace(cfg, **kw)


def setup_problem(problem: str, N: int, cfg=None):
    """Return ``(mesh, tags, blocks, params)`` with boundary conditions applied."""
    if problem == "mandel2d":
        cfg = cfg or MandelConfig()
        mesh = msh.build_structured_square(N)
        tags = msh.classify_boundary(mesh, problem, cfg.plate)
        loaded = tags.facets_with(msh.LOADED_NOFLUX)
        traction = (0.0, -cfg.F / cfg.a)
        k = permeability_field(mesh, cfg.k)
    elif problem == "footing3d":
        cfg = cfg or FootingConfig()
        mesh = msh.build_structured_cube(N)
        tags = msh.classify_boundary(mesh, problem)
        loaded = tags.facets_with(msh.LOADED)
        traction = (0.0, 0.0, -cfg.sigma0)
        k = permeability_field(mesh, cfg.k, cfg.k_jump)
    else:
        raise ValueError(f"unknown problem {problem!r}")
    params = cfg.params().with_k(k)
    raw = fem.assemble_blocks(mesh, params.mu, params.lam, params.mu_f, k,
                              traction_facets=loaded, traction=traction)
    blocks = fem.apply_essential_bcs(raw, tags)
    if problem == "mandel2d" and cfg.plate == "rigid":
        # quadrant share of the plate load 2F over width 2a
        blocks = fem.tie_dofs(blocks, fem.rigid_plate_dofs(mesh, tags, 1), load=-cfg.F)
    return mesh, tags, blocks, params
