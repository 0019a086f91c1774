"""First-order FE assembly for the axisymmetric magnetoquasistatic problem.

Formulation
-----------
The unknown is the scaled azimuthal vector potential ``A' = r * A_phi``,
discretized with P1 nodal hats ``w'`` on triangles in the (r, z) plane.  The
flux density components are ``B_r = -(1/r) dA'/dz`` and ``B_z = (1/r) dA'/dr``,
so with an anisotropic reluctivity pair (radial, axial) the curl-curl energy
becomes::

    K_ij = 2*pi * int (1/r) [ nu_r dz(w'_j) dz(w'_i) + nu_z dr(w'_j) dr(w'_i) ] dr dz

and the conduction (mass) term, with only the azimuthal conductivity active,::

    M_ij = 2*pi * int (sigma/r) w'_j w'_i dr dz

The 2*pi azimuthal factor is included so currents, voltages and inductances
come out in physical units.  The 1/r weight is evaluated at interior
quadrature points; together with the ``A' = r A_phi`` substitution this keeps
elements touching the axis regular (the Dirichlet condition fixes A' = 0 on
the axis anyway).

Assembly loops run in fixed element order with symmetric element matrices, so
the global matrices are exactly symmetric and bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
import scipy.sparse as sp

from .linalg import canonical_csr
from .mesh import Mesh, RegionTag

# Barycentric quadrature rules on the reference triangle; weights sum to 1.
_RULE_DEGREE2 = (
    np.array(
        [
            [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
            [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
            [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
        ]
    ),
    np.full(3, 1.0 / 3.0),
)

_W1, _A1 = 0.223381589678011, 0.445948490915965
_W2, _A2 = 0.109951743655322, 0.091576213509771
_RULE_DEGREE4 = (
    np.array(
        [
            [1.0 - 2.0 * _A1, _A1, _A1],
            [_A1, 1.0 - 2.0 * _A1, _A1],
            [_A1, _A1, 1.0 - 2.0 * _A1],
            [1.0 - 2.0 * _A2, _A2, _A2],
            [_A2, 1.0 - 2.0 * _A2, _A2],
            [_A2, _A2, 1.0 - 2.0 * _A2],
        ]
    ),
    np.array([_W1, _W1, _W1, _W2, _W2, _W2]),
)

_W3, _A3 = 0.132394152788506, 0.470142064105115
_W4, _A4 = 0.125939180544827, 0.101286507323456
_RULE_DEGREE5 = (
    np.array(
        [
            [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            [1.0 - 2.0 * _A3, _A3, _A3],
            [_A3, 1.0 - 2.0 * _A3, _A3],
            [_A3, _A3, 1.0 - 2.0 * _A3],
            [1.0 - 2.0 * _A4, _A4, _A4],
            [_A4, 1.0 - 2.0 * _A4, _A4],
            [_A4, _A4, 1.0 - 2.0 * _A4],
        ]
    ),
    np.array([0.225, _W3, _W3, _W3, _W4, _W4, _W4]),
)

QUADRATURE_RULES: dict = {2: _RULE_DEGREE2, 4: _RULE_DEGREE4, 5: _RULE_DEGREE5}
TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class RegionMaterial:
    """Anisotropic material pair per region: (radial, axial) components.

    ``sigma`` is the conductivity pair in S/m; only the azimuthal component
    (equal to the axial pair entry by the mixing rule) drives eddy currents in
    this formulation.  ``nu`` is the reluctivity pair in m/H.
    """

    sigma: tuple = (0.0, 0.0)
    nu: tuple = (1.0, 1.0)

    def __post_init__(self):
        if min(self.sigma) < 0.0:
            raise ValueError("conductivity must be nonnegative")
        if min(self.nu) <= 0.0:
            raise ValueError("reluctivity must be strictly positive")

    @classmethod
    def isotropic(cls, sigma: float, nu: float) -> "RegionMaterial":
        return cls(sigma=(sigma, sigma), nu=(nu, nu))


@dataclass(frozen=True)
class MaterialSpec:
    """Per-region material table keyed by :class:`RegionTag` values."""

    regions: Mapping[int, RegionMaterial]

    def material(self, tag: int) -> RegionMaterial:
        try:
            return self.regions[int(tag)]
        except KeyError as exc:
            raise KeyError(f"no material for region tag {tag}") from exc


@dataclass(frozen=True)
class FieldDiscretization:
    """Node-to-DoF map with Dirichlet nodes excluded.

    ``dof_index[node] == -1`` marks a constrained node; free nodes are
    numbered consecutively in node order.  ``quad_degree`` selects the
    quadrature rule used by every assembly routine.
    """

    dof_index: np.ndarray
    n_dofs: int
    quad_degree: int = 4

    @classmethod
    def from_mesh(cls, mesh: Mesh, fix_boundary: bool = True, quad_degree: int = 4):
        fixed = mesh.boundary if fix_boundary else np.zeros(mesh.n_nodes, dtype=bool)
        dof = np.full(mesh.n_nodes, -1, dtype=np.int64)
        free = np.flatnonzero(~fixed)
        dof[free] = np.arange(free.size)
        dof.setflags(write=False)
        return cls(dof_index=dof, n_dofs=int(free.size), quad_degree=quad_degree)


def _element_geometry(mesh: Mesh):
    """Per-element areas and P1 hat gradients (d/dr, d/dz)."""
    p = mesh.nodes[mesh.triangles]
    r1, z1 = p[:, 0, 0], p[:, 0, 1]
    r2, z2 = p[:, 1, 0], p[:, 1, 1]
    r3, z3 = p[:, 2, 0], p[:, 2, 1]
    det = (r2 - r1) * (z3 - z1) - (r3 - r1) * (z2 - z1)
    area = 0.5 * det
    grad_r = np.stack([(z2 - z3), (z3 - z1), (z1 - z2)], axis=1) / det[:, None]
    grad_z = np.stack([(r3 - r2), (r1 - r3), (r2 - r1)], axis=1) / det[:, None]
    return area, grad_r, grad_z


def _quad_points(mesh: Mesh, degree: int):
    bary, weights = QUADRATURE_RULES[degree]
    p = mesh.nodes[mesh.triangles]  # (m, 3, 2)
    pts = np.einsum("qa,mad->mqd", bary, p)  # (m, q, 2)
    return bary, weights, pts


def _accumulate(rows, cols, vals, n_dofs) -> sp.csr_matrix:
    coo = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_dofs, n_dofs),
    )
    return canonical_csr(coo)


def assemble_stiffness(mesh: Mesh, materials: MaterialSpec, disc: FieldDiscretization) -> sp.csr_matrix:
    """Curl-curl stiffness matrix; symmetric positive semidefinite."""
    area, grad_r, grad_z = _element_geometry(mesh)
    _, weights, pts = _quad_points(mesh, disc.quad_degree)
    inv_r = np.einsum("q,mq->m", weights, 1.0 / pts[:, :, 0])
    rows, cols, vals = [], [], []
    dof = disc.dof_index
    for e in range(mesh.n_triangles):
        mat = materials.material(mesh.regions[e])
        nu_r, nu_z = mat.nu
        gr, gz = grad_r[e], grad_z[e]
        ke = (TWO_PI * area[e] * inv_r[e]) * (nu_r * np.outer(gz, gz) + nu_z * np.outer(gr, gr))
        idx = dof[mesh.triangles[e]]
        keep = idx >= 0
        if not np.any(keep):
            continue
        sub = ke[np.ix_(keep, keep)]
        ii = idx[keep]
        rows.append(np.repeat(ii, ii.size))
        cols.append(np.tile(ii, ii.size))
        vals.append(sub.ravel())
    if not rows:
        return sp.csr_matrix((disc.n_dofs, disc.n_dofs))
    return _accumulate(rows, cols, vals, disc.n_dofs)


def _mass_like(mesh, materials, disc, element_filter, profile) -> sp.csr_matrix:
    """Shared kernel for the conduction mass matrix and its modified variants."""
    area, _, _ = _element_geometry(mesh)
    bary, weights, pts = _quad_points(mesh, disc.quad_degree)
    rows, cols, vals = [], [], []
    dof = disc.dof_index
    # hat_products[q, a, b] = N_a(q) * N_b(q) is bitwise symmetric, so the
    # contraction over q below yields exactly symmetric element matrices
    hat_products = bary[:, :, None] * bary[:, None, :]
    for e in range(mesh.n_triangles):
        tag = int(mesh.regions[e])
        if not element_filter(tag):
            continue
        sigma_axial = materials.material(tag).sigma[1]
        if sigma_axial == 0.0:
            continue
        r_q = pts[e, :, 0]
        w_eff = weights * sigma_axial / r_q
        if profile is not None:
            w_eff = w_eff * profile(r_q, pts[e, :, 1])
        me = (TWO_PI * area[e]) * np.tensordot(w_eff, hat_products, axes=1)
        idx = dof[mesh.triangles[e]]
        keep = idx >= 0
        if not np.any(keep):
            continue
        sub = me[np.ix_(keep, keep)]
        ii = idx[keep]
        rows.append(np.repeat(ii, ii.size))
        cols.append(np.tile(ii, ii.size))
        vals.append(sub.ravel())
    if not rows:
        return sp.csr_matrix((disc.n_dofs, disc.n_dofs))
    return _accumulate(rows, cols, vals, disc.n_dofs)


def assemble_mass(mesh: Mesh, materials: MaterialSpec, disc: FieldDiscretization) -> sp.csr_matrix:
    """Conduction mass matrix over all conductive regions."""
    return _mass_like(mesh, materials, disc, lambda tag: True, None)


def assemble_modified_mass(
    mesh: Mesh,
    materials: MaterialSpec,
    disc: FieldDiscretization,
    profile: Callable[[np.ndarray, np.ndarray], np.ndarray],
) -> sp.csr_matrix:
    """Mass matrix weighted by one voltage-basis profile.

    ``profile(r, z)`` must vanish outside the winding region; only
    winding-tagged elements are visited.
    """
    return _mass_like(
        mesh, materials, disc, lambda tag: tag == int(RegionTag.FOIL_WINDING), profile
    )


def assemble_double_modified_mass(
    mesh: Mesh,
    materials: MaterialSpec,
    disc: FieldDiscretization,
    profile_k: Callable[[np.ndarray, np.ndarray], np.ndarray],
    profile_l: Callable[[np.ndarray, np.ndarray], np.ndarray],
) -> sp.csr_matrix:
    """Mass matrix weighted by a product of two voltage-basis profiles."""

    def product(r, z):
        return profile_k(r, z) * profile_l(r, z)

    return _mass_like(mesh, materials, disc, lambda tag: tag == int(RegionTag.FOIL_WINDING), product)
