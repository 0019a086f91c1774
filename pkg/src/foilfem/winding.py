"""Foil-winding homogenization and field-circuit coupling blocks.

A foil winding of ``N`` turns is modeled as a homogenized anisotropic block.
The azimuthal distribution field spreads the terminal current over the block
with unit line integral along every closed azimuthal path; in the
``A' = r A_phi`` discretization its coefficient vector is the constant nodal
profile ``1 / (2 pi)`` on winding nodes, so it is represented exactly in the
FE space.  The voltage profile across the winding thickness is expanded in a
small 1D basis (Legendre polynomials by default, nodal hats as an
alternative), giving the coupling column block ``X``, the turn-count vector
``c`` and two variants of the turn-by-turn conductance matrix:

* ``G`` assembled from the double-profile-weighted mass matrices (the natural
  quadratic form), and
* ``G_e`` from the source-field coefficients ``e_l`` solving
  ``M e_l = M^(l) x`` on the conductive support, i.e. the mass pseudo-inverse
  applied column-wise; equivalently ``G_e = X^T pinv(M) X``.

``G - G_e`` is a Gram matrix of FE projection residuals, hence positive
semidefinite on every mesh, shrinking under refinement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .assembly import (
    FieldDiscretization,
    MaterialSpec,
    RegionMaterial,
    assemble_double_modified_mass,
    assemble_mass,
    assemble_modified_mass,
    assemble_stiffness,
)
from .errors import EmptyWindingError, ValidationError
from .linalg import RestrictedSpdSolver, canonical_csr
from .mesh import Mesh, RegionTag

MU0 = 4.0e-7 * math.pi
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class FoilWindingSpec:
    """Geometry and materials of one homogenized foil winding.

    ``foil_pitch`` is the per-turn period across the stacking direction; the
    conductor occupies ``fill_factor * foil_pitch`` of it.  The winding block
    spans ``n_turns * foil_pitch`` radially starting at ``inner_radius`` and
    ``height`` axially, centered at ``z_center``.
    """

    n_turns: int
    fill_factor: float
    foil_pitch: float
    height: float
    inner_radius: float
    z_center: float
    sigma_c: float
    sigma_i: float = 0.0
    nu_c: float = 1.0 / MU0
    nu_i: float = 1.0 / MU0

    def __post_init__(self):
        if self.n_turns < 1:
            raise ValidationError("need at least one turn")
        if not 0.0 < self.fill_factor <= 1.0:
            raise ValidationError("fill factor must be in (0, 1]")
        if min(self.foil_pitch, self.height, self.inner_radius) <= 0.0:
            raise ValidationError("winding dimensions must be positive")
        if self.sigma_c < 0.0 or self.sigma_i < 0.0:
            raise ValidationError("conductivities must be nonnegative")

    @property
    def conductor_width(self) -> float:
        return self.fill_factor * self.foil_pitch

    @property
    def radial_extent(self) -> float:
        return self.n_turns * self.foil_pitch

    @property
    def outer_radius(self) -> float:
        return self.inner_radius + self.radial_extent

    @property
    def mid_radius(self) -> float:
        return self.inner_radius + 0.5 * self.radial_extent

    @property
    def z_bounds(self) -> tuple:
        return (self.z_center - 0.5 * self.height, self.z_center + 0.5 * self.height)

    def alpha_normalized(self, r):
        """Map radius to the normalized stacking coordinate in [-1, 1]."""
        return (np.asarray(r) - self.mid_radius) / (0.5 * self.radial_extent)


def homogenize_materials(fill_factor, sigma_c, sigma_i, nu_c, nu_i) -> RegionMaterial:
    """Anisotropic mixing rule for the homogenized winding block.

    Across the stack (radial) no current flows; along the foils the
    conductivities mix linearly.  Reluctivity mixes linearly across the stack
    and harmonically along it.
    """
    lam = fill_factor
    if not 0.0 < lam <= 1.0:
        raise ValidationError("fill factor must be in (0, 1]")
    sigma_beta = lam * sigma_c + (1.0 - lam) * sigma_i
    nu_alpha = lam * nu_c + (1.0 - lam) * nu_i
    nu_beta = 1.0 / (lam / nu_c + (1.0 - lam) / nu_i)
    return RegionMaterial(sigma=(0.0, sigma_beta), nu=(nu_alpha, nu_beta))


def skin_depth(frequency: float, mu: float, sigma: float) -> float:
    """Skin depth sqrt(2 / (omega mu sigma))."""
    if frequency <= 0.0 or sigma <= 0.0 or mu <= 0.0:
        raise ValueError("frequency, mu and sigma must be positive")
    omega = TWO_PI * frequency
    return math.sqrt(2.0 / (omega * mu * sigma))


def skin_depth_ok(spec: FoilWindingSpec, frequency: float, mu: float = MU0, margin: float = 5.0):
    """Return (delta, ok): the homogenization needs conductor width << delta.

    The warning threshold ``conductor_width > delta / margin`` defaults to
    ``margin = 5``; adjust to taste.
    """
    delta = skin_depth(frequency, mu, spec.sigma_c)
    return delta, spec.conductor_width <= delta / margin


def device_materials(spec: FoilWindingSpec, yoke_sigma: float = 10.0, yoke_mu_r: float = 1000.0) -> MaterialSpec:
    """Material table for the shipped gapped-core device."""
    nu_air = 1.0 / MU0
    return MaterialSpec(
        {
            int(RegionTag.AIR): RegionMaterial.isotropic(0.0, nu_air),
            int(RegionTag.AIR_GAP): RegionMaterial.isotropic(0.0, nu_air),
            int(RegionTag.YOKE): RegionMaterial.isotropic(yoke_sigma, 1.0 / (MU0 * yoke_mu_r)),
            int(RegionTag.FOIL_WINDING): homogenize_materials(
                spec.fill_factor, spec.sigma_c, spec.sigma_i, spec.nu_c, spec.nu_i
            ),
        }
    )


@dataclass(frozen=True)
class VoltageBasis:
    """1D basis for the voltage profile over the normalized stacking coordinate.

    ``legendre`` uses Legendre polynomials of degree ``0 .. n-1`` (the
    constant is the first function, which makes the solid-conductor limit and
    the turn-count vector analytically checkable).  ``hat`` uses nodal hats on
    a uniform grid over [-1, 1]; a single hat degenerates to the constant.
    """

    n_functions: int
    family: str = "legendre"

    def __post_init__(self):
        if self.n_functions < 1:
            raise ValidationError("need at least one basis function")
        if self.family not in ("legendre", "hat"):
            raise ValidationError(f"unknown basis family {self.family!r}")

    def eval(self, l: int, alpha):
        """Evaluate basis function ``l`` at normalized coordinate(s)."""
        if not 0 <= l < self.n_functions:
            raise IndexError(f"basis index {l} out of range")
        alpha = np.asarray(alpha, dtype=float)
        if self.family == "legendre":
            coeffs = np.zeros(l + 1)
            coeffs[l] = 1.0
            return np.polynomial.legendre.legval(alpha, coeffs)
        if self.n_functions == 1:
            return np.ones_like(alpha)
        nodes = np.linspace(-1.0, 1.0, self.n_functions)
        h = nodes[1] - nodes[0]
        return np.clip(1.0 - np.abs(alpha - nodes[l]) / h, 0.0, None)

    def integrals(self) -> np.ndarray:
        """Exact integrals over [-1, 1] of every basis function."""
        if self.family == "legendre":
            out = np.zeros(self.n_functions)
            out[0] = 2.0
            return out
        if self.n_functions == 1:
            return np.array([2.0])
        h = 2.0 / (self.n_functions - 1)
        out = np.full(self.n_functions, h)
        out[0] = out[-1] = 0.5 * h
        return out


def profile_for(spec: FoilWindingSpec, basis: VoltageBasis, l: int) -> Callable:
    """Voltage basis function ``l`` pulled back to (r, z) over the winding."""

    def profile(r, z):
        return basis.eval(l, spec.alpha_normalized(r))

    return profile


def winding_nodes(mesh: Mesh) -> np.ndarray:
    nodes = np.unique(mesh.triangles[mesh.regions == int(RegionTag.FOIL_WINDING)])
    if nodes.size == 0:
        raise EmptyWindingError("mesh has no winding-tagged elements")
    return nodes


def distribution_coefficients(mesh: Mesh, disc: FieldDiscretization) -> np.ndarray:
    """Coefficient vector of the azimuthal distribution field.

    In the ``A' = r A_phi`` convention the field with unit azimuthal line
    integral is the constant ``1 / (2 pi)`` on every winding node, zero
    elsewhere, so it lies exactly in the FE space restricted to the
    conductive support.
    """
    x = np.zeros(disc.n_dofs)
    dofs = disc.dof_index[winding_nodes(mesh)]
    x[dofs[dofs >= 0]] = 1.0 / TWO_PI
    return x


def distribution_line_integrals(mesh: Mesh, disc: FieldDiscretization, x, points) -> np.ndarray:
    """Closed azimuthal line integrals of the distribution field at sample points.

    For each (r, z) the integral equals ``2 pi r * zeta_phi = 2 pi * value``
    of the P1 representation of ``A'``-style coefficients; inside the winding
    it must equal 1.
    """
    nodal = np.zeros(mesh.n_nodes)
    free = disc.dof_index >= 0
    nodal[free] = np.asarray(x)[disc.dof_index[free]]
    vals = evaluate_p1(mesh, nodal, points)
    return TWO_PI * vals


def evaluate_p1(mesh: Mesh, nodal_values, points) -> np.ndarray:
    """Evaluate a P1 nodal field at arbitrary points (brute-force location)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.full(pts.shape[0], np.nan)
    p = mesh.nodes[mesh.triangles]
    for i, (r, z) in enumerate(pts):
        for e in range(mesh.n_triangles):
            (r1, z1), (r2, z2), (r3, z3) = p[e]
            det = (r2 - r1) * (z3 - z1) - (r3 - r1) * (z2 - z1)
            l2 = ((r - r1) * (z3 - z1) - (z - z1) * (r3 - r1)) / det
            l3 = ((r2 - r1) * (z - z1) - (z2 - z1) * (r - r1)) / det
            l1 = 1.0 - l2 - l3
            if min(l1, l2, l3) >= -1e-12:
                vals = nodal_values[mesh.triangles[e]]
                out[i] = l1 * vals[0] + l2 * vals[1] + l3 * vals[2]
                break
    return out


def conductive_support(mesh: Mesh, materials: MaterialSpec, disc: FieldDiscretization) -> np.ndarray:
    """DoF indices adjacent to at least one conductive element."""
    nodes = set()
    for e in range(mesh.n_triangles):
        if materials.material(mesh.regions[e]).sigma[1] > 0.0:
            nodes.update(int(n) for n in mesh.triangles[e])
    dofs = disc.dof_index[sorted(nodes)]
    return np.asarray(sorted(int(d) for d in dofs if d >= 0), dtype=np.intp)


def assemble_c(n_turns: int, basis: VoltageBasis) -> np.ndarray:
    """Turn-count vector: (N / 2) times the exact basis integrals."""
    return 0.5 * n_turns * basis.integrals()


def assemble_X(
    mesh: Mesh,
    materials: MaterialSpec,
    disc: FieldDiscretization,
    spec: FoilWindingSpec,
    basis: VoltageBasis,
    x: np.ndarray | None = None,
) -> np.ndarray:
    """Coupling block: column ``l`` is ``M^(l) x`` (algebraic route)."""
    if x is None:
        x = distribution_coefficients(mesh, disc)
    cols = []
    for l in range(basis.n_functions):
        m_l = assemble_modified_mass(mesh, materials, disc, profile_for(spec, basis, l))
        cols.append(m_l @ x)
    return np.column_stack(cols)


def assemble_G_original(
    mesh: Mesh,
    materials: MaterialSpec,
    disc: FieldDiscretization,
    spec: FoilWindingSpec,
    basis: VoltageBasis,
    x: np.ndarray | None = None,
) -> np.ndarray:
    """Turn-by-turn conductance from the double-profile mass matrices."""
    if x is None:
        x = distribution_coefficients(mesh, disc)
    n = basis.n_functions
    g = np.zeros((n, n))
    for k in range(n):
        for l in range(k, n):
            m_kl = assemble_double_modified_mass(
                mesh, materials, disc, profile_for(spec, basis, k), profile_for(spec, basis, l)
            )
            g[k, l] = g[l, k] = float(x @ (m_kl @ x))
    return g


def assemble_G_consistent(
    mesh: Mesh,
    materials: MaterialSpec,
    disc: FieldDiscretization,
    spec: FoilWindingSpec,
    basis: VoltageBasis,
    x: np.ndarray | None = None,
    X: np.ndarray | None = None,
    M: sp.csr_matrix | None = None,
    support: np.ndarray | None = None,
):
    """FE-space-consistent conductance via the mass pseudo-inverse.

    Solves ``M e_l = X[:, l]`` on the conductive support for every column and
    returns ``(G_e, E)`` with ``G_e = X^T E`` symmetrized by averaging.
    """
    if x is None:
        x = distribution_coefficients(mesh, disc)
    if X is None:
        X = assemble_X(mesh, materials, disc, spec, basis, x)
    if M is None:
        M = assemble_mass(mesh, materials, disc)
    if support is None:
        support = conductive_support(mesh, materials, disc)
    solver = RestrictedSpdSolver(M, support)
    e_cols = [solver.solve(X[:, l]) for l in range(X.shape[1])]
    E = np.column_stack(e_cols)
    ge = X.T @ E
    ge = 0.5 * (ge + ge.T)
    return ge, E


@dataclass(frozen=True)
class AssembledFoilSystem:
    """All discrete blocks of one foil winding on one mesh."""

    K: sp.csr_matrix
    M: sp.csr_matrix
    X: np.ndarray
    G: np.ndarray
    G_e: np.ndarray
    c: np.ndarray
    x: np.ndarray
    E: np.ndarray | None = None
    support: np.ndarray | None = None

    @property
    def n_dofs(self) -> int:
        return self.K.shape[0]

    @property
    def n_basis(self) -> int:
        return self.c.shape[0]

    def conductance(self, mode: str) -> np.ndarray:
        if mode == "G":
            return self.G
        if mode == "Ge":
            return self.G_e
        raise ValueError(f"unknown conductance mode {mode!r}")


def assemble_foil_system(
    mesh: Mesh,
    materials: MaterialSpec,
    disc: FieldDiscretization,
    spec: FoilWindingSpec,
    basis: VoltageBasis,
) -> AssembledFoilSystem:
    """Assemble stiffness, mass, coupling blocks and both conductances."""
    k = assemble_stiffness(mesh, materials, disc)
    m = assemble_mass(mesh, materials, disc)
    x = distribution_coefficients(mesh, disc)
    big_x = assemble_X(mesh, materials, disc, spec, basis, x)
    c = assemble_c(spec.n_turns, basis)
    g = assemble_G_original(mesh, materials, disc, spec, basis, x)
    support = conductive_support(mesh, materials, disc)
    ge, e = assemble_G_consistent(
        mesh, materials, disc, spec, basis, x=x, X=big_x, M=m, support=support
    )
    return AssembledFoilSystem(K=k, M=m, X=big_x, G=g, G_e=ge, c=c, x=x, E=e, support=support)


@dataclass(frozen=True)
class SolidSystem:
    """Classic solid-conductor coupling (single voltage unknown)."""

    K: sp.csr_matrix
    M: sp.csr_matrix
    x_sol: np.ndarray
    G_sol: float

    @property
    def n_dofs(self) -> int:
        return self.K.shape[0]


def build_solid_system(
    mesh: Mesh,
    materials: MaterialSpec,
    disc: FieldDiscretization,
    conductor_tag: RegionTag = RegionTag.FOIL_WINDING,
) -> SolidSystem:
    """Solid-conductor reduction: ``x_sol = M x`` and scalar ``G_sol = x^T M x``."""
    if conductor_tag != RegionTag.FOIL_WINDING:
        raise ValidationError("only the winding region is supported as solid conductor")
    k = assemble_stiffness(mesh, materials, disc)
    m = assemble_mass(mesh, materials, disc)
    x = distribution_coefficients(mesh, disc)
    x_sol = m @ x
    return SolidSystem(K=k, M=m, x_sol=x_sol, G_sol=float(x @ x_sol))


def solid_from_foil(sys: AssembledFoilSystem) -> SolidSystem:
    """Collapse a foil system to its solid-conductor equivalent."""
    x_sol = sys.M @ sys.x
    return SolidSystem(K=sys.K, M=sys.M, x_sol=x_sol, G_sol=float(sys.x @ x_sol))


def per_turn_voltages(basis: VoltageBasis, u: np.ndarray, n_turns: int) -> np.ndarray:
    """Diagnostic: voltage profile sampled at the per-turn midpoints."""
    alphas = -1.0 + (2.0 * np.arange(1, n_turns + 1) - 1.0) / n_turns
    samples = np.zeros(n_turns)
    for l in range(basis.n_functions):
        samples += u[l] * basis.eval(l, alphas)
    return samples


def save_system(path, sys: AssembledFoilSystem) -> None:
    """Serialize a foil system to an npz archive."""
    payload = {
        "K_data": sys.K.data, "K_indices": sys.K.indices, "K_indptr": sys.K.indptr,
        "K_shape": np.asarray(sys.K.shape),
        "M_data": sys.M.data, "M_indices": sys.M.indices, "M_indptr": sys.M.indptr,
        "M_shape": np.asarray(sys.M.shape),
        "X": sys.X, "G": sys.G, "G_e": sys.G_e, "c": sys.c, "x": sys.x,
    }
    if sys.E is not None:
        payload["E"] = sys.E
    if sys.support is not None:
        payload["support"] = sys.support
    np.savez(path, **payload)


def load_system(path) -> AssembledFoilSystem:
    """Load a foil system saved by :func:`save_system`."""
    with np.load(path) as data:
        k = canonical_csr(
            sp.csr_matrix((data["K_data"], data["K_indices"], data["K_indptr"]),
                          shape=tuple(data["K_shape"]))
        )
        m = canonical_csr(
            sp.csr_matrix((data["M_data"], data["M_indices"], data["M_indptr"]),
                          shape=tuple(data["M_shape"]))
        )
        return AssembledFoilSystem(
            K=k, M=m, X=data["X"], G=data["G"], G_e=data["G_e"], c=data["c"], x=data["x"],
            E=data["E"] if "E" in data else None,
            support=data["support"] if "support" in data else None,
        )
