"""Element classification diagnostics for the coupled field model.

The foil system can be reduced by eliminating the voltage coefficients:
with the consistent conductance the result has the classic stranded-conductor
structure (Schur mass ``M - X Ge^-1 X^T``, source vector ``X Ge^-1 c`` and
series resistance ``c^T Ge^-1 c``).  Kernel projectors of the Schur mass
expose the terminal inductance; the quadratic form
``(c^T (G - Ge)^-1 c)^-1`` measures how strongly the original conductance
variant behaves like a singularly perturbed resistance.

All dense diagnostics are desk-scale only (coarse meshes); the time stepper
never forms projectors.  Operations are pure functions of immutable inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .errors import (
    IndefiniteDifferenceError,
    NonpositiveInductanceError,
    SingularConductanceError,
    SizeGuardError,
)
from .linalg import canonical_csr, nullspace_basis
from .winding import AssembledFoilSystem

DENSE_SIZE_GUARD = 500
KERNEL_TOL = 1e-10


@dataclass(frozen=True)
class StrandedForm:
    """Schur reduction of the foil system to stranded-conductor structure."""

    M_bar: sp.csr_matrix
    x_bar: np.ndarray
    R: float


def schur_stranded_form(sys: AssembledFoilSystem, cond_limit: float = 1e12) -> StrandedForm:
    """Eliminate the voltage coefficients using the consistent conductance.

    Raises :class:`SingularConductanceError` when ``Ge`` is numerically
    singular (condition number above ``cond_limit``), which violates the
    full-column-rank coupling assumption.
    """
    ge = sys.G_e
    if not np.all(np.isfinite(ge)) or np.linalg.cond(ge) > cond_limit:
        raise SingularConductanceError("consistent conductance is numerically singular")
    rows = np.flatnonzero(np.abs(sys.X).sum(axis=1))
    x_s = sys.X[rows]
    corr_block = x_s @ np.linalg.solve(ge, x_s.T)
    corr = sp.coo_matrix(
        (corr_block.ravel(), (np.repeat(rows, rows.size), np.tile(rows, rows.size))),
        shape=sys.M.shape,
    )
    m_bar = canonical_csr(sys.M - corr.tocsr())
    x_bar = sys.X @ np.linalg.solve(ge, sys.c)
    r_series = float(sys.c @ np.linalg.solve(ge, sys.c))
    return StrandedForm(M_bar=m_bar, x_bar=x_bar, R=r_series)


@dataclass(frozen=True)
class ProjectorPair:
    """Orthogonal projector onto a kernel and its complement."""

    Q: np.ndarray
    P: np.ndarray


def build_projectors(a, tol: float = KERNEL_TOL, size_guard: int = DENSE_SIZE_GUARD) -> ProjectorPair:
    """Projector onto the numerical kernel of a symmetric matrix (dense, guarded)."""
    if sp.issparse(a):
        a = a.toarray()
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if n > size_guard:
        raise SizeGuardError(f"dense projector construction limited to {size_guard} DoFs, got {n}")
    basis = nullspace_basis(a, tol)
    q = basis @ basis.T
    return ProjectorPair(Q=q, P=np.eye(n) - q)


def inductance_value(
    sf: StrandedForm,
    stiffness,
    tol: float = KERNEL_TOL,
    size_guard: int = DENSE_SIZE_GUARD,
) -> float:
    """Terminal inductance of the stranded-form element.

    ``L = (Q x_bar)^T (Q K Q + P P)^-1 (Q x_bar)`` with ``Q`` the orthogonal
    projector onto the kernel of the Schur mass.  Must be positive; a
    nonpositive value signals a violated assumption and raises.
    """
    pair = build_projectors(sf.M_bar, tol=tol, size_guard=size_guard)
    k = stiffness.toarray() if sp.issparse(stiffness) else np.asarray(stiffness, dtype=float)
    core = pair.Q @ k @ pair.Q + pair.P @ pair.P
    qx = pair.Q @ sf.x_bar
    value = float(qx @ np.linalg.solve(core, qx))
    if not np.isfinite(value) or value <= 0.0:
        raise NonpositiveInductanceError(f"extracted inductance {value!r} is not positive")
    return value


@dataclass(frozen=True)
class PerturbationMeasure:
    """Result of the resistance-like strength measurement.

    ``g_R`` is ``(c^T (G - Ge)^+ c)^-1`` when the terminal direction carries
    weight in the range of the difference; ``None`` with ``degenerate=True``
    when the difference vanishes or the terminal direction lies in its kernel
    (the element degenerates to inductance-like behavior).
    """

    g_R: float | None
    degenerate: bool
    frob_diff: float
    min_eig: float


def singular_perturbation_measure(
    g: np.ndarray,
    g_e: np.ndarray,
    c: np.ndarray,
    tol: float = KERNEL_TOL,
    indefinite_rtol: float = 1e-8,
) -> PerturbationMeasure:
    """Measure the singularly-perturbed-resistance strength of a conductance pair.

    Raises :class:`IndefiniteDifferenceError` when ``G - Ge`` has an
    eigenvalue below ``-indefinite_rtol * ||G||``; the difference is a Gram
    matrix of projection residuals, so indefiniteness signals an assembly bug.
    """
    diff = 0.5 * ((g - g_e) + (g - g_e).T)
    g_norm = float(np.linalg.norm(g))
    w, v = np.linalg.eigh(diff)
    min_eig = float(w.min()) if w.size else 0.0
    frob = float(np.linalg.norm(diff))
    if min_eig < -indefinite_rtol * g_norm:
        raise IndefiniteDifferenceError(
            f"min eigenvalue {min_eig:.3e} below -{indefinite_rtol:.1e} * ||G||"
        )
    if frob <= tol * g_norm:
        return PerturbationMeasure(g_R=None, degenerate=True, frob_diff=frob, min_eig=min_eig)
    keep = w > tol * w.max()
    coords = v[:, keep].T @ c
    c_norm = float(np.linalg.norm(c))
    if np.linalg.norm(coords) <= 1e-8 * c_norm:
        # terminal direction entirely inside the kernel of the difference
        return PerturbationMeasure(g_R=None, degenerate=True, frob_diff=frob, min_eig=min_eig)
    g_r = float(1.0 / np.sum(coords**2 / w[keep]))
    return PerturbationMeasure(g_R=g_r, degenerate=False, frob_diff=frob, min_eig=min_eig)


class ElementKind(Enum):
    INDUCTANCE_LIKE = "inductance-like"
    RESISTANCE_LIKE = "resistance-like"
    SOLID_DEGENERATE = "solid-degenerate"


@dataclass(frozen=True)
class Classification:
    """Generalized circuit-element classification of an assembled system."""

    kind: ElementKind
    L: float | None
    g_R: float | None
    frob_diff: float
    min_eig_diff: float
    degenerate_difference: bool = False

    def as_report(self) -> str:
        lines = [f"kind = {self.kind.value}"]
        if self.L is not None:
            lines.append(f"L = {self.L:.6e} H")
        if self.g_R is not None:
            lines.append(f"g_R = {self.g_R:.6e}")
        lines.append(f"frob(G - Ge) = {self.frob_diff:.6e}")
        lines.append(f"min eig(G - Ge) = {self.min_eig_diff:.3e}")
        lines.append(f"degenerate difference = {self.degenerate_difference}")
        return "\n".join(lines)


def classify_element(
    sys: AssembledFoilSystem,
    mode: str,
    tol: float = KERNEL_TOL,
    size_guard: int = DENSE_SIZE_GUARD,
) -> Classification:
    """Classify the element behavior for conductance variant ``mode``.

    The consistent variant is always inductance-like.  The original variant is
    resistance-like as long as the terminal direction sees a nonvanishing
    conductance difference; otherwise it degenerates to inductance-like (the
    single-function solid limit is the canonical case).  The terminal
    inductance is attached whenever the system is small enough for the dense
    projector machinery.
    """
    measure = singular_perturbation_measure(sys.G, sys.G_e, sys.c, tol=tol)

    def maybe_l():
        if sys.n_dofs > size_guard:
            return None
        return inductance_value(schur_stranded_form(sys), sys.K, tol=tol, size_guard=size_guard)

    if mode == "Ge":
        return Classification(
            kind=ElementKind.INDUCTANCE_LIKE,
            L=maybe_l(),
            g_R=None,
            frob_diff=measure.frob_diff,
            min_eig_diff=measure.min_eig,
            degenerate_difference=measure.degenerate,
        )
    if mode == "G":
        if measure.degenerate:
            return Classification(
                kind=ElementKind.INDUCTANCE_LIKE,
                L=maybe_l(),
                g_R=None,
                frob_diff=measure.frob_diff,
                min_eig_diff=measure.min_eig,
                degenerate_difference=True,
            )
        return Classification(
            kind=ElementKind.RESISTANCE_LIKE,
            L=None,
            g_R=measure.g_R,
            frob_diff=measure.frob_diff,
            min_eig_diff=measure.min_eig,
        )
    if mode == "SOLID":
        return Classification(
            kind=ElementKind.SOLID_DEGENERATE,
            L=maybe_l(),
            g_R=None,
            frob_diff=measure.frob_diff,
            min_eig_diff=measure.min_eig,
            degenerate_difference=measure.degenerate,
        )
    raise ValueError(f"unknown mode {mode!r}")
