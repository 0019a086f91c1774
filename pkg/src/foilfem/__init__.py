"""Axisymmetric magnetoquasistatic finite elements for homogenized foil windings.

Subpackages cover sparse/dense linear algebra kernels (:mod:`foilfem.linalg`),
structured mesh generation (:mod:`foilfem.mesh`), FE matrix assembly
(:mod:`foilfem.assembly`), the foil-winding coupling blocks
(:mod:`foilfem.winding`), lumped-circuit coupling through modified nodal
analysis (:mod:`foilfem.circuit`), element classification diagnostics
(:mod:`foilfem.dae_analysis`), implicit Euler transient integration
(:mod:`foilfem.timestepper`) and the experiment front end
(:mod:`foilfem.experiments`, :mod:`foilfem.cli`).
"""

__version__ = "0.1.0"
