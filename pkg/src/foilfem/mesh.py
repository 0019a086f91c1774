"""Structured triangular meshes of the axisymmetric (r, z) computational domain.

The simulation geometry is a gapped-core inductor cross-section: a closed
ferromagnetic yoke shell with a central limb on the symmetry axis, an air gap
cutting the limb at mid-height, and a foil winding sitting in the air window
between limb and outer yoke wall.  All regions are axis-aligned rectangles, so
the mesher grids the bounding box on a tensor grid whose tick sets include
every region breakline, then splits each cell into two triangles.  This keeps
the mesh conforming and fully deterministic, puts element edges along the
radial (winding stacking) direction, and reaches the desired node-count
classes by tuning the target edge length ``h``.

Mesh text format (ASCII, LF)::

    foilmesh v1
    nodes <n>
    <r> <z>              # n lines, decimal floats
    triangles <m>
    <i> <j> <k> <tag>    # m lines, CCW node indices + region tag
    boundary <b>
    <node index>         # b lines

Meshes are immutable after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import DegenerateGeometryError, ParseError, ValidationError


class RegionTag(IntEnum):
    AIR = 0
    YOKE = 1
    AIR_GAP = 2
    FOIL_WINDING = 3


@dataclass(frozen=True)
class Mesh:
    """Conforming triangle mesh with per-triangle region tags.

    ``nodes`` is ``(n, 2)`` float (r, z), ``triangles`` is ``(m, 3)`` int with
    counterclockwise orientation, ``regions`` is ``(m,)`` int (``RegionTag``
    values) and ``boundary`` is an ``(n,)`` bool flag for outer-boundary nodes.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    regions: np.ndarray
    boundary: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nodes", _frozen(np.asarray(self.nodes, dtype=float)))
        object.__setattr__(self, "triangles", _frozen(np.asarray(self.triangles, dtype=np.int32)))
        object.__setattr__(self, "regions", _frozen(np.asarray(self.regions, dtype=np.int32)))
        object.__setattr__(self, "boundary", _frozen(np.asarray(self.boundary, dtype=bool)))

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def triangle_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        return 0.5 * (
            (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
            - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
        )

    def region_area(self, tag) -> float:
        return float(self.triangle_areas()[self.regions == int(tag)].sum())

    def edge_counts(self) -> dict:
        """Map sorted edge -> number of adjacent triangles."""
        counts: dict = {}
        for tri in self.triangles:
            for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                key = (int(a), int(b)) if a < b else (int(b), int(a))
                counts[key] = counts.get(key, 0) + 1
        return counts


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def validate_mesh(mesh: Mesh) -> None:
    """Raise :class:`ValidationError` when a mesh invariant is broken."""
    if mesh.nodes.ndim != 2 or mesh.nodes.shape[1] != 2:
        raise ValidationError("nodes must be (n, 2)")
    if not np.all(np.isfinite(mesh.nodes)):
        raise ValidationError("non-finite node coordinates")
    if np.any(mesh.nodes[:, 0] < 0.0):
        raise ValidationError("negative radius")
    if mesh.triangles.size:
        if mesh.triangles.min() < 0 or mesh.triangles.max() >= mesh.n_nodes:
            raise ValidationError("triangle node index out of range")
    if np.any(mesh.triangle_areas() <= 0.0):
        raise ValidationError("nonpositive triangle area (orientation must be CCW)")
    if mesh.regions.shape[0] != mesh.n_triangles:
        raise ValidationError("region tag count mismatch")
    if mesh.boundary.shape[0] != mesh.n_nodes:
        raise ValidationError("boundary flag count mismatch")
    counts = mesh.edge_counts()
    bad = [e for e, c in counts.items() if c > 2]
    if bad:
        raise ValidationError(f"non-conforming edge shared by >2 triangles: {bad[0]}")
    boundary_nodes = set()
    for (a, b), c in counts.items():
        if c == 1:
            boundary_nodes.add(a)
            boundary_nodes.add(b)
    flagged = set(np.flatnonzero(mesh.boundary).tolist())
    if flagged != boundary_nodes:
        raise ValidationError("boundary flags do not match topological boundary")


@dataclass(frozen=True)
class GeometrySpec:
    """Axis-aligned cross-section geometry of the gapped-core test device.

    Defaults describe the shipped demonstration device; lengths in meters.
    The winding rectangle is vertically centered in the window, its radial
    thickness must equal turn count times foil pitch of the companion winding
    specification.
    """

    yoke_outer_radius: float = 40.0e-3
    yoke_height: float = 76.2e-3
    air_gap_length: float = 4.2e-3
    limb_radius: float = 9.9e-3
    window_outer_radius: float = 29.55e-3
    window_bottom: float = 9.9e-3
    window_top: float = 66.3e-3
    winding_inner_radius: float = 12.6e-3
    winding_thickness: float = 14.0e-3
    winding_height: float = 50.0e-3

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if getattr(self, name) <= 0.0:
                raise ValidationError(f"{name} must be strictly positive")
        if not self.limb_radius < self.window_outer_radius < self.yoke_outer_radius:
            raise ValidationError("window must sit between limb and outer yoke wall")
        if not 0.0 < self.window_bottom < self.window_top < self.yoke_height:
            raise ValidationError("window must sit inside the yoke")
        w0, w1 = self.winding_z_bounds
        if not (
            self.limb_radius < self.winding_inner_radius
            and self.winding_outer_radius < self.window_outer_radius
            and self.window_bottom < w0
            and w1 < self.window_top
        ):
            raise ValidationError("winding rectangle must lie strictly inside the window")
        g0, g1 = self.gap_z_bounds
        if not (self.window_bottom < g0 and g1 < self.window_top):
            raise ValidationError("air gap must cut the limb inside the window height")

    @property
    def winding_outer_radius(self) -> float:
        return self.winding_inner_radius + self.winding_thickness

    @property
    def winding_z_bounds(self) -> tuple:
        zc = 0.5 * self.yoke_height
        return (zc - 0.5 * self.winding_height, zc + 0.5 * self.winding_height)

    @property
    def gap_z_bounds(self) -> tuple:
        zc = 0.5 * self.yoke_height
        return (zc - 0.5 * self.air_gap_length, zc + 0.5 * self.air_gap_length)

    def region_of(self, r: float, z: float) -> RegionTag:
        """Region tag of an interior point (not on a breakline)."""
        w0, w1 = self.winding_z_bounds
        g0, g1 = self.gap_z_bounds
        if self.winding_inner_radius < r < self.winding_outer_radius and w0 < z < w1:
            return RegionTag.FOIL_WINDING
        if r < self.limb_radius and g0 < z < g1:
            return RegionTag.AIR_GAP
        if self.limb_radius < r < self.window_outer_radius and self.window_bottom < z < self.window_top:
            return RegionTag.AIR
        return RegionTag.YOKE


def _ticks(breaks, h: float) -> np.ndarray:
    """Subdivide each interval between consecutive breaklines at pitch <= h."""
    breaks = sorted(set(float(b) for b in breaks))
    out = [breaks[0]]
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        n = max(1, math.ceil((hi - lo) / h - 1e-12))
        for k in range(1, n):
            out.append(lo + (hi - lo) * k / n)
        out.append(hi)
    return np.asarray(out)


def tensor_mesh(r_ticks, z_ticks, region_of) -> Mesh:
    """Triangulate the tensor grid, tagging each triangle by its centroid."""
    r_ticks = np.asarray(r_ticks, dtype=float)
    z_ticks = np.asarray(z_ticks, dtype=float)
    nr, nz = r_ticks.size, z_ticks.size
    if nr < 2 or nz < 2:
        raise DegenerateGeometryError("need at least a 2x2 tick grid")
    rr, zz = np.meshgrid(r_ticks, z_ticks)  # index [iz, ir]
    nodes = np.column_stack([rr.ravel(), zz.ravel()])

    def nid(ir, iz):
        return iz * nr + ir

    tris = []
    tags = []
    for iz in range(nz - 1):
        for ir in range(nr - 1):
            a = nid(ir, iz)
            b = nid(ir + 1, iz)
            c = nid(ir + 1, iz + 1)
            d = nid(ir, iz + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
            for tri in ((a, b, c), (a, c, d)):
                pr = nodes[list(tri), 0].mean()
                pz = nodes[list(tri), 1].mean()
                tags.append(int(region_of(pr, pz)))
    triangles = np.asarray(tris, dtype=np.int32)
    regions = np.asarray(tags, dtype=np.int32)
    boundary = np.zeros(nodes.shape[0], dtype=bool)
    for iz in range(nz):
        boundary[nid(0, iz)] = True
        boundary[nid(nr - 1, iz)] = True
    for ir in range(nr):
        boundary[nid(ir, 0)] = True
        boundary[nid(ir, nz - 1)] = True
    mesh = Mesh(nodes, triangles, regions, boundary)
    validate_mesh(mesh)
    return mesh


def rectangle_mesh(r0, r1, z0, z1, h, tag=RegionTag.AIR) -> Mesh:
    """Mesh a single axis-aligned rectangle (test domains, toy fixtures)."""
    if r1 <= r0 or z1 <= z0:
        raise DegenerateGeometryError("rectangle has nonpositive extent")
    return tensor_mesh(_ticks([r0, r1], h), _ticks([z0, z1], h), lambda r, z: tag)


def generate_parametric_mesh(geom: GeometrySpec, h: float) -> Mesh:
    """Mesh the full device cross-section at target edge length ``h``.

    Deterministic for fixed inputs; node count is nonincreasing in ``h``.
    Every region tick set contains the region breaklines, so the winding is
    meshed with at least one element layer per rectangle strip and at least
    two element columns across its radial thickness are guaranteed by adding
    the winding mid-radius as an extra breakline.
    """
    if h <= 0.0:
        raise ValueError("h must be positive")
    w0, w1 = geom.winding_z_bounds
    g0, g1 = geom.gap_z_bounds
    r_mid = geom.winding_inner_radius + 0.5 * geom.winding_thickness
    r_breaks = [
        0.0,
        geom.limb_radius,
        geom.winding_inner_radius,
        r_mid,
        geom.winding_outer_radius,
        geom.window_outer_radius,
        geom.yoke_outer_radius,
    ]
    z_breaks = [0.0, geom.window_bottom, w0, g0, g1, w1, geom.window_top, geom.yoke_height]
    mesh = tensor_mesh(_ticks(r_breaks, h), _ticks(z_breaks, h), geom.region_of)
    present = set(int(t) for t in np.unique(mesh.regions))
    expected = {int(t) for t in RegionTag}
    if present != expected:
        missing = sorted(expected - present)
        raise DegenerateGeometryError(f"region(s) {missing} produced no elements")
    return mesh


def refine_uniform(mesh: Mesh) -> Mesh:
    """Split every triangle into four via edge midpoints; tags are inherited."""
    nodes = [tuple(p) for p in mesh.nodes]
    edge_mid: dict = {}
    counts = mesh.edge_counts()

    def midpoint(a: int, b: int) -> int:
        key = (a, b) if a < b else (b, a)
        idx = edge_mid.get(key)
        if idx is None:
            pa, pb = mesh.nodes[a], mesh.nodes[b]
            nodes.append((0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])))
            idx = len(nodes) - 1
            edge_mid[key] = idx
        return idx

    tris = []
    tags = []
    for t, tag in zip(mesh.triangles, mesh.regions):
        a, b, c = (int(t[0]), int(t[1]), int(t[2]))
        mab, mbc, mca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        tris.extend([(a, mab, mca), (mab, b, mbc), (mca, mbc, c), (mab, mbc, mca)])
        tags.extend([tag] * 4)

    boundary = np.zeros(len(nodes), dtype=bool)
    boundary[: mesh.n_nodes] = mesh.boundary
    for (a, b), idx in edge_mid.items():
        if counts[(a, b)] == 1:
            boundary[idx] = True
    refined = Mesh(np.asarray(nodes), np.asarray(tris, dtype=np.int32),
                   np.asarray(tags, dtype=np.int32), boundary)
    validate_mesh(refined)
    return refined


def write_mesh(mesh: Mesh) -> str:
    """Serialize to the plain-text mesh format (exact float round-trip)."""
    lines = ["foilmesh v1", f"nodes {mesh.n_nodes}"]
    for r, z in mesh.nodes:
        lines.append(f"{float(r)!r} {float(z)!r}")
    lines.append(f"triangles {mesh.n_triangles}")
    for t, tag in zip(mesh.triangles, mesh.regions):
        lines.append(f"{t[0]} {t[1]} {t[2]} {tag}")
    idx = np.flatnonzero(mesh.boundary)
    lines.append(f"boundary {idx.size}")
    for i in idx:
        lines.append(str(int(i)))
    return "\n".join(lines) + "\n"


def read_mesh(text: str) -> Mesh:
    """Parse the plain-text mesh format; inverse of :func:`write_mesh`."""
    lines = text.splitlines()
    pos = 0

    def take(expected=None):
        nonlocal pos
        if pos >= len(lines):
            raise ParseError("unexpected end of input", line=pos + 1)
        raw = lines[pos]
        pos += 1
        if expected is not None and raw.strip() != expected:
            raise ParseError(f"expected {expected!r}", line=pos)
        return raw.strip(), pos

    def take_count(keyword):
        raw, ln = take()
        parts = raw.split()
        if len(parts) != 2 or parts[0] != keyword:
            raise ParseError(f"expected '{keyword} <count>'", line=ln)
        try:
            return int(parts[1]), ln
        except ValueError as exc:
            raise ParseError(f"bad count {parts[1]!r}", line=ln) from exc

    take("foilmesh v1")
    n, _ = take_count("nodes")
    nodes = np.empty((n, 2))
    for i in range(n):
        raw, ln = take()
        parts = raw.split()
        if len(parts) != 2:
            raise ParseError("node line needs 'r z'", line=ln)
        try:
            nodes[i] = (float(parts[0]), float(parts[1]))
        except ValueError as exc:
            raise ParseError(f"bad coordinate in {raw!r}", line=ln) from exc
    m, _ = take_count("triangles")
    tris = np.empty((m, 3), dtype=np.int32)
    tags = np.empty(m, dtype=np.int32)
    for i in range(m):
        raw, ln = take()
        parts = raw.split()
        if len(parts) != 4:
            raise ParseError("triangle line needs 'i j k tag'", line=ln)
        try:
            vals = [int(p) for p in parts]
        except ValueError as exc:
            raise ParseError(f"bad index in {raw!r}", line=ln) from exc
        tris[i] = vals[:3]
        tags[i] = vals[3]
    b, _ = take_count("boundary")
    boundary = np.zeros(n, dtype=bool)
    for _ in range(b):
        raw, ln = take()
        try:
            idx = int(raw)
        except ValueError as exc:
            raise ParseError(f"bad boundary index {raw!r}", line=ln) from exc
        if not 0 <= idx < n:
            raise ParseError(f"boundary index {idx} out of range", line=ln)
        boundary[idx] = True
    while pos < len(lines):
        raw, ln = take()
        if raw:
            raise ParseError(f"trailing content {raw!r}", line=ln)
    mesh = Mesh(nodes, tris, tags, boundary)
    validate_mesh(mesh)
    return mesh
