"""Structured finite-volume meshes for a finite cylindrical pore.

The domain is the cylinder of radius R and height 2h (z in [-h, h]), meshed
with a uniform (r, phi, z) grid of cell-centered control volumes.  The lateral
wall carries its own 2D patch mesh, periodic in phi and closed (zero-flux) at
the two end circles.  A trace map pairs every outermost-ring wall face with
exactly one surface patch.

Cell indexing is r-major: index = (i*n_phi + j)*n_z + k.  Patch indexing is
phi-major: index = j*n_z + k.  Faces at r=0 have zero area, so the axis needs
no special treatment in flux form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

# boundary-face classification
GAMMA_IN = 0   # z = -h, inflow
SIGMA = 1      # r = R, catalytic wall
GAMMA_OUT = 2  # z = +h, outflow

# face direction kinds
KIND_R = 0
KIND_PHI = 1
KIND_Z = 2


@dataclass(frozen=True)
class CylinderSpec:
    """Geometry and resolution of the pore."""

    R: float
    h: float
    n_r: int
    n_phi: int
    n_z: int
    axisymmetric: bool = False

    def validate(self) -> None:
        if not (self.R > 0.0) or not (self.h > 0.0):
            raise ConfigError(f"cylinder radius and half-height must be positive, got R={self.R}, h={self.h}")
        if self.n_r < 1 or self.n_phi < 1 or self.n_z < 1:
            raise ConfigError(f"cell counts must be >= 1, got n_r={self.n_r}, n_phi={self.n_phi}, n_z={self.n_z}")
        if self.axisymmetric and self.n_phi != 1:
            raise ConfigError(f"axisymmetric requires n_phi=1, got n_phi={self.n_phi}")

    @property
    def dr(self) -> float:
        return self.R / self.n_r

    @property
    def dphi(self) -> float:
        return 2.0 * math.pi / self.n_phi

    @property
    def dz(self) -> float:
        return 2.0 * self.h / self.n_z


class BulkMesh:
    """Cell-centered control volumes of the cylinder interior.

    Interior faces are stored owner->neighbour in the positive coordinate
    direction; boundary faces carry an outward normal by construction.
    All arrays are frozen after construction.
    """

    def __init__(self, spec: CylinderSpec):
        spec.validate()
        self.spec = spec
        n_r, n_phi, n_z = spec.n_r, spec.n_phi, spec.n_z
        dr, dphi, dz = spec.dr, spec.dphi, spec.dz
        self.n_cells = n_r * n_phi * n_z

        r_edges = np.linspace(0.0, spec.R, n_r + 1)
        i_idx, j_idx, k_idx = np.unravel_index(np.arange(self.n_cells), (n_r, n_phi, n_z))
        self.cell_i, self.cell_j, self.cell_k = i_idx, j_idx, k_idx
        self.r_centers = 0.5 * (r_edges[i_idx] + r_edges[i_idx + 1])
        self.phi_centers = (j_idx + 0.5) * dphi
        self.z_centers = -spec.h + (k_idx + 0.5) * dz
        # exact ring-sector volume: 0.5*(r_out^2 - r_in^2)*dphi*dz
        ring = 0.5 * (r_edges[i_idx + 1] ** 2 - r_edges[i_idx] ** 2)
        self.volumes = ring * dphi * dz
        self.axial_face_area = ring * dphi  # per cell, both z-faces equal

        # --- interior faces ---
        owner, neigh, area, dist, kind = [], [], [], [], []

        def cid(i, j, k):
            return (i * n_phi + j) * n_z + k

        for i in range(n_r):
            for j in range(n_phi):
                for k in range(n_z):
                    c = cid(i, j, k)
                    if i + 1 < n_r:  # +r face at radius r_edges[i+1]
                        owner.append(c)
                        neigh.append(cid(i + 1, j, k))
                        area.append(r_edges[i + 1] * dphi * dz)
                        dist.append(dr)
                        kind.append(KIND_R)
                    if n_phi > 1:  # +phi face (periodic; n_phi=2 yields both shared faces)
                        owner.append(c)
                        neigh.append(cid(i, (j + 1) % n_phi, k))
                        area.append(dr * dz)
                        dist.append(self.r_centers[c] * dphi)
                        kind.append(KIND_PHI)
                    if k + 1 < n_z:  # +z face
                        owner.append(c)
                        neigh.append(cid(i, j, k + 1))
                        area.append(self.axial_face_area[c])
                        dist.append(dz)
                        kind.append(KIND_Z)

        self.face_owner = np.asarray(owner, dtype=np.int64)
        self.face_neigh = np.asarray(neigh, dtype=np.int64)
        self.face_area = np.asarray(area, dtype=np.float64)
        self.face_dist = np.asarray(dist, dtype=np.float64)
        self.face_kind = np.asarray(kind, dtype=np.int8)
        self.n_interior_faces = self.face_owner.size

        # --- boundary faces (enumerated after interior faces) ---
        b_cell, b_area, b_kind, b_dist = [], [], [], []
        for i in range(n_r):
            for j in range(n_phi):
                for k in range(n_z):
                    c = cid(i, j, k)
                    if k == 0:
                        b_cell.append(c)
                        b_area.append(self.axial_face_area[c])
                        b_kind.append(GAMMA_IN)
                        b_dist.append(0.5 * dz)
                    if k == n_z - 1:
                        b_cell.append(c)
                        b_area.append(self.axial_face_area[c])
                        b_kind.append(GAMMA_OUT)
                        b_dist.append(0.5 * dz)
                    if i == n_r - 1:
                        b_cell.append(c)
                        b_area.append(spec.R * dphi * dz)
                        b_kind.append(SIGMA)
                        b_dist.append(spec.R - self.r_centers[c])
        self.bnd_cell = np.asarray(b_cell, dtype=np.int64)
        self.bnd_area = np.asarray(b_area, dtype=np.float64)
        self.bnd_kind = np.asarray(b_kind, dtype=np.int8)
        self.bnd_dist = np.asarray(b_dist, dtype=np.float64)
        self.n_boundary_faces = self.bnd_cell.size

        self.inflow_faces = np.nonzero(self.bnd_kind == GAMMA_IN)[0]
        self.outflow_faces = np.nonzero(self.bnd_kind == GAMMA_OUT)[0]
        self.lateral_faces = np.nonzero(self.bnd_kind == SIGMA)[0]

        for arr in (self.r_centers, self.phi_centers, self.z_centers, self.volumes,
                    self.face_owner, self.face_neigh, self.face_area, self.face_dist,
                    self.face_kind, self.bnd_cell, self.bnd_area, self.bnd_kind,
                    self.bnd_dist):
            arr.setflags(write=False)

    @property
    def total_volume(self) -> float:
        return math.fsum(self.volumes)

    def cell_index(self, i: int, j: int, k: int) -> int:
        return (i * self.spec.n_phi + j) * self.spec.n_z + k

    def check_invariants(self) -> None:
        exact = math.pi * self.spec.R ** 2 * 2.0 * self.spec.h
        if abs(self.total_volume - exact) > 1e-12 * exact:
            raise AssertionError(f"bulk volume sum {self.total_volume} != {exact}")
        counts = np.bincount(self.bnd_kind, minlength=3)
        n_axial = self.spec.n_r * self.spec.n_phi
        if counts[GAMMA_IN] != n_axial or counts[GAMMA_OUT] != n_axial:
            raise AssertionError("inflow/outflow face counts do not tile the end disks")
        if counts[SIGMA] != self.spec.n_phi * self.spec.n_z:
            raise AssertionError("lateral face count does not tile the wall")


class SurfaceMesh:
    """Patch mesh of the lateral wall, periodic in phi, Neumann-closed in z."""

    def __init__(self, spec: CylinderSpec):
        spec.validate()
        self.spec = spec
        n_phi, n_z = spec.n_phi, spec.n_z
        dphi, dz = spec.dphi, spec.dz
        self.n_patches = n_phi * n_z

        j_idx, k_idx = np.unravel_index(np.arange(self.n_patches), (n_phi, n_z))
        self.patch_j, self.patch_k = j_idx, k_idx
        self.phi_centers = (j_idx + 0.5) * dphi
        self.z_centers = -spec.h + (k_idx + 0.5) * dz
        self.areas = np.full(self.n_patches, spec.R * dphi * dz)

        owner, neigh, width, dist, kind = [], [], [], [], []

        def pid(j, k):
            return j * n_z + k

        for j in range(n_phi):
            for k in range(n_z):
                p = pid(j, k)
                if n_phi > 1:  # +phi edge, periodic
                    owner.append(p)
                    neigh.append(pid((j + 1) % n_phi, k))
                    width.append(dz)
                    dist.append(spec.R * dphi)
                    kind.append(KIND_PHI)
                if k + 1 < n_z:  # +z edge
                    owner.append(p)
                    neigh.append(pid(j, k + 1))
                    width.append(spec.R * dphi)
                    dist.append(dz)
                    kind.append(KIND_Z)

        self.edge_owner = np.asarray(owner, dtype=np.int64)
        self.edge_neigh = np.asarray(neigh, dtype=np.int64)
        self.edge_width = np.asarray(width, dtype=np.float64)
        self.edge_dist = np.asarray(dist, dtype=np.float64)
        self.edge_kind = np.asarray(kind, dtype=np.int8)
        # the two end circles forming the patch-mesh boundary (zero-flux)
        self.boundary_low = np.nonzero(k_idx == 0)[0]
        self.boundary_high = np.nonzero(k_idx == n_z - 1)[0]

        for arr in (self.phi_centers, self.z_centers, self.areas, self.edge_owner,
                    self.edge_neigh, self.edge_width, self.edge_dist, self.edge_kind):
            arr.setflags(write=False)

    @property
    def total_area(self) -> float:
        return math.fsum(self.areas)

    def patch_index(self, j: int, k: int) -> int:
        return j * self.spec.n_z + k

    def check_invariants(self) -> None:
        exact = 2.0 * math.pi * self.spec.R * 2.0 * self.spec.h
        if abs(self.total_area - exact) > 1e-12 * exact:
            raise AssertionError(f"surface area sum {self.total_area} != {exact}")


class TraceMap:
    """Bijection between lateral wall faces of the bulk mesh and surface patches.

    wall_cell[p] is the bulk cell whose outer face backs patch p;
    wall_face[p] is that face's index into the bulk boundary-face arrays.
    """

    def __init__(self, bulk: BulkMesh, surf: SurfaceMesh):
        spec = bulk.spec
        n_phi, n_z = spec.n_phi, spec.n_z
        wall_cell = np.empty(surf.n_patches, dtype=np.int64)
        wall_face = np.empty(surf.n_patches, dtype=np.int64)
        lateral = bulk.lateral_faces
        cells = bulk.bnd_cell[lateral]
        for f, c in zip(lateral, cells):
            j, k = bulk.cell_j[c], bulk.cell_k[c]
            p = surf.patch_index(j, k)
            wall_cell[p] = c
            wall_face[p] = f
        self.wall_cell = wall_cell
        self.wall_face = wall_face
        self.face_area = bulk.bnd_area[wall_face]
        # second ring inward, for order-2 trace extrapolation (n_r >= 2 only)
        if spec.n_r >= 2:
            inner = np.array([bulk.cell_index(spec.n_r - 2, bulk.cell_j[c], bulk.cell_k[c])
                              for c in wall_cell], dtype=np.int64)
            self.inner_cell = inner
        else:
            self.inner_cell = None
        for arr in (self.wall_cell, self.wall_face, self.face_area):
            arr.setflags(write=False)

    def check_invariants(self, surf: SurfaceMesh) -> None:
        if self.wall_cell.size != surf.n_patches or np.unique(self.wall_cell).size != surf.n_patches:
            raise AssertionError("trace map is not a bijection")
        if not np.allclose(self.face_area, surf.areas, rtol=1e-12, atol=0.0):
            raise AssertionError("paired face/patch areas differ")


def build_mesh(spec: CylinderSpec) -> tuple[BulkMesh, SurfaceMesh, TraceMap]:
    """Build the bulk mesh, the lateral surface mesh and their trace map."""
    spec.validate()
    bulk = BulkMesh(spec)
    surf = SurfaceMesh(spec)
    trace = TraceMap(bulk, surf)
    bulk.check_invariants()
    surf.check_invariants()
    trace.check_invariants(surf)
    return bulk, surf, trace


def integrate(mesh: BulkMesh | SurfaceMesh, field: np.ndarray) -> float:
    """Discrete integral of a cell/patch field (sum of value*measure).

    Uses exact compensated summation in a fixed order, so results are
    bit-reproducible.
    """
    field = np.asarray(field, dtype=np.float64)
    if isinstance(mesh, BulkMesh):
        measure = mesh.volumes
    elif isinstance(mesh, SurfaceMesh):
        measure = mesh.areas
    else:
        raise TypeError(f"cannot integrate over {type(mesh).__name__}")
    if field.shape != measure.shape:
        raise ValueError(f"field has shape {field.shape}, mesh has {measure.shape[0]} entries")
    return math.fsum(field * measure)
