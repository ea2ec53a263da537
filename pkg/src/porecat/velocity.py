"""Solenoidal carrier velocity fields and their discrete admissibility checks.

A field is admissible when every cell has zero discrete divergence and the
face-normal velocities respect the boundary signs: into the domain only on
the inlet disk, tangential on the wall, out of the domain only on the outlet
disk.  Fields are steady.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ConfigError
from .geometry import BulkMesh, CylinderSpec, GAMMA_IN, GAMMA_OUT, SIGMA, KIND_Z


class VelocityField:
    def face_velocities(self, mesh: BulkMesh) -> tuple[np.ndarray, np.ndarray]:
        """Normal velocities on (interior faces owner->neighbour, boundary faces outward)."""
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroVelocity(VelocityField):
    def face_velocities(self, mesh: BulkMesh):
        return (np.zeros(mesh.n_interior_faces), np.zeros(mesh.n_boundary_faces))


@dataclass(frozen=True)
class Poiseuille(VelocityField):
    """Axial laminar profile u_z(r) = u_max (1 - r^2/R^2); no-slip at the wall."""

    u_max: float
    R: float
    h: float

    def __post_init__(self):
        if self.u_max < 0.0:
            raise ConfigError(f"u_max must be >= 0, got {self.u_max}")
        if not (self.R > 0.0) or not (self.h > 0.0):
            raise ConfigError("Poiseuille needs positive R and h")

    def axial(self, r):
        return self.u_max * (1.0 - (np.asarray(r) / self.R) ** 2)

    def face_velocities(self, mesh: BulkMesh):
        spec = mesh.spec
        dr = spec.dr
        # exact ring mean of u_z over [r_i, r_i+1]: u_max (1 - (r_i^2+r_o^2)/(2R^2)),
        # so the discrete in/outflow rates match the analytic throughput exactly
        r_in = mesh.cell_i * dr
        r_out = (mesh.cell_i + 1) * dr
        u_mean = self.u_max * (1.0 - (r_in ** 2 + r_out ** 2) / (2.0 * self.R ** 2))
        interior = np.zeros(mesh.n_interior_faces)
        z_faces = mesh.face_kind == KIND_Z
        interior[z_faces] = u_mean[mesh.face_owner[z_faces]]
        boundary = np.zeros(mesh.n_boundary_faces)
        cells = mesh.bnd_cell
        boundary[mesh.bnd_kind == GAMMA_IN] = -u_mean[cells[mesh.bnd_kind == GAMMA_IN]]
        boundary[mesh.bnd_kind == GAMMA_OUT] = u_mean[cells[mesh.bnd_kind == GAMMA_OUT]]
        return interior, boundary


@dataclass(frozen=True)
class Tabulated(VelocityField):
    """Face-normal velocities supplied directly (interior owner->neighbour,
    boundary outward), aligned with the mesh face enumeration."""

    interior: np.ndarray
    boundary: np.ndarray

    def face_velocities(self, mesh: BulkMesh):
        if self.interior.shape != (mesh.n_interior_faces,) \
                or self.boundary.shape != (mesh.n_boundary_faces,):
            raise ConfigError(
                f"tabulated field has {self.interior.shape[0]}+{self.boundary.shape[0]} faces, "
                f"mesh has {mesh.n_interior_faces}+{mesh.n_boundary_faces}")
        return np.asarray(self.interior, dtype=np.float64), np.asarray(self.boundary, dtype=np.float64)


def eval_velocity(field: VelocityField, point: tuple[float, float, float]) -> tuple[float, float, float]:
    """Velocity in cylindrical components (u_r, u_phi, u_z) at an interior point."""
    r, _phi, z = point
    if isinstance(field, ZeroVelocity):
        return (0.0, 0.0, 0.0)
    if isinstance(field, Poiseuille):
        if r < 0.0 or r > field.R * (1.0 + 1e-12) or abs(z) > field.h * (1.0 + 1e-12):
            raise ValueError(f"point (r={r}, z={z}) outside the pore")
        return (0.0, 0.0, float(field.axial(r)))
    raise ConfigError("tabulated fields carry face data only and have no pointwise form")


@dataclass
class AvelReport:
    passed: bool
    max_divergence: float
    bad_faces: list = dc_field(default_factory=list)   # (boundary-face index, value, why)
    inflow_rate: float = 0.0
    outflow_rate: float = 0.0

    def to_json(self) -> dict:
        return {"subject": "velocity", "passed": self.passed,
                "max_divergence": self.max_divergence,
                "inflow_rate": self.inflow_rate, "outflow_rate": self.outflow_rate,
                "bad_faces": [{"face": int(f), "value": v, "why": w}
                              for f, v, w in self.bad_faces]}


def validate_avel(field: VelocityField, mesh: BulkMesh) -> AvelReport:
    """Check discrete incompressibility and the boundary sign conditions.

    Divergence is |sum of outward face fluxes| / V per cell, compared against
    1e-12 * U / h_min with U the largest face speed and h_min the smallest
    cell extent (so the tolerance scales like a velocity gradient).
    """
    interior, boundary = field.face_velocities(mesh)
    div = np.zeros(mesh.n_cells)
    flux = interior * mesh.face_area
    np.add.at(div, mesh.face_owner, flux)
    np.add.at(div, mesh.face_neigh, -flux)
    np.add.at(div, mesh.bnd_cell, boundary * mesh.bnd_area)
    div /= mesh.volumes

    u_scale = max(np.abs(interior).max(initial=0.0), np.abs(boundary).max(initial=0.0))
    spec = mesh.spec
    h_min = min(spec.dr, spec.dz, spec.R * spec.dphi)
    tol_div = 1e-12 * max(u_scale, 1e-300) / h_min
    tol_sign = 1e-12 * max(u_scale, 0.0) + 1e-300
    max_div = float(np.abs(div).max())

    bad = []
    for f in np.nonzero((mesh.bnd_kind == GAMMA_IN) & (boundary > tol_sign))[0]:
        bad.append((f, float(boundary[f]), "outward velocity on the inlet"))
    for f in np.nonzero((mesh.bnd_kind == SIGMA) & (np.abs(boundary) > tol_sign))[0]:
        bad.append((f, float(boundary[f]), "normal velocity on the wall"))
    for f in np.nonzero((mesh.bnd_kind == GAMMA_OUT) & (boundary < -tol_sign))[0]:
        bad.append((f, float(boundary[f]), "inward velocity on the outlet"))

    sel_in = mesh.bnd_kind == GAMMA_IN
    sel_out = mesh.bnd_kind == GAMMA_OUT
    inflow = -math.fsum(boundary[sel_in] * mesh.bnd_area[sel_in])
    outflow = math.fsum(boundary[sel_out] * mesh.bnd_area[sel_out])

    return AvelReport(passed=(max_div <= tol_div and not bad),
                      max_divergence=max_div, bad_faces=bad,
                      inflow_rate=inflow, outflow_rate=outflow)


def poiseuille_from_spec(spec: CylinderSpec, u_max: float) -> Poiseuille:
    return Poiseuille(u_max=u_max, R=spec.R, h=spec.h)
