"""Conservative finite-volume operators.

All operators act in mass form: applying one to a concentration vector gives
the net outflow rate of mass per cell (bulk) or per patch (surface).  The
time integrator divides by the cell measure.  Diffusion matrices are
symmetric two-point-flux forms with zero column sums, so they redistribute
mass without creating or destroying it; that is what makes the ledger close
to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError
from .geometry import BulkMesh, SurfaceMesh, TraceMap, GAMMA_OUT
from .model import SorptionLaw
from .velocity import VelocityField


@dataclass(frozen=True)
class LinearOperator:
    """Sparse mass-flux operator: (matrix @ c) is the outflow rate per cell."""

    matrix: sp.csr_matrix
    measure: np.ndarray  # cell volumes or patch areas

    def apply(self, c: np.ndarray) -> np.ndarray:
        return self.matrix @ c


def _flux_matrix(owner, neigh, trans, n):
    """Symmetric matrix with (S c)_i = sum_f T_f (c_i - c_j) over faces at i."""
    rows = np.concatenate([owner, neigh, owner, neigh])
    cols = np.concatenate([owner, neigh, neigh, owner])
    vals = np.concatenate([trans, trans, -trans, -trans])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def assemble_diffusion_bulk(mesh: BulkMesh, d: float) -> LinearOperator:
    """Two-point-flux Laplacian in cylindrical coordinates, homogeneous
    Neumann on every boundary face (boundary couplings are injected as
    explicit fluxes elsewhere)."""
    if not (d > 0.0):
        raise ConfigError(f"diffusivity must be positive, got {d}")
    trans = d * mesh.face_area / mesh.face_dist
    return LinearOperator(_flux_matrix(mesh.face_owner, mesh.face_neigh, trans, mesh.n_cells),
                          mesh.volumes)


def assemble_surface_laplacian(surf: SurfaceMesh, d_surf: float) -> LinearOperator:
    """Five-point FV Laplace-Beltrami stencil: periodic in phi, zero-flux in z."""
    if not (d_surf > 0.0):
        raise ConfigError(f"surface diffusivity must be positive, got {d_surf}")
    trans = d_surf * surf.edge_width / surf.edge_dist
    return LinearOperator(_flux_matrix(surf.edge_owner, surf.edge_neigh, trans, surf.n_patches),
                          surf.areas)


@dataclass(frozen=True)
class AdvectionOperator:
    """Face-flux advection in mass form, including free outflow through the
    outlet (zero diffusive flux, upwinded advective flux).  Inlet faces carry
    no term here: their total flux is prescribed by the inflow data."""

    matrix: sp.csr_matrix
    outflow_cells: np.ndarray   # cells owning an outlet face
    outflow_rates: np.ndarray   # u_f * A_f >= 0 per outlet face
    max_u_dist: float           # max |u_f| * dist, for the cell-Peclet warning
    scheme: str

    def apply(self, c: np.ndarray) -> np.ndarray:
        return self.matrix @ c

    def outflow_mass_rate(self, c: np.ndarray) -> float:
        import math
        return math.fsum(self.outflow_rates * c[self.outflow_cells])


def assemble_advection_bulk(mesh: BulkMesh, field: VelocityField,
                            scheme: str = "upwind") -> AdvectionOperator:
    if scheme not in ("upwind", "central"):
        raise ConfigError(f"unknown advection scheme {scheme!r}")
    interior, boundary = field.face_velocities(mesh)
    q = interior * mesh.face_area  # signed volumetric rate owner -> neighbour
    n = mesh.n_cells
    o, m = mesh.face_owner, mesh.face_neigh

    rows, cols, vals = [], [], []
    if scheme == "upwind":
        qp = np.maximum(q, 0.0)
        qm = np.minimum(q, 0.0)
        # outflow side of the face loses qp*c_o + qm*c_n; inflow side gains it
        rows += [o, o, m, m]
        cols += [o, m, o, m]
        vals += [qp, qm, -qp, -qm]
    else:
        half = 0.5 * q
        rows += [o, o, m, m]
        cols += [o, m, o, m]
        vals += [half, half, -half, -half]

    # outlet faces: upwinded interior value times the outward rate
    out_faces = np.nonzero(mesh.bnd_kind == GAMMA_OUT)[0]
    out_cells = mesh.bnd_cell[out_faces]
    out_rates = boundary[out_faces] * mesh.bnd_area[out_faces]
    rows.append(out_cells)
    cols.append(out_cells)
    vals.append(out_rates)

    matrix = sp.csr_matrix((np.concatenate(vals),
                            (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    max_u_dist = float(np.max(np.abs(interior) * mesh.face_dist, initial=0.0))
    return AdvectionOperator(matrix=matrix, outflow_cells=out_cells,
                             outflow_rates=out_rates, max_u_dist=max_u_dist,
                             scheme=scheme)


def trace_matrix(mesh: BulkMesh, trace: TraceMap, order: int = 1) -> sp.csr_matrix:
    """Patch x cell matrix mapping a bulk field to its wall trace.

    Order 1 samples the outermost cell; order 2 extrapolates linearly from
    the two outermost rings (exact on fields linear in r)."""
    n_p = trace.wall_cell.size
    if order == 1:
        return sp.csr_matrix((np.ones(n_p), (np.arange(n_p), trace.wall_cell)),
                             shape=(n_p, mesh.n_cells))
    if order == 2:
        if trace.inner_cell is None:
            raise ConfigError("trace order 2 requires at least two radial cells")
        rows = np.concatenate([np.arange(n_p), np.arange(n_p)])
        cols = np.concatenate([trace.wall_cell, trace.inner_cell])
        vals = np.concatenate([np.full(n_p, 1.5), np.full(n_p, -0.5)])
        return sp.csr_matrix((vals, (rows, cols)), shape=(n_p, mesh.n_cells))
    raise ConfigError(f"trace order must be 1 or 2, got {order}")


def trace_bulk_to_surface(state: np.ndarray, mesh: BulkMesh, trace: TraceMap,
                          order: int = 1) -> np.ndarray:
    return trace_matrix(mesh, trace, order) @ state


def sorption_flux(trace_values: np.ndarray, surf_values: np.ndarray,
                  law: SorptionLaw) -> np.ndarray:
    """Sorption rate per patch, evaluated once.  The caller must apply the
    SAME array as outward bulk flux and as surface source, which cancels the
    exchanged mass exactly in the ledger."""
    return np.asarray(law.rate(trace_values, surf_values), dtype=np.float64)


def inflow_mass_rates(g_in: float | np.ndarray, mesh: BulkMesh) -> np.ndarray:
    """Outward mass rate through each inlet face: g_in times the face area.

    This realizes the Robin inflow condition in conservative form; g_in <= 0
    injects mass.  Returns one value per inlet face (mesh.inflow_faces order)."""
    areas = mesh.bnd_area[mesh.inflow_faces]
    return np.asarray(g_in, dtype=np.float64) * areas


def check_m_matrix_pattern(op: LinearOperator, tol: float = 1e-12) -> bool:
    """Structural check: non-positive off-diagonals and zero row sums."""
    m = op.matrix.tocoo()
    off = m.data[(m.row != m.col)]
    if off.size and off.max() > tol:
        return False
    row_sums = np.abs(np.asarray(op.matrix.sum(axis=1)).ravel())
    scale = max(np.abs(m.data).max(initial=0.0), 1.0)
    return bool(row_sums.max(initial=0.0) <= tol * scale)
