"""Independent reference solutions.

Everything here is derived without touching the finite-volume code paths:
separation-of-variables decay factors (continuum and discrete), the
closed-form sorption equilibrium, a lumped well-mixed ODE model integrated
with classical RK4 at a fine step, and manufactured solutions of the
inhomogeneous linear bulk/surface problem with analytically computed forcing
and boundary data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .geometry import BulkMesh, CylinderSpec, SurfaceMesh
from .model import ReactionNetwork, SorptionLaw


# --- eigenmode decay factors ---

def surface_mode_decay(m: int, k: int, d_surf: float, R: float, h: float, t: float) -> float:
    """Amplitude factor of the surface mode cos(m phi) cos(k pi (z+h)/(2h))."""
    lam = d_surf * ((m / R) ** 2 + (k * math.pi / (2.0 * h)) ** 2)
    return math.exp(-lam * t)


def bulk_mode_decay(k: int, d: float, h: float, t: float) -> float:
    """Amplitude factor of the closed-pore bulk mode cos(k pi (z+h)/(2h))."""
    lam = d * (k * math.pi / (2.0 * h)) ** 2
    return math.exp(-lam * t)


def discrete_bulk_mode_rate(spec: CylinderSpec, d: float, k: int) -> float:
    """Exact decay rate of the z-cosine mode on the cell-centered Neumann grid."""
    dz = spec.dz
    return 2.0 * d / dz ** 2 * (1.0 - math.cos(k * math.pi * dz / (2.0 * spec.h)))


def discrete_surface_mode_rate(spec: CylinderSpec, d_surf: float, m: int = 0, k: int = 0) -> float:
    """Exact decay rate of cos(m phi) cos(k pi (z+h)/(2h)) on the patch grid."""
    lam_phi = 0.0
    if m:
        dphi = spec.dphi
        lam_phi = 2.0 / (spec.R * dphi) ** 2 * (1.0 - math.cos(m * dphi))
    lam_z = 0.0
    if k:
        dz = spec.dz
        lam_z = 2.0 / dz ** 2 * (1.0 - math.cos(k * math.pi * dz / (2.0 * spec.h)))
    return d_surf * (lam_phi + lam_z)


# --- closed-form sorption equilibrium ---

def henry_equilibrium(volume: float, area: float, k_ad: float, k_de: float,
                      total_mass: float) -> tuple[float, float]:
    """Steady state of a closed pore with linear sorption: detailed balance
    k_ad c* = k_de cs* under mass conservation |Omega| c* + |Sigma| cs* = M0."""
    c_star = total_mass / (volume + area * k_ad / k_de)
    return c_star, (k_ad / k_de) * c_star


def henry_pair_solution(t, volume: float, area: float, k_ad: float, k_de: float,
                        c0: float, cs0: float):
    """Exact solution of the well-mixed linear sorption pair.

    The total mass is invariant and the detailed-balance defect
    k_ad c - k_de cs decays at rate k_ad |Sigma|/|Omega| + k_de.
    """
    t = np.asarray(t, dtype=np.float64)
    total = volume * c0 + area * cs0
    defect0 = k_ad * c0 - k_de * cs0
    lam = k_ad * area / volume + k_de
    defect = defect0 * np.exp(-lam * t)
    denom = k_de * volume + k_ad * area
    c = (k_de * total + area * defect) / denom
    cs = (k_ad * total - volume * defect) / denom
    return c, cs


# --- lumped well-mixed reference ---

@dataclass
class WellMixedResult:
    times: np.ndarray   # (n+1,)
    c: np.ndarray       # (n+1, n_species)
    cs: np.ndarray      # (n+1, n_species)

    def at(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        i = int(np.argmin(np.abs(self.times - t)))
        return self.c[i], self.cs[i]


def wellmixed_ode(volume: float, area: float, inlet_area: float,
                  laws: list[SorptionLaw | None],
                  network: ReactionNetwork | None,
                  g_in: np.ndarray, c0: np.ndarray, cs0: np.ndarray,
                  t_end: float, fine_dt: float | None = None) -> WellMixedResult:
    """Classical RK4 on the spatially lumped balance

        |Omega| cbar_i' = -|Sigma| r_sorp_i(cbar_i, csbar_i) - |Gamma_in| g_in_i
              csbar_i'  =  r_sorp_i(cbar_i, csbar_i) + r_ch_i(csbar)

    valid for a closed pore or a pore with zero carrier velocity and constant
    inflow data.  fine_dt defaults to 1e-4 * t_end and is clamped below the
    explicit stability limit estimated from the sorption/reaction Jacobians.
    """
    n = len(c0)
    c0 = np.asarray(c0, dtype=np.float64)
    cs0 = np.asarray(cs0, dtype=np.float64)
    g_in = np.asarray(g_in, dtype=np.float64)

    def rhs(c, cs):
        sorp = np.zeros(n)
        for i, law in enumerate(laws):
            if law is not None:
                sorp[i] = law.rate(c[i], cs[i])
        rch = network.rates(cs) if network is not None else np.zeros(n)
        dc = (-area * sorp - inlet_area * g_in) / volume
        dcs = sorp + rch
        return dc, dcs

    # explicit stability estimate from the local Jacobians at the start state
    lam = 0.0
    for i, law in enumerate(laws):
        if law is not None:
            jc, jcs = law.jacobian(c0[i], cs0[i])
            lam = max(lam, abs(float(jc)) * area / volume + abs(float(jcs)))
    if network is not None:
        jac = network.jacobian(np.maximum(cs0, 0.0) + 1.0)
        lam = max(lam, float(np.abs(jac).sum(axis=1).max()))
    dt = fine_dt if fine_dt is not None else 1e-4 * t_end
    if lam > 0.0:
        dt = min(dt, 1.0 / lam)
    n_steps = max(1, int(math.ceil(t_end / dt - 1e-12)))
    dt = t_end / n_steps

    times = np.empty(n_steps + 1)
    cs_out = np.empty((n_steps + 1, n))
    c_out = np.empty((n_steps + 1, n))
    c, cs = c0.copy(), cs0.copy()
    times[0], c_out[0], cs_out[0] = 0.0, c, cs
    for step in range(n_steps):
        k1c, k1s = rhs(c, cs)
        k2c, k2s = rhs(c + 0.5 * dt * k1c, cs + 0.5 * dt * k1s)
        k3c, k3s = rhs(c + 0.5 * dt * k2c, cs + 0.5 * dt * k2s)
        k4c, k4s = rhs(c + dt * k3c, cs + dt * k3s)
        c = c + dt / 6.0 * (k1c + 2.0 * k2c + 2.0 * k3c + k4c)
        cs = cs + dt / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
        times[step + 1] = (step + 1) * dt
        c_out[step + 1] = c
        cs_out[step + 1] = cs
    return WellMixedResult(times=times, c=c_out, cs=cs_out)


# --- manufactured solutions of the inhomogeneous linear problem ---

class ManufacturedSolution:
    """Smooth exact fields with the forcing and boundary data they induce.

    Bulk:    c(t,r,z)  = e^{-t} (a0 + a_cos cos(k pi (z+h)/(2h)) + a_lin z/h
                                  + a_rad (r/R)^2)
    Surface: cs(t,phi,z) = e^{-t} (b0 + b_phi cos(m phi)
                                   + b_z cos(k pi (z+h)/(2h)))

    Forcing satisfies f = dc/dt + u.grad c - d Lap c with the optional axial
    profile u_z(r) = u_max (1 - r^2/R^2); boundary data are the total-flux
    expressions of the linear problem (Robin on the inlet, prescribed
    diffusive flux on wall and outlet).
    """

    PRESETS = ("zero", "bulk", "surface", "full")

    def __init__(self, preset: str, spec: CylinderSpec, d: float, d_surf: float,
                 k_mode: int = 1, m_mode: int = 1,
                 a0: float = 2.0, a_cos: float = 0.5, a_lin: float = 0.3, a_rad: float = 0.4,
                 b0: float = 2.0, b_phi: float = 0.5, b_z: float = 0.3,
                 u_max: float = 0.0):
        if preset not in self.PRESETS:
            raise ConfigError(f"unknown manufactured preset {preset!r}")
        self.preset = preset
        self.spec = spec
        self.d, self.d_surf = d, d_surf
        self.k_mode, self.m_mode = k_mode, m_mode
        self.u_max = u_max
        if preset == "zero":
            a0 = a_cos = a_lin = a_rad = b0 = b_phi = b_z = 0.0
        elif preset == "bulk":
            b0 = b_phi = b_z = 0.0
        elif preset == "surface":
            a0 = a_cos = a_lin = a_rad = 0.0
        self.a0, self.a_cos, self.a_lin, self.a_rad = a0, a_cos, a_lin, a_rad
        self.b0, self.b_phi, self.b_z = b0, b_phi, b_z

    # bulk pieces
    def _axial_arg(self, z):
        h = self.spec.h
        return self.k_mode * math.pi * (np.asarray(z) + h) / (2.0 * h)

    def _shape(self, r, z):
        R, h = self.spec.R, self.spec.h
        return (self.a0 + self.a_cos * np.cos(self._axial_arg(z))
                + self.a_lin * np.asarray(z) / h + self.a_rad * (np.asarray(r) / R) ** 2)

    def _dshape_dz(self, z):
        h = self.spec.h
        kk = self.k_mode * math.pi / (2.0 * h)
        return -self.a_cos * kk * np.sin(self._axial_arg(z)) + self.a_lin / h

    def _dshape_dr(self, r):
        R = self.spec.R
        return 2.0 * self.a_rad * np.asarray(r) / R ** 2

    def _lap_shape(self, r, z):
        # (1/r)(r c_r)_r + c_zz ; the parabola contributes 4 a_rad / R^2
        R, h = self.spec.R, self.spec.h
        kk = self.k_mode * math.pi / (2.0 * h)
        return -self.a_cos * kk ** 2 * np.cos(self._axial_arg(z)) + 4.0 * self.a_rad / R ** 2

    def _u_z(self, r):
        return self.u_max * (1.0 - (np.asarray(r) / self.spec.R) ** 2)

    def bulk_exact(self, t: float, mesh: BulkMesh) -> np.ndarray:
        return math.exp(-t) * self._shape(mesh.r_centers, mesh.z_centers)

    def bulk_forcing(self, t: float, mesh: BulkMesh) -> np.ndarray:
        r, z = mesh.r_centers, mesh.z_centers
        val = (-self._shape(r, z) + self._u_z(r) * self._dshape_dz(z)
               - self.d * self._lap_shape(r, z))
        return math.exp(-t) * val

    def inflow_data(self, t: float, mesh: BulkMesh) -> np.ndarray:
        """g_in = (u.nu) c - d dc/dnu on the inlet (nu = -e_z)."""
        faces = mesh.inflow_faces
        cells = mesh.bnd_cell[faces]
        r = mesh.r_centers[cells]
        z = np.full(r.shape, -self.spec.h)
        c = self._shape(r, z)
        return math.exp(-t) * (-self._u_z(r) * c + self.d * self._dshape_dz(z))

    def lateral_data(self, t: float, mesh: BulkMesh, trace) -> np.ndarray:
        """g_sigma = -d dc/dr at r = R, per patch."""
        cells = trace.wall_cell
        return math.exp(-t) * (-self.d * self._dshape_dr(self.spec.R)) \
            * np.ones(cells.shape)

    def outflow_data(self, t: float, mesh: BulkMesh) -> np.ndarray:
        """g_out = -d dc/dz at z = +h, per outlet face."""
        faces = mesh.outflow_faces
        cells = mesh.bnd_cell[faces]
        r = mesh.r_centers[cells]
        z = np.full(r.shape, self.spec.h)
        return math.exp(-t) * (-self.d * self._dshape_dz(z)) * np.ones(r.shape)

    # surface pieces
    def _surf_shape(self, phi, z):
        return (self.b0 + self.b_phi * np.cos(self.m_mode * np.asarray(phi))
                + self.b_z * np.cos(self._axial_arg(z)))

    def surface_exact(self, t: float, surf: SurfaceMesh) -> np.ndarray:
        return math.exp(-t) * self._surf_shape(surf.phi_centers, surf.z_centers)

    def surface_forcing(self, t: float, surf: SurfaceMesh) -> np.ndarray:
        R, h = self.spec.R, self.spec.h
        kk = self.k_mode * math.pi / (2.0 * h)
        lap = (-(self.m_mode / R) ** 2 * self.b_phi * np.cos(self.m_mode * surf.phi_centers)
               - kk ** 2 * self.b_z * np.cos(self._axial_arg(surf.z_centers)))
        return math.exp(-t) * (-self._surf_shape(surf.phi_centers, surf.z_centers)
                               - self.d_surf * lap)
