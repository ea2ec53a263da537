"""Time integration of the coupled bulk/surface system.

Default path: IMEX with implicit diffusion (bulk and surface separately, per
species) and explicit advection, sorption and reaction.  That removes the
parabolic dt restriction while the explicit part stays monotone under the
stable_dt bound, which is what preserves nonnegativity.  A fully implicit
backward-Euler/Newton path handles stiff sorption.

Implicit solves go through hand-rolled CG/BiCGStab with optional Jacobi
preconditioning: deterministic, warm-started from the previous step, and
with a stopping rule pinned to |r|_2 <= rel_tol |b|_2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, SolverError
from .geometry import BulkMesh, SurfaceMesh, TraceMap
from .model import ReactionNetwork, ScenarioSpec, SorptionLaw, SpeciesSet, \
    initial_bulk_field, initial_surface_field
from .discretization import LinearOperator, AdvectionOperator, \
    assemble_advection_bulk, assemble_diffusion_bulk, assemble_surface_laplacian, \
    trace_matrix, sorption_flux
from .velocity import VelocityField

SCHEME_KINDS = ("imex_euler", "imex_cn", "backward_euler_newton")


@dataclass(frozen=True)
class SchemeConfig:
    kind: str
    dt: float
    t_end: float
    dt_safety: float = 0.9
    snapshot_interval: int = 0
    enforce_stable_dt: bool = True

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ConfigError(f"unknown scheme kind {self.kind!r}")
        if not (self.dt > 0.0) or not (self.t_end > 0.0):
            raise ConfigError(f"dt and t_end must be positive, got {self.dt}, {self.t_end}")
        if not (0.0 < self.dt_safety <= 1.0):
            raise ConfigError(f"dt_safety must lie in (0, 1], got {self.dt_safety}")


@dataclass(frozen=True)
class LinearSolverConfig:
    method: str = "cg"
    rel_tol: float = 1e-10
    max_iter: int = 2000
    preconditioner: str = "jacobi"

    def __post_init__(self):
        if self.method not in ("cg", "bicgstab"):
            raise ConfigError(f"unknown linear solver {self.method!r}")
        if self.preconditioner not in ("none", "jacobi"):
            raise ConfigError(f"unknown preconditioner {self.preconditioner!r}")
        if not (self.rel_tol > 0.0):
            raise ConfigError(f"rel_tol must be positive, got {self.rel_tol}")


# --- Krylov solvers ---

def conjugate_gradient(A: sp.csr_matrix, b: np.ndarray, x0: np.ndarray | None,
                       rel_tol: float, max_iter: int,
                       precond_diag: np.ndarray | None = None) -> np.ndarray:
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - A @ x
    b_norm = math.sqrt(float(r @ r)) if x0 is None else math.sqrt(float(b @ b))
    if b_norm == 0.0:
        return np.zeros_like(b)
    tol = rel_tol * b_norm
    z = r / precond_diag if precond_diag is not None else r
    p = z.copy()
    rz = float(r @ z)
    for _ in range(max_iter):
        if math.sqrt(float(r @ r)) <= tol:
            return x
        Ap = A @ p
        alpha = rz / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        z = r / precond_diag if precond_diag is not None else r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    if math.sqrt(float(r @ r)) <= tol:
        return x
    raise SolverError(f"CG did not converge in {max_iter} iterations "
                      f"(residual {math.sqrt(float(r @ r)):.3e}, target {tol:.3e})")


def bicgstab(A: sp.csr_matrix, b: np.ndarray, x0: np.ndarray | None,
             rel_tol: float, max_iter: int,
             precond_diag: np.ndarray | None = None) -> np.ndarray:
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - A @ x
    b_norm = math.sqrt(float(b @ b))
    if b_norm == 0.0:
        return np.zeros_like(b)
    tol = rel_tol * b_norm
    r0 = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)

    def prec(y):
        return y / precond_diag if precond_diag is not None else y

    for _ in range(max_iter):
        if math.sqrt(float(r @ r)) <= tol:
            return x
        rho_new = float(r0 @ r)
        if rho_new == 0.0:
            raise SolverError("BiCGStab breakdown (rho = 0)")
        beta = (rho_new / rho) * (alpha / omega) if rho != 0.0 else 0.0
        p = r + beta * (p - omega * v)
        ph = prec(p)
        v = A @ ph
        denom = float(r0 @ v)
        if denom == 0.0:
            raise SolverError("BiCGStab breakdown (r0.v = 0)")
        alpha = rho_new / denom
        s = r - alpha * v
        if math.sqrt(float(s @ s)) <= tol:
            x += alpha * ph
            return x
        sh = prec(s)
        t = A @ sh
        tt = float(t @ t)
        if tt == 0.0:
            raise SolverError("BiCGStab breakdown (t = 0)")
        omega = float(t @ s) / tt
        x += alpha * ph + omega * sh
        r = s - omega * t
        rho = rho_new
    raise SolverError(f"BiCGStab did not converge in {max_iter} iterations")


def solve_linear(A: sp.csr_matrix, b: np.ndarray, x0: np.ndarray | None,
                 cfg: LinearSolverConfig, diag: np.ndarray | None = None) -> np.ndarray:
    pre = None
    if cfg.preconditioner == "jacobi":
        pre = np.asarray(A.diagonal()) if diag is None else diag
    if cfg.method == "cg":
        return conjugate_gradient(A, b, x0, cfg.rel_tol, cfg.max_iter, pre)
    return bicgstab(A, b, x0, cfg.rel_tol, cfg.max_iter, pre)


# --- optional data for the inhomogeneous linear problem ---

@dataclass
class LinearData:
    """Time-dependent forcing and boundary data (all callables of t).

    bulk_source(t)  -> (n_species, n_cells)    volumetric rate
    surf_source(t)  -> (n_species, n_patches)  areal rate
    lateral_flux(t) -> (n_species, n_patches)  outward bulk flux density on the
                       wall; when given, it REPLACES the sorption coupling
    outflow_flux(t) -> (n_species, n_outlet_faces) prescribed diffusive flux
    inflow_flux(t)  -> (n_species, n_inlet_faces)  overrides scenario inflow
    """

    bulk_source: object = None
    surf_source: object = None
    lateral_flux: object = None
    outflow_flux: object = None
    inflow_flux: object = None


@dataclass
class StepFluxes:
    """Mass amounts applied during one step, per species (ledger input)."""

    inflow: np.ndarray
    outflow: np.ndarray
    transfer_bulk_side: np.ndarray   # sorbed mass, summed over wall cells
    transfer_surf_side: np.ndarray   # the same array, summed over patches
    reaction: np.ndarray


class _Explicit:
    __slots__ = ("bulk_rate", "surf_rate", "inflow_rate", "outflow_rate",
                 "transfer_bulk_rate", "transfer_surf_rate", "reaction_rate",
                 "cs_used")

    def __init__(self, n_species, n_cells, n_patches):
        self.bulk_rate = np.zeros((n_species, n_cells))
        self.surf_rate = np.zeros((n_species, n_patches))
        self.inflow_rate = np.zeros(n_species)
        self.outflow_rate = np.zeros(n_species)
        self.transfer_bulk_rate = np.zeros(n_species)
        self.transfer_surf_rate = np.zeros(n_species)
        self.reaction_rate = np.zeros(n_species)
        self.cs_used = None


class Simulation:
    """Assembled operators plus the advance loop for one configuration."""

    def __init__(self, bulk: BulkMesh, surf: SurfaceMesh, trace: TraceMap,
                 species: SpeciesSet, laws: list[SorptionLaw | None],
                 network: ReactionNetwork | None, field: VelocityField,
                 scenario: ScenarioSpec, scheme: SchemeConfig,
                 solver: LinearSolverConfig | None = None,
                 advection_scheme: str = "upwind", trace_order: int = 1,
                 linear_data: LinearData | None = None):
        if len(laws) != species.n or scenario.n_species != species.n:
            raise ConfigError("species, law and scenario lists must align")
        self.bulk, self.surf, self.trace = bulk, surf, trace
        self.species, self.laws, self.network = species, list(laws), network
        self.field, self.scenario, self.scheme = field, scenario, scheme
        self.solver = solver or LinearSolverConfig()
        self.linear_data = linear_data
        self.trace_order = trace_order

        self.diff_bulk = [assemble_diffusion_bulk(bulk, d) for d in species.d_bulk]
        self.diff_surf = [assemble_surface_laplacian(surf, ds) for ds in species.d_surf]
        self.advection = assemble_advection_bulk(bulk, field, advection_scheme)
        self.trace_mat = trace_matrix(bulk, trace, trace_order)
        self.wall_cells = trace.wall_cell
        self.patch_areas = surf.areas
        self.volumes = bulk.volumes

        self.inflow_cells = bulk.bnd_cell[bulk.inflow_faces]
        self.inflow_areas = bulk.bnd_area[bulk.inflow_faces]
        self.outflow_cells = bulk.bnd_cell[bulk.outflow_faces]
        self.outflow_areas = bulk.bnd_area[bulk.outflow_faces]

        self.warnings: list[str] = []
        if advection_scheme == "central":
            pe = max((self.advection.max_u_dist / d for d in species.d_bulk), default=0.0)
            if pe > 2.0:
                self.warnings.append(
                    f"central advection with cell Peclet {pe:.3g} > 2 is not monotone")

        self.c0 = np.vstack([initial_bulk_field(ic, bulk) for ic in scenario.initial_bulk])
        self.cs0 = np.vstack([initial_surface_field(ic, surf) for ic in scenario.initial_surf])
        self._implicit_cache: dict = {}
        self._prev_explicit: _Explicit | None = None

    # --- explicit terms ---

    def explicit_terms(self, c: np.ndarray, cs: np.ndarray, t: float) -> _Explicit:
        n = self.species.n
        ex = _Explicit(n, self.bulk.n_cells, self.surf.n_patches)
        ld = self.linear_data
        ex.cs_used = cs.copy()

        for i in range(n):
            ex.bulk_rate[i] = -self.advection.apply(c[i])
            ex.outflow_rate[i] = self.advection.outflow_mass_rate(c[i])

        # inflow (prescribed total flux through the inlet faces)
        if ld is not None and ld.inflow_flux is not None:
            gin = np.asarray(ld.inflow_flux(t), dtype=np.float64)
        else:
            gin = np.repeat(np.asarray(self.scenario.g_in, dtype=np.float64)[:, None],
                            self.inflow_cells.size, axis=1)
        for i in range(n):
            out_mass = gin[i] * self.inflow_areas
            ex.bulk_rate[i][self.inflow_cells] -= out_mass
            ex.inflow_rate[i] = -math.fsum(out_mass)

        # wall coupling: sorption, or prescribed lateral flux in linear mode
        if ld is not None and ld.lateral_flux is not None:
            gs = np.asarray(ld.lateral_flux(t), dtype=np.float64)
            for i in range(n):
                loss = gs[i] * self.patch_areas
                ex.bulk_rate[i][self.wall_cells] -= loss
                ex.transfer_bulk_rate[i] = math.fsum(loss)
                ex.transfer_surf_rate[i] = math.fsum(loss)
        else:
            for i, law in enumerate(self.laws):
                if law is None:
                    continue
                tr = self.trace_mat @ c[i]
                sorp = sorption_flux(tr, cs[i], law)
                loss = sorp * self.patch_areas
                ex.bulk_rate[i][self.wall_cells] -= loss
                ex.surf_rate[i] += sorp
                # both ledger sides from the same array, in their native orders
                scattered = np.zeros(self.bulk.n_cells)
                scattered[self.wall_cells] = loss
                ex.transfer_bulk_rate[i] = math.fsum(scattered[self.wall_cells])
                ex.transfer_surf_rate[i] = math.fsum(loss)

        # prescribed diffusive outflow (linear mode only; zero in the model)
        if ld is not None and ld.outflow_flux is not None:
            gout = np.asarray(ld.outflow_flux(t), dtype=np.float64)
            for i in range(n):
                out_mass = gout[i] * self.outflow_areas
                ex.bulk_rate[i][self.outflow_cells] -= out_mass
                ex.outflow_rate[i] += math.fsum(out_mass)

        if self.network is not None:
            rch = self.network.rates(cs)
            ex.surf_rate += rch
            for i in range(n):
                ex.reaction_rate[i] = math.fsum(rch[i] * self.patch_areas)

        if ld is not None and ld.bulk_source is not None:
            ex.bulk_rate += np.asarray(ld.bulk_source(t), dtype=np.float64) * self.volumes
        if ld is not None and ld.surf_source is not None:
            ex.surf_rate += np.asarray(ld.surf_source(t), dtype=np.float64)
        return ex

    # --- implicit helpers ---

    def _implicit_matrices(self, dt: float, theta: float):
        key = (round(dt, 15), theta)
        cached = self._implicit_cache.get(key)
        if cached is not None:
            return cached
        mats = []
        for i in range(self.species.n):
            Ab = sp.diags(self.volumes) + (theta * dt) * self.diff_bulk[i].matrix
            As = sp.diags(self.patch_areas) + (theta * dt) * self.diff_surf[i].matrix
            mats.append((Ab.tocsr(), np.asarray(Ab.diagonal()),
                         As.tocsr(), np.asarray(As.diagonal())))
        self._implicit_cache[key] = mats
        return mats

    # --- single steps ---

    def step_imex_euler(self, c, cs, t, dt):
        ex = self.explicit_terms(c, cs, t)
        mats = self._implicit_matrices(dt, 1.0)
        c_new = np.empty_like(c)
        cs_new = np.empty_like(cs)
        for i in range(self.species.n):
            Ab, db, As, ds = mats[i]
            b = self.volumes * c[i] + dt * ex.bulk_rate[i]
            c_new[i] = solve_linear(Ab, b, c[i], self.solver, db)
            bs = self.patch_areas * (cs[i] + dt * ex.surf_rate[i])
            cs_new[i] = solve_linear(As, bs, cs[i], self.solver, ds)
        fluxes = StepFluxes(
            inflow=ex.inflow_rate * dt, outflow=ex.outflow_rate * dt,
            transfer_bulk_side=ex.transfer_bulk_rate * dt,
            transfer_surf_side=ex.transfer_surf_rate * dt,
            reaction=ex.reaction_rate * dt)
        return c_new, cs_new, fluxes, ex

    def step_imex_cn(self, c, cs, t, dt):
        ex = self.explicit_terms(c, cs, t)
        prev = self._prev_explicit if self._prev_explicit is not None else ex
        mats = self._implicit_matrices(dt, 0.5)
        c_new = np.empty_like(c)
        cs_new = np.empty_like(cs)
        for i in range(self.species.n):
            Ab, db, As, ds = mats[i]
            expl = 1.5 * ex.bulk_rate[i] - 0.5 * prev.bulk_rate[i]
            b = self.volumes * c[i] + dt * expl - 0.5 * dt * (self.diff_bulk[i].matrix @ c[i])
            c_new[i] = solve_linear(Ab, b, c[i], self.solver, db)
            expl_s = 1.5 * ex.surf_rate[i] - 0.5 * prev.surf_rate[i]
            bs = self.patch_areas * (cs[i] + dt * expl_s) \
                - 0.5 * dt * (self.diff_surf[i].matrix @ cs[i])
            cs_new[i] = solve_linear(As, bs, cs[i], self.solver, ds)

        def blend(a, b_):
            return 1.5 * a - 0.5 * b_

        fluxes = StepFluxes(
            inflow=blend(ex.inflow_rate, prev.inflow_rate) * dt,
            outflow=blend(ex.outflow_rate, prev.outflow_rate) * dt,
            transfer_bulk_side=blend(ex.transfer_bulk_rate, prev.transfer_bulk_rate) * dt,
            transfer_surf_side=blend(ex.transfer_surf_rate, prev.transfer_surf_rate) * dt,
            reaction=blend(ex.reaction_rate, prev.reaction_rate) * dt)
        return c_new, cs_new, fluxes, ex

    def newton_step(self, c, cs, t, dt, depth: int = 0):
        """Fully implicit backward-Euler step solved by Newton iteration with
        analytic sorption/reaction Jacobians; halves dt (up to 5 times) when
        10 iterations do not converge."""
        n = self.species.n
        nc, npch = self.bulk.n_cells, self.surf.n_patches
        t_new = t + dt
        ld = self.linear_data

        # constant-in-state pieces of the rate
        if ld is not None and ld.inflow_flux is not None:
            gin = np.asarray(ld.inflow_flux(t_new), dtype=np.float64)
        else:
            gin = np.repeat(np.asarray(self.scenario.g_in, dtype=np.float64)[:, None],
                            self.inflow_cells.size, axis=1)
        f_bulk = np.asarray(ld.bulk_source(t_new), dtype=np.float64) \
            if ld is not None and ld.bulk_source is not None else None
        f_surf = np.asarray(ld.surf_source(t_new), dtype=np.float64) \
            if ld is not None and ld.surf_source is not None else None

        def residual(x):
            cx = x[:n * nc].reshape(n, nc)
            sx = x[n * nc:].reshape(n, npch)
            G = np.empty_like(x)
            rch = self.network.rates(sx) if self.network is not None else None
            for i in range(n):
                rate = -(self.diff_bulk[i].matrix @ cx[i]) - self.advection.apply(cx[i])
                rate[self.inflow_cells] -= gin[i] * self.inflow_areas
                srate = -(self.diff_surf[i].matrix @ sx[i]) / self.patch_areas
                if self.laws[i] is not None:
                    tr = self.trace_mat @ cx[i]
                    sorp = self.laws[i].rate(tr, sx[i])
                    rate[self.wall_cells] -= sorp * self.patch_areas
                    srate += sorp
                if rch is not None:
                    srate += rch[i]
                if f_bulk is not None:
                    rate += f_bulk[i] * self.volumes
                if f_surf is not None:
                    srate += f_surf[i]
                G[i * nc:(i + 1) * nc] = (cx[i] - c[i]) - dt * rate / self.volumes
                off = n * nc + i * npch
                G[off:off + npch] = (sx[i] - cs[i]) - dt * srate
            return G

        def jacobian(x):
            cx = x[:n * nc].reshape(n, nc)
            sx = x[n * nc:].reshape(n, npch)
            blocks = [[None] * (2 * n) for _ in range(2 * n)]
            inv_v = 1.0 / self.volumes
            jac_r = self.network.jacobian(sx) if self.network is not None else None
            for i in range(n):
                bb = sp.diags(inv_v) @ (self.diff_bulk[i].matrix + self.advection.matrix)
                ss = sp.diags(1.0 / self.patch_areas) @ self.diff_surf[i].matrix
                bs = None
                sb = None
                if self.laws[i] is not None:
                    tr = self.trace_mat @ cx[i]
                    drdc, drdcs = self.laws[i].jacobian(tr, sx[i])
                    scatter = sp.csr_matrix(
                        (self.patch_areas, (self.wall_cells, np.arange(npch))),
                        shape=(nc, npch))
                    bb = bb + sp.diags(inv_v) @ scatter @ sp.diags(drdc) @ self.trace_mat
                    bs = sp.diags(inv_v) @ scatter @ sp.diags(drdcs)
                    sb = -sp.diags(drdc) @ self.trace_mat
                    ss = ss - sp.diags(drdcs)
                blocks[i][i] = sp.identity(nc) + dt * bb
                blocks[n + i][n + i] = sp.identity(npch) + dt * ss
                if bs is not None:
                    blocks[i][n + i] = dt * bs
                if sb is not None:
                    blocks[n + i][i] = dt * sb
                if jac_r is not None:
                    for j in range(n):
                        extra = -dt * sp.diags(jac_r[i, j])
                        if blocks[n + i][n + j] is None:
                            blocks[n + i][n + j] = extra
                        else:
                            blocks[n + i][n + j] = blocks[n + i][n + j] + extra
            return sp.bmat(blocks, format="csr")

        x = np.concatenate([c.ravel(), cs.ravel()])
        converged = False
        for it in range(10):
            G = residual(x)
            if not np.isfinite(G).all():
                break
            res = float(np.abs(G).max())
            tol = 1e-10 * (1.0 + float(np.abs(x).max()))
            if res <= tol and (it >= 2 or res <= 1e-13 * (1.0 + float(np.abs(x).max()))):
                converged = True
                break
            J = jacobian(x)
            delta = solve_linear(J, -G, None, self.solver, np.asarray(J.diagonal()))
            x = x + delta
        if not converged:
            if depth >= 5:
                raise SolverError(f"Newton diverged after {depth} dt halvings at t={t:.6g}")
            half = dt / 2.0
            c1, cs1, fl1 = self.newton_step(c, cs, t, half, depth + 1)
            c2, cs2, fl2 = self.newton_step(c1, cs1, t + half, half, depth + 1)
            fl = StepFluxes(*(getattr(fl1, f) + getattr(fl2, f) for f in
                              ("inflow", "outflow", "transfer_bulk_side",
                               "transfer_surf_side", "reaction")))
            return c2, cs2, fl

        c_new = x[:n * nc].reshape(n, nc).copy()
        cs_new = x[n * nc:].reshape(n, npch).copy()
        # ledger amounts at the implicit state (the fluxes actually applied)
        inflow = np.array([-math.fsum(gin[i] * self.inflow_areas) for i in range(n)]) * dt
        outflow = np.array([self.advection.outflow_mass_rate(c_new[i]) for i in range(n)]) * dt
        tb = np.zeros(n)
        ts = np.zeros(n)
        for i, law in enumerate(self.laws):
            if law is not None:
                sorp = law.rate(self.trace_mat @ c_new[i], cs_new[i])
                ts[i] = math.fsum(sorp * self.patch_areas) * dt
                scattered = np.zeros(nc)
                scattered[self.wall_cells] = sorp * self.patch_areas
                tb[i] = math.fsum(scattered[self.wall_cells]) * dt
        reaction = np.zeros(n)
        if self.network is not None:
            rch = self.network.rates(cs_new)
            for i in range(n):
                reaction[i] = math.fsum(rch[i] * self.patch_areas) * dt
        return c_new, cs_new, StepFluxes(inflow, outflow, tb, ts, reaction)

    def step(self, c, cs, t, dt):
        if self.scheme.kind == "imex_euler":
            c_new, cs_new, fluxes, ex = self.step_imex_euler(c, cs, t, dt)
            self._prev_explicit = ex
        elif self.scheme.kind == "imex_cn":
            c_new, cs_new, fluxes, ex = self.step_imex_cn(c, cs, t, dt)
            self._prev_explicit = ex
        else:
            c_new, cs_new, fluxes = self.newton_step(c, cs, t, dt)
        if not (np.isfinite(c_new).all() and np.isfinite(cs_new).all()):
            raise SolverError(f"non-finite state after the step at t={t:.6g}")
        return c_new, cs_new, fluxes

    # --- full advance ---

    def run(self, monitor=None, snapshot=None, record_surface: bool = False):
        """Advance to t_end.  `monitor.observe(step, t, c, cs, fluxes)` is
        invoked after every step, `snapshot(step, t, c, cs)` on the configured
        interval and at the end.  Deterministic for a fixed configuration."""
        scheme = self.scheme
        if scheme.dt < 1e-14 * scheme.t_end:
            raise SolverError(f"dt underflow: {scheme.dt} vs t_end {scheme.t_end}")
        n_full = int(math.floor(scheme.t_end / scheme.dt + 1e-9))
        remainder = scheme.t_end - n_full * scheme.dt
        if remainder < 1e-12 * scheme.t_end:
            remainder = 0.0

        c, cs = self.c0.copy(), self.cs0.copy()
        self._prev_explicit = None
        recorded = [] if record_surface else None
        if monitor is not None:
            monitor.start(c, cs)
        if snapshot is not None:
            snapshot(0, 0.0, c, cs)
        t = 0.0
        total_steps = n_full + (1 if remainder else 0)
        for step_idx in range(1, total_steps + 1):
            dt = scheme.dt if step_idx <= n_full else remainder
            if record_surface:
                recorded.append(cs.copy())
            c, cs, fluxes = self.step(c, cs, t, dt)
            t = step_idx * scheme.dt if step_idx <= n_full else scheme.t_end
            if monitor is not None:
                monitor.observe(step_idx, t, c, cs, fluxes)
            if snapshot is not None and scheme.snapshot_interval > 0 \
                    and step_idx % scheme.snapshot_interval == 0:
                snapshot(step_idx, t, c, cs)
        if snapshot is not None:
            snapshot(total_steps, scheme.t_end, c, cs)
        return RunResult(c=c, cs=cs, t_end=scheme.t_end, n_steps=total_steps,
                         recorded_surface=recorded)


@dataclass
class RunResult:
    c: np.ndarray
    cs: np.ndarray
    t_end: float
    n_steps: int
    recorded_surface: list | None = None


# --- explicit step-size bound ---

def stable_dt(sim: Simulation) -> tuple[float, dict]:
    """Largest explicit-stable step (times dt_safety) and its components.

    Combines, per cell/patch, the advective CFL rate, the sorption exchange
    rate (k_ad A/V on wall cells, k_de on patches) and a sampled bound on the
    reaction Jacobian.  Diffusion is implicit and does not restrict dt.
    """
    bulk = sim.bulk
    interior, boundary = sim.field.face_velocities(bulk)
    out_rate = np.zeros(bulk.n_cells)
    q = interior * bulk.face_area
    np.add.at(out_rate, bulk.face_owner, np.maximum(q, 0.0))
    np.add.at(out_rate, bulk.face_neigh, np.maximum(-q, 0.0))
    np.add.at(out_rate, bulk.bnd_cell, np.maximum(boundary * bulk.bnd_area, 0.0))
    adv_rate = out_rate / bulk.volumes  # 1/time per cell

    # sorption exchange constants per species (declared or sampled)
    k_ad_max = k_de_max = 0.0
    for law in sim.laws:
        if law is None:
            continue
        consts = law.linear_bound_constants()
        if consts is None:
            grid = np.linspace(0.0, 100.0, 21)
            cc, ss = np.meshgrid(grid, grid, indexing="ij")
            jc, jcs = law.jacobian(cc, ss)
            consts = (float(np.abs(jc).max()), float(np.abs(jcs).max()))
        k_ad_max = max(k_ad_max, consts[0])
        k_de_max = max(k_de_max, consts[1])

    react_rate = 0.0
    if sim.network is not None:
        samples = [np.maximum(sim.cs0, 0.0), 2.0 * np.maximum(sim.cs0, 0.0) + 1.0]
        for y in samples:
            jac = sim.network.jacobian(y)
            react_rate = max(react_rate, float(np.abs(jac).sum(axis=0).max()))

    wall_ratio = float((sim.patch_areas / bulk.volumes[sim.wall_cells]).max(initial=0.0))
    sorp_rate = k_ad_max * wall_ratio + k_de_max

    components = {}
    adv_max = float(adv_rate.max(initial=0.0))
    components["advective"] = 1.0 / adv_max if adv_max > 0.0 else math.inf
    components["sorption"] = 1.0 / sorp_rate if sorp_rate > 0.0 else math.inf
    components["reaction"] = 1.0 / react_rate if react_rate > 0.0 else math.inf

    # combined per-entity rates: wall cells see advection plus adsorption,
    # patches see desorption plus reaction
    cell_rate = adv_rate.copy()
    if k_ad_max > 0.0:
        cell_rate[sim.wall_cells] += k_ad_max * sim.patch_areas / bulk.volumes[sim.wall_cells]
    worst = max(float(cell_rate.max(initial=0.0)), k_de_max + react_rate)
    bound = (1.0 / worst if worst > 0.0 else math.inf) * sim.scheme.dt_safety
    components["combined"] = bound
    return bound, components
