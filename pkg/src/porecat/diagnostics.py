"""Runtime property checks: exact mass accounting, nonnegativity monitoring,
norm tracking with exponential-envelope fitting, and discrete comparison
(majorant) runs.

The ledger recomputes, per step and species, the defect between the change of
total discrete mass and the boundary/reaction fluxes the stepper actually
applied.  Interior fluxes telescope and the bulk<->surface sorption exchange
is the same array on both sides, so the defect isolates solver residuals and
rounding.  All reductions use exact compensated summation in a fixed order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ConfigError
from .geometry import BulkMesh, SurfaceMesh, integrate
from .model import ScenarioSpec, SpeciesSet
from .timestepping import LinearData, Simulation, StepFluxes, SchemeConfig


# --- mass ledger ---

class MassLedger:
    """Per-species conservation accounting over a run."""

    def __init__(self, bulk: BulkMesh, surf: SurfaceMesh, species: SpeciesSet,
                 conserved: list[tuple[float, ...]] | None = None):
        self.bulk, self.surf = bulk, surf
        self.species = species
        self.conserved = list(conserved or [])
        n = species.n
        self.bulk_mass0 = np.zeros(n)
        self.surf_mass0 = np.zeros(n)
        self.cum_inflow = np.zeros(n)
        self.cum_outflow = np.zeros(n)
        self.cum_reaction = np.zeros(n)
        self.prev_total = np.zeros(n)
        self.max_step_residual = 0.0       # relative, over steps and species
        self.max_cum_residual = 0.0
        self.max_transfer_mismatch = 0.0   # |bulk side - surface side| per step
        self.max_conserved_drift = 0.0     # relative drift of declared combinations
        self._conserved0: list[float] = []
        self.n_steps = 0

    def _masses(self, c, cs):
        mb = np.array([integrate(self.bulk, c[i]) for i in range(self.species.n)])
        ms = np.array([integrate(self.surf, cs[i]) for i in range(self.species.n)])
        return mb, ms

    def start(self, c, cs):
        self.bulk_mass0, self.surf_mass0 = self._masses(c, cs)
        self.prev_total = self.bulk_mass0 + self.surf_mass0
        self._conserved0 = [math.fsum(w[i] * self.prev_total[i] for i in range(self.species.n))
                            for w in self.conserved]

    def observe(self, step, t, c, cs, fluxes: StepFluxes):
        mb, ms = self._masses(c, cs)
        total = mb + ms
        self.cum_inflow += fluxes.inflow
        self.cum_outflow += fluxes.outflow
        self.cum_reaction += fluxes.reaction
        for i in range(self.species.n):
            step_residual = (total[i] - self.prev_total[i]) \
                - (fluxes.inflow[i] - fluxes.outflow[i] + fluxes.reaction[i])
            throughput = abs(fluxes.inflow[i]) + abs(fluxes.outflow[i]) \
                + abs(fluxes.reaction[i]) + abs(fluxes.transfer_surf_side[i])
            scale = max(abs(total[i]), throughput, 1e-300)
            self.max_step_residual = max(self.max_step_residual, abs(step_residual) / scale)

            start_total = self.bulk_mass0[i] + self.surf_mass0[i]
            cum_residual = (total[i] - start_total) \
                - (self.cum_inflow[i] - self.cum_outflow[i] + self.cum_reaction[i])
            cum_scale = max(abs(total[i]), abs(start_total),
                            self.cum_inflow[i] + self.cum_outflow[i], 1e-300)
            self.max_cum_residual = max(self.max_cum_residual, abs(cum_residual) / cum_scale)

            mismatch = abs(fluxes.transfer_bulk_side[i] - fluxes.transfer_surf_side[i])
            self.max_transfer_mismatch = max(self.max_transfer_mismatch, mismatch)

        for idx, w in enumerate(self.conserved):
            value = math.fsum(w[i] * total[i] for i in range(self.species.n))
            ref = max(abs(self._conserved0[idx]), 1e-300)
            self.max_conserved_drift = max(self.max_conserved_drift,
                                           abs(value - self._conserved0[idx]) / ref)
        self.prev_total = total
        self.n_steps = step


# --- nonnegativity ---

@dataclass
class Violation:
    step: int
    species: int
    index: int
    value: float
    where: str  # 'bulk' or 'surface'


class NonnegativityMonitor:
    def __init__(self, tolerance: float = 1e-12):
        self.tolerance = tolerance
        self.min_bulk = math.inf
        self.min_surface = math.inf
        self.first_violation: Violation | None = None

    def _scan(self, step, c, cs):
        mb = float(c.min())
        ms = float(cs.min())
        self.min_bulk = min(self.min_bulk, mb)
        self.min_surface = min(self.min_surface, ms)
        if self.first_violation is None:
            if mb < -self.tolerance:
                i, j = np.unravel_index(int(np.argmin(c)), c.shape)
                self.first_violation = Violation(step, int(i), int(j), mb, "bulk")
            elif ms < -self.tolerance:
                i, j = np.unravel_index(int(np.argmin(cs)), cs.shape)
                self.first_violation = Violation(step, int(i), int(j), ms, "surface")

    def start(self, c, cs):
        self._scan(0, c, cs)

    def observe(self, step, t, c, cs, fluxes):
        self._scan(step, c, cs)


def nonnegativity_scan(c: np.ndarray, cs: np.ndarray, tolerance: float = 1e-12):
    """One-shot scan: (min_bulk, min_surface, first violation or None)."""
    mon = NonnegativityMonitor(tolerance)
    mon.start(np.atleast_2d(c), np.atleast_2d(cs))
    return mon.min_bulk, mon.min_surface, mon.first_violation


# --- norm tracking ---

class NormTracker:
    def __init__(self, bulk: BulkMesh, surf: SurfaceMesh, blow_up_threshold: float = 1e12):
        self.bulk, self.surf = bulk, surf
        self.times: list[float] = []
        self.linf: list[float] = []      # max over species, bulk and surface
        self.l2_bulk: list[float] = []
        self.l2_surf: list[float] = []
        self.blow_up = False
        self.threshold = blow_up_threshold

    def _record(self, t, c, cs):
        linf = max(float(np.abs(c).max()), float(np.abs(cs).max()))
        l2b = max(math.sqrt(max(integrate(self.bulk, ci * ci), 0.0)) for ci in c)
        l2s = max(math.sqrt(max(integrate(self.surf, si * si), 0.0)) for si in cs)
        self.times.append(t)
        self.linf.append(linf)
        self.l2_bulk.append(l2b)
        self.l2_surf.append(l2s)
        if not np.isfinite(linf) or linf > self.threshold:
            self.blow_up = True

    def start(self, c, cs):
        self._record(0.0, c, cs)

    def observe(self, step, t, c, cs, fluxes):
        self._record(t, c, cs)


class RunMonitor:
    """Bundles the ledger, the nonnegativity monitor and the norm tracker into
    the single observer the stepper invokes each step."""

    def __init__(self, bulk, surf, species, conserved=None,
                 nonneg_tolerance: float = 1e-12, track_norms: bool = True):
        self.ledger = MassLedger(bulk, surf, species, conserved)
        self.nonneg = NonnegativityMonitor(nonneg_tolerance)
        self.norms = NormTracker(bulk, surf) if track_norms else None

    def start(self, c, cs):
        self.ledger.start(c, cs)
        self.nonneg.start(c, cs)
        if self.norms is not None:
            self.norms.start(c, cs)

    def observe(self, step, t, c, cs, fluxes):
        self.ledger.observe(step, t, c, cs, fluxes)
        self.nonneg.observe(step, t, c, cs, fluxes)
        if self.norms is not None:
            self.norms.observe(step, t, c, cs, fluxes)


# --- exponential envelope fit ---

@dataclass(frozen=True)
class GronwallFit:
    M: float
    omega: float
    violation: float  # max_t (series / (M e^{omega t}) - 1)

    def to_json(self) -> dict:
        return {"M": self.M, "omega": self.omega, "violation": self.violation}


def gronwall_fit(times, series) -> GronwallFit:
    """Least-squares fit of log(series) = log(M) + omega t.

    Exact on exact exponentials; the violation reports how far the fitted
    curve fails to dominate the data (least squares is not an envelope)."""
    t = np.asarray(times, dtype=np.float64)
    y = np.asarray(series, dtype=np.float64)
    if t.size < 3:
        raise ConfigError(f"need at least 3 samples to fit, got {t.size}")
    if np.any(y <= 0.0):
        raise ConfigError("series values must be positive for a log-linear fit")
    design = np.vstack([np.ones_like(t), t]).T
    coef, *_ = np.linalg.lstsq(design, np.log(y), rcond=None)
    log_m, omega = float(coef[0]), float(coef[1])
    m = math.exp(log_m)
    violation = float(np.max(y / (m * np.exp(omega * t)) - 1.0))
    return GronwallFit(M=m, omega=omega, violation=violation)


# --- discrete comparison (majorant) runs ---

@dataclass
class ComparisonResult:
    species: str
    c_constant: float
    hypothesis_satisfied: bool
    max_excess: float      # max over cells and steps of c - z
    passed: bool

    def to_json(self) -> dict:
        return {"species": self.species, "c_constant": self.c_constant,
                "hypothesis_satisfied": self.hypothesis_satisfied,
                "max_excess": self.max_excess, "passed": self.passed}


def comparison_run(sim: Simulation, species_idx: int, c_constant: float,
                   tolerance: float = 1e-10) -> ComparisonResult:
    """Run the nonlinear system and, in lockstep on the same mesh and scheme,
    the linear majorant whose wall flux is -C times the recorded surface
    concentration of the chosen species.  Passes when the bulk concentration
    never exceeds the majorant beyond the tolerance.

    The recorded surface values are exactly those the nonlinear stepper used
    in its explicit sorption evaluation (start of step), so the majorant sees
    the same data.  Drives the IMEX-Euler path.
    """
    species = sim.species
    i = species_idx
    law = sim.laws[i]
    consts = law.linear_bound_constants() if law is not None else None
    hypothesis = consts is not None and c_constant >= consts[1] * (1.0 - 1e-12)

    single = SpeciesSet((species.names[i],), (species.d_bulk[i],), (species.d_surf[i],))
    scen = sim.scenario
    scen_single = ScenarioSpec((scen.initial_bulk[i],), (scen.initial_surf[i],),
                               (scen.g_in[i],), scen.t_end, scen.closed_pore)
    holder = {"cs": None}
    twin = Simulation(
        sim.bulk, sim.surf, sim.trace, single, [None], None, sim.field,
        scen_single,
        SchemeConfig("imex_euler", sim.scheme.dt, sim.scheme.t_end,
                     sim.scheme.dt_safety, 0, False),
        sim.solver, advection_scheme=sim.advection.scheme,
        trace_order=sim.trace_order,
        linear_data=LinearData(lateral_flux=lambda t: -c_constant * holder["cs"][None, :]))

    base = Simulation(
        sim.bulk, sim.surf, sim.trace, sim.species, sim.laws, sim.network, sim.field,
        sim.scenario,
        SchemeConfig("imex_euler", sim.scheme.dt, sim.scheme.t_end,
                     sim.scheme.dt_safety, 0, False),
        sim.solver, advection_scheme=sim.advection.scheme, trace_order=sim.trace_order,
        linear_data=sim.linear_data)

    c, cs = base.c0.copy(), base.cs0.copy()
    z, _zs = twin.c0.copy(), twin.cs0.copy()
    zs = np.zeros_like(_zs)
    max_excess = float((c[i] - z[0]).max())

    scheme = base.scheme
    n_full = int(math.floor(scheme.t_end / scheme.dt + 1e-9))
    remainder = scheme.t_end - n_full * scheme.dt
    if remainder < 1e-12 * scheme.t_end:
        remainder = 0.0
    total_steps = n_full + (1 if remainder else 0)
    t = 0.0
    for step_idx in range(1, total_steps + 1):
        dt = scheme.dt if step_idx <= n_full else remainder
        holder["cs"] = cs[i].copy()
        c, cs, _ = base.step(c, cs, t, dt)
        z, zs, _ = twin.step(z, zs, t, dt)
        t = step_idx * scheme.dt if step_idx <= n_full else scheme.t_end
        max_excess = max(max_excess, float((c[i] - z[0]).max()))

    return ComparisonResult(species=species.names[i], c_constant=c_constant,
                            hypothesis_satisfied=hypothesis,
                            max_excess=max_excess,
                            passed=max_excess <= tolerance)


# --- linear surface comparison ---

@dataclass
class SurfaceComparisonResult:
    verdict: str            # 'pass', 'fail' or 'not applicable'
    min_value: float

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "min_value": self.min_value}


def surface_comparison(surf: SurfaceMesh, d_surf: float, forcing, v0: np.ndarray,
                       t_end: float, dt: float,
                       tolerance: float = 1e-12) -> SurfaceComparisonResult:
    """Solve the linear surface heat problem with areal source `forcing` and
    initial value v0 by implicit Euler; with nonnegative data the M-matrix
    update keeps the solution nonnegative.  When the data violates the sign
    hypothesis the check is vacuous and reports 'not applicable'."""
    from .discretization import assemble_surface_laplacian
    from .timestepping import LinearSolverConfig, solve_linear
    import scipy.sparse as sp

    f_arr = np.asarray(forcing(0.0) if callable(forcing) else forcing, dtype=np.float64)
    f_callable = forcing if callable(forcing) else (lambda t: f_arr)
    v = np.asarray(v0, dtype=np.float64).copy()
    applicable = bool(np.min(f_arr) >= 0.0 and np.min(v) >= 0.0)

    op = assemble_surface_laplacian(surf, d_surf)
    A = (sp.diags(surf.areas) + dt * op.matrix).tocsr()
    diag = np.asarray(A.diagonal())
    solver = LinearSolverConfig(rel_tol=1e-13)
    min_v = float(v.min())
    n_steps = max(1, int(round(t_end / dt)))
    for k in range(n_steps):
        b = surf.areas * (v + dt * np.asarray(f_callable(k * dt), dtype=np.float64))
        v = solve_linear(A, b, v, solver, diag)
        min_v = min(min_v, float(v.min()))
    if not applicable:
        return SurfaceComparisonResult("not applicable", min_v)
    return SurfaceComparisonResult("pass" if min_v >= -tolerance else "fail", min_v)


# --- consolidated report ---

@dataclass
class MonitorReport:
    species: list[str]
    min_bulk: float
    min_surface: float
    ledger_max_residual: float
    gronwall: GronwallFit | None = None
    comparisons: list[ComparisonResult] = dc_field(default_factory=list)
    validators: list[dict] = dc_field(default_factory=list)
    ledger_max_cumulative: float = 0.0
    transfer_mismatch: float = 0.0
    conserved_drift: float = 0.0
    blow_up: bool = False
    warnings: list[str] = dc_field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "species": list(self.species),
            "min_bulk": self.min_bulk,
            "min_surface": self.min_surface,
            "ledger_max_residual": self.ledger_max_residual,
            "gronwall": self.gronwall.to_json() if self.gronwall is not None
                        else {"M": None, "omega": None, "violation": None},
            "comparisons": [c.to_json() for c in self.comparisons],
            "validators": list(self.validators),
            "ledger_max_cumulative": self.ledger_max_cumulative,
            "transfer_mismatch": self.transfer_mismatch,
            "conserved_drift": self.conserved_drift,
            "blow_up": self.blow_up,
            "warnings": list(self.warnings),
        }


def build_report(monitor: RunMonitor, species: SpeciesSet,
                 gronwall: GronwallFit | None = None,
                 comparisons: list[ComparisonResult] | None = None,
                 validators: list[dict] | None = None,
                 warnings: list[str] | None = None) -> MonitorReport:
    return MonitorReport(
        species=list(species.names),
        min_bulk=monitor.nonneg.min_bulk,
        min_surface=monitor.nonneg.min_surface,
        ledger_max_residual=monitor.ledger.max_step_residual,
        gronwall=gronwall,
        comparisons=comparisons or [],
        validators=validators or [],
        ledger_max_cumulative=monitor.ledger.max_cum_residual,
        transfer_mismatch=monitor.ledger.max_transfer_mismatch,
        conserved_drift=monitor.ledger.max_conserved_drift,
        blow_up=monitor.norms.blow_up if monitor.norms is not None else False,
        warnings=warnings or [],
    )
