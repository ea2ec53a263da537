"""Finite-volume simulator and verification harness for multispecies
advection-diffusion in a cylindrical pore coupled to sorption and surface
chemistry on the catalytic lateral wall."""

__version__ = "0.1.0"

from .errors import ConfigError, PorecatError, SolverError, ValidationFailure
from .geometry import BulkMesh, CylinderSpec, SurfaceMesh, TraceMap, build_mesh, integrate
from .model import (CustomReaction, CustomSorption, Henry, MassAction,
                    ModifiedLangmuir, Reaction, ReactionNetwork, ScenarioSpec,
                    SorptionLaw, SpeciesSet, TriangularCandidate, ValidationConfig,
                    check_triangular, eval_reaction, eval_sorption, reversible_abp,
                    validate_reaction, validate_sorption)
from .velocity import Poiseuille, Tabulated, VelocityField, ZeroVelocity, \
    eval_velocity, validate_avel
from .timestepping import LinearData, LinearSolverConfig, SchemeConfig, Simulation, stable_dt
from .diagnostics import (ComparisonResult, GronwallFit, MassLedger, MonitorReport,
                          NonnegativityMonitor, RunMonitor, comparison_run,
                          gronwall_fit, surface_comparison)
