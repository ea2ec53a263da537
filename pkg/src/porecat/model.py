"""Chemistry layer: species, sorption laws, reaction networks, scenarios,
and validators for the structural conditions the solver relies on.

Sorption rates act per wall patch on (bulk trace value, surface value).
Reaction rates act on the vector of surface concentrations and are always
evaluated at the componentwise positive part, so they stay meaningful for
transient negative values.

The validators check, per law/network:
  * smoothness        - C2 rate with bounded gradient (sorption) / C1 (reaction)
  * monotonicity      - nondecreasing in the bulk value, nonincreasing in the
                        surface value
  * linear_bounds     - -k_de*cs <= r <= k_ad*c on the nonnegative quadrant
  * quasi_positivity  - r_i >= 0 wherever y >= 0 and y_i = 0
  * polynomial_growth - |r| <= M (1+|y|^gamma)
  * triangular_bound  - Q r(y) <= C (1 + sum y) for a supplied lower-triangular Q

Quantified-over-[0,inf) conditions are certified symbolically where the law is
polynomial and by fixed sample grids otherwise; each report entry records
which method decided it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from . import ratexpr
from .ratexpr import RateExpr, evaluate, differentiate, free_variables, \
    smooth_pos, smooth_pos_prime, saturate, saturate_prime

VALIDATOR_TOL = 1e-12  # absolute slack on all validator inequalities
GROWTH_FACTOR = 1.5    # grid-doubling ratio above which a sampled sup is 'unbounded'


# --- species ---

@dataclass(frozen=True)
class SpeciesSet:
    names: tuple[str, ...]
    d_bulk: tuple[float, ...]
    d_surf: tuple[float, ...]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ConfigError(f"species names are not unique: {self.names}")
        if len(self.d_bulk) != len(self.names) or len(self.d_surf) != len(self.names):
            raise ConfigError("diffusivity lists must match the species list")
        for name, d, ds in zip(self.names, self.d_bulk, self.d_surf):
            if not (d > 0.0) or not (ds > 0.0):
                raise ConfigError(f"species {name!r} needs strictly positive diffusivities, "
                                  f"got d={d}, d_surf={ds}")

    @property
    def n(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ConfigError(f"unknown species {name!r}") from None


# --- sorption laws ---

class SorptionLaw:
    """Rate of mass transfer bulk -> surface per unit wall area."""

    def rate(self, c, cs):
        raise NotImplementedError

    def jacobian(self, c, cs):
        """Returns (dr/dc, dr/dcs), elementwise."""
        raise NotImplementedError

    def linear_bound_constants(self):
        """(k_ad, k_de) if the law declares them, else None."""
        return None


@dataclass(frozen=True)
class Henry(SorptionLaw):
    k_ad: float
    k_de: float

    def __post_init__(self):
        if not (self.k_ad > 0.0) or not (self.k_de > 0.0):
            raise ConfigError(f"Henry constants must be positive, got {self.k_ad}, {self.k_de}")

    def rate(self, c, cs):
        return self.k_ad * np.asarray(c, dtype=np.float64) - self.k_de * np.asarray(cs, dtype=np.float64)

    def jacobian(self, c, cs):
        shape = np.broadcast(np.asarray(c), np.asarray(cs)).shape
        return (np.full(shape, self.k_ad), np.full(shape, -self.k_de))

    def linear_bound_constants(self):
        return (self.k_ad, self.k_de)


@dataclass(frozen=True)
class ModifiedLangmuir(SorptionLaw):
    """Saturating adsorption with smooth cut-offs.

    rate = k_ad * sat(c) * pos(1 - pos(cs)/c_inf) - k_de * cs

    where pos is the smooth positive part of width eps_plus (exact outside
    [0, eps_plus] and below the sharp positive part, so the linear bounds
    hold with the declared constants) and sat the tanh saturation at b_cap.
    """

    k_ad: float
    k_de: float
    c_inf: float
    eps_plus: float = 1e-3
    b_cap: float = 100.0

    def __post_init__(self):
        for label, v in (("k_ad", self.k_ad), ("k_de", self.k_de), ("c_inf", self.c_inf),
                         ("eps_plus", self.eps_plus), ("b_cap", self.b_cap)):
            if not (v > 0.0):
                raise ConfigError(f"ModifiedLangmuir requires {label} > 0, got {v}")

    def _occupancy(self, cs):
        return smooth_pos(1.0 - smooth_pos(cs, self.eps_plus) / self.c_inf, self.eps_plus)

    def rate(self, c, cs):
        c = np.asarray(c, dtype=np.float64)
        cs = np.asarray(cs, dtype=np.float64)
        out = self.k_ad * saturate(c, self.b_cap) * self._occupancy(cs) - self.k_de * cs
        return out if np.ndim(out) else float(out)

    def jacobian(self, c, cs):
        c = np.asarray(c, dtype=np.float64)
        cs = np.asarray(cs, dtype=np.float64)
        arg = 1.0 - smooth_pos(cs, self.eps_plus) / self.c_inf
        dr_dc = self.k_ad * saturate_prime(c, self.b_cap) * smooth_pos(arg, self.eps_plus)
        dr_dcs = (-self.k_ad * saturate(c, self.b_cap)
                  * smooth_pos_prime(arg, self.eps_plus)
                  * smooth_pos_prime(cs, self.eps_plus) / self.c_inf
                  - self.k_de)
        return np.broadcast_arrays(dr_dc, dr_dcs * np.ones_like(c))

    def linear_bound_constants(self):
        return (self.k_ad, self.k_de)


class CustomSorption(SorptionLaw):
    """Rate given by an expression in variables c and cs (plus fixed params)."""

    def __init__(self, expr: RateExpr | str, params: dict | None = None):
        self.expr = ratexpr.parse(expr) if isinstance(expr, str) else expr
        self.params = dict(params or {})
        unbound = free_variables(self.expr) - {"c", "cs"} - set(self.params)
        if unbound:
            raise ConfigError(f"custom sorption expression has unbound names: {sorted(unbound)}")
        self._d_dc = differentiate(self.expr, "c")
        self._d_dcs = differentiate(self.expr, "cs")

    def rate(self, c, cs):
        return evaluate(self.expr, {"c": np.asarray(c, dtype=np.float64),
                                    "cs": np.asarray(cs, dtype=np.float64), **self.params})

    def jacobian(self, c, cs):
        env = {"c": np.asarray(c, dtype=np.float64),
               "cs": np.asarray(cs, dtype=np.float64), **self.params}
        ones = np.ones(np.broadcast(env["c"], env["cs"]).shape)
        return (evaluate(self._d_dc, env) * ones, evaluate(self._d_dcs, env) * ones)


def eval_sorption(law: SorptionLaw, c, cs):
    """Sorption rate (amount / area / time); total function on the reals."""
    return law.rate(c, cs)


# --- small dense polynomials over nonneg-integer exponent tuples ---
# used for the symbolic analysis of mass-action networks

Poly = dict  # exponent tuple -> coefficient


def _poly_add_term(poly: Poly, exps: tuple[int, ...], coeff: float) -> None:
    if coeff == 0.0:
        return
    new = poly.get(exps, 0.0) + coeff
    if new == 0.0:
        poly.pop(exps, None)
    else:
        poly[exps] = new


def _poly_eval(poly: Poly, y: np.ndarray):
    # y has shape (N,) or (N, m)
    total = 0.0
    for exps, coeff in poly.items():
        term = coeff
        for j, e in enumerate(exps):
            if e:
                term = term * y[j] ** e
        total = total + term
    if np.ndim(total) == 0 and np.ndim(y) > 1:
        return np.full(y.shape[1], float(total))
    return total


def _poly_diff(poly: Poly, j: int) -> Poly:
    out: Poly = {}
    for exps, coeff in poly.items():
        if exps[j] == 0:
            continue
        new = list(exps)
        new[j] -= 1
        _poly_add_term(out, tuple(new), coeff * exps[j])
    return out


def _poly_degree(poly: Poly) -> int:
    return max((sum(e) for e in poly), default=0)


# --- reaction networks ---

@dataclass(frozen=True)
class Reaction:
    """One reversible reaction with integer stoichiometry.

    Net rate is k * (prod y^educts - kappa * prod y^products); each species'
    production is (products_i - educts_i) times that.
    """

    educts: tuple[int, ...]
    products: tuple[int, ...]
    k: float
    kappa: float

    def __post_init__(self):
        if len(self.educts) != len(self.products):
            raise ConfigError("educt/product stoichiometry length mismatch")
        if any(e < 0 for e in self.educts) or any(p < 0 for p in self.products):
            raise ConfigError("stoichiometric coefficients must be non-negative integers")
        if not (self.k > 0.0) or not (self.kappa > 0.0):
            raise ConfigError(f"rate constants must be positive, got k={self.k}, kappa={self.kappa}")


class ReactionNetwork:
    n_species: int

    def rates(self, cs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, cs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def conserved_combinations(self) -> list[tuple[float, ...]]:
        return []


class MassAction(ReactionNetwork):
    def __init__(self, n_species: int, reactions: list[Reaction]):
        self.n_species = int(n_species)
        self.reactions = list(reactions)
        for re in self.reactions:
            if len(re.educts) != self.n_species:
                raise ConfigError(f"stoichiometric vectors must have length {self.n_species}")
        # per-species production polynomials and their partials
        self._polys = [dict() for _ in range(self.n_species)]
        for re in self.reactions:
            rho: Poly = {}
            _poly_add_term(rho, tuple(re.educts), re.k)
            _poly_add_term(rho, tuple(re.products), -re.k * re.kappa)
            for i in range(self.n_species):
                net = re.products[i] - re.educts[i]
                if net:
                    for exps, coeff in rho.items():
                        _poly_add_term(self._polys[i], exps, net * coeff)
        self._jac_polys = [[_poly_diff(p, j) for j in range(self.n_species)]
                           for p in self._polys]

    def species_polynomials(self) -> list[Poly]:
        return [dict(p) for p in self._polys]

    def rates(self, cs: np.ndarray) -> np.ndarray:
        cs = np.asarray(cs, dtype=np.float64)
        y = np.maximum(cs, 0.0)
        out = [_poly_eval(p, y) for p in self._polys]
        return np.array(out) if y.ndim == 1 else np.vstack([np.broadcast_to(o, y.shape[1:]) for o in out])

    def jacobian(self, cs: np.ndarray) -> np.ndarray:
        cs = np.asarray(cs, dtype=np.float64)
        y = np.maximum(cs, 0.0)
        gate = (cs > 0.0).astype(np.float64)  # positive-part chain rule
        n = self.n_species
        shape = (n, n) + y.shape[1:]
        jac = np.zeros(shape)
        for i in range(n):
            for j in range(n):
                p = self._jac_polys[i][j]
                if p:
                    jac[i, j] = _poly_eval(p, y) * gate[j]
        return jac

    def max_degree(self) -> int:
        return max((_poly_degree(p) for p in self._polys), default=0)

    def conserved_combinations(self) -> list[tuple[float, ...]]:
        """Integer basis of weight vectors w with sum_i w_i r_i identically zero.

        Pivots are chosen on the last species first, so for networks that list
        products last the combinations come out as educt+product totals."""
        from fractions import Fraction
        n = self.n_species
        rows = [[Fraction(re.products[i] - re.educts[i]) for i in range(n)]
                for re in self.reactions]
        # reduced row echelon form, scanning columns right to left
        pivots = []
        r = 0
        for col in range(n - 1, -1, -1):
            piv = next((k for k in range(r, len(rows)) if rows[k][col] != 0), None)
            if piv is None:
                continue
            rows[r], rows[piv] = rows[piv], rows[r]
            inv = rows[r][col]
            rows[r] = [v / inv for v in rows[r]]
            for k in range(len(rows)):
                if k != r and rows[k][col] != 0:
                    f = rows[k][col]
                    rows[k] = [a - f * b for a, b in zip(rows[k], rows[r])]
            pivots.append(col)
            r += 1
        basis = []
        free_cols = [c for c in range(n) if c not in pivots]
        for fc in free_cols:
            w = [Fraction(0)] * n
            w[fc] = Fraction(1)
            for row_idx, pc in enumerate(pivots):
                w[pc] = -rows[row_idx][fc]
            denom = math.lcm(*(v.denominator for v in w))
            basis.append(tuple(float(v * denom) for v in w))
        return basis


class CustomReaction(ReactionNetwork):
    """One expression per species in the variables cs_1 .. cs_N."""

    def __init__(self, exprs: list[RateExpr | str]):
        self.n_species = len(exprs)
        self.exprs = [ratexpr.parse(e) if isinstance(e, str) else e for e in exprs]
        allowed = {f"cs_{i + 1}" for i in range(self.n_species)}
        for e in self.exprs:
            unbound = free_variables(e) - allowed
            if unbound:
                raise ConfigError(f"custom reaction expression has unbound names: {sorted(unbound)}")
        self._jac = [[differentiate(e, f"cs_{j + 1}") for j in range(self.n_species)]
                     for e in self.exprs]

    def _env(self, y: np.ndarray) -> dict:
        return {f"cs_{i + 1}": y[i] for i in range(self.n_species)}

    def rates(self, cs: np.ndarray) -> np.ndarray:
        cs = np.asarray(cs, dtype=np.float64)
        y = np.maximum(cs, 0.0)
        env = self._env(y)
        ones = np.ones(y.shape[1:]) if y.ndim > 1 else 1.0
        out = [evaluate(e, env) * ones for e in self.exprs]
        return np.array(out) if y.ndim == 1 else np.vstack(out)

    def jacobian(self, cs: np.ndarray) -> np.ndarray:
        cs = np.asarray(cs, dtype=np.float64)
        y = np.maximum(cs, 0.0)
        gate = (cs > 0.0).astype(np.float64)
        env = self._env(y)
        n = self.n_species
        jac = np.zeros((n, n) + y.shape[1:])
        for i in range(n):
            for j in range(n):
                jac[i, j] = evaluate(self._jac[i][j], env) * gate[j]
        return jac


def eval_reaction(network: ReactionNetwork, cs) -> np.ndarray:
    """Species production rates at the positive part of cs."""
    return network.rates(np.asarray(cs, dtype=np.float64))


def reversible_abp(k: float = 1.0, kappa: float = 1.0) -> MassAction:
    """The standard three-species network A + B <-> P."""
    return MassAction(3, [Reaction((1, 1, 0), (0, 0, 1), k, kappa)])


# --- scenario data ---

BULK_PRESETS = ("constant", "axial-cosine", "radial-parabola")
SURF_PRESETS = ("constant", "phi-cosine", "z-cosine")


@dataclass(frozen=True)
class InitialCondition:
    preset: str
    amplitude: float
    offset: float = 0.0
    mode: int = 1


@dataclass(frozen=True)
class ScenarioSpec:
    initial_bulk: tuple[InitialCondition, ...]
    initial_surf: tuple[InitialCondition, ...]
    g_in: tuple[float, ...]
    t_end: float
    closed_pore: bool = False

    def __post_init__(self):
        if not (self.t_end > 0.0):
            raise ConfigError(f"t_end must be positive, got {self.t_end}")
        if len({len(self.initial_bulk), len(self.initial_surf), len(self.g_in)}) != 1:
            raise ConfigError("scenario species lists have mismatched lengths")
        for g in self.g_in:
            if g > 0.0:
                raise ConfigError(f"inflow datum must be <= 0, got {g}")
        if self.closed_pore and any(g != 0.0 for g in self.g_in):
            raise ConfigError("closed pore requires zero inflow data")
        for ic in self.initial_bulk:
            if ic.preset not in BULK_PRESETS:
                raise ConfigError(f"unknown bulk initial preset {ic.preset!r}")
        for ic in self.initial_surf:
            if ic.preset not in SURF_PRESETS:
                raise ConfigError(f"unknown surface initial preset {ic.preset!r}")

    @property
    def n_species(self) -> int:
        return len(self.initial_bulk)


def initial_bulk_field(ic: InitialCondition, mesh) -> np.ndarray:
    R, h = mesh.spec.R, mesh.spec.h
    if ic.preset == "constant":
        return np.full(mesh.n_cells, ic.amplitude)
    if ic.preset == "axial-cosine":
        arg = ic.mode * math.pi * (mesh.z_centers + h) / (2.0 * h)
        return ic.offset + ic.amplitude * np.cos(arg)
    # radial-parabola
    return ic.offset + ic.amplitude * (mesh.r_centers / R) ** 2


def initial_surface_field(ic: InitialCondition, surf) -> np.ndarray:
    h = surf.spec.h
    if ic.preset == "constant":
        return np.full(surf.n_patches, ic.amplitude)
    if ic.preset == "phi-cosine":
        return ic.offset + ic.amplitude * np.cos(ic.mode * surf.phi_centers)
    # z-cosine
    arg = ic.mode * math.pi * (surf.z_centers + h) / (2.0 * h)
    return ic.offset + ic.amplitude * np.cos(arg)


# --- validators ---

@dataclass(frozen=True)
class ValidationConfig:
    gamma: float = 2.0          # claimed polynomial growth exponent
    m_growth: float = 10.0      # claimed growth constant (reported, not binding)
    bound: float = 100.0        # edge of the sample box [0, bound]^dim
    n_samples: int = 41         # grid points per axis for 2D sorption checks
    n_samples_nd: int = 11      # grid points per axis for reaction checks (dim <= 4)
    n_random: int = 2000        # fallback sample count beyond 4 species

    def __post_init__(self):
        if self.gamma < 1.0:
            raise ConfigError(f"growth exponent must be >= 1, got {self.gamma}")
        if not (self.m_growth > 0.0):
            raise ConfigError(f"growth constant must be positive, got {self.m_growth}")


@dataclass
class CheckResult:
    name: str
    passed: bool
    method: str                     # 'symbolic' or 'grid'
    detail: str = ""
    witness: dict | None = None
    constants: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"name": self.name, "passed": self.passed, "method": self.method,
               "detail": self.detail}
        if self.witness is not None:
            out["witness"] = self.witness
        if self.constants:
            out["constants"] = self.constants
        return out


@dataclass
class ValidationReport:
    subject: str
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self) -> dict:
        return {"subject": self.subject, "passed": self.passed,
                "checks": [c.to_json() for c in self.checks]}


def _sorption_grid(law: SorptionLaw, bound: float, n: int):
    axis = np.linspace(0.0, bound, n)
    c, cs = np.meshgrid(axis, axis, indexing="ij")
    return axis, c, cs, np.asarray(law.rate(c, cs), dtype=np.float64)


def _grad_sup(law: SorptionLaw, bound: float, n: int):
    """Sup of forward-difference gradient magnitude on [0,bound]^2 and its argmax."""
    axis, c, cs, r = _sorption_grid(law, bound, n)
    step = axis[1] - axis[0]
    dc = np.abs(np.diff(r, axis=0)) / step
    dcs = np.abs(np.diff(r, axis=1)) / step
    sup = max(dc.max(initial=0.0), dcs.max(initial=0.0))
    if dc.max(initial=0.0) >= dcs.max(initial=0.0):
        idx = np.unravel_index(np.argmax(dc), dc.shape)
    else:
        idx = np.unravel_index(np.argmax(dcs), dcs.shape)
    witness = {"c": float(axis[idx[0]]), "cs": float(axis[idx[1]])}
    finite = bool(np.isfinite(r).all())
    return sup, witness, finite


def validate_sorption(law: SorptionLaw, cfg: ValidationConfig | None = None) -> ValidationReport:
    """Check smoothness/boundedness, monotonicity and the linear bounds."""
    cfg = cfg or ValidationConfig()
    checks = []

    if isinstance(law, Henry):
        # linear law: all three conditions follow from the sign of the constants
        checks.append(CheckResult("smoothness", True, "symbolic",
                                  detail="linear rate, constant gradient"))
        checks.append(CheckResult("monotonicity", law.k_ad > 0 and law.k_de > 0, "symbolic",
                                  detail="signs of the linear coefficients"))
        checks.append(CheckResult("linear_bounds", True, "symbolic",
                                  detail="equality holds with the declared constants",
                                  constants={"k_ad": law.k_ad, "k_de": law.k_de}))
        return ValidationReport("sorption", checks)

    bound, n = cfg.bound, cfg.n_samples

    # smoothness: gradient must be finite and must not keep growing with the box
    sup1, _, finite1 = _grad_sup(law, bound, n)
    sup2, wit2, finite2 = _grad_sup(law, 2.0 * bound, n)
    grows = sup2 > GROWTH_FACTOR * sup1 + VALIDATOR_TOL
    ok = finite1 and finite2 and not grows
    checks.append(CheckResult(
        "smoothness", ok, "grid",
        detail=(f"sup|grad| {sup1:.6g} on [0,{bound:g}]^2, {sup2:.6g} on doubled box"
                if finite1 and finite2 else "non-finite rate values"),
        witness=None if ok else wit2,
        constants={"grad_sup": sup2}))

    # monotonicity: value differences along each axis
    axis, c, cs, r = _sorption_grid(law, bound, n)
    diff_c = np.diff(r, axis=0)
    diff_cs = np.diff(r, axis=1)
    bad_c = diff_c < -VALIDATOR_TOL
    bad_cs = diff_cs > VALIDATOR_TOL
    witness = None
    if bad_c.any():
        i, j = np.unravel_index(np.argmin(diff_c), diff_c.shape)
        witness = {"c": float(axis[i + 1]), "cs": float(axis[j]), "axis": "c"}
    elif bad_cs.any():
        i, j = np.unravel_index(np.argmax(diff_cs), diff_cs.shape)
        witness = {"c": float(axis[i]), "cs": float(axis[j + 1]), "axis": "cs"}
    checks.append(CheckResult("monotonicity", witness is None, "grid",
                              detail="pairwise value differences on the sample grid",
                              witness=witness))

    # linear bounds
    declared = law.linear_bound_constants()
    if declared is not None:
        k_ad, k_de = declared
        upper_viol = r - k_ad * c
        lower_viol = -k_de * cs - r
        witness = None
        if upper_viol.max() > VALIDATOR_TOL:
            i, j = np.unravel_index(np.argmax(upper_viol), r.shape)
            witness = {"c": float(axis[i]), "cs": float(axis[j]), "side": "upper"}
        elif lower_viol.max() > VALIDATOR_TOL:
            i, j = np.unravel_index(np.argmax(lower_viol), r.shape)
            witness = {"c": float(axis[i]), "cs": float(axis[j]), "side": "lower"}
        checks.append(CheckResult("linear_bounds", witness is None, "grid",
                                  detail="declared constants on the sample grid",
                                  witness=witness,
                                  constants={"k_ad": k_ad, "k_de": k_de}))
    else:
        # no declared constants: bounds must exist, i.e. the sampled ratios
        # r/c and -r/cs must stay finite and stop growing when the box doubles
        def ratios(b):
            ax, cc, ss, rr = _sorption_grid(law, b, n)
            with np.errstate(divide="ignore", invalid="ignore"):
                up = np.where(cc > 0, np.maximum(rr, 0.0) / cc, 0.0)
                lo = np.where(ss > 0, np.maximum(-rr, 0.0) / ss, 0.0)
            return ax, up, lo, rr

        ax1, up1, lo1, _ = ratios(bound)
        ax2, up2, lo2, r2 = ratios(2.0 * bound)
        k_ad_hat, k_de_hat = float(up2.max()), float(lo2.max())
        edge_bad = (np.max(law.rate(0.0, ax2)) > VALIDATOR_TOL
                    or np.min(law.rate(ax2, 0.0)) < -VALIDATOR_TOL)
        grows = (up2.max() > GROWTH_FACTOR * up1.max() + VALIDATOR_TOL
                 or lo2.max() > GROWTH_FACTOR * lo1.max() + VALIDATOR_TOL)
        witness = None
        if grows:
            src = lo2 if lo2.max() >= up2.max() else up2
            i, j = np.unravel_index(np.argmax(src), src.shape)
            witness = {"c": float(ax2[i]), "cs": float(ax2[j])}
        ok = np.isfinite(r2).all() and not grows and not edge_bad
        checks.append(CheckResult("linear_bounds", bool(ok), "grid",
                                  detail="smallest sampled constants "
                                         f"k_ad={k_ad_hat:.6g}, k_de={k_de_hat:.6g}",
                                  witness=witness,
                                  constants={"k_ad": k_ad_hat, "k_de": k_de_hat}))
    return ValidationReport("sorption", checks)


def _reaction_sample_points(n_species: int, cfg: ValidationConfig) -> np.ndarray:
    """Deterministic sample set in [0, bound]^N, shape (N, m)."""
    if n_species <= 4:
        axes = [np.linspace(0.0, cfg.bound, cfg.n_samples_nd)] * n_species
        grids = np.meshgrid(*axes, indexing="ij")
        return np.vstack([g.ravel() for g in grids])
    rng = np.random.default_rng(0)
    return rng.uniform(0.0, cfg.bound, size=(n_species, cfg.n_random))


def _quasi_positive_symbolic(network: MassAction) -> tuple[bool, str]:
    """Sufficient condition: every negative monomial of r_i contains y_i."""
    for i, poly in enumerate(network.species_polynomials()):
        for exps, coeff in poly.items():
            if coeff < 0.0 and exps[i] == 0:
                return False, f"species {i + 1} has negative term without its own factor"
    return True, "every consuming term vanishes on the species' zero set"


def validate_reaction(network: ReactionNetwork, cfg: ValidationConfig | None = None) -> ValidationReport:
    """Check differentiability, quasi-positivity and polynomial growth."""
    cfg = cfg or ValidationConfig()
    n = network.n_species
    checks = []

    # smoothness
    if isinstance(network, MassAction):
        checks.append(CheckResult("smoothness", True, "symbolic", detail="polynomial rate"))
    else:
        pts = _reaction_sample_points(n, cfg)
        vals = network.rates(pts)
        jac = network.jacobian(pts)
        ok = bool(np.isfinite(vals).all() and np.isfinite(jac).all())
        checks.append(CheckResult("smoothness", ok, "grid",
                                  detail="rate and first derivatives finite on samples"))

    # quasi-positivity
    symbolic_done = False
    if isinstance(network, MassAction):
        ok, why = _quasi_positive_symbolic(network)
        if ok:
            checks.append(CheckResult("quasi_positivity", True, "symbolic", detail=why))
            symbolic_done = True
    if not symbolic_done:
        witness = None
        for i in range(n):
            pts = _reaction_sample_points(n, cfg)
            pts[i] = 0.0
            vals = network.rates(pts)[i]
            if vals.min() < -VALIDATOR_TOL:
                j = int(np.argmin(vals))
                witness = {"species": i + 1, "y": [float(v) for v in pts[:, j]],
                           "rate": float(vals[j])}
                break
        checks.append(CheckResult("quasi_positivity", witness is None, "grid",
                                  detail="faces of the sample box",
                                  witness=witness))

    # polynomial growth
    if isinstance(network, MassAction):
        deg = network.max_degree()
        pts = _reaction_sample_points(n, cfg)
        norms = np.linalg.norm(pts, axis=0)
        sup = np.abs(network.rates(pts)).max(axis=0)
        m_hat = float(np.max(sup / (1.0 + norms ** max(deg, 1))))
        checks.append(CheckResult("polynomial_growth", deg <= cfg.gamma + 1e-9, "symbolic",
                                  detail=f"max total degree {deg}",
                                  constants={"degree": deg, "m": m_hat}))
    else:
        # log-log slope along rays through the sample box corner
        rng = np.random.default_rng(0)
        dirs = [np.ones(n)] + [rng.uniform(0.1, 1.0, size=n) for _ in range(4)]
        slopes = []
        radii = np.geomspace(cfg.bound / 16.0, cfg.bound, 5)
        for u in dirs:
            u = u / np.linalg.norm(u)
            sup = np.array([np.abs(network.rates(rho * u)).max() for rho in radii])
            sup = np.maximum(sup, 1e-300)
            slope = np.polyfit(np.log(radii), np.log(sup), 1)[0]
            slopes.append(slope)
        gamma_hat = float(max(slopes))
        checks.append(CheckResult("polynomial_growth", gamma_hat <= cfg.gamma + 0.1, "grid",
                                  detail=f"log-log slope estimate {gamma_hat:.3f}",
                                  constants={"degree": gamma_hat}))
    return ValidationReport("reaction", checks)


# --- triangular structure check ---

@dataclass(frozen=True)
class TriangularCandidate:
    Q: np.ndarray
    C: float

    def validate(self, n_species: int) -> None:
        Q = np.asarray(self.Q, dtype=np.float64)
        if Q.shape != (n_species, n_species):
            raise ConfigError(f"Q must be {n_species}x{n_species}, got {Q.shape}")
        if np.any(np.triu(Q, k=1) != 0.0):
            raise ConfigError("Q must be lower triangular")
        if np.any(np.diag(Q) <= 0.0):
            raise ConfigError("Q must have strictly positive diagonal entries")
        if not (self.C > 0.0):
            raise ConfigError(f"claimed bound constant must be positive, got {self.C}")


def check_triangular(network: ReactionNetwork, cand: TriangularCandidate,
                     cfg: ValidationConfig | None = None) -> CheckResult:
    """Verify Q r(y) <= C (1 + sum y) componentwise on the nonneg orthant.

    Mass-action networks are decided symbolically: each row of Q r must have
    no positive monomial of total degree > 1 (sufficient condition); the
    smallest valid constant is the largest positive coefficient among the
    remaining degree <= 1 terms.  Custom networks are sampled on the grid.
    """
    cfg = cfg or ValidationConfig()
    cand.validate(network.n_species)
    Q = np.asarray(cand.Q, dtype=np.float64)
    n = network.n_species

    if isinstance(network, MassAction):
        polys = network.species_polynomials()
        c_min = 0.0
        for i in range(n):
            row: Poly = {}
            for j in range(n):
                if Q[i, j] != 0.0:
                    for exps, coeff in polys[j].items():
                        _poly_add_term(row, exps, Q[i, j] * coeff)
            for exps, coeff in row.items():
                if coeff > VALIDATOR_TOL and sum(exps) > 1:
                    return CheckResult(
                        "triangular_bound", False, "symbolic",
                        detail=f"row {i + 1} keeps a positive degree-{sum(exps)} term",
                        witness={"row": i + 1, "exponents": list(exps), "coefficient": coeff})
                if coeff > 0.0:
                    c_min = max(c_min, coeff)
        ok = cand.C >= c_min - VALIDATOR_TOL
        return CheckResult("triangular_bound", ok, "symbolic",
                           detail="all positive terms have degree <= 1"
                                  + ("" if ok else f"; claimed C below smallest valid {c_min:.6g}"),
                           constants={"c_min": c_min})

    pts = _reaction_sample_points(n, cfg)
    qr = Q @ network.rates(pts)
    envelope = 1.0 + pts.sum(axis=0)
    ratio = np.max(qr / envelope, axis=0)
    c_min = float(max(ratio.max(), 0.0))
    excess = qr - cand.C * envelope
    if excess.max() > VALIDATOR_TOL:
        i, j = np.unravel_index(np.argmax(excess), excess.shape)
        return CheckResult("triangular_bound", False, "grid",
                           detail="sampled bound exceeded",
                           witness={"row": int(i + 1), "y": [float(v) for v in pts[:, j]],
                                    "value": float(qr[i, j])},
                           constants={"c_min": c_min})
    return CheckResult("triangular_bound", True, "grid",
                       detail="holds on the sample grid (not a proof)",
                       constants={"c_min": c_min})
