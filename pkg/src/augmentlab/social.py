"""Social-planner design optimization with the three externalities.

The planner maximizes firm profit plus the externality value
E(W) = lambda*v0*h0*W4^h1*L^A                      (labor mobility)
     + M*sigma*s0*(G(W) - G(w_auto))               (knowledge spillover)
     + (1-tau)*L_f*health_coeff*ln(1+W5)           (health),
all three strictly increasing where their rates are positive. The optimal
per-dimension subsidy equals the externality gradient at the social optimum.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from . import firm, model
from .params import FirmState, ModelParams, ParamError, validate_design

__all__ = [
    "ExternalityParams",
    "WedgeResult",
    "externality_value",
    "optimize_social",
    "underinvestment_wedge",
    "optimal_subsidy",
]

# wedge components within solver noise of zero are reported as exactly zero
_WEDGE_SNAP = 1e-7


@dataclass(frozen=True)
class ExternalityParams:
    """Rates and scales of the mobility, spillover, and health externalities."""

    mobility_rate: float        # lambda, share of workers leaving per period
    mobility_value: float       # v0, currency value per carried skill unit
    skill_gain_coeff: float     # h0 of the learning-loop skill gain h(W4)
    skill_gain_exp: float       # h1, exponent of h(W4) = h0 * W4^h1
    spillover_rate: float       # sigma
    competitor_count: float     # M
    spillover_scale: float      # s0, currency per unit of diffused design
    health_cost_share: float    # tau, share of health costs borne by the firm
    health_coeff: float         # currency per worker in H(W5) = coeff*ln(1+W5)
    total_workers: float        # L_f

    def __post_init__(self):
        for name in ("mobility_rate", "spillover_rate", "health_cost_share"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ParamError(f"{name} must lie in [0, 1]")
        for f in fields(self):
            if getattr(self, f.name) < 0.0:
                raise ParamError(f"{f.name} must be nonnegative")

    def replace(self, **changes) -> "ExternalityParams":
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        kw.update(changes)
        return ExternalityParams(**kw)

    @classmethod
    def zero(cls) -> "ExternalityParams":
        """No externalities: lambda = sigma = 0, tau = 1."""
        return cls(0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0)


@dataclass
class WedgeResult:
    """Private vs. social optima and the under-investment wedge."""

    w_priv: np.ndarray
    w_soc: np.ndarray
    wedge: np.ndarray
    indeterminate: np.ndarray  # True where either optimum is boundary-pinned
    private: firm.OptimizationResult
    social: firm.OptimizationResult


def externality_value(w, xp: ExternalityParams, p: ModelParams, fs: FirmState):
    """External value of a design and its analytic gradient: (value, gradient).

    Every gradient component is nonnegative, strictly positive where the
    corresponding rate is positive (the spillover channel loads on all five
    dimensions through the inner aggregator).
    """
    w = validate_design(w, p)
    la = fs.labor[2]
    mob_scale = xp.mobility_rate * xp.mobility_value * xp.skill_gain_coeff * la
    spill_scale = xp.competitor_count * xp.spillover_rate * xp.spillover_scale
    health_scale = (1.0 - xp.health_cost_share) * xp.total_workers * xp.health_coeff

    g_auto = model.inner_aggregator(p.w_auto, p)
    value = (
        mob_scale * w[3] ** xp.skill_gain_exp
        + spill_scale * (model.inner_aggregator(w, p) - g_auto)
        + health_scale * np.log1p(w[4])
    )
    grad = spill_scale * model.grad_inner_aggregator(w, p)
    if mob_scale > 0.0:
        grad = grad.copy()
        grad[3] += (
            mob_scale * xp.skill_gain_exp * w[3] ** (xp.skill_gain_exp - 1.0)
            if w[3] > 0.0
            else np.inf if xp.skill_gain_exp < 1.0 else mob_scale * xp.skill_gain_exp
        )
    if health_scale > 0.0:
        grad = grad.copy()
        grad[4] += health_scale / (1.0 + w[4])
    return float(value), grad


def optimize_social(
    fs: FirmState,
    p: ModelParams,
    xp: ExternalityParams,
    init=None,
    seed: int = 0,
    grad_tol: float = firm.GRAD_TOL,
    max_iter: int = firm.MAX_ITER,
) -> firm.OptimizationResult:
    """Maximize profit + externality value over the design box.

    Same multistart machinery and result contract as ``optimize_design``;
    the reported ``profit`` is the full social objective and
    ``foc_residual`` its gradient.
    """

    def fun_grad(w):
        labor = firm._resolve_labor(fs, w, p)
        val, out = firm._profit_given_labor(fs, w, labor, p)
        grad, clipped = firm._gradient_given_labor(fs, w, labor, out, p)
        e_val, e_grad = externality_value(w, xp, p, fs)
        return val + e_val, grad + e_grad, clipped

    w, val, iters, _ = firm._optimize_objective(fun_grad, p, init, seed, grad_tol, max_iter)
    val_final, grad_final, _ = fun_grad(w)
    flags = firm._boundary_flags(w, grad_final, np.array(p.w_max))
    interior_ok = bool(np.all(np.abs(grad_final[~flags]) <= grad_tol)) if np.any(~flags) else True
    return firm.OptimizationResult(
        w_star=w,
        d_star=fs.ai_stock,
        labor_star=firm._resolve_labor(fs, w, p) if p.labor_mode == "optimized" else None,
        profit=val_final,
        foc_residual=grad_final,
        iterations=iters,
        converged=interior_ok,
        boundary_flags=flags,
    )


def underinvestment_wedge(
    fs: FirmState, p: ModelParams, xp: ExternalityParams, seed: int = 0
) -> WedgeResult:
    """Componentwise gap W^soc - W^priv.

    Components within 1e-7 of zero are snapped to exactly 0 (solver noise);
    components where either optimum is pinned at the box boundary are
    flagged indeterminate.
    """
    priv = firm.optimize_design(fs, p, seed=seed)
    soc = optimize_social(fs, p, xp, seed=seed)
    wedge = soc.w_star - priv.w_star
    wedge = np.where(np.abs(wedge) < _WEDGE_SNAP, 0.0, wedge)
    indet = priv.boundary_flags | soc.boundary_flags
    return WedgeResult(
        w_priv=priv.w_star,
        w_soc=soc.w_star,
        wedge=wedge,
        indeterminate=indet,
        private=priv,
        social=soc,
    )


def optimal_subsidy(
    fs: FirmState, p: ModelParams, xp: ExternalityParams, seed: int = 0
) -> np.ndarray:
    """Pigouvian per-dimension subsidy: externality gradient at W^soc."""
    soc = optimize_social(fs, p, xp, seed=seed)
    if not soc.converged:
        raise ParamError("social optimum did not converge; no subsidy available")
    _, grad = externality_value(soc.w_star, xp, p, fs)
    return grad
