"""Energy-constrained joint optimization of (W, D) with its KKT shadow price.

The AI energy footprint is E(D, W1) = e0*D*(1 + e1*W1): both more deployment
and more interface transparency cost energy. Under a budget E <= E_bar the
firm's modified first-order condition for W1 carries the shadow price mu on
the energy side, so a binding budget pushes W1 below its unconstrained
optimum. The solver wraps the unconstrained ascent in augmented-Lagrangian
multiplier updates and polishes the active KKT system with Newton steps.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from . import firm, model
from .params import FirmState, ModelParams, ParamError

__all__ = [
    "EnergyParams",
    "ConstrainedResult",
    "energy",
    "optimize_constrained",
    "optimize_joint_unconstrained",
    "tradeoff_frontier",
]

_KKT_TOL = 1e-8


@dataclass(frozen=True)
class EnergyParams:
    """Energy coefficients and the sustainability budget."""

    base_rate: float          # e0, energy per unit of AI stock
    transparency_rate: float  # e1, interface-transparency loading
    budget: float             # E_bar

    def __post_init__(self):
        if self.base_rate <= 0.0 or self.transparency_rate < 0.0 or self.budget <= 0.0:
            raise ParamError("need base_rate > 0, transparency_rate >= 0, budget > 0")

    def replace(self, **changes) -> "EnergyParams":
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        kw.update(changes)
        return EnergyParams(**kw)


@dataclass
class ConstrainedResult:
    """Energy-constrained optimum with its KKT certificate."""

    w_star: np.ndarray
    d_star: float
    shadow_price: float
    energy_used: float
    binding: bool
    profit: float
    kkt_residuals: dict
    converged: bool


def energy(d, w1, ep: EnergyParams):
    """AI energy use E(D, W1) = e0*D*(1 + e1*W1), increasing in both."""
    d = np.asarray(d, dtype=float)
    w1 = np.asarray(w1, dtype=float)
    if np.any(d < 0.0) or np.any(w1 < 0.0):
        raise ParamError("energy arguments must be nonnegative")
    out = ep.base_rate * d * (1.0 + ep.transparency_rate * w1)
    return float(out) if out.ndim == 0 else out


def _energy_grad(d, w1, ep: EnergyParams):
    """(dE/dW1, dE/dD)."""
    return ep.base_rate * ep.transparency_rate * d, ep.base_rate * (1.0 + ep.transparency_rate * w1)


def _joint_value_grad(x, fs: FirmState, p: ModelParams):
    """Profit and gradient in the joint variable x = (W1..W5, D)."""
    w, d = x[:5], x[5]
    fs_d = fs.replace(ai_stock=d)
    labor = firm._resolve_labor(fs_d, w, p)
    val, out = firm._profit_given_labor(fs_d, w, labor, p)
    grad_w, clipped = firm._gradient_given_labor(fs_d, w, labor, out, p)
    # dZ3/dD = L^A H^A (phi0'(D) D + phi0(D)) g
    hp, hc, ha = fs.human_capital
    la = labor[2]
    if out.y == 0.0 or la == 0.0:
        grad_d = -p.ai_unit_cost
    else:
        f3 = p.prod_shares[2] * out.y / out.z3
        phi0 = model.eval_phi0(d, p)
        dphi0 = (p.phi0_bound - 1.0) * p.phi0_rate * np.exp(-p.phi0_rate * d)
        gval = model.eval_g(w, ha, p)
        dz3_dd = la * ha * gval * (dphi0 * d + phi0)
        grad_d = p.output_price * f3 * dz3_dd - p.ai_unit_cost
    return val, np.concatenate([grad_w, [grad_d]]), clipped


def _ascend_joint(fun_grad, x0, bounds):
    from scipy import optimize as sopt

    def neg(x):
        v, g, _ = fun_grad(x)
        return -v, -g

    res = sopt.minimize(
        neg,
        x0,
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={"maxiter": 800, "ftol": 1e-16, "gtol": 1e-10, "maxcor": 20},
    )
    return np.clip(res.x, [b[0] for b in bounds], [b[1] for b in bounds])


def optimize_joint_unconstrained(
    fs: FirmState, p: ModelParams, seed: int = 0, d_hi: float | None = None
):
    """Unconstrained joint (W, D) profit maximum; returns (w, d, profit)."""
    if d_hi is None:
        d_hi = 50.0 * max(fs.ai_stock, 1.0)
    bounds = [(0.0, float(h)) for h in p.w_max] + [(0.0, d_hi)]
    best = None
    for w0 in firm._multistart_points(p, None, seed):
        for d0 in (max(fs.ai_stock, 0.5), 0.25 * d_hi):
            x0 = np.concatenate([w0, [d0]])
            x = _ascend_joint(lambda x: _joint_value_grad(x, fs, p), x0, bounds)
            v, _, _ = _joint_value_grad(x, fs, p)
            if best is None or v > best[0] + 1e-12 or (
                abs(v - best[0]) <= 1e-12 * max(1.0, abs(best[0])) and tuple(x) < tuple(best[1])
            ):
                best = (v, x)
    v, x = best
    x = _polish_unconstrained(x, fs, p, bounds)
    v, _, _ = _joint_value_grad(x, fs, p)
    return x[:5], float(x[5]), float(v)


def _polish_unconstrained(x, fs, p, bounds, tol=1e-10, iters=40):
    """Newton on the free-coordinate FOC of the joint problem."""
    hi = np.array([b[1] for b in bounds])
    for _ in range(iters):
        _, g, clipped = _joint_value_grad(x, fs, p)
        free = ~(((x <= 1e-12) & (g <= 0.0)) | ((x >= hi - 1e-12) & (g >= 0.0)))
        if clipped or not free.any() or np.max(np.abs(g[free])) <= tol:
            break
        idx = np.flatnonzero(free)
        jac = np.empty((idx.size, idx.size))
        for c, k in enumerate(idx):
            e = np.zeros(x.size)
            step = 1e-6 * max(1.0, abs(x[k]))
            e[k] = step
            _, gp, _ = _joint_value_grad(np.clip(x + e, 0.0, hi), fs, p)
            _, gm, _ = _joint_value_grad(np.clip(x - e, 0.0, hi), fs, p)
            jac[:, c] = (gp[idx] - gm[idx]) / (2.0 * step)
        try:
            dx = np.linalg.solve(jac, -g[idx])
        except np.linalg.LinAlgError:
            break
        x_new = x.copy()
        x_new[idx] = np.clip(x[idx] + dx, 0.0, hi[idx])
        x = x_new
    return x


def _kkt_polish(x, mu, fs, p, ep, bounds_hi, iters=40):
    """Newton on the binding KKT system [grad L = 0, E = budget] in (x_free, mu)."""
    for _ in range(iters):
        _, g, _ = _joint_value_grad(x, fs, p)
        de_dw1, de_dd = _energy_grad(x[5], x[0], ep)
        grad_l = g.copy()
        grad_l[0] -= mu * de_dw1
        grad_l[5] -= mu * de_dd
        free = ~(((x <= 1e-12) & (grad_l <= 0.0)) | ((x >= bounds_hi - 1e-12) & (grad_l >= 0.0)))
        idx = np.flatnonzero(free)
        c_viol = energy(x[5], x[0], ep) - ep.budget
        resid = np.concatenate([grad_l[idx], [c_viol]])
        if np.max(np.abs(resid)) <= 1e-12:
            break
        n = idx.size
        jac = np.empty((n + 1, n + 1))
        for c, k in enumerate(idx):
            e = np.zeros(6)
            step = 1e-6 * max(1.0, abs(x[k]))
            e[k] = step
            xp_, xm_ = np.clip(x + e, 0.0, bounds_hi), np.clip(x - e, 0.0, bounds_hi)
            _, gp, _ = _joint_value_grad(xp_, fs, p)
            _, gm, _ = _joint_value_grad(xm_, fs, p)
            dp1, dd1 = _energy_grad(xp_[5], xp_[0], ep)
            dp2, dd2 = _energy_grad(xm_[5], xm_[0], ep)
            glp, glm = gp.copy(), gm.copy()
            glp[0] -= mu * dp1
            glp[5] -= mu * dd1
            glm[0] -= mu * dp2
            glm[5] -= mu * dd2
            jac[:n, c] = (glp[idx] - glm[idx]) / (2.0 * step)
            jac[n, c] = (energy(xp_[5], xp_[0], ep) - energy(xm_[5], xm_[0], ep)) / (2.0 * step)
        de_dw1, de_dd = _energy_grad(x[5], x[0], ep)
        dmu_col = np.zeros(n + 1)
        for c, k in enumerate(idx):
            if k == 0:
                dmu_col[c] = -de_dw1
            elif k == 5:
                dmu_col[c] = -de_dd
        jac[:, n] = dmu_col
        try:
            step_vec = np.linalg.solve(jac, -resid)
        except np.linalg.LinAlgError:
            break
        x_new = x.copy()
        x_new[idx] = np.clip(x[idx] + step_vec[:n], 0.0, bounds_hi[idx])
        x, mu = x_new, mu + step_vec[n]
    return x, mu


def optimize_constrained(
    fs: FirmState,
    p: ModelParams,
    ep: EnergyParams,
    seed: int = 0,
    max_outer: int = 60,
) -> ConstrainedResult:
    """Maximize profit over (W, D) subject to E(D, W1) <= budget.

    Augmented-Lagrangian multiplier updates wrap the joint ascent; when the
    constraint binds, a Newton polish drives the KKT residual bundle
    (stationarity, primal/dual feasibility, complementary slackness) below
    1e-8. D is jointly optimized here, unlike the fixed-D firm module.
    """
    w_unc, d_unc, profit_unc = optimize_joint_unconstrained(fs, p, seed=seed)
    e_unc = energy(d_unc, w_unc[0], ep)
    bounds_hi = np.concatenate([np.asarray(p.w_max, dtype=float), [50.0 * max(fs.ai_stock, 1.0)]])
    if e_unc <= ep.budget + 1e-12:
        x = np.concatenate([w_unc, [d_unc]])
        res = _kkt_bundle(x, 0.0, fs, p, ep)
        return ConstrainedResult(
            w_star=w_unc,
            d_star=d_unc,
            shadow_price=0.0,
            energy_used=float(e_unc),
            binding=False,
            profit=profit_unc,
            kkt_residuals=res,
            converged=max(res.values()) <= _KKT_TOL,
        )

    mu, rho = 0.0, max(1.0, abs(profit_unc) / max(ep.budget, 1.0))
    x = np.concatenate([w_unc, [d_unc]])
    bounds = [(0.0, float(h)) for h in bounds_hi]
    converged_outer = False
    for _ in range(max_outer):
        def al_fun(xv, mu=mu, rho=rho):
            v, g, clipped = _joint_value_grad(xv, fs, p)
            c = energy(xv[5], xv[0], ep) - ep.budget
            t = mu + rho * c
            if t > 0.0:
                v -= (t * t - mu * mu) / (2.0 * rho)
                de_dw1, de_dd = _energy_grad(xv[5], xv[0], ep)
                g = g.copy()
                g[0] -= t * de_dw1
                g[5] -= t * de_dd
            else:
                v += mu * mu / (2.0 * rho)
            return v, g, clipped

        x = _ascend_joint(al_fun, x, bounds)
        c_viol = energy(x[5], x[0], ep) - ep.budget
        mu = max(0.0, mu + rho * c_viol)
        if abs(c_viol) <= 1e-10:
            converged_outer = True
            break
        rho *= 2.0
        if rho > 1e16:
            break

    x, mu = _kkt_polish(x, mu, fs, p, ep, bounds_hi)
    if mu < 0.0:
        mu = 0.0
    v, _, _ = _joint_value_grad(x, fs, p)
    res = _kkt_bundle(x, mu, fs, p, ep)
    e_used = energy(x[5], x[0], ep)
    return ConstrainedResult(
        w_star=x[:5],
        d_star=float(x[5]),
        shadow_price=float(mu),
        energy_used=float(e_used),
        binding=True,
        profit=float(v),
        kkt_residuals=res,
        converged=bool(converged_outer or abs(e_used - ep.budget) <= 1e-8)
        and max(res.values()) <= _KKT_TOL,
    )


def _kkt_bundle(x, mu, fs, p, ep) -> dict:
    """Max-abs residual of each KKT condition at (x, mu)."""
    _, g, _ = _joint_value_grad(x, fs, p)
    de_dw1, de_dd = _energy_grad(x[5], x[0], ep)
    grad_l = g.copy()
    grad_l[0] -= mu * de_dw1
    grad_l[5] -= mu * de_dd
    hi = np.concatenate([np.asarray(p.w_max, dtype=float), [np.inf]])
    interior = (x > 1e-12) & (x < hi - 1e-12)
    stationarity = float(np.max(np.abs(grad_l[interior]))) if interior.any() else 0.0
    e_used = energy(x[5], x[0], ep)
    return {
        "stationarity": stationarity,
        "primal": float(max(0.0, e_used - ep.budget)),
        "dual": float(max(0.0, -mu)),
        "complementarity": float(abs(mu * (ep.budget - e_used))),
    }


def tradeoff_frontier(fs: FirmState, p: ModelParams, ep_grid, seed: int = 0):
    """Per-budget constrained optima along an ascending budget grid.

    Returns a list of dicts with keys (budget, w1, d, profit, mu, binding);
    profit is nondecreasing and mu nonincreasing where binding.
    """
    budgets = [ep.budget for ep in ep_grid]
    if any(b2 <= b1 for b1, b2 in zip(budgets, budgets[1:])):
        raise ParamError("budgets must be strictly ascending")
    rows = []
    for ep in ep_grid:
        r = optimize_constrained(fs, p, ep, seed=seed)
        rows.append(
            {
                "budget": ep.budget,
                "w1": float(r.w_star[0]),
                "d": r.d_star,
                "profit": r.profit,
                "mu": r.shadow_price,
                "binding": r.binding,
            }
        )
    return rows
