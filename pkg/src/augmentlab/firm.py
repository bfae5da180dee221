"""Private firm optimization over the workplace design vector.

The firm maximizes P*Y - c_D*D - c_W(W) - sum_j w_j L^j over W in the box
[0, w_max]^5, with AI stock and (by default) labor held fixed. The solver is
a multistart projected quasi-Newton ascent (L-BFGS-B on -profit with analytic
gradients) followed by a Newton polish on the free coordinates so interior
first-order residuals reach ``grad_tol``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize as sopt
from scipy.stats import qmc

from . import model
from .params import FirmState, ModelParams, ParamError, validate_design

__all__ = [
    "GRAD_TOL",
    "OptimizationResult",
    "ThresholdResult",
    "profit",
    "profit_gradient_w",
    "optimize_labor",
    "optimize_design",
    "find_theta_star",
    "marginal_return",
    "comparative_statics",
]

GRAD_TOL = 1e-8
MAX_ITER = 500
PROFIT_TIE_TOL = 1e-12


@dataclass
class OptimizationResult:
    """Outcome of a design optimization.

    ``foc_residual`` is the analytic profit gradient at ``w_star``;
    ``boundary_flags`` marks components pinned at 0 or w_max. ``labor_star``
    is present only in optimized-labor mode.
    """

    w_star: np.ndarray
    d_star: float
    labor_star: np.ndarray | None
    profit: float
    foc_residual: np.ndarray
    iterations: int
    converged: bool
    boundary_flags: np.ndarray


@dataclass
class ThresholdResult:
    """Human-centricity threshold in augmentable-capital share units.

    ``per_dimension_status`` entries are "interior", "always" (human-centric
    at every share), or "never". ``theta_star`` is the max over interior
    per-dimension thresholds (nan when some dimension is "never").
    """

    theta_star: float
    per_dimension_thresholds: np.ndarray
    per_dimension_status: list
    bracketing_interval: tuple
    tolerance: float

    @property
    def degenerate(self) -> str | None:
        if any(s == "never" for s in self.per_dimension_status):
            return "never"
        if all(s == "always" for s in self.per_dimension_status):
            return "always"
        return None


# ---------------------------------------------------------------------------
# profit and gradients


def _resolve_labor(fs: FirmState, w, p: ModelParams):
    if p.labor_mode == "optimized":
        return optimize_labor(fs, w, p)
    return fs.labor


def _profit_given_labor(fs: FirmState, w, labor, p: ModelParams):
    out = model.eval_output(fs.replace(labor=labor), w, p)
    cost_w, _ = model.eval_design_cost(w, p)
    return (
        p.output_price * out.y
        - p.ai_unit_cost * fs.ai_stock
        - cost_w
        - float(p.wages @ labor)
    ), out


def profit(fs: FirmState, w, p: ModelParams) -> float:
    """Firm profit at design ``w``; labor per ``p.labor_mode``."""
    w = validate_design(w, p)
    value, _ = _profit_given_labor(fs, w, _resolve_labor(fs, w, p), p)
    return value


def _gradient_given_labor(fs: FirmState, w, labor, out, p: ModelParams):
    """Analytic profit gradient in W at resolved labor (envelope form)."""
    _, cost_grad = model.eval_design_cost(w, p)
    hp, hc, ha = fs.human_capital
    la = labor[2]
    gg, clipped = model.grad_g(w, ha, p)
    if clipped or out.y == 0.0 or la == 0.0 or fs.ai_stock == 0.0:
        benefit = np.zeros(5)
        clipped_or_degenerate = clipped
    else:
        f3 = p.prod_shares[2] * out.y / out.z3
        benefit = (
            p.output_price
            * f3
            * model.eval_phi0(fs.ai_stock, p)
            * gg
            * la
            * ha
            * fs.ai_stock
        )
        clipped_or_degenerate = False
    return benefit - cost_grad, clipped_or_degenerate


def profit_gradient_w(fs: FirmState, w, p: ModelParams):
    """Analytic gradient of profit in W: (gradient, clipped).

    In the clipped region the augmentation side is flat, so the gradient is
    the pure (negative) cost gradient and ``clipped=True``.
    """
    w = validate_design(w, p)
    labor = _resolve_labor(fs, w, p)
    _, out = _profit_given_labor(fs, w, labor, p)
    return _gradient_given_labor(fs, w, labor, out, p)


def marginal_return(w, k: int, fs: FirmState, p: ModelParams) -> float:
    """Benefit-side marginal return to design dimension ``k`` (no cost term).

    P * F3 * phi0(D) * dg/dW_k * L^A H^A D; zero when D = 0 or the
    multiplier is clipped.
    """
    w = validate_design(w, p)
    labor = _resolve_labor(fs, w, p)
    _, out = _profit_given_labor(fs, w, labor, p)
    grad, _ = _gradient_given_labor(fs, w, labor, out, p)
    _, cost_grad = model.eval_design_cost(w, p)
    return float(grad[k] + cost_grad[k])


# ---------------------------------------------------------------------------
# optimized-labor mode


def _bisect_labor_foc(marginal, wage, hi0=1.0):
    """Largest L with marginal(L) >= wage, via doubling + bisection."""
    if marginal(0.0) <= wage:
        return 0.0
    hi = hi0
    for _ in range(200):
        if marginal(hi) < wage:
            break
        hi *= 2.0
    else:
        raise ParamError("labor demand diverges; check wages and shares")
    lo = 0.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if marginal(mid) >= wage:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def optimize_labor(fs: FirmState, w, p: ModelParams, tol: float = 1e-12) -> np.ndarray:
    """Labor demands solving w_j = P * dY/dL^j, by alternating bisection.

    Routine-cognitive and augmented labor are perfect substitutes inside Z3,
    so only the source with the lower effective unit price is employed (ties
    go to augmented labor).
    """
    w = np.asarray(w, dtype=float)
    hp, hc, ha = fs.human_capital
    phi_unit = model.eval_phi(fs.ai_stock, w, ha, p) * ha * fs.ai_stock
    w_p, w_c, w_a = p.wages
    price_c = w_c / hc if hc > 0 else np.inf
    price_a = w_a / phi_unit if phi_unit > 0 else np.inf
    use_aug = price_a <= price_c
    t1, t2, t3 = p.prod_shares
    z1 = fs.capital_k
    z2_base = p.robot_rate * fs.robot_capital

    def z2_of(lp):
        return lp * hp + z2_base

    def z3_of(lcog):
        return lcog * phi_unit if use_aug else lcog * hc

    lp, lcog = float(fs.labor[0]), float(fs.labor[2 if use_aug else 1])
    for _ in range(200):
        lp_prev, lcog_prev = lp, lcog

        def marg_p(l, lc=lcog):
            y = model.output_from_sectors(z1, z2_of(l), z3_of(lc), p.prod_shares)
            z2 = z2_of(l)
            return np.inf if z2 == 0.0 else p.output_price * t2 * y / z2 * hp

        lp = _bisect_labor_foc(marg_p, w_p, hi0=max(lp, 1.0))

        unit = phi_unit if use_aug else hc
        wage_cog = w_a if use_aug else w_c

        def marg_c(l, lpv=lp):
            y = model.output_from_sectors(z1, z2_of(lpv), z3_of(l), p.prod_shares)
            z3 = z3_of(l)
            return np.inf if z3 == 0.0 else p.output_price * t3 * y / z3 * unit

        lcog = _bisect_labor_foc(marg_c, wage_cog, hi0=max(lcog, 1.0))
        if abs(lp - lp_prev) <= tol * (1.0 + lp) and abs(lcog - lcog_prev) <= tol * (1.0 + lcog):
            break
    labor = np.zeros(3)
    labor[0] = lp
    labor[2 if use_aug else 1] = lcog
    return labor


# ---------------------------------------------------------------------------
# design optimization


def _multistart_points(p: ModelParams, init, seed: int, n_quasi: int = 6):
    starts = []
    if init is not None:
        starts.append(validate_design(init, p))
    starts.append(np.array(p.w_min))
    starts.append(np.array(p.w_auto))
    sob = qmc.Sobol(d=5, scramble=True, seed=seed)
    pts = sob.random_base2(m=3)[:n_quasi]
    starts.extend(pts * p.w_max)
    return starts


def _newton_polish(fun_grad, w, bounds_hi, grad_tol, max_iter=30):
    """Damped Newton on the free-coordinate FOC system; returns (w, iters)."""
    h = 1e-6
    it = 0
    for it in range(1, max_iter + 1):
        _, grad, clipped = fun_grad(w)
        free = ~(((w <= 1e-12) & (grad <= 0.0)) | ((w >= bounds_hi - 1e-12) & (grad >= 0.0)))
        if clipped or not np.any(free):
            break
        gf = grad[free]
        if np.max(np.abs(gf)) <= 0.1 * grad_tol:
            break
        idx = np.flatnonzero(free)
        jac = np.empty((idx.size, idx.size))
        for c, k in enumerate(idx):
            e = np.zeros(5)
            step = h * max(1.0, abs(w[k]))
            e[k] = step
            _, gp, cp = fun_grad(np.clip(w + e, 0.0, bounds_hi))
            _, gm, cm = fun_grad(np.clip(w - e, 0.0, bounds_hi))
            if cp or cm:
                return w, it
            jac[:, c] = (gp[idx] - gm[idx]) / (2.0 * step)
        try:
            step_vec = np.linalg.solve(jac, -gf)
        except np.linalg.LinAlgError:
            break
        scale = 1.0
        base_norm = np.max(np.abs(gf))
        for _ in range(30):
            w_try = w.copy()
            w_try[idx] = np.clip(w[idx] + scale * step_vec, 0.0, bounds_hi[idx])
            _, g_try, c_try = fun_grad(w_try)
            if not c_try and np.max(np.abs(g_try[idx])) < base_norm:
                w = w_try
                break
            scale *= 0.5
        else:
            break
    return w, it


def _ascend(fun_grad, w0, bounds_hi, grad_tol, max_iter):
    """Projected quasi-Newton ascent from one start; returns (w, value, iters, ok)."""

    def neg(w):
        val, grad, _ = fun_grad(w)
        return -val, -grad

    res = sopt.minimize(
        neg,
        w0,
        jac=True,
        method="L-BFGS-B",
        bounds=[(0.0, hi) for hi in bounds_hi],
        options={"maxiter": max_iter, "ftol": 1e-16, "gtol": 1e-10, "maxcor": 20},
    )
    w = np.clip(res.x, 0.0, bounds_hi)
    w, polish_iters = _newton_polish(fun_grad, w, bounds_hi, grad_tol)
    val, _, _ = fun_grad(w)
    return w, val, int(res.nit) + polish_iters, bool(res.success or res.status == 1)


def _optimize_objective(
    fun_grad,
    p: ModelParams,
    init=None,
    seed: int = 0,
    grad_tol: float = GRAD_TOL,
    max_iter: int = MAX_ITER,
):
    """Multistart driver shared by the private and social problems."""
    bounds_hi = np.array(p.w_max)
    candidates = []
    total_iters = 0
    for w0 in _multistart_points(p, init, seed):
        w, val, iters, ok = _ascend(fun_grad, w0, bounds_hi, grad_tol, max_iter)
        total_iters += iters
        candidates.append((val, w, ok))
    best_val = max(c[0] for c in candidates)
    tie = [c for c in candidates if c[0] >= best_val - PROFIT_TIE_TOL * max(1.0, abs(best_val))]
    tie.sort(key=lambda c: tuple(c[1]))
    val, w, ok = tie[0]
    return w, val, total_iters, ok


def _boundary_flags(w, grad, bounds_hi):
    at_lo = (w <= 1e-10) & (grad <= 0.0)
    at_hi = (w >= bounds_hi - 1e-10) & (grad >= 0.0)
    return at_lo | at_hi


def optimize_design(
    fs: FirmState,
    p: ModelParams,
    init=None,
    seed: int = 0,
    grad_tol: float = GRAD_TOL,
    max_iter: int = MAX_ITER,
) -> OptimizationResult:
    """Maximize profit over the design box, multistart, deterministic per seed.

    Default starts: w_min, w_auto, and 6 scrambled-Sobol points (plus ``init``
    when given). Multistart optima tying within 1e-12 relative profit are
    broken by lexicographically smallest design.
    """

    def fun_grad(w):
        labor = _resolve_labor(fs, w, p)
        val, out = _profit_given_labor(fs, w, labor, p)
        grad, clipped = _gradient_given_labor(fs, w, labor, out, p)
        return val, grad, clipped

    w, val, iters, _ = _optimize_objective(fun_grad, p, init, seed, grad_tol, max_iter)
    labor = _resolve_labor(fs, w, p)
    _, out = _profit_given_labor(fs, w, labor, p)
    grad, _ = _gradient_given_labor(fs, w, labor, out, p)
    flags = _boundary_flags(w, grad, np.array(p.w_max))
    # convergence is judged by the first-order conditions themselves:
    # interior residuals within tolerance, boundary components sign-consistent
    interior_ok = bool(np.all(np.abs(grad[~flags]) <= grad_tol)) if np.any(~flags) else True
    return OptimizationResult(
        w_star=w,
        d_star=fs.ai_stock,
        labor_star=labor if p.labor_mode == "optimized" else None,
        profit=val,
        foc_residual=grad,
        iterations=iters,
        converged=interior_ok,
        boundary_flags=flags,
    )


# ---------------------------------------------------------------------------
# human-centricity threshold


def _share_to_ha(share: float, hc: float) -> float:
    return share * hc / (1.0 - share)


def find_theta_star(
    fs_template: FirmState,
    p: ModelParams,
    tol: float = 1e-4,
    seed: int = 0,
    share_limits: tuple = (1e-3, 1.0 - 1e-3),
) -> ThresholdResult:
    """Threshold share above which the optimal design is human-centric.

    For each dimension k, bisects the augmentable-capital share
    s = H^A/(H^A + H^C) (H^C fixed from ``fs_template``) for the event
    W*_k(s) >= w_auto_k; theta* is the max of the per-dimension thresholds.
    Dimensions whose event holds at every probed share (or none) come back
    with status "always" ("never") instead of an error.
    """
    hc = fs_template.human_capital[1]
    if hc <= 0:
        raise ParamError("fs_template needs positive routine-cognitive capital H^C")
    cache: dict = {}

    def w_star(s: float) -> np.ndarray:
        if s not in cache:
            cache[s] = optimize_design(fs_template.with_ha(_share_to_ha(s, hc)), p, seed=seed)
        return cache[s].w_star

    s_lo_all, s_hi_all = share_limits
    thresholds = np.full(5, np.nan)
    statuses = []
    brackets = []
    ev_lo_all = w_star(s_lo_all) >= p.w_auto
    ev_hi_all = w_star(s_hi_all) >= p.w_auto
    for k in range(5):
        if ev_lo_all[k]:
            thresholds[k] = 0.0
            statuses.append("always")
            brackets.append((0.0, s_lo_all))
            continue
        if not ev_hi_all[k]:
            statuses.append("never")
            brackets.append((s_hi_all, 1.0))
            continue
        lo, hi = s_lo_all, s_hi_all
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if w_star(mid)[k] >= p.w_auto[k]:
                hi = mid
            else:
                lo = mid
        thresholds[k] = 0.5 * (lo + hi)
        statuses.append("interior")
        brackets.append((lo, hi))
    if any(s == "never" for s in statuses):
        theta, bracket = np.nan, (s_hi_all, 1.0)
    else:
        kmax = int(np.nanargmax(thresholds))
        theta, bracket = float(thresholds[kmax]), brackets[kmax]
    return ThresholdResult(
        theta_star=theta,
        per_dimension_thresholds=thresholds,
        per_dimension_status=statuses,
        bracketing_interval=bracket,
        tolerance=tol,
    )


# ---------------------------------------------------------------------------
# comparative statics


def _reoptimize_perturbed(fs, p, which, k, direction, rel, seed):
    fs2, p2 = fs, p
    if which == "D":
        fs2 = fs.replace(ai_stock=fs.ai_stock * (1.0 + direction * rel))
    elif which == "HA":
        fs2 = fs.with_ha(fs.human_capital[2] * (1.0 + direction * rel))
    elif which == "cost_k":
        cc = np.array(p.cost_coeffs)
        cc[k] *= 1.0 + direction * rel
        p2 = p.replace(cost_coeffs=cc)
    elif which == "P":
        p2 = p.replace(output_price=p.output_price * (1.0 + direction * rel))
    elif which == "wage_A":
        wg = np.array(p.wages)
        wg[2] *= 1.0 + direction * rel
        p2 = p.replace(wages=wg)
    else:
        raise ParamError(f"unknown comparative-statics target '{which}'")
    return optimize_design(fs2, p2, seed=seed).w_star


# |effect| below this fraction of the dominant effect is classified as zero
_SIGN_BAND = 0.05


def _signs(delta: np.ndarray, boundary: np.ndarray) -> np.ndarray:
    band = max(1e-7, _SIGN_BAND * np.max(np.abs(delta)))
    out = np.where(np.abs(delta) < band, 0.0, np.sign(delta))
    return np.where(boundary, np.nan, out)


def comparative_statics(
    fs: FirmState, p: ModelParams, which: str, rel: float = 0.01, seed: int = 0
):
    """Signs of dW*/dx by +-1% re-optimization (central difference of the argmax).

    Returns a (5,) sign vector for which in {"D", "HA", "P", "wage_A"} and a
    (5, 5) matrix (perturbed dimension by design dimension) for "cost_k".
    Entries are +1/-1/0, with nan where the base optimum is pinned at the
    box boundary (indeterminate). "wage_A" requires labor_mode="optimized".
    """
    if which == "wage_A" and p.labor_mode != "optimized":
        raise ParamError("wage_A comparative statics require labor_mode='optimized'")
    base = optimize_design(fs, p, seed=seed)
    boundary = base.boundary_flags
    if which == "cost_k":
        signs = np.empty((5, 5))
        for k in range(5):
            w_up = _reoptimize_perturbed(fs, p, which, k, +1, rel, seed)
            w_dn = _reoptimize_perturbed(fs, p, which, k, -1, rel, seed)
            signs[k] = _signs(w_up - w_dn, boundary)
        return signs
    w_up = _reoptimize_perturbed(fs, p, which, None, +1, rel, seed)
    w_dn = _reoptimize_perturbed(fs, p, which, None, -1, rel, seed)
    return _signs(w_up - w_dn, boundary)
