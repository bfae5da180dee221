"""The coupled (W, H^A) dynamical system and its equilibrium structure.

Firms adjust design toward the current optimum, dW/dt = alpha*(W*(ha) - W),
while augmentable capital accumulates and depreciates,
dha/dt = beta(W)*I_edu - delta(W)*ha, with beta loading on task exposure and
learning loops (W3, W4) and delta falling in the design mean. Steady states
are the roots of Psi(ha) = beta(W*(ha))*I_edu/delta(W*(ha)) - ha; the sign
of Psi' at a root and the Jacobian spectrum of the full 6-dim system give
two independent stability classifications that must agree.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from . import firm, kernels
from .params import FirmState, ModelParams, ParamError

__all__ = [
    "DynamicsParams",
    "WStarMap",
    "Equilibrium",
    "EquilibriumSet",
    "Trajectory",
    "PolicyOutcome",
    "w_star_map",
    "default_ha_grid",
    "accumulation_rate",
    "depreciation_rate",
    "psi",
    "find_steady_states",
    "integrate_trajectory",
    "integrate_batch",
    "policy_experiment",
]


@dataclass(frozen=True)
class DynamicsParams:
    """Adjustment, accumulation, and depreciation parameters of the system."""

    adjust_speed: float    # alpha
    edu_investment: float  # I_edu
    beta0: float
    beta3: float
    beta4: float
    delta0: float
    delta_slope: float
    time_step: float
    horizon: float

    def __post_init__(self):
        if self.adjust_speed <= 0.0 or self.edu_investment < 0.0:
            raise ParamError("adjust_speed must be positive, edu_investment nonnegative")
        if self.beta0 <= 0.0 or self.beta3 < 0.0 or self.beta4 < 0.0:
            raise ParamError("beta0 must be positive; beta3, beta4 nonnegative")
        if self.delta0 <= 0.0 or self.delta_slope < 0.0:
            raise ParamError("delta0 must be positive, delta_slope nonnegative")
        if self.time_step <= 0.0 or self.horizon <= 0.0:
            raise ParamError("time_step and horizon must be positive")

    def replace(self, **changes) -> "DynamicsParams":
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        kw.update(changes)
        return DynamicsParams(**kw)

    @property
    def max_stable_step(self) -> float:
        """Step-size heuristic bound 0.1 / max(alpha, delta0)."""
        return 0.1 / max(self.adjust_speed, self.delta0)


def accumulation_rate(w, dp: DynamicsParams):
    """H^A formation rate beta(W) = beta0*(1 + beta3*W3 + beta4*W4)."""
    w = np.asarray(w, dtype=float)
    return dp.beta0 * (1.0 + dp.beta3 * w[..., 2] + dp.beta4 * w[..., 3])


def depreciation_rate(w, dp: DynamicsParams):
    """H^A depreciation rate delta(W) = delta0 / (1 + delta_slope*mean(W))."""
    w = np.asarray(w, dtype=float)
    return dp.delta0 / (1.0 + dp.delta_slope * w.mean(axis=-1))


# ---------------------------------------------------------------------------
# the W*(H^A) map


def _pava_nondecreasing(y: np.ndarray) -> np.ndarray:
    """Pool-adjacent-violators: least-squares nondecreasing fit of ``y``."""
    vals = list(map(float, y))
    weights = [1.0] * len(vals)
    i = 0
    while i < len(vals) - 1:
        if vals[i] > vals[i + 1]:
            merged = (vals[i] * weights[i] + vals[i + 1] * weights[i + 1]) / (
                weights[i] + weights[i + 1]
            )
            vals[i] = merged
            weights[i] += weights[i + 1]
            del vals[i + 1], weights[i + 1]
            i = max(i - 1, 0)
        else:
            i += 1
    out = np.empty(len(y), dtype=float)
    pos = 0
    for v, wt in zip(vals, weights):
        out[pos : pos + int(wt)] = v
        pos += int(wt)
    return out


@dataclass
class WStarMap:
    """Piecewise-linear interpolant of the componentwise optimal design W*(H^A).

    Node values are firm-level optima, isotonic-repaired per component when
    the raw solves are not already monotone (``repaired`` records which
    components were touched). Evaluation clamps to the grid range.
    """

    ha_grid: np.ndarray
    w_values: np.ndarray  # (n, 5)
    repaired: np.ndarray  # (5,) bool

    def __call__(self, ha) -> np.ndarray:
        ha = np.atleast_1d(np.asarray(ha, dtype=float))
        out = np.empty((ha.size, 5))
        for k in range(5):
            out[:, k] = np.interp(ha, self.ha_grid, self.w_values[:, k])
        return out[0] if out.shape[0] == 1 else out

    def slope(self, ha: float, h: float = 1e-6) -> np.ndarray:
        """dW*/dha by central difference of the interpolant."""
        lo = max(float(self.ha_grid[0]), ha - h)
        hi = min(float(self.ha_grid[-1]), ha + h)
        return (self(hi) - self(lo)) / (hi - lo)

    @property
    def range(self) -> tuple:
        return float(self.ha_grid[0]), float(self.ha_grid[-1])


def default_ha_grid(dp: DynamicsParams, p: ModelParams, n: int = 81) -> np.ndarray:
    """Grid from 0 to 1.5x the largest attainable steady-state H^A."""
    w_hi = np.asarray(p.w_max, dtype=float)
    ha_hi = 1.5 * float(accumulation_rate(w_hi, dp)) * dp.edu_investment / float(
        depreciation_rate(w_hi, dp)
    )
    return np.linspace(0.0, max(ha_hi, 1.0), n)


def w_star_map(
    p: ModelParams, fs_template: FirmState, ha_grid, seed: int = 0
) -> WStarMap:
    """Tabulate W*(H^A) by firm-level optimization on an ascending grid.

    Each node solve warm-starts from its left neighbor in addition to the
    standard multistart. A non-converged node solve raises, naming the grid
    point.
    """
    ha_grid = np.asarray(ha_grid, dtype=float)
    if ha_grid.ndim != 1 or ha_grid.size < 50 or np.any(np.diff(ha_grid) <= 0.0):
        raise ParamError("ha_grid must be ascending with at least 50 points")
    w_vals = np.empty((ha_grid.size, 5))
    prev = None
    for i, ha in enumerate(ha_grid):
        res = firm.optimize_design(fs_template.with_ha(float(ha)), p, init=prev, seed=seed)
        if not res.converged:
            raise ParamError(f"design solve failed to converge at grid point ha={ha!r}")
        w_vals[i] = res.w_star
        prev = res.w_star
    repaired = np.zeros(5, dtype=bool)
    for k in range(5):
        col = w_vals[:, k]
        if np.any(np.diff(col) < 0.0):
            w_vals[:, k] = _pava_nondecreasing(col)
            repaired[k] = True
    return WStarMap(ha_grid=ha_grid, w_values=w_vals, repaired=repaired)


# ---------------------------------------------------------------------------
# steady states


def psi(ha, p: ModelParams, dp: DynamicsParams, w_map: WStarMap):
    """Net H^A accumulation at the design-slaved steady state.

    beta(W*(ha)) * I_edu / delta(W*(ha)) - ha; roots are equilibria. Raises
    outside the interpolation range of ``w_map``.
    """
    ha_arr = np.atleast_1d(np.asarray(ha, dtype=float))
    lo, hi = w_map.range
    if np.any(ha_arr < lo) or np.any(ha_arr > hi):
        raise ParamError(f"ha outside the W* interpolation range [{lo}, {hi}]")
    w = np.atleast_2d(w_map(ha_arr))
    out = accumulation_rate(w, dp) * dp.edu_investment / depreciation_rate(w, dp) - ha_arr
    return float(out[0]) if np.isscalar(ha) or np.asarray(ha).ndim == 0 else out


@dataclass
class Equilibrium:
    ha: float
    w: np.ndarray
    stability: str  # "stable" | "unstable"
    psi_slope: float
    jacobian_eigen_max_real: float


@dataclass
class EquilibriumSet:
    """Steady states sorted ascending in H^A, with the unstable threshold."""

    equilibria: list
    unstable_threshold: float | None

    def stable(self):
        return [e for e in self.equilibria if e.stability == "stable"]


def _system_jacobian(ha, p, dp, w_map):
    """6x6 Jacobian of (dW/dt, dha/dt) at the slaved point (W*(ha), ha)."""
    w = w_map(float(ha))
    alpha = dp.adjust_speed
    jac = np.zeros((6, 6))
    jac[:5, :5] = -alpha * np.eye(5)
    jac[:5, 5] = alpha * w_map.slope(float(ha))
    mean_w = w.mean()
    ddelta_dw = -dp.delta0 * dp.delta_slope / (5.0 * (1.0 + dp.delta_slope * mean_w) ** 2)
    dbeta_dw = np.zeros(5)
    dbeta_dw[2] = dp.beta0 * dp.beta3
    dbeta_dw[3] = dp.beta0 * dp.beta4
    jac[5, :5] = dp.edu_investment * dbeta_dw - ha * ddelta_dw
    jac[5, 5] = -float(depreciation_rate(w, dp))
    return jac


def find_steady_states(
    p: ModelParams,
    dp: DynamicsParams,
    w_map: WStarMap,
    ha_range: tuple | None = None,
    n_scan: int = 2000,
    tol: float = 1e-10,
) -> EquilibriumSet:
    """Locate and classify all steady states in ``ha_range``.

    Sign-change brackets on an ``n_scan``-point grid are bisected to ``tol``.
    Stability is classified twice, by the sign of Psi' (central difference)
    and by the maximal real part of the 6-dim Jacobian spectrum; a
    disagreement raises RuntimeError rather than being silently resolved.
    """
    lo, hi = ha_range if ha_range is not None else w_map.range
    grid = np.linspace(lo, hi, n_scan)
    vals = psi(grid, p, dp, w_map)
    roots = []
    for i in range(n_scan - 1):
        a, b, fa, fb = grid[i], grid[i + 1], vals[i], vals[i + 1]
        if fa == 0.0:
            roots.append(float(a))
            continue
        if fa * fb < 0.0:
            while b - a > tol:
                mid = 0.5 * (a + b)
                fm = psi(mid, p, dp, w_map)
                if fm == 0.0:
                    a = b = mid
                    break
                if fa * fm < 0.0:
                    b = mid
                else:
                    a, fa = mid, fm
            roots.append(0.5 * (a + b))
    if vals[-1] == 0.0:
        roots.append(float(grid[-1]))
    merged = []
    for r in roots:
        if not merged or r - merged[-1] > 1e-8:
            merged.append(r)

    eqs = []
    h_slope = max(1e-7, 1e-6 * (hi - lo))
    for r in merged:
        a = max(lo, r - h_slope)
        b = min(hi, r + h_slope)
        slope = (psi(b, p, dp, w_map) - psi(a, p, dp, w_map)) / (b - a)
        eig_max = float(np.max(np.linalg.eigvals(_system_jacobian(r, p, dp, w_map)).real))
        stable_psi = slope < 0.0
        stable_jac = eig_max < 0.0
        if stable_psi != stable_jac:
            raise RuntimeError(
                f"stability classification disagreement at ha={r:.6g} "
                f"(psi'={slope:.3g}, max Re eig={eig_max:.3g}); model inconsistency"
            )
        eqs.append(
            Equilibrium(
                ha=float(r),
                w=w_map(float(r)),
                stability="stable" if stable_psi else "unstable",
                psi_slope=float(slope),
                jacobian_eigen_max_real=eig_max,
            )
        )
    unstable = [e.ha for e in eqs if e.stability == "unstable"]
    return EquilibriumSet(equilibria=eqs, unstable_threshold=unstable[0] if unstable else None)


# ---------------------------------------------------------------------------
# integration


@dataclass
class Trajectory:
    t: np.ndarray
    w: np.ndarray   # (T, 5)
    ha: np.ndarray  # (T,)


def _check_step(dp: DynamicsParams, dt: float):
    if dt > dp.max_stable_step:
        raise ParamError(
            f"time step {dt} too large for stability; use <= {dp.max_stable_step:.6g}"
        )


def integrate_batch(
    w0,
    ha0,
    p: ModelParams,
    dp: DynamicsParams,
    w_map: WStarMap,
    horizon: float | None = None,
    record_every: int | None = None,
    w_floor=None,
):
    """RK4 paths for a batch of initial conditions; returns (t, W, HA).

    ``record_every=None`` records only the initial and final states.
    """
    dt = dp.time_step
    _check_step(dp, dt)
    T = dp.horizon if horizon is None else horizon
    n_steps = max(1, int(round(T / dt)))
    rec = n_steps if record_every is None else record_every
    w0 = np.atleast_2d(np.asarray(w0, dtype=float))
    ha0 = np.atleast_1d(np.asarray(ha0, dtype=float))
    return kernels.rk4_batch(
        w0,
        ha0,
        w_map.ha_grid,
        w_map.w_values,
        dp.adjust_speed,
        dp.beta0,
        dp.beta3,
        dp.beta4,
        dp.delta0,
        dp.delta_slope,
        dp.edu_investment,
        dt,
        n_steps,
        rec,
        w_floor,
    )


def integrate_trajectory(
    init: tuple,
    p: ModelParams,
    dp: DynamicsParams,
    w_map: WStarMap,
    horizon: float | None = None,
    record_every: int = 1,
) -> Trajectory:
    """Classical RK4 path of (W(t), H^A(t)) from ``init = (w0, ha0)``."""
    w0, ha0 = init
    t, w, ha = integrate_batch(
        [w0], [ha0], p, dp, w_map, horizon=horizon, record_every=record_every
    )
    return Trajectory(t=t, w=w[:, 0, :], ha=ha[:, 0])


# ---------------------------------------------------------------------------
# policy experiments


@dataclass
class PolicyOutcome:
    kind: str
    magnitude: float
    duration: float
    escaped: bool
    final_ha: float
    final_equilibrium_ha: float | None
    horizon_exceeded: bool
    minimal_magnitude: float | None = None


_POLICY_KINDS = ("edu_push", "design_subsidy", "regulatory_min")


def _run_policy_once(kind, magnitude, duration, init, p, dp, w_map, fs_template, seed):
    w0, ha0 = init
    dp_int, map_int, floor = dp, w_map, None
    if kind == "edu_push":
        dp_int = dp.replace(edu_investment=dp.edu_investment * magnitude)
    elif kind == "design_subsidy":
        if fs_template is None:
            raise ParamError("design_subsidy needs fs_template to re-tabulate W*(ha)")
        p_int = p.replace(cost_coeffs=np.asarray(p.cost_coeffs) / magnitude)
        map_int = w_star_map(p_int, fs_template, w_map.ha_grid, seed=seed)
    else:
        floor = magnitude * np.asarray(p.w_auto)
    _, w_mid, ha_mid = integrate_batch(
        [w0], [ha0], p, dp_int, map_int, horizon=duration, w_floor=floor
    )
    _, w_fin, ha_fin = integrate_batch(
        [w_mid[-1, 0]], [ha_mid[-1, 0]], p, dp, w_map
    )
    return w_fin[-1, 0], float(ha_fin[-1, 0])


def policy_experiment(
    kind: str,
    magnitude: float,
    duration: float,
    init: tuple,
    p: ModelParams,
    dp: DynamicsParams,
    w_map: WStarMap,
    fs_template: FirmState | None = None,
    equilibria: EquilibriumSet | None = None,
    find_minimal: bool = False,
    magnitude_tol: float = 1e-3,
    seed: int = 0,
) -> PolicyOutcome:
    """Apply a temporary intervention, revert, and test for trap escape.

    Interventions: ``edu_push`` scales edu_investment by ``magnitude``;
    ``design_subsidy`` divides design costs by ``magnitude`` (W*(ha) is
    re-tabulated for the intervention phase, so ``fs_template`` is required);
    ``regulatory_min`` floors W at magnitude*w_auto. Escape means the
    post-revert trajectory ends above the unstable threshold. With
    ``find_minimal=True`` the smallest escaping magnitude (within
    ``magnitude_tol``) is located by doubling + bisection and reported
    alongside the run at ``magnitude``.
    """
    if kind not in _POLICY_KINDS:
        raise ParamError(f"unknown policy kind '{kind}'")
    eqs = equilibria if equilibria is not None else find_steady_states(p, dp, w_map)
    if eqs.unstable_threshold is None:
        raise ParamError("no unstable threshold; the system has a single basin")
    stable_ha = np.array([e.ha for e in eqs.stable()])

    def run(mag):
        _, final_ha = _run_policy_once(
            kind, mag, duration, init, p, dp, w_map, fs_template, seed
        )
        return final_ha

    final_ha = run(magnitude)
    escaped = final_ha > eqs.unstable_threshold
    dist = np.abs(stable_ha - final_ha)
    near = int(np.argmin(dist))
    horizon_exceeded = bool(dist[near] > 1e-2 * max(1.0, stable_ha.max()))
    minimal = None
    if find_minimal:
        lo_mag, hi_mag = 1.0, max(magnitude, 1.0)
        while not run(hi_mag) > eqs.unstable_threshold:
            hi_mag *= 2.0
            if hi_mag > 1e6:
                raise ParamError(f"no escaping magnitude found for '{kind}' below 1e6")
        while hi_mag - lo_mag > magnitude_tol:
            mid = 0.5 * (lo_mag + hi_mag)
            if run(mid) > eqs.unstable_threshold:
                hi_mag = mid
            else:
                lo_mag = mid
        minimal = hi_mag
    return PolicyOutcome(
        kind=kind,
        magnitude=magnitude,
        duration=duration,
        escaped=escaped,
        final_ha=final_ha,
        final_equilibrium_ha=float(stable_ha[near]) if not horizon_exceeded else None,
        horizon_exceeded=horizon_exceeded,
        minimal_magnitude=minimal,
    )
