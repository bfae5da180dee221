"""Pure-Python (numpy) fallback for the trajectory integrator core.

Semantics match ``_rk4_c``: classical fixed-step RK4 on the coupled system

    dW/dt   = adjust_speed * (W*(ha) - W)
    dha/dt  = beta0*(1 + beta3*W3 + beta4*W4) * i_edu
              - delta0 / (1 + delta_slope*mean(W)) * ha

with W*(ha) looked up by piecewise-linear interpolation in a tabulated map
(clamped at the grid ends) and W projected onto [w_floor, +inf) after every
step. Trajectories are vectorized across the batch axis; per-trajectory
arithmetic order matches the compiled kernel.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def _interp_wstar(ha, ha_grid, w_grid):
    """W*(ha) for a batch: (m,) -> (m, 5), clamped to the grid range."""
    ha_c = np.clip(ha, ha_grid[0], ha_grid[-1])
    idx = np.clip(np.searchsorted(ha_grid, ha_c, side="right") - 1, 0, len(ha_grid) - 2)
    t = (ha_c - ha_grid[idx]) / (ha_grid[idx + 1] - ha_grid[idx])
    return w_grid[idx] + t[:, None] * (w_grid[idx + 1] - w_grid[idx])


def _deriv(w, ha, ha_grid, w_grid, alpha, beta0, beta3, beta4, delta0, delta_slope, i_edu):
    wstar = _interp_wstar(ha, ha_grid, w_grid)
    dw = alpha * (wstar - w)
    beta = beta0 * (1.0 + beta3 * w[:, 2] + beta4 * w[:, 3])
    delta = delta0 / (1.0 + delta_slope * w.mean(axis=1))
    dha = beta * i_edu - delta * ha
    return dw, dha


def rk4_batch(
    w0,
    ha0,
    ha_grid,
    w_grid,
    alpha,
    beta0,
    beta3,
    beta4,
    delta0,
    delta_slope,
    i_edu,
    dt,
    n_steps,
    record_every,
    w_floor=None,
):
    """Integrate a batch of trajectories; returns (t, W, HA).

    ``w0`` is (m, 5), ``ha0`` is (m,). Output shapes: t (T,), W (T, m, 5),
    HA (T, m) with T = n_steps // record_every + 1 (the initial state plus
    every ``record_every``-th step; the final step is always recorded when
    n_steps is a multiple of record_every).
    """
    w = np.array(w0, dtype=float)
    ha = np.array(ha0, dtype=float)
    m = w.shape[0]
    floor = np.zeros(5) if w_floor is None else np.asarray(w_floor, dtype=float)
    args = (ha_grid, w_grid, alpha, beta0, beta3, beta4, delta0, delta_slope, i_edu)

    n_rec = n_steps // record_every + 1
    t_out = np.empty(n_rec)
    w_out = np.empty((n_rec, m, 5))
    ha_out = np.empty((n_rec, m))
    w = np.maximum(w, floor)
    t_out[0], w_out[0], ha_out[0] = 0.0, w, ha
    rec = 1
    for step in range(1, n_steps + 1):
        k1w, k1h = _deriv(w, ha, *args)
        k2w, k2h = _deriv(w + 0.5 * dt * k1w, ha + 0.5 * dt * k1h, *args)
        k3w, k3h = _deriv(w + 0.5 * dt * k2w, ha + 0.5 * dt * k2h, *args)
        k4w, k4h = _deriv(w + dt * k3w, ha + dt * k3h, *args)
        w = w + (dt / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
        ha = ha + (dt / 6.0) * (k1h + 2.0 * k2h + 2.0 * k3h + k4h)
        w = np.maximum(w, floor)
        ha = np.maximum(ha, 0.0)
        if step % record_every == 0:
            t_out[rec] = step * dt
            w_out[rec] = w
            ha_out[rec] = ha
            rec += 1
    return t_out[:rec], w_out[:rec], ha_out[:rec]
