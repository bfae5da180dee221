# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled trajectory integrator core.

Same contract as ``_rk4_py.rk4_batch``; the arithmetic inside one step is
ordered to match the numpy fallback so both backends agree to rounding.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline Py_ssize_t _bracket(double ha, const double[::1] grid) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = grid.shape[0] - 1, mid
    # index i with grid[i] <= ha < grid[i+1], clamped to [0, n-2]
    if ha <= grid[0]:
        return 0
    if ha >= grid[hi]:
        return hi - 1
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if grid[mid] <= ha:
            lo = mid
        else:
            hi = mid
    return lo


cdef inline void _deriv(
    const double* w,
    double ha,
    const double[::1] ha_grid,
    const double[:, ::1] w_grid,
    double alpha,
    double beta0,
    double beta3,
    double beta4,
    double delta0,
    double delta_slope,
    double i_edu,
    double* dw,
    double* dha,
) noexcept nogil:
    cdef double ha_c = ha
    cdef Py_ssize_t n = ha_grid.shape[0], i, k
    cdef double t, wstar, mean_w = 0.0, beta, delta
    if ha_c < ha_grid[0]:
        ha_c = ha_grid[0]
    elif ha_c > ha_grid[n - 1]:
        ha_c = ha_grid[n - 1]
    i = _bracket(ha_c, ha_grid)
    t = (ha_c - ha_grid[i]) / (ha_grid[i + 1] - ha_grid[i])
    for k in range(5):
        wstar = w_grid[i, k] + t * (w_grid[i + 1, k] - w_grid[i, k])
        dw[k] = alpha * (wstar - w[k])
        mean_w += w[k]
    mean_w /= 5.0
    beta = beta0 * (1.0 + beta3 * w[2] + beta4 * w[3])
    delta = delta0 / (1.0 + delta_slope * mean_w)
    dha[0] = beta * i_edu - delta * ha


def rk4_batch(
    object w0,
    object ha0,
    object ha_grid,
    object w_grid,
    double alpha,
    double beta0,
    double beta3,
    double beta4,
    double delta0,
    double delta_slope,
    double i_edu,
    double dt,
    long n_steps,
    long record_every,
    object w_floor=None,
):
    """Integrate a batch of trajectories; returns (t, W, HA). See ``_rk4_py``."""
    cdef cnp.ndarray[double, ndim=2] w_arr = np.array(w0, dtype=np.float64, order="C")
    cdef cnp.ndarray[double, ndim=1] ha_arr = np.array(ha0, dtype=np.float64)
    cdef const double[::1] grid = np.ascontiguousarray(ha_grid, dtype=np.float64)
    cdef const double[:, ::1] wg = np.ascontiguousarray(w_grid, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] floor_arr
    if w_floor is None:
        floor_arr = np.zeros(5)
    else:
        floor_arr = np.array(w_floor, dtype=np.float64)
    cdef const double[::1] floor = floor_arr

    cdef Py_ssize_t m = w_arr.shape[0]
    cdef Py_ssize_t n_rec = n_steps // record_every + 1
    cdef cnp.ndarray[double, ndim=1] t_out = np.empty(n_rec)
    cdef cnp.ndarray[double, ndim=3] w_out = np.empty((n_rec, m, 5))
    cdef cnp.ndarray[double, ndim=2] ha_out = np.empty((n_rec, m))
    cdef double[:, ::1] wv = w_arr
    cdef double[::1] hav = ha_arr
    cdef double[::1] tv = t_out
    cdef double[:, :, ::1] wov = w_out
    cdef double[:, ::1] haov = ha_out

    cdef double w[5]
    cdef double k1w[5]
    cdef double k2w[5]
    cdef double k3w[5]
    cdef double k4w[5]
    cdef double wtmp[5]
    cdef double ha, k1h, k2h, k3h, k4h
    cdef Py_ssize_t traj, k, rec
    cdef long step

    with nogil:
        for traj in range(m):
            ha = hav[traj]
            for k in range(5):
                w[k] = wv[traj, k]
                if w[k] < floor[k]:
                    w[k] = floor[k]
            tv[0] = 0.0
            haov[0, traj] = ha
            for k in range(5):
                wov[0, traj, k] = w[k]
            rec = 1
            for step in range(1, n_steps + 1):
                _deriv(w, ha, grid, wg, alpha, beta0, beta3, beta4,
                       delta0, delta_slope, i_edu, k1w, &k1h)
                for k in range(5):
                    wtmp[k] = w[k] + 0.5 * dt * k1w[k]
                _deriv(wtmp, ha + 0.5 * dt * k1h, grid, wg, alpha, beta0, beta3,
                       beta4, delta0, delta_slope, i_edu, k2w, &k2h)
                for k in range(5):
                    wtmp[k] = w[k] + 0.5 * dt * k2w[k]
                _deriv(wtmp, ha + 0.5 * dt * k2h, grid, wg, alpha, beta0, beta3,
                       beta4, delta0, delta_slope, i_edu, k3w, &k3h)
                for k in range(5):
                    wtmp[k] = w[k] + dt * k3w[k]
                _deriv(wtmp, ha + dt * k3h, grid, wg, alpha, beta0, beta3,
                       beta4, delta0, delta_slope, i_edu, k4w, &k4h)
                for k in range(5):
                    w[k] = w[k] + (dt / 6.0) * (k1w[k] + 2.0 * k2w[k] + 2.0 * k3w[k] + k4w[k])
                    if w[k] < floor[k]:
                        w[k] = floor[k]
                ha = ha + (dt / 6.0) * (k1h + 2.0 * k2h + 2.0 * k3h + k4h)
                if ha < 0.0:
                    ha = 0.0
                if step % record_every == 0:
                    tv[rec] = step * dt
                    haov[rec, traj] = ha
                    for k in range(5):
                        wov[rec, traj, k] = w[k]
                    rec += 1
    return t_out[:rec], w_out[:rec], ha_out[:rec]
