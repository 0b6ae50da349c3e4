"""Compiled forward-Euler loop for the integrator."""
import numpy as np
from numba import njit

RUNNING = 0
THRESHOLD = 1
LEVEL = 2
NONFINITE = 3
DECAY = 4
NEGATIVE = 5


@njit(cache=True)
def argmax_first(u):
    k = 0
    best = u[0]
    for i in range(1, u.shape[0]):
        if u[i] > best:
            best = u[i]
            k = i
    return best, k


@njit(cache=True)
def advance(u, work, t, t_err, ii, nb, inv_h2, V, p, dt_diff, eta, vmax, reaction_only,
            u_stop, next_level, half_m, umax0, decay_window, decay_run,
            out_t, out_dt, out_umax, out_arg, n_max):
    """Take up to ``n_max`` steps in place on ``u``.

    Time is accumulated with compensated summation (``t_err`` carries the
    lost low-order part), since late steps can fall below an ulp of t.
    ``work`` must be zero on boundary nodes. Returns
    ``(n_taken, status, t, t_err, decay_run, mono_pass)``.
    """
    ndim = inv_h2.shape[0]
    umax, kmax = argmax_first(u)
    n = 0
    mono_pass = 0
    status = RUNNING
    while n < n_max:
        dt = dt_diff
        if umax > 0.0:
            dr = eta / (vmax * umax ** (p - 1.0))
            if dr < dt:
                dt = dr
        vmin_new = np.inf
        for q in range(ii.shape[0]):
            i = ii[q]
            ui = u[i]
            if reaction_only:
                lap = 0.0
            else:
                lap = ((u[nb[q, 0]] + u[nb[q, 1]]) - 2.0 * ui) * inv_h2[0]
                for ax in range(1, ndim):
                    lap = lap + ((u[nb[q, 2 * ax]] + u[nb[q, 2 * ax + 1]]) - 2.0 * ui) * inv_h2[ax]
            w = ui + dt * (lap + V[i] * ui ** p)
            work[i] = w
            if w < vmin_new:
                vmin_new = w
        new_max, new_k = argmax_first(work)
        if not np.isfinite(new_max):
            status = NONFINITE
            break
        if vmin_new < 0.0:
            status = NEGATIVE
            break
        uk = u[kmax]
        if (work[kmax] - uk) / dt >= half_m * uk ** p * (1.0 - 1e-12):
            mono_pass += 1
        for q in range(ii.shape[0]):
            u[ii[q]] = work[ii[q]]
        y = dt - t_err
        tn = t + y
        t_err = (tn - t) - y
        t = tn
        if new_max < umax and new_max < umax0:
            decay_run += 1
        else:
            decay_run = 0
        umax = new_max
        kmax = new_k
        out_t[n] = t
        out_dt[n] = dt
        out_umax[n] = umax
        out_arg[n] = kmax
        n += 1
        if umax >= u_stop:
            status = THRESHOLD
            break
        if umax == 0.0 or decay_run >= decay_window:
            status = DECAY
            break
        if umax >= next_level:
            status = LEVEL
            break
    return n, status, t, t_err, decay_run, mono_pass
