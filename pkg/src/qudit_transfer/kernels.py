"""Compiled RK4 loop for the Lindblad equation in matrix form.

The Hamiltonian is passed as COO triplets; entry ``e`` is multiplied by
``exp(+i D t)`` (``h_term[e] = k, h_conj[e] = 0``), by its conjugate
(``h_conj[e] = 1``), or used as-is (``h_term[e] = -1``). Jump terms
``sum_m L_m rho L_m^dag`` are passed as a flat list of
``rho[src_r, src_c] -> out[dst_r, dst_c]`` contributions, and the
anticommutator part uses ``kdiag = diag(sum_m L_m^dag L_m)``, which is
diagonal for every collapse operator in this model.
"""
import numpy as np
from numba import njit

STAT_TRACE, STAT_TWO_PHOTON, STAT_TOP, STAT_STEPS = 0, 1, 2, 3


@njit(cache=True)
def lindblad_rhs(t, rho, out, x, h_r, h_c, h_v, h_term, h_conj, detunings, phases,
                 kdiag, j_dr, j_dc, j_sr, j_sc, j_v):
    n = rho.shape[0]
    for k in range(detunings.shape[0]):
        phases[k] = np.exp(1j * detunings[k] * t)
    x[:, :] = 0.0
    for e in range(h_r.shape[0]):
        v = h_v[e]
        tk = h_term[e]
        if tk >= 0:
            if h_conj[e]:
                v = v * np.conj(phases[tk])
            else:
                v = v * phases[tk]
        r = h_r[e]
        c = h_c[e]
        for j in range(n):
            x[r, j] += v * rho[c, j]
    # rho H = (H rho)^dag for Hermitian rho
    for i in range(n):
        for j in range(n):
            out[i, j] = -1j * (x[i, j] - np.conj(x[j, i])) - 0.5 * (kdiag[i] + kdiag[j]) * rho[i, j]
    for e in range(j_dr.shape[0]):
        out[j_dr[e], j_dc[e]] += j_v[e] * rho[j_sr[e], j_sc[e]]


@njit(cache=True)
def rk4_lindblad(rho, t0, dt, nsteps, h_r, h_c, h_v, h_term, h_conj, detunings,
                 kdiag, j_dr, j_dc, j_sr, j_sc, j_v, two_idx, top_idx, trace_abort, stats):
    """Advance ``rho`` in place; returns the number of steps completed.

    Stops early when the trace drifts by more than ``trace_abort``.
    ``stats`` accumulates running maxima (trace drift, n >= 2 population,
    top-level population) and the step count.
    """
    n = rho.shape[0]
    k1 = np.empty_like(rho)
    k2 = np.empty_like(rho)
    k3 = np.empty_like(rho)
    k4 = np.empty_like(rho)
    tmp = np.empty_like(rho)
    x = np.empty_like(rho)
    phases = np.empty(detunings.shape[0], dtype=np.complex128)
    half = 0.5 * dt
    for s in range(nsteps):
        t = t0 + s * dt
        lindblad_rhs(t, rho, k1, x, h_r, h_c, h_v, h_term, h_conj, detunings, phases,
                     kdiag, j_dr, j_dc, j_sr, j_sc, j_v)
        for i in range(n):
            for j in range(n):
                tmp[i, j] = rho[i, j] + half * k1[i, j]
        lindblad_rhs(t + half, tmp, k2, x, h_r, h_c, h_v, h_term, h_conj, detunings, phases,
                     kdiag, j_dr, j_dc, j_sr, j_sc, j_v)
        for i in range(n):
            for j in range(n):
                tmp[i, j] = rho[i, j] + half * k2[i, j]
        lindblad_rhs(t + half, tmp, k3, x, h_r, h_c, h_v, h_term, h_conj, detunings, phases,
                     kdiag, j_dr, j_dc, j_sr, j_sc, j_v)
        for i in range(n):
            for j in range(n):
                tmp[i, j] = rho[i, j] + dt * k3[i, j]
        lindblad_rhs(t + dt, tmp, k4, x, h_r, h_c, h_v, h_term, h_conj, detunings, phases,
                     kdiag, j_dr, j_dc, j_sr, j_sc, j_v)
        sixth = dt / 6.0
        for i in range(n):
            for j in range(n):
                rho[i, j] += sixth * (k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j])

        tr = 0.0 + 0.0j
        for i in range(n):
            tr += rho[i, i]
        drift = abs(tr - 1.0)
        if drift > stats[STAT_TRACE]:
            stats[STAT_TRACE] = drift
        p2 = 0.0
        for i in two_idx:
            p2 += rho[i, i].real
        if p2 > stats[STAT_TWO_PHOTON]:
            stats[STAT_TWO_PHOTON] = p2
        ptop = 0.0
        for i in top_idx:
            ptop += rho[i, i].real
        if ptop > stats[STAT_TOP]:
            stats[STAT_TOP] = ptop
        stats[STAT_STEPS] += 1
        if drift > trace_abort:
            return s + 1
    return nsteps
