# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loop: one batch of images simulated in lockstep.

Mirrors ``_kernel_py.run_batch`` exactly in semantics; see that module for
the argument contract.
"""

from libc.math cimport exp
import numpy as np
cimport numpy as cnp

cnp.import_array()


def run_batch(
    const unsigned char[:, :, ::1] raster,
    const double[:, ::1] w_read,
    const double[:, ::1] wpot,
    const double[:, ::1] wdep,
    double[::1] vbg,
    double[::1] theta,
    double[:, ::1] dw,
    long long[:, ::1] counts,
    unsigned char[:, :, ::1] out_spikes,
    double v_rest,
    double v_reset,
    double v_thresh,
    double mem_decay,
    int refrac_steps,
    double theta_inc,
    double theta_decay,
    double w_inhib,
    double pre_decay,
    double post_decay,
    double lambda_k,
    double homeo_dec,
    double homeo_relax,
    double vbg_base,
    double vbg_lo,
    double vbg_hi,
    bint learn,
    bint adapt,
    bint homeo,
    bint literal,
):
    cdef Py_ssize_t B = raster.shape[0]
    cdef Py_ssize_t T = raster.shape[1]
    cdef Py_ssize_t n_in = raster.shape[2]
    cdef Py_ssize_t n_out = w_read.shape[1]
    cdef Py_ssize_t b, t, i, j, a, n_act
    cdef double x, vj, inh
    cdef long long n_prev

    cdef double[:, ::1] v = np.full((B, n_out), v_rest)
    cdef int[:, ::1] refrac = np.zeros((B, n_out), dtype=np.intc)
    cdef double[:, ::1] xpre = np.zeros((B, n_in))
    cdef double[:, ::1] xpost = np.zeros((B, n_out))
    cdef unsigned char[:, ::1] sprev = np.zeros((B, n_out), dtype=np.uint8)
    cdef long long[::1] nprev = np.zeros(B, dtype=np.longlong)
    cdef Py_ssize_t[::1] act = np.zeros(n_in, dtype=np.intp)
    cdef double[::1] drive = np.zeros(n_out)
    cdef double[::1] gain = np.zeros(n_out)
    cdef long long[::1] fired = np.zeros(n_out, dtype=np.longlong)
    cdef Py_ssize_t[::1] post_idx = np.zeros(n_out, dtype=np.intp)
    cdef Py_ssize_t n_post

    for t in range(T):
        if adapt:
            for j in range(n_out):
                theta[j] *= theta_decay
        for j in range(n_out):
            gain[j] = 1.0 + lambda_k * vbg[j]
            fired[j] = 0

        for b in range(B):
            for i in range(n_in):
                xpre[b, i] *= pre_decay
            for j in range(n_out):
                xpost[b, j] *= post_decay

            n_act = 0
            for i in range(n_in):
                if raster[b, t, i]:
                    act[n_act] = i
                    n_act += 1
                    xpre[b, i] = 1.0

            for j in range(n_out):
                drive[j] = 0.0
            for a in range(n_act):
                i = act[a]
                for j in range(n_out):
                    drive[j] += w_read[i, j]

            n_prev = nprev[b]
            n_post = 0
            for j in range(n_out):
                if refrac[b, j] > 0:
                    refrac[b, j] -= 1
                    sprev[b, j] = 0
                    continue
                inh = w_inhib * <double>(n_prev - sprev[b, j])
                vj = v_rest + (v[b, j] - v_rest) * mem_decay + gain[j] * drive[j] + inh
                if vj >= v_thresh + theta[j]:
                    vj = v_reset
                    refrac[b, j] = refrac_steps
                    sprev[b, j] = 1
                    post_idx[n_post] = j
                    n_post += 1
                else:
                    sprev[b, j] = 0
                v[b, j] = vj
            nprev[b] = n_post

            for a in range(n_post):
                j = post_idx[a]
                counts[b, j] += 1
                out_spikes[b, t, j] = 1
                fired[j] += 1

            if learn:
                for a in range(n_act):
                    i = act[a]
                    for j in range(n_out):
                        x = xpost[b, j]
                        if x > 0.0:
                            if literal:
                                x = exp(1.0 / x)
                            dw[i, j] -= wdep[i, j] * x
                for a in range(n_post):
                    j = post_idx[a]
                    for i in range(n_in):
                        x = xpre[b, i]
                        if x > 0.0:
                            if literal:
                                x = exp(x)
                            dw[i, j] += wpot[i, j] * x
            for a in range(n_post):
                xpost[b, post_idx[a]] = 1.0

        if adapt:
            for j in range(n_out):
                theta[j] += theta_inc * fired[j]
        if homeo:
            for j in range(n_out):
                x = vbg_base + (vbg[j] - vbg_base) * homeo_relax - homeo_dec * fired[j]
                if x < vbg_lo:
                    x = vbg_lo
                elif x > vbg_hi:
                    x = vbg_hi
                vbg[j] = x
