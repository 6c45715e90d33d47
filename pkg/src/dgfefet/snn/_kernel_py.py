"""Pure-numpy batch kernel, used when the compiled extension is unavailable.

``run_batch`` simulates ``B`` images in lockstep for ``T`` steps. Per step:

1. shared adaptive thresholds decay (``adapt``);
2. per image: traces decay, input spikes set ``x_pre = 1``, the column drive
   ``sum_i s_i * w_read[i, j]`` is scaled by the column gain
   ``1 + lambda_k * vbg[j]``, lateral inhibition from the previous step's
   spikes of *other* neurons is added, and non-refractory neurons integrate
   with exponential-Euler leak;
3. STDP (``learn``): each input spike depresses by ``wdep * f(x_post)``,
   each output spike potentiates by ``wpot * f(x_pre)``; ``x_post`` jumps to 1
   afterwards so a same-step pair counts as potentiation only;
4. shared state is updated from the spikes summed over the batch: thresholds
   grow by ``theta_inc`` per spike (``adapt``) and back-gate voltages relax
   towards ``vbg_base`` and ramp down by ``homeo_dec`` per spike (``homeo``).

Arrays ``vbg``, ``theta``, ``dw``, ``counts`` and ``out_spikes`` are updated in
place.
"""

from __future__ import annotations

import numpy as np


def run_batch(
    raster,
    w_read,
    wpot,
    wdep,
    vbg,
    theta,
    dw,
    counts,
    out_spikes,
    v_rest,
    v_reset,
    v_thresh,
    mem_decay,
    refrac_steps,
    theta_inc,
    theta_decay,
    w_inhib,
    pre_decay,
    post_decay,
    lambda_k,
    homeo_dec,
    homeo_relax,
    vbg_base,
    vbg_lo,
    vbg_hi,
    learn,
    adapt,
    homeo,
    literal,
):
    B, T, n_in = raster.shape
    n_out = w_read.shape[1]
    v = np.full((B, n_out), v_rest)
    refrac = np.zeros((B, n_out), dtype=np.intc)
    xpre = np.zeros((B, n_in))
    xpost = np.zeros((B, n_out))
    sprev = np.zeros((B, n_out), dtype=bool)

    for t in range(T):
        if adapt:
            theta *= theta_decay
        gain = 1.0 + lambda_k * vbg
        xpre *= pre_decay
        xpost *= post_decay
        s_in = raster[:, t, :].astype(bool)
        xpre[s_in] = 1.0

        drive = s_in.astype(float) @ w_read
        inh = w_inhib * (sprev.sum(axis=1, keepdims=True) - sprev)
        active = refrac == 0
        refrac[~active] -= 1
        v_new = v_rest + (v - v_rest) * mem_decay + gain * drive + inh
        spk = active & (v_new >= v_thresh + theta)
        v = np.where(active, np.where(spk, v_reset, v_new), v)
        refrac[spk] = refrac_steps
        sprev = spk

        counts += spk
        out_spikes[:, t, :] = spk

        if learn:
            if s_in.any():
                if literal:
                    f = np.zeros_like(xpost)
                    pos = xpost > 0
                    with np.errstate(over="ignore"):
                        f[pos] = np.exp(1.0 / xpost[pos])
                else:
                    f = xpost
                dw -= wdep * (s_in.T.astype(float) @ f)
            if spk.any():
                f = np.where(xpre > 0, np.exp(xpre), 0.0) if literal else xpre
                dw += wpot * (f.T @ spk.astype(float))
        xpost[spk] = 1.0

        fired = spk.sum(axis=0)
        if adapt:
            theta += theta_inc * fired
        if homeo:
            vbg[:] = np.clip(vbg_base + (vbg - vbg_base) * homeo_relax - homeo_dec * fired, vbg_lo, vbg_hi)
