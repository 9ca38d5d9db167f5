# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot kernels.

The swap chain scores infeasible states by the requirement-truncated SINR
sum (see the reference module for the rationale).

Each function mirrors its counterpart in ``_reference`` exactly; the swap
chain replays the identical scalar update order so accept/reject decisions
are bit-identical across backends given the same pre-drawn streams.
"""

import numpy as np

from libc.math cimport exp, floor


def mc_delay_outer_moment(double[::1] taus, double main_delay_frac, Py_ssize_t size):
    cdef Py_ssize_t n = taus.shape[0]
    out = np.zeros((size, size))
    cdef double[:, ::1] acc = out
    cdef Py_ssize_t i, b, r1, r2
    cdef double x, frac, w1, w2
    for i in range(n):
        x = taus[i] + main_delay_frac
        b = <Py_ssize_t>floor(x)
        frac = x - b
        r1 = b + 1
        r2 = b + 2
        if r2 >= size or r1 < 0:
            raise ValueError("second-moment block too small for the drawn delays")
        w1 = 1.0 - frac
        w2 = frac
        acc[r1, r1] += w1 * w1
        acc[r2, r2] += w2 * w2
        acc[r1, r2] += w1 * w2
        acc[r2, r1] += w1 * w2
    out /= n
    return out


def mc_contamination_diag(double[::1] chips, double[::1] taus,
                          double[::1] psi_sq, double main_delay_frac,
                          Py_ssize_t num_samples):
    cdef Py_ssize_t n_draws = taus.shape[0]
    cdef Py_ssize_t n = chips.shape[0]
    out = np.zeros(num_samples)
    cdef double[::1] acc = out
    cdef Py_ssize_t i, k, lo, b
    cdef double x, f, w, a_val, b_val, v
    for i in range(n_draws):
        x = taus[i] + main_delay_frac
        b = <Py_ssize_t>floor(x)
        f = x - b
        w = psi_sq[i]
        lo = b + 1
        if lo < 0 or lo + n + 1 > num_samples:
            raise ValueError("drawn delay falls outside the sample window")
        for k in range(n + 1):
            a_val = chips[k] if k < n else 0.0
            b_val = chips[k - 1] if k >= 1 else 0.0
            v = (1.0 - f) * a_val + f * b_val
            acc[lo + k] += w * v * v
    out /= n_draws
    return out


def projection_energy_grid(double[:, :, ::1] bases, double complex[:, ::1] shifted):
    cdef Py_ssize_t n_to = bases.shape[0]
    cdef Py_ssize_t m_len = bases.shape[1]
    cdef Py_ssize_t n_col = bases.shape[2]
    cdef Py_ssize_t n_cfo = shifted.shape[1]
    out = np.zeros((n_to, n_cfo))
    cdef double[:, ::1] o = out
    scratch_arr = np.zeros(n_cfo, dtype=np.complex128)
    cdef double complex[::1] scratch = scratch_arr
    cdef Py_ssize_t t, l, m, c
    cdef double q, re, im
    for t in range(n_to):
        for l in range(n_col):
            for c in range(n_cfo):
                scratch[c] = 0
            for m in range(m_len):
                q = bases[t, m, l]
                if q != 0.0:
                    for c in range(n_cfo):
                        scratch[c] = scratch[c] + q * shifted[m, c]
            for c in range(n_cfo):
                re = scratch[c].real
                im = scratch[c].imag
                o[t, c] += re * re + im * im
    return out


def swap_chain(pilot_in, cluster_in, interf_gain, desired_in, double noise_floor,
               req_in, Py_ssize_t num_pilots, pair_draws_in, accept_draws_in,
               Py_ssize_t n_iter, double temperature):
    pilot_arr = np.array(pilot_in, dtype=np.int64)
    best_arr = pilot_arr.copy()
    cluster_arr = np.ascontiguousarray(cluster_in, dtype=np.int64)
    t_arr = np.ascontiguousarray(interf_gain, dtype=np.float64)
    desired_arr = np.ascontiguousarray(desired_in, dtype=np.float64)
    req_arr = np.ascontiguousarray(req_in, dtype=np.float64)
    pair_arr = np.ascontiguousarray(pair_draws_in, dtype=np.int64)
    accept_arr = np.ascontiguousarray(accept_draws_in, dtype=np.float64)

    cdef long long[::1] pilot = pilot_arr
    cdef long long[::1] best_pilot = best_arr
    cdef long long[::1] cluster = cluster_arr
    cdef double[:, ::1] t = t_arr
    cdef double[::1] desired = desired_arr
    cdef double[::1] req = req_arr
    cdef long long[:, ::1] pair_draws = pair_arr
    cdef double[::1] accept_draws = accept_arr

    cdef Py_ssize_t n = pilot.shape[0]
    interf_arr = np.zeros(n)
    sinr_arr = np.zeros(n)
    changed_idx_arr = np.zeros(n, dtype=np.int64)
    changed_val_arr = np.zeros(n)
    cdef double[::1] interf = interf_arr
    cdef double[::1] sinr = sinr_arr
    cdef long long[::1] changed_idx = changed_idx_arr
    cdef double[::1] changed_val = changed_val_arr

    cdef Py_ssize_t i, j, it, attempt, a, b, ca, cb, n_changed
    cdef long long pa, pb
    cdef double s, sum_sinr, sum_trunc, obj, obj_new, new_sum, new_trunc
    cdef double p_accept, u
    cdef double interf_a, interf_b, old_val, new_val
    cdef Py_ssize_t count_below, new_below
    cdef Py_ssize_t ptr = 0, uptr = 0, accepted = 0, proposed = 0
    cdef Py_ssize_t n_draws = pair_draws.shape[0]
    cdef Py_ssize_t n_accept = accept_draws.shape[0]
    cdef bint blocked

    for i in range(n):
        s = 0.0
        for j in range(n):
            if j != i and pilot[j] == pilot[i]:
                s += t[i, j]
        interf[i] = s
    sum_sinr = 0.0
    sum_trunc = 0.0
    count_below = 0
    for i in range(n):
        sinr[i] = desired[i] / (interf[i] + noise_floor)
        sum_sinr += sinr[i]
        sum_trunc += min(sinr[i], req[i])
        if sinr[i] < req[i]:
            count_below += 1
    obj = sum_sinr if count_below == 0 else sum_trunc

    cdef double best_obj = obj

    for it in range(n_iter):
        a = -1
        b = -1
        for attempt in range(64):
            if ptr >= n_draws:
                break
            ca = <Py_ssize_t>pair_draws[ptr, 0]
            cb = <Py_ssize_t>pair_draws[ptr, 1]
            ptr += 1
            if ca == cb or pilot[ca] == pilot[cb]:
                continue
            pa = pilot[ca]
            pb = pilot[cb]
            blocked = False
            for i in range(n):
                if i != ca and pilot[i] == pa and cluster[i] == cluster[cb]:
                    blocked = True
                    break
                if i != cb and pilot[i] == pb and cluster[i] == cluster[ca]:
                    blocked = True
                    break
            if not blocked:
                a = ca
                b = cb
                break
        if a < 0:
            if ptr >= n_draws:
                break
            continue
        proposed += 1
        pa = pilot[a]
        pb = pilot[b]

        new_sum = sum_sinr
        new_trunc = sum_trunc
        new_below = count_below
        n_changed = 0
        interf_a = 0.0
        interf_b = 0.0
        for i in range(n):
            if i == a or i == b:
                continue
            if pilot[i] == pa:
                changed_idx[n_changed] = i
                changed_val[n_changed] = interf[i] + t[i, b] - t[i, a]
                n_changed += 1
                interf_b += t[b, i]
            elif pilot[i] == pb:
                changed_idx[n_changed] = i
                changed_val[n_changed] = interf[i] + t[i, a] - t[i, b]
                n_changed += 1
                interf_a += t[a, i]
        changed_idx[n_changed] = a
        changed_val[n_changed] = interf_a
        n_changed += 1
        changed_idx[n_changed] = b
        changed_val[n_changed] = interf_b
        n_changed += 1
        for j in range(n_changed):
            i = <Py_ssize_t>changed_idx[j]
            old_val = sinr[i]
            new_val = desired[i] / (changed_val[j] + noise_floor)
            new_sum += new_val - old_val
            new_trunc += min(new_val, req[i]) - min(old_val, req[i])
            if old_val < req[i]:
                new_below -= 1
            if new_val < req[i]:
                new_below += 1
        obj_new = new_sum if new_below == 0 else new_trunc

        if obj_new > best_obj:
            best_obj = obj_new
            for i in range(n):
                best_pilot[i] = pilot[i]
            best_pilot[a] = pb
            best_pilot[b] = pa

        p_accept = 1.0 / (1.0 + exp(-temperature * (obj_new - obj)))
        if uptr >= n_accept:
            break
        u = accept_draws[uptr]
        uptr += 1
        if u < p_accept:
            accepted += 1
            for j in range(n_changed):
                i = <Py_ssize_t>changed_idx[j]
                interf[i] = changed_val[j]
                sinr[i] = desired[i] / (changed_val[j] + noise_floor)
            pilot[a] = pb
            pilot[b] = pa
            sum_sinr = new_sum
            sum_trunc = new_trunc
            count_below = new_below
            obj = obj_new

    return best_arr, float(best_obj), pilot_arr, int(accepted), int(proposed)
