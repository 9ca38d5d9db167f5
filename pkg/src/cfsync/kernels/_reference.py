"""Reference (pure NumPy/Python) implementations of the hot kernels.

These are the semantics the compiled extension must reproduce.  The two
Monte-Carlo accumulators and the grid scan are vectorized and agree with
the compiled loops to floating-point roundoff; ``swap_chain`` performs the
identical scalar update sequence as the compiled version, so the two
backends make bit-identical accept/reject decisions given the same
pre-drawn streams.
"""

from __future__ import annotations

import math

import numpy as np


def mc_delay_outer_moment(taus: np.ndarray, main_delay_frac: float,
                          size: int) -> np.ndarray:
    """Average of u u^T over timing-offset draws, on the leading block.

    Each draw's interpolation column u has weight 1-frac at 0-based row
    floor(x)+1 and frac at row floor(x)+2, with x = tau + main_delay_frac.
    Returns the (size x size) mean of the outer products.
    """
    x = np.asarray(taus, dtype=np.float64) + main_delay_frac
    base = np.floor(x).astype(np.int64)
    frac = x - base
    r1 = base + 1
    r2 = base + 2
    if np.any(r2 >= size):
        raise ValueError("second-moment block too small for the drawn delays")
    w1 = 1.0 - frac
    w2 = frac
    acc = np.zeros((size, size))
    np.add.at(acc, (r1, r1), w1 * w1)
    np.add.at(acc, (r2, r2), w2 * w2)
    cross = w1 * w2
    np.add.at(acc, (r1, r2), cross)
    np.add.at(acc, (r2, r1), cross)
    return acc / x.size


def mc_contamination_diag(chips: np.ndarray, taus: np.ndarray,
                          psi_sq: np.ndarray, main_delay_frac: float,
                          num_samples: int) -> np.ndarray:
    """Average of |shifted-pilot column|^2 weighted by fade powers.

    One draw contributes psi_sq * ((1-f) chips[i] + f chips[i-1])^2 at
    sample floor(x)+1+i; draws are grouped by the integer part of the total
    delay so only weighted moments of f are accumulated per group.
    """
    chips = np.asarray(chips, dtype=np.float64)
    n = chips.size
    x = np.asarray(taus, dtype=np.float64) + main_delay_frac
    psi_sq = np.asarray(psi_sq, dtype=np.float64)
    base = np.floor(x).astype(np.int64)
    frac = x - base
    out = np.zeros(num_samples)
    # chip products on the interpolation window i = 0..n (one past the pilot)
    a = np.concatenate([chips, [0.0]])          # chips[i]
    b = np.concatenate([[0.0], chips])          # chips[i-1]
    for bval in np.unique(base):
        sel = base == bval
        f = frac[sel]
        w = psi_sq[sel]
        m_aa = float(np.sum(w * (1.0 - f) ** 2))
        m_bb = float(np.sum(w * f * f))
        m_ab = float(np.sum(w * f * (1.0 - f)))
        lo = int(bval) + 1
        hi = lo + n + 1
        if lo < 0 or hi > num_samples:
            raise ValueError("drawn delay falls outside the sample window")
        out[lo:hi] += m_aa * a * a + m_bb * b * b + 2.0 * m_ab * a * b
    return out / x.size


def projection_energy_grid(bases: np.ndarray, shifted: np.ndarray) -> np.ndarray:
    """Energies |Q_t^T z_c|^2 for every (timing, CFO) grid pair.

    ``bases`` holds an orthonormal real M x L basis per timing value;
    ``shifted`` holds the CFO-derotated observation per CFO value.
    """
    proj = np.einsum("tml,mc->tlc", bases, shifted)
    return np.sum(proj.real ** 2 + proj.imag ** 2, axis=1)


def swap_chain(pilot: np.ndarray, cluster: np.ndarray, interf_gain: np.ndarray,
               desired: np.ndarray, noise_floor: float, req_linear: np.ndarray,
               num_pilots: int, pair_draws: np.ndarray, accept_draws: np.ndarray,
               n_iter: int, temperature: float):
    """Swap-matching chain over pilot assignments at a fixed pilot count.

    Proposals are slave pairs drawn from ``pair_draws``; a proposal is valid
    when the two slaves hold different pilots and the exchange leaves no
    same-cluster pair sharing a pilot.  Acceptance follows the sigmoid of
    the objective difference; the best assignment seen (by strict objective
    improvement) is tracked separately from the incumbent walk.

    Objective: sum of linear SINRs when every slave meets its requirement.
    Infeasible states score the requirement-truncated sum of SINRs, which
    ranks them strictly below every feasible state and restores a search
    gradient that the all-feasible-or-zero form lacks; comparisons among
    feasible states are unchanged.  Returns (best_pilot, best_obj,
    final_pilot, accepted, proposed).
    """
    pilot = np.array(pilot, dtype=np.int64)
    cluster = np.asarray(cluster, dtype=np.int64)
    t = np.asarray(interf_gain, dtype=np.float64)
    desired = np.asarray(desired, dtype=np.float64)
    req = np.asarray(req_linear, dtype=np.float64)
    n = pilot.size

    interf = np.zeros(n)
    for i in range(n):
        s = 0.0
        for j in range(n):
            if j != i and pilot[j] == pilot[i]:
                s += t[i, j]
        interf[i] = s
    sinr = desired / (interf + noise_floor)
    sum_sinr = 0.0
    sum_trunc = 0.0
    count_below = 0
    for i in range(n):
        sum_sinr += sinr[i]
        sum_trunc += min(sinr[i], req[i])
        if sinr[i] < req[i]:
            count_below += 1
    obj = sum_sinr if count_below == 0 else sum_trunc

    best_obj = obj
    best_pilot = pilot.copy()
    ptr = 0
    uptr = 0
    accepted = 0
    proposed = 0
    n_draws = pair_draws.shape[0]

    for _ in range(n_iter):
        a = b = -1
        for _attempt in range(64):
            if ptr >= n_draws:
                break
            ca, cb = int(pair_draws[ptr, 0]), int(pair_draws[ptr, 1])
            ptr += 1
            if ca == cb or pilot[ca] == pilot[cb]:
                continue
            pa, pb = pilot[ca], pilot[cb]
            blocked = False
            for i in range(n):
                if i != ca and pilot[i] == pa and cluster[i] == cluster[cb]:
                    blocked = True
                    break
                if i != cb and pilot[i] == pb and cluster[i] == cluster[ca]:
                    blocked = True
                    break
            if not blocked:
                a, b = ca, cb
                break
        if a < 0:
            if ptr >= n_draws:
                break
            continue
        proposed += 1
        pa, pb = pilot[a], pilot[b]

        # candidate interference totals for every slave in either group
        new_sum = sum_sinr
        new_trunc = sum_trunc
        new_below = count_below
        changed_idx = []
        changed_interf = []
        interf_a = 0.0
        interf_b = 0.0
        for i in range(n):
            if i == a or i == b:
                continue
            if pilot[i] == pa:
                changed_idx.append(i)
                changed_interf.append(interf[i] + t[i, b] - t[i, a])
                interf_b += t[b, i]
            elif pilot[i] == pb:
                changed_idx.append(i)
                changed_interf.append(interf[i] + t[i, a] - t[i, b])
                interf_a += t[a, i]
        changed_idx.extend((a, b))
        changed_interf.extend((interf_a, interf_b))
        for i, v in zip(changed_idx, changed_interf):
            old = sinr[i]
            new = desired[i] / (v + noise_floor)
            new_sum += new - old
            new_trunc += min(new, req[i]) - min(old, req[i])
            if old < req[i]:
                new_below -= 1
            if new < req[i]:
                new_below += 1
        obj_new = new_sum if new_below == 0 else new_trunc

        if obj_new > best_obj:
            best_obj = obj_new
            best_pilot = pilot.copy()
            best_pilot[a] = pb
            best_pilot[b] = pa

        p_accept = 1.0 / (1.0 + math.exp(-temperature * (obj_new - obj)))
        if uptr >= accept_draws.size:
            break
        u = accept_draws[uptr]
        uptr += 1
        if u < p_accept:
            accepted += 1
            for i, v in zip(changed_idx, changed_interf):
                interf[i] = v
                sinr[i] = desired[i] / (v + noise_floor)
            pilot[a] = pb
            pilot[b] = pa
            sum_sinr = new_sum
            sum_trunc = new_trunc
            count_below = new_below
            obj = obj_new

    return best_pilot, float(best_obj), pilot, accepted, proposed
