"""Compiled event loops for the Monte Carlo harnesses.

These mirror the mechanics of activation.ActivationEngine and the game
module's update rules in a single fused loop; the pure-Python versions stay
the reference implementations and the test suite cross-checks the two.

Heaps are parallel (time, vertex) arrays ordered lexicographically, which
fixes the tie order to vertex id; across the two heaps a transition beats an
update at equal times.
"""

import numpy as np
from numba import njit

OUTCOME_FIXED_D = 0
OUTCOME_FIXED_C = 1
OUTCOME_TIMEOUT = 2


@njit(cache=True)
def _power_law(alpha, t0, cap):
    # r in (0,1]; r=1 hits the lower bound t0 exactly
    r = 1.0 - np.random.random()
    return min(t0 * r ** (1.0 / (1.0 - alpha)), cap)


@njit(cache=True)
def _sift_down(ht, hv, size, i):
    while True:
        left = 2 * i + 1
        right = left + 1
        best = i
        if left < size and (
            ht[left] < ht[best] or (ht[left] == ht[best] and hv[left] < hv[best])
        ):
            best = left
        if right < size and (
            ht[right] < ht[best] or (ht[right] == ht[best] and hv[right] < hv[best])
        ):
            best = right
        if best == i:
            return
        ht[i], ht[best] = ht[best], ht[i]
        hv[i], hv[best] = hv[best], hv[i]
        i = best


@njit(cache=True)
def _sift_up(ht, hv, i):
    while i > 0:
        parent = (i - 1) // 2
        if ht[i] < ht[parent] or (ht[i] == ht[parent] and hv[i] < hv[parent]):
            ht[i], ht[parent] = ht[parent], ht[i]
            hv[i], hv[parent] = hv[parent], hv[i]
            i = parent
        else:
            return


@njit(cache=True)
def _heapify(ht, hv, size):
    for i in range(size // 2 - 1, -1, -1):
        _sift_down(ht, hv, size, i)


@njit(cache=True)
def _init_activation(n, lam, mu, t0, cap):
    """Coin-flip phases and first sojourns; returns (phase, end_time)."""
    phase = np.zeros(n, dtype=np.uint8)
    end_time = np.empty(n)
    for v in range(n):
        if np.random.random() < 0.5:
            phase[v] = 1
            end_time[v] = _power_law(mu, t0, cap)
        else:
            end_time[v] = _power_law(lam, t0, cap)
    return phase, end_time


@njit(cache=True)
def activation_sizes(n, lam, mu, t0, cap, burn_in, horizon, dt, seed):
    """Sample the activated count at burn_in, burn_in+dt, ..., horizon."""
    np.random.seed(seed)
    phase, end_time = _init_activation(n, lam, mu, t0, cap)
    act_count = int(phase.sum())
    ht = end_time.copy()
    hv = np.arange(n, dtype=np.int64)
    _heapify(ht, hv, n)

    n_samples = int(np.floor((horizon - burn_in) / dt)) + 1
    out = np.empty(n_samples, dtype=np.int64)
    filled = 0
    next_sample = burn_in
    while filled < n_samples:
        t = ht[0]
        while filled < n_samples and next_sample < t:
            out[filled] = act_count
            filled += 1
            next_sample += dt
        if filled >= n_samples:
            break
        v = hv[0]
        if phase[v] == 1:
            phase[v] = 0
            act_count -= 1
            d = _power_law(lam, t0, cap)
        else:
            phase[v] = 1
            act_count += 1
            d = _power_law(mu, t0, cap)
        ht[0] = t + d
        _sift_down(ht, hv, n, 0)
    return out


@njit(cache=True)
def cosim(
    indptr,
    indices,
    lam,
    mu,
    t0,
    cap,
    pmat,
    w,
    delta,
    vmut,
    strategies,
    horizon,
    seed,
    stop_on_absorption,
    sample_start,
    sample_dt,
    max_samples,
):
    """Fused activation + strategy-update event loop.

    Returns (outcome_code, end_time, coop_count, n_filled, samples) where
    samples holds the cooperation fraction at sample_start + k*sample_dt.
    With stop_on_absorption the run ends as soon as the strategy vector is
    monomorphic (mutation must be off for that to be meaningful).
    """
    np.random.seed(seed)
    n = len(indptr) - 1
    s = strategies.copy()
    coop = int(s.sum())

    samples = np.empty(max_samples)
    filled = 0
    next_sample = sample_start

    if stop_on_absorption and (coop == 0 or coop == n):
        code = OUTCOME_FIXED_C if coop == n else OUTCOME_FIXED_D
        return code, 0.0, coop, filled, samples

    phase, end_time = _init_activation(n, lam, mu, t0, cap)
    tr_t = end_time.copy()
    tr_v = np.arange(n, dtype=np.int64)
    _heapify(tr_t, tr_v, n)

    # update-event heap; at most one pending update per vertex by construction
    up_t = np.empty(n)
    up_v = np.empty(n, dtype=np.int64)
    up_size = 0
    for v in range(n):
        if phase[v] == 1:
            u = np.random.exponential(1.0 / delta)
            if u < end_time[v]:
                up_t[up_size] = u
                up_v[up_size] = v
                up_size += 1
                _sift_up(up_t, up_v, up_size - 1)

    max_deg = 0
    for v in range(n):
        d = indptr[v + 1] - indptr[v]
        if d > max_deg:
            max_deg = int(d)
    cand_f = np.empty(max_deg)
    cand_j = np.empty(max_deg, dtype=np.int64)

    code = OUTCOME_TIMEOUT
    t_end = horizon
    while True:
        t_tr = tr_t[0]
        t_up = up_t[0] if up_size > 0 else np.inf
        take_transition = t_tr <= t_up  # transitions win ties
        t_next = t_tr if take_transition else t_up

        while filled < max_samples and next_sample < t_next:
            samples[filled] = coop / n
            filled += 1
            next_sample += sample_dt
        if t_next > horizon:
            break

        if take_transition:
            v = tr_v[0]
            if phase[v] == 1:
                phase[v] = 0
                d = _power_law(lam, t0, cap)
                tr_t[0] = t_tr + d
                end_time[v] = t_tr + d
            else:
                phase[v] = 1
                d = _power_law(mu, t0, cap)
                tr_t[0] = t_tr + d
                end_time[v] = t_tr + d
                u = t_tr + np.random.exponential(1.0 / delta)
                if u < end_time[v]:
                    up_t[up_size] = u
                    up_v[up_size] = v
                    up_size += 1
                    _sift_up(up_t, up_v, up_size - 1)
            _sift_down(tr_t, tr_v, n, 0)
        else:
            v = up_v[0]
            up_size -= 1
            up_t[0] = up_t[up_size]
            up_v[0] = up_v[up_size]
            _sift_down(up_t, up_v, up_size, 0)

            # v is activated by construction of the schedule
            if vmut > 0.0 and np.random.random() < vmut:
                new_s = 1 if np.random.random() < 0.5 else 0
                coop += new_s - int(s[v])
                s[v] = np.uint8(new_s)
            else:
                new_s = -1
                if w == 0.0:
                    cnt = 0
                    for idx in range(indptr[v], indptr[v + 1]):
                        if phase[indices[idx]] == 1:
                            cnt += 1
                    if cnt > 0:
                        pick = int(np.random.random() * cnt)
                        seen = 0
                        for idx in range(indptr[v], indptr[v + 1]):
                            j = indices[idx]
                            if phase[j] == 1:
                                if seen == pick:
                                    new_s = int(s[j])
                                    break
                                seen += 1
                else:
                    m = 0
                    total = 0.0
                    for idx in range(indptr[v], indptr[v + 1]):
                        j = indices[idx]
                        if phase[j] == 1:
                            pay = 0.0
                            for idx2 in range(indptr[j], indptr[j + 1]):
                                mm = indices[idx2]
                                if phase[mm] == 1:
                                    pay += pmat[int(s[j]), int(s[mm])]
                            f = 1.0 + w * pay
                            cand_f[m] = f
                            cand_j[m] = j
                            total += f
                            m += 1
                    if m > 0:
                        r = np.random.random() * total
                        acc = 0.0
                        new_s = int(s[cand_j[m - 1]])
                        for ii in range(m):
                            acc += cand_f[ii]
                            if r < acc:
                                new_s = int(s[cand_j[ii]])
                                break
                if new_s >= 0:
                    coop += new_s - int(s[v])
                    s[v] = np.uint8(new_s)

            if stop_on_absorption and (coop == 0 or coop == n):
                code = OUTCOME_FIXED_C if coop == n else OUTCOME_FIXED_D
                t_end = t_up
                break

            u = t_up + np.random.exponential(1.0 / delta)
            if u < end_time[v]:
                up_t[up_size] = u
                up_v[up_size] = v
                up_size += 1
                _sift_up(up_t, up_v, up_size - 1)

    return code, t_end, coop, filled, samples
