"""Numba kernels for incremental change statistics and Metropolis sampling.

All kernels operate on small dense int8 signed matrices (one block at a
time, values in {-1, 0, +1}, zero diagonal).  Change statistics are always
incremental: the cost per dyad is O(n * local degree), never a full
recomputation of the statistic.

Term codes (must match statistics._TERM_CODES):
  0 EdgesPos    1 EdgesNeg
  2 GWDPos      3 GWDNeg
  4 GWESEPos    5 GWESENeg     (focal edge sign +/-, partners = shared enemies)
  6 GWESFPos    7 GWESFNeg     (focal edge sign +/-, partners = shared friends)
  8 TriadPPP    9 TriadPMM     (indicator triads = shared-partner terms at omega 0)
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _shared_partners(mat, a, b, p):
    # nodes m with mat[a,m] == p == mat[b,m]; the zero diagonal excludes a, b
    n = mat.shape[0]
    c = 0
    for m in range(n):
        if mat[a, m] == p and mat[b, m] == p:
            c += 1
    return c


@njit(cache=True, nogil=True)
def dyad_change(mat, i, j, codes, omegas, dplus, dminus):
    """Raw change statistics for setting dyad (i, j) from 0 to +1 / -1.

    mat[i, j] must already be zero; the rest of the network is conditioned
    on as-is.  Results overwrite dplus and dminus (length = codes.size).
    """
    n = mat.shape[0]
    for t in range(codes.shape[0]):
        c = codes[t]
        om = omegas[t]
        dplus[t] = 0.0
        dminus[t] = 0.0
        if c == 0:
            dplus[t] = 1.0
        elif c == 1:
            dminus[t] = 1.0
        elif c == 2 or c == 3:
            s = 1 if c == 2 else -1
            base = 1.0 - np.exp(-om)
            di = 0
            dj = 0
            for m in range(n):
                if mat[i, m] == s:
                    di += 1
                if mat[j, m] == s:
                    dj += 1
            val = base ** di + base ** dj
            if s == 1:
                dplus[t] = val
            else:
                dminus[t] = val
        else:
            if c == 4:
                e_sign = 1
                p_sign = -1
            elif c == 5:
                e_sign = -1
                p_sign = -1
            elif c == 6:
                e_sign = 1
                p_sign = 1
            elif c == 7:
                e_sign = -1
                p_sign = 1
            elif c == 8:
                e_sign = 1
                p_sign = 1
                om = 0.0
            else:  # c == 9
                e_sign = 1
                p_sign = -1
                om = 0.0
            base = 1.0 - np.exp(-om)
            for sigma in (1, -1):
                val = 0.0
                if sigma == p_sign:
                    # the new edge makes i a partner of j's focal edges and
                    # j a partner of i's focal edges
                    for h in range(n):
                        if h == i or h == j:
                            continue
                        if mat[i, h] == e_sign and mat[j, h] == p_sign:
                            val += base ** _shared_partners(mat, i, h, p_sign)
                        if mat[j, h] == e_sign and mat[i, h] == p_sign:
                            val += base ** _shared_partners(mat, j, h, p_sign)
                if sigma == e_sign:
                    cnt = _shared_partners(mat, i, j, p_sign)
                    val += np.exp(om) * (1.0 - base ** cnt)
                if sigma == 1:
                    dplus[t] = val
                else:
                    dminus[t] = val


@njit(cache=True, nogil=True)
def all_dyad_changes(mat, codes, omegas):
    """Change statistics for every dyad of a block, conditioning each on
    the observed rest of the network.

    Returns (dplus, dminus, values): (m, p) float arrays over dyads in
    lexicographic i < j order, plus the observed dyad values.
    """
    n = mat.shape[0]
    m = n * (n - 1) // 2
    p = codes.shape[0]
    dplus = np.zeros((m, p))
    dminus = np.zeros((m, p))
    values = np.zeros(m, dtype=np.int8)
    r = 0
    for i in range(n - 1):
        for j in range(i + 1, n):
            cur = mat[i, j]
            values[r] = cur
            mat[i, j] = 0
            mat[j, i] = 0
            dyad_change(mat, i, j, codes, omegas, dplus[r], dminus[r])
            mat[i, j] = cur
            mat[j, i] = cur
            r += 1
    return dplus, dminus, values


@njit(cache=True, nogil=True)
def mh_chain(mat, s_cur, theta, codes, omegas, tri_i, tri_j,
             dyad_idx, value_idx, log_u, record_every, out_stats):
    """Run one Metropolis segment over pre-drawn proposal randomness.

    Proposal: uniform dyad (dyad_idx into tri_i/tri_j), uniform over the two
    values different from the current one (value_idx in {0, 1}), acceptance
    log-probability min(0, theta . delta).  mat and s_cur (the running raw
    statistic vector) are updated in place.  When record_every > 0 the raw
    statistics are written to out_stats every record_every proposals.
    Returns the number of accepted proposals.
    """
    p = theta.shape[0]
    dplus = np.zeros(p)
    dminus = np.zeros(p)
    n_acc = 0
    r = 0
    n_rec = out_stats.shape[0]
    for t in range(dyad_idx.shape[0]):
        d = dyad_idx[t]
        i = tri_i[d]
        j = tri_j[d]
        cur = mat[i, j]
        if cur == -1:
            cand = 0 if value_idx[t] == 0 else 1
        elif cur == 0:
            cand = -1 if value_idx[t] == 0 else 1
        else:
            cand = -1 if value_idx[t] == 0 else 0
        mat[i, j] = 0
        mat[j, i] = 0
        dyad_change(mat, i, j, codes, omegas, dplus, dminus)
        logr = 0.0
        for q in range(p):
            delta = 0.0
            if cand == 1:
                delta += dplus[q]
            elif cand == -1:
                delta += dminus[q]
            if cur == 1:
                delta -= dplus[q]
            elif cur == -1:
                delta -= dminus[q]
            logr += theta[q] * delta
        if log_u[t] < logr:
            mat[i, j] = cand
            mat[j, i] = cand
            for q in range(p):
                if cand == 1:
                    s_cur[q] += dplus[q]
                elif cand == -1:
                    s_cur[q] += dminus[q]
                if cur == 1:
                    s_cur[q] -= dplus[q]
                elif cur == -1:
                    s_cur[q] -= dminus[q]
            n_acc += 1
        else:
            mat[i, j] = cur
            mat[j, i] = cur
        if record_every > 0:
            if (t + 1) % record_every == 0 and r < n_rec:
                for q in range(p):
                    out_stats[r, q] = s_cur[q]
                r += 1
    return n_acc
