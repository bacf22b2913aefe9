"""Compiled inner loops.

Everything here works on plain int64 arrays holding canonical residues.  The
public modules wrap these with argument checking; nothing in this file
validates its input.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def inv_mod(a, q):
    # extended Euclid; a must be a unit mod q
    r0, r1 = q, a % q
    s0, s1 = 0, 1
    while r1 != 0:
        t = r0 // r1
        r0, r1 = r1, r0 - t * r1
        s0, s1 = s1, s0 - t * s1
    return s0 % q


@njit(cache=True)
def valuation(x, p, e):
    if x == 0:
        return e
    v = 0
    while x % p == 0:
        x //= p
        v += 1
    return v


@njit(cache=True)
def snf_exponents(A, p, e):
    """Elementary-divisor exponents of a square or rectangular matrix mod p**e.

    Returns min(rows, cols) exponents in [0, e], ascending.
    """
    q = p**e
    M = A.copy() % q
    r, c = M.shape
    k_max = min(r, c)
    out = np.empty(k_max, dtype=np.int64)
    for k in range(k_max):
        best = e
        bi = -1
        bj = -1
        for i in range(k, r):
            for j in range(k, c):
                x = M[i, j]
                if x != 0:
                    v = valuation(x, p, e)
                    if v < best:
                        best = v
                        bi = i
                        bj = j
                        if v == 0:
                            break
            if best == 0:
                break
        if bi < 0:
            for t in range(k, k_max):
                out[t] = e
            return out
        if bi != k:
            for j in range(c):
                tmp = M[k, j]
                M[k, j] = M[bi, j]
                M[bi, j] = tmp
        if bj != k:
            for i in range(r):
                tmp = M[i, k]
                M[i, k] = M[i, bj]
                M[i, bj] = tmp
        pv = p**best
        u_inv = inv_mod(M[k, k] // pv, q)
        for i in range(k + 1, r):
            if M[i, k] != 0:
                f = (M[i, k] // pv) * u_inv % q
                for j in range(k, c):
                    M[i, j] = (M[i, j] - f * M[k, j]) % q
        for j in range(k + 1, c):
            if M[k, j] != 0:
                f = (M[k, j] // pv) * u_inv % q
                for i in range(k, r):
                    M[i, j] = (M[i, j] - f * M[i, k]) % q
        out[k] = best
    return out


@njit(cache=True)
def snf_exponents_batch(As, p, e):
    n = As.shape[0]
    k = min(As.shape[1], As.shape[2])
    out = np.empty((n, k), dtype=np.int64)
    for b in range(n):
        out[b] = snf_exponents(As[b], p, e)
    return out


@njit(cache=True)
def row_reduce(A, p):
    """In-place row echelon form over F_p; returns (rank, pivot columns)."""
    r, c = A.shape
    piv = np.empty(min(r, c), dtype=np.int64)
    rank = 0
    for j in range(c):
        if rank == r:
            break
        pr = -1
        for i in range(rank, r):
            if A[i, j] % p != 0:
                pr = i
                break
        if pr < 0:
            continue
        if pr != rank:
            for t in range(c):
                tmp = A[rank, t]
                A[rank, t] = A[pr, t]
                A[pr, t] = tmp
        inv = inv_mod(A[rank, j], p)
        for t in range(c):
            A[rank, t] = A[rank, t] * inv % p
        for i in range(r):
            if i != rank and A[i, j] != 0:
                f = A[i, j]
                for t in range(c):
                    A[i, t] = (A[i, t] - f * A[rank, t]) % p
        piv[rank] = j
        rank += 1
    return rank, piv[:rank]


@njit(cache=True)
def rank_mod_p(A, p):
    M = A.copy() % p
    rank, _ = row_reduce(M, p)
    return rank


@njit(cache=True)
def det_mod_p(A, p):
    M = A.copy() % p
    n = M.shape[0]
    det = 1
    for j in range(n):
        pr = -1
        for i in range(j, n):
            if M[i, j] != 0:
                pr = i
                break
        if pr < 0:
            return 0
        if pr != j:
            for t in range(n):
                tmp = M[j, t]
                M[j, t] = M[pr, t]
                M[pr, t] = tmp
            det = -det
        det = det * M[j, j] % p
        inv = inv_mod(M[j, j], p)
        for i in range(j + 1, n):
            if M[i, j] != 0:
                f = M[i, j] * inv % p
                for t in range(j, n):
                    M[i, t] = (M[i, t] - f * M[j, t]) % p
    return det % p


@njit(cache=True)
def legendre_bit(a, p):
    """0 if a is a nonzero square mod odd p, 1 if a non-square."""
    a %= p
    r = 1
    base = a
    ex = (p - 1) // 2
    while ex > 0:
        if ex & 1:
            r = r * base % p
        base = base * base % p
        ex >>= 1
    return 0 if r == 1 else 1


@njit(cache=True)
def wall_spinor(g, bil, p):
    """Spinor class bit of an isometry g over F_p, p odd.

    Uses the determinant of the Wall form (u, (1-g)y) -> B(u, y) on im(1-g),
    signed so that a reflection r_v gets the class of -Q(v).
    """
    n = g.shape[0]
    A = np.empty((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(n):
            A[i, j] = (-g[i, j]) % p
        A[i, i] = (A[i, i] + 1) % p
    work = A.copy()
    k, piv = row_reduce(work, p)
    if k == 0:
        return 0
    G = np.empty((k, k), dtype=np.int64)
    for a in range(k):
        ja = piv[a]
        for b in range(k):
            jb = piv[b]
            s = 0
            for i in range(n):
                s += A[i, ja] * bil[i, jb]
            G[a, b] = s % p
    d = det_mod_p(G, p)
    if k % 2 == 1:
        d = (-d) % p
    return legendre_bit(d, p)


@njit(cache=True)
def kernel_dim_mod_p(g, p):
    n = g.shape[0]
    A = np.empty((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(n):
            A[i, j] = g[i, j] % p
        A[i, i] = (A[i, i] - 1) % p
    rank, _ = row_reduce(A, p)
    return n - rank


@njit(cache=True)
def invariants_batch(gs, bil, p):
    """(dim ker(g-1) mod p, spinor bit) for a stack of isometries."""
    n = gs.shape[0]
    dims = np.empty(n, dtype=np.int64)
    spin = np.zeros(n, dtype=np.int64)
    for b in range(n):
        dims[b] = kernel_dim_mod_p(gs[b], p)
        if p != 2:
            spin[b] = wall_spinor(gs[b], bil, p)
    return dims, spin


# --- exhaustive enumeration of split orthogonal groups over F_p -------------
#
# O(2m, F_p) is in bijection with ordered hyperbolic bases (e_1, f_1, ..., e_m,
# f_m) of the standard split space; g sends the standard pair (E_{2i}, E_{2i+1})
# to (e_i, f_i).  The walk below visits every such basis exactly once.  It is
# iterative on purpose: numba's on-disk cache does not cope with recursion.


@njit(cache=True)
def invariants_into(g, bil, p, A, W, G, piv):
    """(dim ker(g-1), spinor bit) over F_p using caller-owned scratch space."""
    n = g.shape[0]
    for i in range(n):
        for j in range(n):
            A[i, j] = (-g[i, j]) % p
        A[i, i] = (A[i, i] + 1) % p
    for i in range(n):
        for j in range(n):
            W[i, j] = A[i, j]
    # row echelon of W, pivots into piv
    rank = 0
    for j in range(n):
        pr = -1
        for i in range(rank, n):
            if W[i, j] != 0:
                pr = i
                break
        if pr < 0:
            continue
        if pr != rank:
            for t in range(n):
                tmp = W[rank, t]
                W[rank, t] = W[pr, t]
                W[pr, t] = tmp
        inv = inv_mod(W[rank, j], p)
        for i in range(rank + 1, n):
            if W[i, j] != 0:
                f = W[i, j] * inv % p
                for t in range(j, n):
                    W[i, t] = (W[i, t] - f * W[rank, t]) % p
        piv[rank] = j
        rank += 1
    if p == 2 or rank == 0:
        return n - rank, 0
    for a in range(rank):
        ja = piv[a]
        for b in range(rank):
            jb = piv[b]
            s = 0
            for i in range(n):
                s += A[i, ja] * bil[i, jb]
            G[a, b] = s % p
    # determinant of the leading rank x rank block of G
    det = 1
    for j in range(rank):
        pr = -1
        for i in range(j, rank):
            if G[i, j] != 0:
                pr = i
                break
        if pr < 0:
            det = 0
            break
        if pr != j:
            for t in range(rank):
                tmp = G[j, t]
                G[j, t] = G[pr, t]
                G[pr, t] = tmp
            det = -det
        det = det * G[j, j] % p
        inv = inv_mod(G[j, j], p)
        for i in range(j + 1, rank):
            if G[i, j] != 0:
                f = G[i, j] * inv % p
                for t in range(j, rank):
                    G[i, t] = (G[i, t] - f * G[j, t]) % p
    if rank % 2 == 1:
        det = -det
    return n - rank, legendre_bit(det % p, p)


@njit(cache=True)
def all_vectors(p, n):
    total = p**n
    vecs = np.empty((total, n), dtype=np.int64)
    for idx in range(total):
        x = idx
        for i in range(n):
            vecs[idx, i] = x % p
            x //= p
    return vecs


@njit(cache=True)
def split_q(x, p):
    s = 0
    for i in range(0, x.shape[0], 2):
        s += x[i] * x[i + 1]
    return s % p


@njit(cache=True)
def split_b(x, y, p):
    s = 0
    for i in range(0, x.shape[0], 2):
        s += x[i] * y[i + 1] + x[i + 1] * y[i]
    return s % p


@njit(cache=True)
def _prepare(p, m):
    vecs = all_vectors(p, 2 * m)
    qv = np.empty(vecs.shape[0], dtype=np.int64)
    for i in range(vecs.shape[0]):
        qv[i] = split_q(vecs[i], p)
    return vecs, qv


@njit(cache=True)
def _pairs_in(cand, cnt, vecs, qv, p, out):
    k = 0
    for a in range(cnt):
        ei = cand[a]
        if ei == 0 or qv[ei] != 0:
            continue
        for b in range(cnt):
            fi = cand[b]
            if qv[fi] == 0 and split_b(vecs[ei], vecs[fi], p) == 1:
                out[k, 0] = ei
                out[k, 1] = fi
                k += 1
    return k


@njit(cache=True)
def _walk(p, m, bil, start, g, cand0, cnt0, dims, spin, mats, store):
    """Visit every completion of the first `start` columns of g."""
    n = 2 * m
    vecs, qv = _prepare(p, m)
    total = vecs.shape[0]
    cand = np.empty((m + 1, total), dtype=np.int64)
    ccount = np.zeros(m + 1, dtype=np.int64)
    npairs_max = cnt0 * cnt0
    pairs = np.empty((m, npairs_max, 2), dtype=np.int64)
    npairs = np.zeros(m, dtype=np.int64)
    ptr = np.zeros(m, dtype=np.int64)
    A = np.empty((n, n), dtype=np.int64)
    W = np.empty((n, n), dtype=np.int64)
    G = np.empty((n, n), dtype=np.int64)
    piv = np.empty(n, dtype=np.int64)
    pos = 0
    if start == m:
        d, s = invariants_into(g, bil, p, A, W, G, piv)
        dims[0] = d
        spin[0] = s
        if store:
            mats[0] = g
        return 1
    for t in range(cnt0):
        cand[start, t] = cand0[t]
    ccount[start] = cnt0
    npairs[start] = _pairs_in(cand[start], cnt0, vecs, qv, p, pairs[start])
    ptr[start] = 0
    level = start
    while level >= start:
        if ptr[level] == npairs[level]:
            level -= 1
            continue
        ei = pairs[level, ptr[level], 0]
        fi = pairs[level, ptr[level], 1]
        ptr[level] += 1
        for i in range(n):
            g[i, 2 * level] = vecs[ei, i]
            g[i, 2 * level + 1] = vecs[fi, i]
        if level == m - 1:
            d, s = invariants_into(g, bil, p, A, W, G, piv)
            dims[pos] = d
            spin[pos] = s
            if store:
                for i in range(n):
                    for j in range(n):
                        mats[pos, i, j] = g[i, j]
            pos += 1
            continue
        c = 0
        for t in range(ccount[level]):
            x = cand[level, t]
            if split_b(vecs[x], vecs[ei], p) == 0 and split_b(vecs[x], vecs[fi], p) == 0:
                cand[level + 1, c] = x
                c += 1
        ccount[level + 1] = c
        level += 1
        npairs[level] = _pairs_in(cand[level], c, vecs, qv, p, pairs[level])
        ptr[level] = 0
    return pos


@njit(cache=True)
def enumerate_split(p, m, order, bil, store):
    """Invariants (and optionally matrices) of every element of O(2m, F_p).

    Returns (count, dims, spinor bits, matrices); dims are dim ker(g-1).
    """
    n = 2 * m
    dims = np.empty(order, dtype=np.int8)
    spin = np.zeros(order, dtype=np.int8)
    if store:
        mats = np.empty((order, n, n), dtype=np.int64)
    else:
        mats = np.empty((1, n, n), dtype=np.int64)
    total = p**n
    g = np.zeros((n, n), dtype=np.int64)
    pos = _walk(p, m, bil, 0, g, np.arange(total), total, dims, spin, mats, store)
    return pos, dims, spin, mats


@njit(cache=True)
def root_pairs(p, m):
    """All (e, f) vector indices that can be the image of (E_0, E_1)."""
    vecs, qv = _prepare(p, m)
    total = vecs.shape[0]
    out = np.empty((total * total // p, 2), dtype=np.int64)
    k = _pairs_in(np.arange(total), total, vecs, qv, p, out)
    return out[:k], vecs


@njit(cache=True)
def enumerate_subtree(p, m, ei, fi, sub_order, bil):
    """Matrices, kernel dims and spinor bits of the elements sending
    (E_0, E_1) to the pair of vectors with indices (ei, fi)."""
    n = 2 * m
    vecs, qv = _prepare(p, m)
    total = vecs.shape[0]
    mats = np.empty((sub_order, n, n), dtype=np.int64)
    dims = np.empty(sub_order, dtype=np.int8)
    spin = np.zeros(sub_order, dtype=np.int8)
    g = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        g[i, 0] = vecs[ei, i]
        g[i, 1] = vecs[fi, i]
    cand = np.empty(total, dtype=np.int64)
    c = 0
    for t in range(total):
        if split_b(vecs[t], vecs[ei], p) == 0 and split_b(vecs[t], vecs[fi], p) == 0:
            cand[c] = t
            c += 1
    _walk(p, m, bil, 1, g, cand[:c], c, dims, spin, mats, True)
    return mats, dims, spin


# --- Z/p^e lifting --------------------------------------------------------


@njit(cache=True)
def kernel_exps_of_lifts(base, shifts, p, e):
    """SNF exponents of (base + shift - 1) mod p**e for each shift matrix."""
    q = p**e
    n = base.shape[0]
    cnt = shifts.shape[0]
    out = np.empty((cnt, n), dtype=np.int8)
    A = np.empty((n, n), dtype=np.int64)
    for b in range(cnt):
        for i in range(n):
            for j in range(n):
                A[i, j] = (base[i, j] + shifts[b, i, j]) % q
            A[i, i] = (A[i, i] - 1) % q
        ex = snf_exponents(A, p, e)
        for i in range(n):
            out[b, i] = ex[n - 1 - i]
    return out


@njit(cache=True)
def product_fixed_sum(d1, s1, d2, s2, p1, p2, dmode, t1, t2):
    """(sum of #ker(g - 1), number of g) over pairs (g1, g2) passing the coset test.

    dmode: -2 no Dickson condition, -1 equal Dickson bits, 0/1 both equal to it.
    t1, t2: spinor targets or -1 for none.  The kernel of g = (g1, g2) over
    Z/(p1 p2) has size p1^dim1 * p2^dim2.
    """
    pw1 = np.empty(d1.max() + 1, dtype=np.int64)
    pw2 = np.empty(d2.max() + 1, dtype=np.int64)
    pw1[0] = 1
    pw2[0] = 1
    for i in range(1, len(pw1)):
        pw1[i] = pw1[i - 1] * p1
    for i in range(1, len(pw2)):
        pw2[i] = pw2[i - 1] * p2
    total = 0
    count = 0
    for i in range(len(d1)):
        a = d1[i] & 1
        if t1 >= 0 and s1[i] != t1:
            continue
        if dmode >= 0 and a != dmode:
            continue
        k1 = pw1[d1[i]]
        for j in range(len(d2)):
            if t2 >= 0 and s2[j] != t2:
                continue
            if dmode != -2 and (d2[j] & 1) != a:
                continue
            total += k1 * pw2[d2[j]]
            count += 1
    return total, count
