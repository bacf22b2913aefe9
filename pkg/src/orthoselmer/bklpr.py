"""Random Lagrangian intersections and the alternating-matrix torsion model."""

from dataclasses import dataclass

import numpy as np

from . import _jit
from .distrib import Distribution
from .modring import ModuleClass, Modulus
from .orthogroup import RETRY_CAP, _split_bil, sample_split_batch
from .quadspace import build_standard_split
from .rng import CHUNK, map_chunks, stream

BUFFER = 4
RANK_LAW = {0: 0.5, 1: 0.5}


def standard_lagrangian(m):
    """Basis (columns) of span(E_0, E_2, ...), isotropic for the standard split form."""
    Z0 = np.zeros((2 * m, m), dtype=np.int64)
    Z0[0::2, :] = np.eye(m, dtype=np.int64)
    return Z0


def dual_lagrangian(m):
    """span(E_1, E_3, ...), transverse to the standard one."""
    W0 = np.zeros((2 * m, m), dtype=np.int64)
    W0[1::2, :] = np.eye(m, dtype=np.int64)
    return W0


@dataclass(frozen=True)
class LagrangianPair:
    m: int
    ell: int
    e: int
    Z: np.ndarray
    W: np.ndarray

    @property
    def space(self):
        return build_standard_split(self.m, self.ell**self.e)

    def check(self):
        q = self.ell**self.e
        th = np.asarray(self.space.theta)
        for B in (self.Z, self.W):
            vals = np.einsum("ik,ij,jk->k", B, th, B) % q
            if np.any(vals):
                raise ValueError("basis is not isotropic")
            pairs = np.einsum("ik,ij,jl->kl", B, th + th.T, B) % q
            if np.any(pairs):
                raise ValueError("span is not totally isotropic")
            if np.any(_jit.snf_exponents(B % self.ell, self.ell, 1)):
                raise ValueError("basis does not span a direct summand")
        return True


@dataclass(frozen=True)
class SelmerSample:
    S: ModuleClass
    r: int
    T: ModuleClass
    chain: tuple

    def to_json(self):
        return {"S": self.S.to_json(), "r": self.r, "T": self.T.to_json(),
                "chain": list(self.chain)}


def sample_lagrangian_pair(m, ell, e, seed):
    """Z = g1 Z0, W = g2 Z0 for independent uniform g1, g2 in O(2m, Z/ell^e)."""
    rng = seed if isinstance(seed, np.random.Generator) else stream(seed)
    g = sample_split_batch(rng, 2, m, ell, e)
    Z0 = standard_lagrangian(m)
    q = ell**e
    return LagrangianPair(m, ell, e, g[0] @ Z0 % q, g[1] @ Z0 % q)


def pairing_matrix(Z, W, m, q):
    """Y = Z^T B W; w in span W lies in span Z iff Y w = 0 (Z is its own complement)."""
    return Z.T @ _split_bil(m) @ W % q


def _selmer_from_exps(exps, ell, e):
    """exps: ascending elementary-divisor exponents of Y over Z/ell^e."""
    exps = [int(c) for c in exps]
    chain = tuple(sum(1 for c in exps if c >= j) for j in range(1, e + 1))
    r = chain[0] % 2 if chain else 0
    S = ModuleClass.from_dict({ell: [c for c in exps if c > 0]})
    tors = sorted((c for c in exps if c > 0), reverse=True)
    if r:
        if not tors or tors[0] != e:
            raise ArithmeticError("odd chain without a maximal exponent")
        tors = tors[1:]
    T = ModuleClass.from_dict({ell: tors})
    return SelmerSample(S, r, T, chain)


def intersect_selmer(pair):
    """S[ell^e] = Z/ell^e cap W/ell^e, its chain d_j = dim S_j, rank and torsion.

    The rank is read from the parity of d_1: the intersection of the two
    Z_ell-lattices has rank 0 or 1 almost surely and that rank has the
    parity of d_1.
    """
    q = pair.ell**pair.e
    Y = pairing_matrix(pair.Z, pair.W, pair.m, q)
    exps = _jit.snf_exponents(Y, pair.ell, pair.e)
    return _selmer_from_exps(exps, pair.ell, pair.e)


def sample_intersection_exps(m, ell, e, count, seed, threads=None, chunk=CHUNK):
    """(count, m) ascending exponents of Y for independent random pairs."""
    q = ell**e
    Z0 = standard_lagrangian(m)
    bil = _split_bil(m)

    def work(ci, size):
        rng = stream(seed, ci)
        g1 = sample_split_batch(rng, size, m, ell, e)
        g2 = sample_split_batch(rng, size, m, ell, e)
        Z = g1 @ Z0 % q
        W = g2 @ Z0 % q
        Y = np.einsum("bji,jk,bkl->bil", Z, bil, W) % q
        return _jit.snf_exponents_batch(Y, ell, e)

    return np.concatenate(map_chunks(work, count, chunk, threads))


def intersection_distribution(m, ell, e, count, seed, threads=None):
    """Empirical law of (r, S[ell^e]) from the intersection model, plus the chains."""
    exps = sample_intersection_exps(m, ell, e, count, seed, threads)
    chains = np.stack([(exps >= j).sum(axis=1) for j in range(1, e + 1)], axis=1)
    counts = {}
    rows, cnt = np.unique(exps, axis=0, return_counts=True)
    for row, c in zip(rows, cnt):
        s = _selmer_from_exps(row, ell, e)
        key = (s.r, s.S)
        counts[key] = counts.get(key, 0) + int(c)
    meta = {"model": "intersection", "m": m, "ell": ell, "e": e, "samples": count,
            "seed": seed}
    return Distribution.empirical(counts, meta), chains


# --- alternating model ------------------------------------------------------


def _random_alternating(rng, count, m, q):
    A = np.zeros((count, m, m), dtype=np.int64)
    iu = np.triu_indices(m, 1)
    vals = rng.integers(0, q, (count, len(iu[0])))
    A[:, iu[0], iu[1]] = vals
    A[:, iu[1], iu[0]] = (-vals) % q
    return A


def sample_alternating_batch(m, r, ell, e, count, rng, buffer=BUFFER):
    """(count, m) descending torsion exponents (zero padded) drawn from A_{m,r,ell}
    truncated at ell^e.

    Uniform alternating matrices mod ell^(e+b) are kept when exactly r
    elementary divisors vanish; the torsion exponents are capped at e.
    """
    if not 0 <= r <= m or (m - r) % 2:
        raise ValueError("need 0 <= r <= m with m - r even")
    out = np.zeros((count, m), dtype=np.int64)
    if r == m:
        return out
    if r >= 2:
        raise ValueError("ranks >= 2 form a null set of alternating matrices; "
                         "only r in {0, 1} (or r = m) is supported")
    E = e + buffer
    q = ell**E
    have = 0
    tries = 0
    while have < count:
        need = count - have
        batch = need + need // 8 + 8
        tries += batch
        if tries > RETRY_CAP * max(count, 1):
            raise RuntimeError(f"alternating model rejected too often; raise the buffer "
                               f"above {buffer}")
        exps = _jit.snf_exponents_batch(_random_alternating(rng, batch, m, q), ell, E)
        ok = (exps == E).sum(axis=1) == r
        exps = exps[ok][:need]
        tors = np.where(exps == E, 0, np.minimum(exps, e))
        out[have:have + len(tors)] = -np.sort(-tors, axis=1)
        have += len(tors)
    return out


def sample_alternating_model(m, r, ell, e, buffer=BUFFER, seed=0):
    """One draw of (coker A)_tors truncated at ell^e, as a ModuleClass."""
    rng = seed if isinstance(seed, np.random.Generator) else stream(seed)
    row = sample_alternating_batch(m, r, ell, e, 1, rng, buffer)[0]
    return ModuleClass.from_dict({ell: [int(c) for c in row if c > 0]})


def alternating_distribution(m, r, ell, e, count, seed, buffer=BUFFER, threads=None):
    def work(ci, size):
        return sample_alternating_batch(m, r, ell, e, size, stream(seed, ci), buffer)

    rows = np.concatenate(map_chunks(work, count, CHUNK, threads))
    counts = _class_counts(rows, ell)
    return Distribution.empirical(counts, {"model": "alternating", "m": m, "r": r,
                                           "ell": ell, "e": e, "buffer": buffer,
                                           "samples": count, "seed": seed})


def _class_counts(rows, ell):
    out = {}
    vals, cnt = np.unique(rows, axis=0, return_counts=True)
    for row, c in zip(vals, cnt):
        cls = ModuleClass.from_dict({ell: [int(x) for x in row if x > 0]})
        out[cls] = out.get(cls, 0) + int(c)
    return out


def parity_size(m, r):
    """m or m + 1, whichever has the parity of r."""
    return m if (m - r) % 2 == 0 else m + 1


def bklpr_joint(n, m, count, seed, buffer=BUFFER, threads=None):
    """Empirical joint law of (rank, Sel_n) in the BKLPR model.

    r is 0 or 1 with probability 1/2; at each ell^a exactly dividing n the
    torsion T_ell is drawn from the alternating model of size m (adjusted
    by one to match the parity of r) truncated at ell^a, and
    G = (Z/n)^r + sum of the T_ell.
    m may be an int or a dict {ell: m_ell}.
    """
    mod = Modulus.of(n)
    if mod.n < 2:
        raise ValueError("modulus must be >= 2")
    ms = m if isinstance(m, dict) else {ell: m for ell in mod.primes}

    def work(ci, size):
        rng = stream(seed, ci)
        ranks = rng.integers(0, 2, size)
        parts = {}
        for ell, a in mod.factorization:
            rows = np.zeros((size, ms[ell] + 1), dtype=np.int64)
            for r in (0, 1):
                idx = np.flatnonzero(ranks == r)
                mr = parity_size(ms[ell], r)
                rows[idx, :mr] = sample_alternating_batch(mr, r, ell, a, len(idx), rng, buffer)
            parts[ell] = rows
        return ranks, parts

    pieces = map_chunks(work, count, CHUNK, threads)
    counts = {}
    for ranks, parts in pieces:
        cols = [ranks[:, None]] + [parts[ell] for ell in mod.primes]
        table = np.concatenate(cols, axis=1)
        vals, cnt = np.unique(table, axis=0, return_counts=True)
        for row, c in zip(vals, cnt):
            r = int(row[0])
            d = {}
            pos = 1
            for ell, a in mod.factorization:
                w = ms[ell] + 1
                d[ell] = [a] * r + [int(x) for x in row[pos:pos + w] if x > 0]
                pos += w
            key = (r, ModuleClass.from_dict(d))
            counts[key] = counts.get(key, 0) + int(c)
    meta = {"model": "bklpr", "n": mod.n, "m": ms, "buffer": buffer, "samples": count,
            "seed": seed, "rank_law": RANK_LAW}
    return Distribution.empirical(counts, meta)


def rank_law():
    """The model rank law, exact by construction."""
    from fractions import Fraction

    return Distribution.exact({0: Fraction(1, 2), 1: Fraction(1, 2)})
