"""Quadratic spaces over Z/n.

A form is stored through an upper-triangular matrix ``theta`` with
Q(x) = x^T theta x, so that forms over F_2 are representable.  The bilinear
form is B = theta + theta^T.
"""

import json

import numpy as np

from . import _jit
from .modring import MatrixMod, Modulus, crt_join, matmul_mod

# E8 Cartan matrix: a chain 1-2-3-4-5-6-7 with node 8 attached to node 5
# (1-based).  With this numbering nodes 1, 3, 6, 8 are pairwise orthogonal.
E8_EDGES = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (4, 7)]


def e8_gram():
    G = 2 * np.eye(8, dtype=np.int64)
    for i, j in E8_EDGES:
        G[i, j] = G[j, i] = -1
    return G


class QuadSpace:
    """A nondegenerate quadratic form of even rank on (Z/n)^rank."""

    def __init__(self, theta, modulus, check=True):
        mod = Modulus.of(modulus)
        th = np.triu(np.array(theta, dtype=np.int64)) % mod.n
        if th.ndim != 2 or th.shape[0] != th.shape[1]:
            raise ValueError("theta must be square")
        if th.shape[0] % 2:
            raise ValueError("rank must be even")
        th.setflags(write=False)
        self.modulus = mod
        self.theta = th
        b = (th + th.T) % mod.n
        b.setflags(write=False)
        self.bilinear = b
        if check:
            for ell in mod.primes:
                if not self._nondegenerate_at(ell):
                    raise ValueError(f"form is degenerate modulo {ell}")

    def _nondegenerate_at(self, ell):
        # even rank: nondegenerate iff B is, also in characteristic 2
        return _jit.det_mod_p(self.bilinear, ell) != 0

    @property
    def n(self):
        return self.modulus.n

    @property
    def rank(self):
        return self.theta.shape[0]

    def Q(self, x):
        x = np.asarray(x, dtype=np.int64) % self.n
        return int(x @ matmul_mod(self.theta, x[:, None], self.n)[:, 0] % self.n)

    def B(self, x, y):
        x = np.asarray(x, dtype=np.int64) % self.n
        y = np.asarray(y, dtype=np.int64) % self.n
        return int(x @ matmul_mod(self.bilinear, y[:, None], self.n)[:, 0] % self.n)

    def Q_rows(self, X):
        """Q of each row of X."""
        X = np.asarray(X, dtype=np.int64) % self.n
        return np.einsum("ij,ij->i", X, matmul_mod(X, self.theta, self.n)) % self.n

    def reduce(self, m):
        """The same form read modulo a divisor m of n."""
        if self.n % m:
            raise ValueError(f"{m} does not divide {self.n}")
        return QuadSpace(self.theta, m)

    def __eq__(self, other):
        return (isinstance(other, QuadSpace) and self.n == other.n
                and np.array_equal(self.theta, other.theta))

    def __hash__(self):
        return hash((self.n, self.theta.tobytes()))

    def __repr__(self):
        return f"QuadSpace(rank={self.rank}, n={self.n})"

    def to_json(self):
        return json.dumps({"modulus": self.n, "rank": self.rank,
                           "theta": self.theta.tolist()})

    @classmethod
    def from_json(cls, s):
        d = json.loads(s)
        sp = cls(d["theta"], d["modulus"])
        if sp.rank != d["rank"]:
            raise ValueError("rank field does not match theta")
        return sp


def build_standard_split(m, modulus):
    """Q(x) = x_0 x_1 + x_2 x_3 + ... on (Z/n)^(2m)."""
    if m < 1:
        raise ValueError("half-rank must be >= 1")
    th = np.zeros((2 * m, 2 * m), dtype=np.int64)
    for i in range(m):
        th[2 * i, 2 * i + 1] = 1
    return QuadSpace(th, modulus)


def theta_from_gram(G):
    """Upper-triangular theta of the even lattice with Gram matrix G."""
    G = np.asarray(G, dtype=np.int64)
    if np.any(np.diag(G) % 2):
        raise ValueError("Gram matrix must have even diagonal")
    th = np.triu(G, 1)
    th[np.diag_indices_from(th)] = np.diag(G) // 2
    return th


def qsel_gram(d):
    """Integral Gram matrix of U^(2d-2) + (-E8)^d."""
    if d < 1:
        raise ValueError("height d must be >= 1")
    r = 12 * d - 4
    G = np.zeros((r, r), dtype=np.int64)
    for i in range(2 * d - 2):
        G[2 * i, 2 * i + 1] = G[2 * i + 1, 2 * i] = 1
    off = 4 * d - 4
    for k in range(d):
        s = off + 8 * k
        G[s:s + 8, s:s + 8] = -e8_gram()
    return G


def build_qsel(d, modulus):
    return QuadSpace(theta_from_gram(qsel_gram(d)), modulus)


def reflection_matrix(space, v):
    """Matrix of w -> w - B(w, v) Q(v)^{-1} v."""
    v = np.asarray(v, dtype=np.int64) % space.n
    qv = space.Q(v)
    try:
        inv = pow(qv, -1, space.n)
    except ValueError:
        raise ValueError("non-unit norm") from None
    Bv = matmul_mod(v[None, :], space.bilinear, space.n)[0]
    R = np.eye(space.rank, dtype=np.int64) - (inv * np.outer(v, Bv) % space.n)
    return MatrixMod(R, space.n)


def reflection(space, v):
    from .orthogroup import OrthoElem

    return OrthoElem(space, reflection_matrix(space, v), check=False)


def isometry_check(space, g):
    """True iff g^T theta g - theta is alternating with zero diagonal."""
    a = g.a if isinstance(g, MatrixMod) else np.asarray(g, dtype=np.int64)
    if a.shape != (space.rank, space.rank):
        return False
    n = space.n
    M = (matmul_mod(matmul_mod(a.T % n, space.theta, n), a % n, n) - space.theta) % n
    return bool(np.all(np.diag(M) == 0) and np.all((M + M.T) % n == 0))


# --- hyperbolic pairs ------------------------------------------------------


def _lex_vectors(rank, n, start, count):
    idx = np.arange(start, start + count, dtype=np.int64)
    out = np.empty((count, rank), dtype=np.int64)
    for k in range(rank - 1, -1, -1):
        out[:, k] = idx % n
        idx //= n
    return out


def _first_isotropic(space, limit=10**6):
    n = space.n
    total = n ** space.rank
    start = 1
    batch = 4096
    while start < min(total, limit):
        cnt = min(batch, total - start)
        X = _lex_vectors(space.rank, n, start, cnt)
        ok = space.Q_rows(X) == 0
        for ell in space.modulus.primes:
            ok &= np.any(X % ell != 0, axis=1)
        hit = np.flatnonzero(ok)
        if len(hit):
            return X[hit[0]]
        start += cnt
    raise ValueError("not split")


def _partner(space, e):
    # B(e, .) has a unit coefficient because e is primitive and B is unimodular
    ell, _ = space.modulus.local()
    n = space.n
    row = matmul_mod(e[None, :], space.bilinear, n)[0]
    units = np.flatnonzero(row % ell)
    if not len(units):
        raise ValueError("not split")
    i = units[0]
    y = np.zeros(space.rank, dtype=np.int64)
    y[i] = pow(int(row[i]), -1, n)
    return (y - space.Q(y) * e) % n


def find_hyperbolic_pair(space):
    """(e, f) with Q(e) = Q(f) = 0 and B(e, f) = 1.

    e is the lexicographically first primitive isotropic vector; f is obtained
    from the first coordinate where B(e, .) is a unit.  Composite moduli are
    handled prime by prime and glued.
    """
    if space.modulus.is_prime_power:
        e = _first_isotropic(space)
        return e, _partner(space, e)
    es, fs = {}, {}
    for ell, k in space.modulus.factorization:
        e, f = find_hyperbolic_pair(space.reduce(ell**k))
        es[ell] = MatrixMod(e[:, None], ell**k)
        fs[ell] = MatrixMod(f[:, None], ell**k)
    return crt_join(es).a[:, 0], crt_join(fs).a[:, 0]


def _complement_basis(space, e, f):
    """Columns spanning the orthogonal complement of span(e, f)."""
    n = space.n
    Bf = matmul_mod(f[None, :], space.bilinear, n)[0]
    Be = matmul_mod(e[None, :], space.bilinear, n)[0]
    P = (np.eye(space.rank, dtype=np.int64) - np.outer(e, Bf) - np.outer(f, Be)) % n
    cols = []
    for ell, _ in space.modulus.factorization:
        work = (P % ell).copy()
        r, piv = _jit.row_reduce(work, ell)
        cols.append(list(piv))
    if len(cols) == 1:
        return P[:, cols[0]]
    # per prime choose independent projected columns, then glue
    parts = {}
    for (ell, k), c in zip(space.modulus.factorization, cols):
        parts[ell] = MatrixMod(P[:, c], ell**k)
    return crt_join(parts).a


def split_off(space, e, f, return_basis=False):
    """Restriction of Q to span(e, f)^perp, in a basis of projected unit vectors."""
    C = _complement_basis(space, np.asarray(e) % space.n, np.asarray(f) % space.n)
    n = space.n
    G = matmul_mod(matmul_mod(C.T, space.bilinear, n), C, n)
    th = np.triu(G, 1)
    th[np.diag_indices_from(th)] = space.Q_rows(C.T)
    sub = QuadSpace(th, n)
    return (sub, C) if return_basis else sub


def hyperbolic_basis(space):
    """Matrix H whose columns e_1, f_1, e_2, f_2, ... form a hyperbolic basis.

    Then Q(H x) is the standard split form, i.e. H is an explicit base change
    from build_standard_split(rank / 2) to ``space``.
    """
    n = space.n
    H = np.zeros((space.rank, space.rank), dtype=np.int64)
    basis = np.eye(space.rank, dtype=np.int64)  # columns: current sub-basis
    cur = space
    k = 0
    while True:
        e, f = find_hyperbolic_pair(cur)
        H[:, 2 * k] = matmul_mod(basis, e[:, None], n)[:, 0]
        H[:, 2 * k + 1] = matmul_mod(basis, f[:, None], n)[:, 0]
        k += 1
        if cur.rank == 2:
            return MatrixMod(H, n)
        cur, C = split_off(cur, e, f, return_basis=True)
        basis = matmul_mod(basis, C, n)


def is_split_equivalent(space, H=None):
    """Check that H transports the standard split form onto ``space``."""
    if H is None:
        H = hyperbolic_basis(space)
    std = build_standard_split(space.rank // 2, space.n)
    n = space.n
    M = (matmul_mod(matmul_mod(H.a.T, space.theta, n), H.a, n) - std.theta) % n
    return bool(np.all(np.diag(M) == 0) and np.all((M + M.T) % n == 0))
