"""Orthogroup elements: invariants, uniform sampling, lifting, enumeration.

Everything heavy runs on the standard split form Q = x0 x1 + x2 x3 + ...
Other split spaces are handled by conjugating with an explicit hyperbolic
basis (see quadspace.hyperbolic_basis).
"""

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _jit
from .modring import MatrixMod, Modulus, crt_join, inverse, kernel_class, matmul_mod
from .quadspace import (QuadSpace, hyperbolic_basis, isometry_check, reflection_matrix)
from .rng import CHUNK, map_chunks, stream

DEFAULT_BUDGET = 10**8
RETRY_CAP = 1024


def group_order(m, ell, e=1):
    """|O(2m, Z/ell^e)| for the split form."""
    q = ell
    o = 2 * q ** (m * (m - 1)) * (q**m - 1)
    for i in range(1, m):
        o *= q ** (2 * i) - 1
    return o * ell ** ((e - 1) * m * (2 * m - 1))


def _split_bil(m):
    B = np.zeros((2 * m, 2 * m), dtype=np.int64)
    for i in range(m):
        B[2 * i, 2 * i + 1] = B[2 * i + 1, 2 * i] = 1
    return B


def _split_theta(m):
    th = np.zeros((2 * m, 2 * m), dtype=np.int64)
    for i in range(m):
        th[2 * i, 2 * i + 1] = 1
    return th


def _is_standard(space):
    return np.array_equal(space.theta, _split_theta(space.rank // 2) % space.n)


# --- invariants ---------------------------------------------------------


def dickson(g):
    """dim ker((g - 1) mod ell) mod 2, per prime of the modulus."""
    a = _mat(g)
    return {ell: int(_jit.kernel_dim_mod_p(a.a % ell, ell) % 2) for ell in a.modulus.primes}


def _mat(g):
    return g.matrix if isinstance(g, OrthoElem) else g


@lru_cache(maxsize=64)
def _orthogonal_unit_basis(space):
    """Pairwise orthogonal vectors with unit norms spanning the space (odd ell)."""
    ell, _ = space.modulus.local()
    n = space.n
    W = [row.copy() for row in np.eye(space.rank, dtype=np.int64)]
    out = []
    while W:
        pick = None
        for i, w in enumerate(W):
            if space.Q(w) % ell:
                pick, drop = w, i
                break
        if pick is None:
            for i, j in itertools.combinations(range(len(W)), 2):
                s = (W[i] + W[j]) % n
                if space.Q(s) % ell:
                    pick, drop = s, j
                    break
        if pick is None:
            raise ValueError("form is degenerate")
        inv = pow(2 * space.Q(pick), -1, n)
        Bp = matmul_mod(pick[None, :], space.bilinear, n)[0]
        W = [(w - (int(w @ Bp % n) * inv % n) * pick) % n
             for k, w in enumerate(W) if k != drop]
        out.append(pick)
    return tuple(out)


def reflection_factorization(space, g):
    """Vectors v_1..v_s with g = r_{v_1} ... r_{v_s} (odd prime-power modulus).

    Walks an orthogonal unit-norm basis u_1, u_2, ...; at step i the current
    element already fixes u_1..u_{i-1}.  With y = h u_i either Q(y - u_i) is a
    unit and r_{y-u_i} sends y to u_i, or Q(y + u_i) is and r_{u_i} r_{y+u_i}
    does (the two norms add up to 4 Q(u_i)).
    """
    ell, _ = space.modulus.local()
    if ell == 2:
        raise ValueError("unsupported spinor modulus")
    n = space.n
    h = _mat(g).a.copy()
    used = []
    for u in _orthogonal_unit_basis(space):
        y = h @ u % n
        if np.array_equal(y, u):
            continue
        d = (y - u) % n
        if space.Q(d) % ell:
            h = matmul_mod(reflection_matrix(space, d).a, h, n)
            used.append(d)
        else:
            s = (y + u) % n
            h = matmul_mod(reflection_matrix(space, s).a, h, n)
            h = matmul_mod(reflection_matrix(space, u).a, h, n)
            used.extend([s, u])
    if not np.array_equal(h, np.eye(space.rank, dtype=np.int64)):
        raise ArithmeticError("descent did not reach the identity")
    return used[::-1]


def _legendre_bit(a, ell):
    return int(_jit.legendre_bit(int(a) % ell, ell))


def spinor(g, space=None):
    """Spinor class per prime: 0 trivial, 1 non-square.  Descent route."""
    if isinstance(g, OrthoElem):
        space, mat = g.space, g.matrix
    else:
        mat = g
    out = {}
    for ell, k in space.modulus.factorization:
        if ell == 2:
            if k > 1:
                raise ValueError("unsupported spinor modulus")
            out[2] = 0
            continue
        sub = space.reduce(ell**k)
        vs = reflection_factorization(sub, MatrixMod(mat.a, ell**k))
        prod = 1
        for v in vs:
            prod = prod * (-sub.Q(v)) % ell
        out[ell] = _legendre_bit(prod, ell)
    return out


def spinor_wall(g, space=None):
    """Spinor class per odd prime via the determinant of the Wall form."""
    if isinstance(g, OrthoElem):
        space, mat = g.space, g.matrix
    else:
        mat = g
    out = {}
    for ell, k in space.modulus.factorization:
        if ell == 2:
            if k > 1:
                raise ValueError("unsupported spinor modulus")
            out[2] = 0
        else:
            out[ell] = int(_jit.wall_spinor(mat.a % ell, space.bilinear % ell, ell))
    return out


def zassenhaus_spinor(g, space):
    """[disc * det(1 - g)] per odd prime, for g with 1 - g invertible.

    disc is the signed discriminant (-1)^m det B, equal to 1 on split forms.
    """
    mat = _mat(g)
    m = space.rank // 2
    out = {}
    for ell in space.modulus.primes:
        if ell == 2:
            continue
        one_minus = (np.eye(space.rank, dtype=np.int64) - mat.a) % ell
        det = _jit.det_mod_p(one_minus, ell)
        if det == 0:
            raise ValueError("1 - g is not invertible")
        disc = (-1) ** m * _jit.det_mod_p(space.bilinear % ell, ell)
        out[ell] = _legendre_bit(disc * det, ell)
    return out


def generalized_fixed_rank(g, ell=None):
    """Multiplicity of (T - 1) in the characteristic polynomial over F_ell."""
    mat = _mat(g)
    ell = ell or mat.modulus.primes[0]
    n = mat.shape[0]
    A = (mat.a - np.eye(n, dtype=np.int64)) % ell
    P = np.eye(n, dtype=np.int64)
    for _ in range(n):
        P = P @ A % ell
    return n - int(_jit.rank_mod_p(P, ell))


class OrthoElem:
    """An isometry of a QuadSpace, with lazily cached invariants."""

    def __init__(self, space, g, check=True, dickson_bits=None, spinor_bits=None):
        if not isinstance(g, MatrixMod):
            g = MatrixMod(g, space.n)
        if check and not isometry_check(space, g):
            raise ValueError("matrix is not an isometry")
        self.space = space
        self.matrix = g
        self._dickson = dickson_bits
        self._spinor = spinor_bits

    def dickson(self):
        if self._dickson is None:
            self._dickson = dickson(self.matrix)
        return self._dickson

    def spinor(self):
        if self._spinor is None:
            self._spinor = spinor(self)
        return self._spinor

    def kernel_class(self):
        n = self.space.rank
        return kernel_class(self.matrix - MatrixMod.identity(n, self.space.n))

    def __matmul__(self, other):
        return OrthoElem(self.space, self.matrix @ other.matrix, check=False)

    def __eq__(self, other):
        return isinstance(other, OrthoElem) and self.matrix == other.matrix

    def __hash__(self):
        return hash(self.matrix)

    def __repr__(self):
        return f"OrthoElem({self.matrix.a.tolist()} mod {self.space.n})"


# --- cosets -----------------------------------------------------------------

BOTH = "both"
ANY = "any"


@dataclass(frozen=True)
class CosetSpec:
    """A union of Omega-cosets.

    dickson: 0, 1, "both" (all primes agree, either value) or "any" (no
    condition).  spinor: ((ell, bit), ...) for odd primes, or None for no
    spinor condition.
    """

    dickson: object = BOTH
    spinor: tuple = field(default=None)

    def __post_init__(self):
        if self.dickson not in (0, 1, BOTH, ANY):
            raise ValueError(f"bad dickson target {self.dickson!r}")

    @classmethod
    def from_height(cls, d, q, modulus, dickson=BOTH):
        """Targets [q^(d-1)] at each odd prime of the modulus."""
        mod = Modulus.of(modulus)
        q = int(q)
        if np.gcd(q, 2 * mod.n) != 1:
            raise ValueError(f"gcd(q, 2n) must be 1 (q={q}, n={mod.n})")
        bits = tuple((ell, _legendre_bit(pow(q, d - 1, ell), ell))
                     for ell in mod.primes if ell != 2)
        return cls(dickson, bits)

    @classmethod
    def from_classes(cls, classes, dickson=BOTH):
        """Explicit per-prime square classes, e.g. {3: 1, 5: 0}."""
        return cls(dickson, tuple(sorted((int(k), int(v)) for k, v in classes.items())))

    @classmethod
    def full(cls):
        return cls(ANY, None)

    @classmethod
    def omega(cls, modulus):
        mod = Modulus.of(modulus)
        return cls(0, tuple((ell, 0) for ell in mod.primes if ell != 2))

    def accepts(self, dickson_bits, spinor_bits):
        """Vectorised membership test.

        dickson_bits: {ell: array}; spinor_bits: {ell: array} (odd ell).
        """
        arrays = list(dickson_bits.values())
        ok = np.ones(len(arrays[0]), dtype=bool)
        if self.dickson != ANY:
            for a in arrays[1:]:
                ok &= a == arrays[0]
            if self.dickson in (0, 1):
                ok &= arrays[0] == self.dickson
        if self.spinor is not None:
            for ell, bit in self.spinor:
                ok &= spinor_bits[ell] == bit
        return ok

    def contains(self, g):
        d = {k: np.array([v]) for k, v in g.dickson().items()}
        s = {k: np.array([v]) for k, v in g.spinor().items()}
        return bool(self.accepts(d, s)[0])

    def to_json(self):
        return {"dickson": self.dickson,
                "spinor": None if self.spinor is None else [list(t) for t in self.spinor]}


# --- uniform sampling on the standard split form ----------------------------


def _bform(X, Y):
    return (X[..., 0::2] * Y[..., 1::2] + X[..., 1::2] * Y[..., 0::2]).sum(-1)


def _qform(X):
    return (X[..., 0::2] * X[..., 1::2]).sum(-1)


def _project(x, E, F, q):
    """Projection of rows of x onto the complement of the pairs (E_i, F_i)."""
    if E.shape[1] == 0:
        return x % q
    bF = _bform(x[:, None, :], F) % q
    bE = _bform(x[:, None, :], E) % q
    return (x - np.einsum("nk,nkd->nd", bF, E) - np.einsum("nk,nkd->nd", bE, F)) % q


def sample_split_batch(rng, count, m, ell, e=1):
    """count independent uniform elements of O(2m, Z/ell^e), standard split form.

    Builds the images (e_k, f_k) of the standard hyperbolic pairs one at a
    time: e_k is uniform among primitive isotropic vectors orthogonal to the
    earlier pairs and f_k uniform among its hyperbolic partners there.
    """
    q = ell**e
    n = 2 * m
    E = np.zeros((count, m, n), dtype=np.int64)
    F = np.zeros((count, m, n), dtype=np.int64)
    for k in range(m):
        Ek, Fk = E[:, :k], F[:, :k]
        ev = np.empty((count, n), dtype=np.int64)
        todo = np.arange(count)
        while todo.size:
            u = _project(rng.integers(0, q, (todo.size, n)), Ek[todo], Fk[todo], q)
            ok = (_qform(u) % q == 0) & np.any(u % ell != 0, axis=1)
            ev[todo[ok]] = u[ok]
            todo = todo[~ok]
        # a vector pairing to a unit with e, normalised to a partner f1
        f1 = np.empty((count, n), dtype=np.int64)
        todo = np.arange(count)
        while todo.size:
            u = _project(rng.integers(0, q, (todo.size, n)), Ek[todo], Fk[todo], q)
            b = _bform(u, ev[todo]) % q
            ok = b % ell != 0
            idx = todo[ok]
            c = np.array([pow(int(x), -1, q) for x in b[ok]], dtype=np.int64)
            w = u[ok] * c[:, None] % q
            f1[idx] = (w - (_qform(w) % q)[:, None] * ev[idx]) % q
            todo = todo[~ok]
        # uniform partner: f = f1 + w - Q(w) e with w orthogonal to e, f1
        w = _project(rng.integers(0, q, (count, n)), Ek, Fk, q)
        w = _project(w, ev[:, None, :], f1[:, None, :], q)
        fv = (f1 + w - (_qform(w) % q)[:, None] * ev) % q
        E[:, k] = ev
        F[:, k] = fv
    g = np.empty((count, n, n), dtype=np.int64)
    g[:, :, 0::2] = E.transpose(0, 2, 1)
    g[:, :, 1::2] = F.transpose(0, 2, 1)
    return g


# --- lifting ------------------------------------------------------------


def _fold_index(n):
    return [(i, i) for i in range(n)] + [(i, k) for i in range(n) for k in range(i + 1, n)]


def lift_system(gt, theta, ell, j):
    """Linear system for X with gt + ell^j X an isometry mod ell^(j+1).

    gt: integer matrix, an isometry mod ell^j.  Returns (L, rhs) over F_ell
    where X is flattened row-major.
    """
    n = gt.shape[0]
    A = theta @ (gt % ell) % ell     # coefficient of X^T
    C = theta.T @ (gt % ell) % ell   # coefficient of X
    eqs = _fold_index(n)
    L = np.zeros((len(eqs), n * n), dtype=np.int64)
    for r, (i, k) in enumerate(eqs):
        pairs = [(i, k)] if i == k else [(i, k), (k, i)]
        for (s, t) in pairs:
            # N_st = sum_a X_as A_at + sum_a C_as X_at
            for a in range(n):
                L[r, a * n + s] += A[a, t]
                L[r, a * n + t] += C[a, s]
    M = gt.T.astype(object) @ theta.astype(object) @ gt.astype(object) - theta
    qj = ell**j
    rhs = np.zeros(len(eqs), dtype=np.int64)
    for r, (i, k) in enumerate(eqs):
        v = M[i, i] if i == k else M[i, k] + M[k, i]
        if v % qj:
            raise ValueError(f"matrix is not an isometry modulo {ell}^{j}")
        rhs[r] = (-(v // qj)) % ell
    return L % ell, rhs


def solve_mod_p(L, rhs, p):
    """Particular solution and kernel basis (rows) of L x = rhs over F_p."""
    rows, cols = L.shape
    aug = np.concatenate([L % p, (rhs % p)[:, None]], axis=1)
    rank, piv = _jit.row_reduce(aug, p)
    piv = list(piv)
    if piv and piv[-1] == cols:
        raise ValueError("inconsistent system")
    x0 = np.zeros(cols, dtype=np.int64)
    for r, c in enumerate(piv):
        x0[c] = aug[r, cols]
    free = [c for c in range(cols) if c not in set(piv)]
    K = np.zeros((len(free), cols), dtype=np.int64)
    for t, f in enumerate(free):
        K[t, f] = 1
        for r, c in enumerate(piv):
            K[t, c] = (-aug[r, f]) % p
    return x0, K


def lift_once(gt, theta, ell, j, rng=None):
    """Lift an isometry mod ell^j to one mod ell^(j+1).

    With rng, the lift is uniform among all lifts; otherwise the particular
    solution is used.  Also returns the kernel basis.
    """
    L, rhs = lift_system(gt, theta, ell, j)
    x0, K = solve_mod_p(L, rhs, ell)
    x = x0
    if rng is not None and len(K):
        x = (x0 + rng.integers(0, ell, len(K)) @ K) % ell
    n = gt.shape[0]
    q = ell ** (j + 1)
    return (gt + ell**j * x.reshape(n, n)) % q, K


def all_lifts(gt, theta, ell, j):
    """All lifts of gt (mod ell^j) to isometries mod ell^(j+1), as a stack."""
    L, rhs = lift_system(gt, theta, ell, j)
    x0, K = solve_mod_p(L, rhs, ell)
    n = gt.shape[0]
    coeffs = np.array(list(itertools.product(range(ell), repeat=len(K))), dtype=np.int64)
    if len(K) == 0:
        coeffs = np.zeros((1, 0), dtype=np.int64)
    X = (x0[None, :] + coeffs @ K) % ell
    return (gt[None] + ell**j * X.reshape(-1, n, n)) % ell ** (j + 1)


def lie_kernel_dim(gt, theta, ell):
    L, rhs = lift_system(gt, theta, ell, 1)
    return L.shape[1] - int(_jit.rank_mod_p(L, ell))


# --- spaces -----------------------------------------------------------------


def _local_spaces(space):
    return [(ell, k, space.reduce(ell**k)) for ell, k in space.modulus.factorization]


@lru_cache(maxsize=64)
def _base_change(space):
    """(H, H^-1) with H: standard split -> space."""
    if _is_standard(space):
        return None
    H = hyperbolic_basis(space)
    return H, inverse(H)


def _to_space(space, g_std):
    bc = _base_change(space)
    if bc is None:
        return g_std % space.n
    H, Hi = bc
    return matmul_mod(matmul_mod(H.a, g_std, space.n), Hi.a, space.n)


def _rng(seed_or_rng):
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return stream(seed_or_rng)


def sample_uniform(space, seed, method="direct"):
    """One uniform element of O(space).

    method "direct" samples over Z/ell^e at once; "lift" samples modulo ell
    and lifts one level at a time through uniform Lie-kernel translates.
    """
    rng = _rng(seed)
    m = space.rank // 2
    parts = {}
    for ell, k, _ in _local_spaces(space):
        if method == "direct":
            g = sample_split_batch(rng, 1, m, ell, k)[0]
        elif method == "lift":
            g = sample_split_batch(rng, 1, m, ell, 1)[0]
            th = _split_theta(m)
            for j in range(1, k):
                g, _ = lift_once(g, th, ell, j, rng)
        else:
            raise ValueError(f"unknown method {method!r}")
        parts[ell] = MatrixMod(g, ell**k)
    g = crt_join(parts).a if len(parts) > 1 else next(iter(parts.values())).a
    return OrthoElem(space, MatrixMod(_to_space(space, g), space.n), check=False)


def sample_coset(space, spec, seed, max_tries=RETRY_CAP, method="direct"):
    """Uniform element of the union of cosets described by spec, by rejection."""
    rng = _rng(seed)
    for _ in range(max_tries):
        g = sample_uniform(space, rng, method=method)
        if spec.contains(g):
            return g
    raise RuntimeError(f"no element of the requested coset after {max_tries} draws")


def _local_invariants(g, ell, e):
    """(kernel exponents desc, dickson, spinor) for a stack over Z/ell^e."""
    m = g.shape[1] // 2
    bil = _split_bil(m)
    dims, spin = _jit.invariants_batch(g % ell, bil, ell)
    if e == 1:
        exps = None
    else:
        A = g - np.eye(2 * m, dtype=np.int64)[None]
        exps = _jit.snf_exponents_batch(A % ell**e, ell, e)[:, ::-1].astype(np.int8)
    return dims.astype(np.int8), (dims % 2).astype(np.int8), spin.astype(np.int8), exps


def _accept_rate(spec, modulus):
    # expected acceptance, only used to size rejection rounds
    r = 1.0
    if spec.dickson in (0, 1):
        r /= 2
    if spec.dickson != ANY:
        r /= 2 ** (len(modulus.primes) - 1)
    if spec.spinor is not None:
        r /= 2 ** len(spec.spinor)
    return r


def sample_coset_invariants(m, modulus, spec, count, seed, threads=None, chunk=CHUNK):
    """Invariants of `count` uniform draws from a coset union of split O(2m, Z/n).

    Returns {"dims": {ell: (count,)}, "exps": {ell: (count, 2m) or None},
    "dickson": (count,), "spinor": {ell: (count,)}}.  Chunk i draws from
    stream (seed, i) so the result is independent of ``threads``.
    """
    mod = Modulus.of(modulus)
    rate = _accept_rate(spec, mod)

    def work(ci, size):
        rng = stream(seed, ci)
        got = []
        have = 0
        tries = 0
        while have < size:
            need = size - have
            batch = int(need / rate * 1.2) + 8
            tries += batch
            if tries > RETRY_CAP * size:
                raise RuntimeError("coset rejection exceeded the retry cap")
            inv = {ell: _local_invariants(sample_split_batch(rng, batch, m, ell, k), ell, k)
                   for ell, k in mod.factorization}
            ok = spec.accepts({ell: v[1] for ell, v in inv.items()},
                              {ell: v[2] for ell, v in inv.items()})
            idx = np.flatnonzero(ok)[:need]
            got.append({ell: tuple(None if a is None else a[idx] for a in v)
                        for ell, v in inv.items()})
            have += len(idx)
        return got

    pieces = [p for chunk_out in map_chunks(work, count, chunk, threads) for p in chunk_out]
    out = {"dims": {}, "exps": {}, "spinor": {}}
    for ell, k in mod.factorization:
        out["dims"][ell] = np.concatenate([p[ell][0] for p in pieces])
        out["spinor"][ell] = np.concatenate([p[ell][2] for p in pieces])
        out["exps"][ell] = None if k == 1 else np.concatenate([p[ell][3] for p in pieces])
    out["dickson"] = np.concatenate([p[mod.primes[0]][1] for p in pieces])
    return out


# --- enumeration ------------------------------------------------------------


@lru_cache(maxsize=16)
def split_table(m, ell, e=1):
    """Invariants of every element of split O(2m, Z/ell^e).

    Returns a dict of read-only arrays: "dims" (dim ker mod ell), "spinor",
    and for e > 1 "exps" (kernel exponents, descending).  Elements over
    Z/ell^e are ordered by their residue mod ell, each followed by its lifts.
    """
    order1 = group_order(m, ell, 1)
    bil = _split_bil(m)
    if e == 1:
        cnt, dims, spin, _ = _jit.enumerate_split(ell, m, order1, bil, False)
        assert cnt == order1
        out = {"dims": dims, "spinor": spin, "exps": None}
    else:
        cnt, dims1, spin1, mats = _jit.enumerate_split(ell, m, order1, bil, True)
        assert cnt == order1
        per = group_order(m, ell, e) // order1
        th = _split_theta(m)
        exps = np.empty((order1 * per, 2 * m), dtype=np.int8)
        for b in range(order1):
            stack = mats[b][None]
            for j in range(1, e):
                stack = np.concatenate([all_lifts(s, th, ell, j) for s in stack])
            exps[b * per:(b + 1) * per] = _jit.kernel_exps_of_lifts(
                np.zeros((2 * m, 2 * m), dtype=np.int64), stack, ell, e)
        out = {"dims": np.repeat(dims1, per), "spinor": np.repeat(spin1, per), "exps": exps}
    for v in out.values():
        if v is not None:
            v.setflags(write=False)
    return out


def enumerate_group(space, budget=DEFAULT_BUDGET):
    """Yield every element of O(space) exactly once."""
    m = space.rank // 2
    order = 1
    for ell, k in space.modulus.factorization:
        order *= group_order(m, ell, k)
    if order > budget:
        raise RuntimeError(f"group order {order} exceeds the enumeration budget {budget}")
    locs = _local_spaces(space)
    if len(locs) == 1:
        ell, k, _ = locs[0]
        for g in _enumerate_local(m, ell, k):
            yield OrthoElem(space, MatrixMod(_to_space(space, g), space.n), check=False)
        return
    lists = [[MatrixMod(g, ell**k) for g in _enumerate_local(m, ell, k)] for ell, k, _ in locs]
    for combo in itertools.product(*lists):
        parts = {ell: g for (ell, _, _), g in zip(locs, combo)}
        g = crt_join(parts).a
        yield OrthoElem(space, MatrixMod(_to_space(space, g), space.n), check=False)


def _enumerate_local(m, ell, e):
    bil = _split_bil(m)
    th = _split_theta(m)
    pairs, _ = _jit.root_pairs(ell, m)
    sub = group_order(m, ell, 1) // len(pairs)
    for ei, fi in pairs:
        mats, _, _ = _jit.enumerate_subtree(ell, m, ei, fi, sub, bil)
        for g in mats:
            stack = g[None]
            for j in range(1, e):
                stack = np.concatenate([all_lifts(s, th, ell, j) for s in stack])
            yield from stack
