"""Arithmetic and linear algebra over Z/l^e and Z/n.

Matrices are stored as int64 numpy arrays of canonical residues.  Products of
two residues must fit in 64 bits, so moduli are kept below 2**31.
"""

from dataclasses import dataclass
from functools import reduce

import numpy as np
from sympy import factorint

from . import _jit

MAX_MODULUS = 2**31


@dataclass(frozen=True)
class Modulus:
    n: int
    factorization: tuple  # ((ell, e), ...) with ell increasing

    @classmethod
    def of(cls, n, allow_two=True):
        if isinstance(n, Modulus):
            return n
        n = int(n)
        if n < 2:
            raise ValueError(f"modulus must be >= 2, got {n}")
        if n >= MAX_MODULUS:
            raise ValueError(f"modulus {n} exceeds the supported bound 2**31")
        fac = tuple(sorted(factorint(n).items()))
        if not allow_two and fac[0][0] == 2:
            raise ValueError(f"modulus {n} is even")
        return cls(n, fac)

    @property
    def primes(self):
        return tuple(ell for ell, _ in self.factorization)

    @property
    def is_prime_power(self):
        return len(self.factorization) == 1

    @property
    def is_prime(self):
        return self.is_prime_power and self.factorization[0][1] == 1

    def local(self):
        """(ell, e) for a prime-power modulus."""
        if not self.is_prime_power:
            raise ValueError(f"modulus {self.n} is not a prime power; CRT-split first")
        return self.factorization[0]

    def __int__(self):
        return self.n


class MatrixMod:
    """A matrix over Z/n with canonical entries.  Immutable."""

    __slots__ = ("a", "modulus")

    def __init__(self, entries, modulus):
        mod = Modulus.of(modulus)
        a = np.array(entries, dtype=np.int64) % mod.n
        if a.ndim != 2:
            raise ValueError("matrix must be two dimensional")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "modulus", mod)

    def __setattr__(self, k, v):
        raise AttributeError("MatrixMod is immutable")

    @property
    def n(self):
        return self.modulus.n

    @property
    def shape(self):
        return self.a.shape

    @classmethod
    def identity(cls, k, modulus):
        return cls(np.eye(k, dtype=np.int64), modulus)

    @classmethod
    def zeros(cls, r, c, modulus):
        return cls(np.zeros((r, c), dtype=np.int64), modulus)

    def __matmul__(self, other):
        _check_same(self, other)
        return MatrixMod(matmul_mod(self.a, other.a, self.n), self.modulus)

    def __add__(self, other):
        _check_same(self, other)
        return MatrixMod(self.a + other.a, self.modulus)

    def __sub__(self, other):
        _check_same(self, other)
        return MatrixMod(self.a - other.a, self.modulus)

    def __neg__(self):
        return MatrixMod(-self.a, self.modulus)

    @property
    def T(self):
        return MatrixMod(self.a.T, self.modulus)

    def reduce(self, m):
        if self.n % m:
            raise ValueError(f"{m} does not divide {self.n}")
        return MatrixMod(self.a, m)

    def __eq__(self, other):
        return (isinstance(other, MatrixMod) and self.n == other.n
                and np.array_equal(self.a, other.a))

    def __hash__(self):
        return hash((self.n, self.a.shape, self.a.tobytes()))

    def __repr__(self):
        return f"MatrixMod(n={self.n}, {self.a.tolist()})"


def _check_same(x, y):
    if x.n != y.n:
        raise ValueError(f"moduli differ: {x.n} vs {y.n}")


def matmul_mod(a, b, n):
    # entries < 2**31 so each product fits; reduce after every column block
    if n < 2**26 and a.shape[-1] < 64:
        return (a @ b) % n
    out = np.zeros(a.shape[:-1] + b.shape[-1:], dtype=np.int64)
    for k in range(a.shape[-1]):
        out = (out + (a[..., :, k:k + 1] * b[..., k:k + 1, :]) % n) % n
    return out


@dataclass(frozen=True, order=True)
class ModuleClass:
    """Isomorphism class of a finite Z/n-module: per prime, descending exponents."""

    parts: tuple = ()  # ((ell, (a1, a2, ...)), ...) sorted by ell, no empty entries

    @classmethod
    def from_dict(cls, d):
        parts = []
        for ell, exps in sorted(d.items()):
            exps = tuple(sorted((int(a) for a in exps), reverse=True))
            if any(a <= 0 for a in exps):
                raise ValueError("exponents must be positive")
            if exps:
                parts.append((int(ell), exps))
        return cls(tuple(parts))

    @classmethod
    def trivial(cls):
        return cls(())

    @classmethod
    def elementary(cls, ell, dim, e=1):
        """(Z/ell^e)^dim."""
        return cls.from_dict({ell: [e] * dim})

    def as_dict(self):
        return {ell: list(exps) for ell, exps in self.parts}

    def exps(self, ell):
        return dict(self.parts).get(ell, ())

    def __add__(self, other):
        d = self.as_dict()
        for ell, exps in other.parts:
            d.setdefault(ell, []).extend(exps)
        return ModuleClass.from_dict(d)

    @property
    def order(self):
        return reduce(lambda x, y: x * y, (ell ** sum(ex) for ell, ex in self.parts), 1)

    def dim(self, ell):
        """Number of cyclic factors at ell, i.e. dim over F_ell of M/ell M."""
        return len(self.exps(ell))

    def truncate(self, ell, e):
        """Class of M[ell^e] (the ell^e-torsion)."""
        d = self.as_dict()
        if ell in d:
            d[ell] = [min(a, e) for a in d[ell]]
        return ModuleClass.from_dict(d)

    def to_json(self):
        return [{"ell": ell, "exps": list(exps)} for ell, exps in self.parts]

    @classmethod
    def from_json(cls, obj):
        return cls.from_dict({item["ell"]: item["exps"] for item in obj})

    def __str__(self):
        if not self.parts:
            return "0"
        terms = []
        for ell, exps in self.parts:
            for a in exps:
                terms.append(f"Z/{ell}" if a == 1 else f"Z/{ell}^{a}")
        return "+".join(terms)


def smith_normal_form(A):
    """Smith normal form of a matrix over Z/l^e.

    Returns ``(exps, (U, V))`` with ``U @ A @ V`` diagonal, diagonal entry i
    equal to l**exps[i] (zero when exps[i] == e), exps ascending.  The pivot is
    the entry of least l-adic valuation, ties broken by lowest (row, col).
    """
    ell, e = A.modulus.local()
    q = ell**e
    M = A.a.copy()
    r, c = M.shape
    U = np.eye(r, dtype=np.int64)
    V = np.eye(c, dtype=np.int64)
    exps = []
    for k in range(min(r, c)):
        sub = M[k:, k:]
        nz = np.argwhere(sub != 0)
        if len(nz) == 0:
            exps.extend([e] * (min(r, c) - k))
            break
        vals = [_jit.valuation(int(sub[i, j]), ell, e) for i, j in nz]
        best = int(np.argmin(vals))  # argmin keeps the first, i.e. lowest (row, col)
        v = vals[best]
        bi, bj = (int(t) + k for t in nz[best])
        M[[k, bi]] = M[[bi, k]]
        U[[k, bi]] = U[[bi, k]]
        M[:, [k, bj]] = M[:, [bj, k]]
        V[:, [k, bj]] = V[:, [bj, k]]
        pv = ell**v
        u_inv = pow(int(M[k, k] // pv), -1, q)
        M[k] = M[k] * u_inv % q
        U[k] = U[k] * u_inv % q
        for i in range(k + 1, r):
            if M[i, k]:
                f = int(M[i, k] // pv)
                M[i] = (M[i] - f * M[k]) % q
                U[i] = (U[i] - f * U[k]) % q
        for j in range(k + 1, c):
            if M[k, j]:
                f = int(M[k, j] // pv)
                M[:, j] = (M[:, j] - f * M[:, k]) % q
                V[:, j] = (V[:, j] - f * V[:, k]) % q
        exps.append(v)
    return exps, (MatrixMod(U, q), MatrixMod(V, q))


def snf_exponents(A):
    """Exponents only (compiled path, no transforms)."""
    ell, e = A.modulus.local()
    return [int(x) for x in _jit.snf_exponents(A.a, ell, e)]


def kernel_class(A):
    """Isomorphism class of {x : A x = 0}; composite moduli are CRT-split."""
    if A.shape[0] != A.shape[1]:
        raise ValueError("kernel_class needs a square matrix")
    parts = {}
    for ell, Al in crt_split(A).items():
        parts[ell] = [c for c in snf_exponents(Al) if c > 0]
    return ModuleClass.from_dict(parts)


def crt_split(A):
    """Map prime -> reduction of A modulo that prime's full power."""
    return {ell: MatrixMod(A.a, ell**e) for ell, e in A.modulus.factorization}


def crt_join(parts):
    """Inverse of crt_split."""
    if not parts:
        raise ValueError("nothing to join")
    n = 1
    for M in parts.values():
        n *= M.n
    out = None
    for M in parts.values():
        other = n // M.n
        coef = other * pow(other, -1, M.n) % n
        term = (M.a.astype(object) * coef) % n
        out = term if out is None else (out + term) % n
    return MatrixMod(out.astype(np.int64), n)


def kernel_size(A):
    return kernel_class(A).order


def is_invertible(A):
    return all(_jit.det_mod_p(A.a, ell) != 0 for ell in A.modulus.primes)


def inverse(A):
    """Inverse over Z/n by Gauss-Jordan with unit pivots at each prime power."""
    parts = {}
    for ell, Al in crt_split(A).items():
        parts[ell] = MatrixMod(_inverse_local(Al.a, ell, Al.n), Al.n)
    return crt_join(parts) if len(parts) > 1 else next(iter(parts.values()))


def _inverse_local(a, ell, q):
    k = a.shape[0]
    M = np.concatenate([a % q, np.eye(k, dtype=np.int64)], axis=1)
    for j in range(k):
        rows = [i for i in range(j, k) if M[i, j] % ell]
        if not rows:
            raise ValueError("matrix is not invertible")
        i = rows[0]
        M[[j, i]] = M[[i, j]]
        M[j] = M[j] * pow(int(M[j, j]), -1, q) % q
        for i in range(k):
            if i != j and M[i, j]:
                M[i] = (M[i] - M[i, j] * M[j]) % q
    return M[:, k:]
