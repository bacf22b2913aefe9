"""The random kernel model: laws of ker(g - 1) for g uniform in a coset union.

Exact laws come from enumeration (orthogroup.split_table) or from closed
forms; Monte Carlo laws from orthogroup.sample_coset_invariants.
"""

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .distrib import Distribution
from .modring import ModuleClass, Modulus
from .orthogroup import (ANY, BOTH, CosetSpec, group_order, sample_coset_invariants,
                         split_table)

EXACT_ENUM = "exact"
MONTE_CARLO = "mc"
CLOSED_FORM = "closed"


# --- polynomials with Fraction coefficients --------------------------------


class GenFun:
    """Polynomial in t with exact rational coefficients (index = power)."""

    __slots__ = ("c",)

    def __init__(self, coeffs):
        c = [Fraction(x) for x in coeffs]
        while len(c) > 1 and c[-1] == 0:
            c.pop()
        self.c = tuple(c) if c else (Fraction(0),)

    @classmethod
    def from_pmf(cls, pmf):
        """From a dimension-keyed mapping {dim: prob}."""
        deg = max(pmf) if pmf else 0
        c = [Fraction(0)] * (deg + 1)
        for k, v in pmf.items():
            c[k] += Fraction(v)
        return cls(c)

    @classmethod
    def monomial(cls, k, a=1):
        return cls([0] * k + [a])

    @property
    def degree(self):
        return len(self.c) - 1

    def coeff(self, k):
        return self.c[k] if 0 <= k < len(self.c) else Fraction(0)

    def __call__(self, t):
        t = Fraction(t)
        acc = Fraction(0)
        for a in reversed(self.c):
            acc = acc * t + a
        return acc

    def __add__(self, other):
        other = _as_genfun(other)
        n = max(len(self.c), len(other.c))
        return GenFun([self.coeff(i) + other.coeff(i) for i in range(n)])

    __radd__ = __add__

    def __neg__(self):
        return GenFun([-a for a in self.c])

    def __sub__(self, other):
        return self + (-_as_genfun(other))

    def __rsub__(self, other):
        return _as_genfun(other) - self

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return GenFun([a * other for a in self.c])
        other = _as_genfun(other)
        out = [Fraction(0)] * (len(self.c) + len(other.c) - 1)
        for i, a in enumerate(self.c):
            if a:
                for j, b in enumerate(other.c):
                    out[i + j] += a * b
        return GenFun(out)

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, GenFun) and self.c == other.c

    def __hash__(self):
        return hash(self.c)

    def is_pgf(self):
        return all(a >= 0 for a in self.c) and sum(self.c) == 1

    def pmf(self):
        return {i: a for i, a in enumerate(self.c) if a}

    def parity_support(self):
        return {i % 2 for i, a in enumerate(self.c) if a}

    def __repr__(self):
        terms = [f"{a}*t^{i}" for i, a in enumerate(self.c) if a]
        return "GenFun(" + (" + ".join(terms) or "0") + ")"


def _as_genfun(x):
    return x if isinstance(x, GenFun) else GenFun([x])


T = GenFun([0, 1])


def lagrange(points):
    """Unique polynomial of degree < len(points) through the (x, y) pairs."""
    out = GenFun([0])
    for i, (xi, yi) in enumerate(points):
        term = GenFun([Fraction(yi)])
        for j, (xj, _) in enumerate(points):
            if j != i:
                term = term * GenFun([Fraction(-xj), 1]) * (Fraction(1) / (xi - xj))
        out = out + term
    return out


def substitute_square(p):
    """p(t^2)."""
    c = [Fraction(0)] * (2 * len(p.c) - 1)
    for i, a in enumerate(p.c):
        c[2 * i] = a
    return GenFun(c)


# --- moments, orbit counts ---------------------------------------------------


def moments_closed_form(ell, j):
    """M_j = prod_{i=1}^j (ell^i + 1)."""
    if j < 0:
        raise ValueError("j must be >= 0")
    return math.prod(ell**i + 1 for i in range(1, j + 1))


def edge_moment(ell, r, j, coset):
    """E(#ker(g - 1)^j) over the Dickson kernel ("H") or its complement
    ("O-H") of the rank-2r split group, for 0 <= j <= r."""
    if not 0 <= j <= r:
        raise ValueError("need 0 <= j <= r")
    M = moments_closed_form(ell, j)
    if j < r:
        return M
    if coset == "H":
        return M + 1
    if coset == "O-H":
        return M - 1
    raise ValueError(f"coset must be 'H' or 'O-H', got {coset!r}")


def orbit_count_table(ell, m):
    """f(n, i) for 0 <= n <= m: orbits on V^n whose span has dimension i.

    f(0, i) is 1 for i = 0 and 0 otherwise; f(n, i) = ell^i (f(n-1, i-1) + f(n-1, i)).
    Valid for rank >= 2m + 2.
    """
    f = [[1]]
    for n in range(1, m + 1):
        prev = f[-1] + [0]
        row = [ell**i * ((prev[i - 1] if i else 0) + prev[i]) for i in range(n + 1)]
        f.append(row)
    return f


def sigma(ell, m, s):
    """Sigma^(s)(m) = sum_i f(m, i) ell^(i s)."""
    return sum(c * ell ** (i * s) for i, c in enumerate(orbit_count_table(ell, m)[m]))


def orbit_count_recursive(ell, m):
    """Number of O-orbits on V^m, summed from the f table."""
    return sigma(ell, m, 0)


def orbit_count_product(ell, m):
    """The same count unrolled through Sigma^(s)(m) = (1 + ell^(s+1)) Sigma^(s+1)(m-1)."""
    out = 1
    for s in range(m):
        out *= 1 + ell ** (s + 1)
    return out * sigma(ell, 0, m)


# --- enumeration-backed laws -------------------------------------------------


def _selector_mask(tab, ell, selector):
    dick = tab["dims"] % 2
    spin = tab["spinor"]
    if isinstance(selector, CosetSpec):
        return selector.accepts({ell: dick}, {ell: spin})
    sel = {"O": None, "SO": dick == 0, "H": dick == 0, "O-H": dick == 1, "O-SO": dick == 1,
           "Omega": (dick == 0) & (spin == 0), "A": (dick == 0) & (spin == 1),
           "B": (dick == 1) & (spin == 0), "C": (dick == 1) & (spin == 1)}
    if selector not in sel:
        raise ValueError(f"unknown selector {selector!r}")
    if ell == 2 and selector in ("Omega", "A", "B", "C"):
        # spinor norm is trivial at 2: Omega is the Dickson kernel
        sel.update(Omega=dick == 0, B=dick == 1, A=np.zeros_like(dick, bool),
                   C=np.zeros_like(dick, bool))
    return sel[selector]


def dimension_counts(ell, m, selector="O"):
    """{dim ker(g - 1): count} over the selected elements of split O(2m, F_ell)."""
    tab = split_table(m, ell, 1)
    mask = _selector_mask(tab, ell, selector)
    dims = tab["dims"] if mask is None else tab["dims"][mask]
    c = np.bincount(dims.astype(np.int64), minlength=2 * m + 1)
    return {i: int(v) for i, v in enumerate(c) if v}


def enumerated_pgf(ell, m, selector="O"):
    counts = dimension_counts(ell, m, selector)
    tot = sum(counts.values())
    return GenFun.from_pmf({k: Fraction(v, tot) for k, v in counts.items()})


def burnside_orbit_count(ell, m_rank, tuple_len, selector="O"):
    """Orbits of the selected subgroup of split O(2 m_rank, F_ell) on V^tuple_len,
    as the average of #ker(g - 1)^tuple_len (the subgroup "trivial" gives
    ell^(2 m_rank tuple_len))."""
    if selector == "trivial":
        return ell ** (2 * m_rank * tuple_len)
    counts = dimension_counts(ell, m_rank, selector)
    tot = sum(counts.values())
    s = sum(c * ell ** (d * tuple_len) for d, c in counts.items())
    if s % tot:
        raise ArithmeticError("fixed-point average is not an integer")
    return s // tot


def enumerated_moment(ell, m, j, selector="O"):
    counts = dimension_counts(ell, m, selector)
    tot = sum(counts.values())
    return Fraction(sum(c * ell ** (d * j) for d, c in counts.items()), tot)


# --- closed forms --------------------------------------------------------------


def _gl_order(z, q):
    return math.prod(q**z - q**i for i in range(z))


def rudvalis_shinoda_pmf(ell, N, v):
    """P(dim ker(g - 1) = v) for g uniform in split O(2N, F_ell), exact.

    The odd branch sums i = 0 .. N - 1 - z; see the notes in the README.
    """
    if not 0 <= v <= 2 * N:
        return Fraction(0)
    L = Fraction(ell)
    if v % 2 == 0:
        z = v // 2
        g = _gl_order(z, ell * ell)
        s = Fraction(0)
        for i in range(N - z + 1):
            d = L ** ((2 * z - 1) * i) * math.prod(ell ** (2 * k) - 1 for k in range(1, i + 1))
            s += Fraction((-1) ** i) / d
        head = Fraction(ell**z, 2 * g) * s
        d = L ** (2 * z * (N - z)) * g * math.prod(ell ** (2 * k) - 1 for k in range(1, N - z + 1))
        return head + Fraction((-1) ** (N - z), 2) / d
    z = (v - 1) // 2
    g = _gl_order(z, ell * ell)
    s = Fraction(0)
    for i in range(N - z):
        d = L ** (i * i + 2 * (z + 1) * i)
        for k in range(1, i + 1):
            d *= 1 - Fraction(1, ell ** (2 * k))
        s += Fraction((-1) ** i) / d
    return s / (2 * ell**z * g)


def rudvalis_shinoda_printed_odd(ell, N, z):
    """Odd branch with the sum running to N - z, as first written.  Kept to
    document that it does not normalise."""
    g = _gl_order(z, ell * ell)
    s = Fraction(0)
    for i in range(N - z + 1):
        d = Fraction(ell) ** (i * i + 2 * (z + 1) * i)
        for k in range(1, i + 1):
            d *= 1 - Fraction(1, ell ** (2 * k))
        s += Fraction((-1) ** i) / d
    return s / (2 * ell**z * g)


def rudvalis_shinoda_law(ell, N):
    return {v: p for v in range(2 * N + 1) if (p := rudvalis_shinoda_pmf(ell, N, v))}


def limit_constant(ell, depth=60):
    """prod_{j=0}^{depth} (1 + ell^-j)^-1 as a float."""
    return math.prod(1.0 / (1.0 + ell ** (-j)) for j in range(depth + 1))


def rudvalis_shinoda_limit(ell, v, depth=60):
    """Limit law as N -> infinity (float)."""
    scale = float(ell) ** (-(v * v - v) / 2)
    return limit_constant(ell, depth) * scale / math.prod(1 - ell ** (-i) for i in range(1, v + 1))


def interpolation_polys(ell, r):
    """(P_r, P'_r).

    P_r: even, degree 2r, P_r(ell^j) = M_j for j = 0..r.
    P'_r: odd, degree 2r - 1, P'_r(ell^j) = M_j for j = 0..r-1.
    """
    if r < 0:
        raise ValueError("r must be >= 0")
    even = lagrange([(Fraction(ell ** (2 * j)), moments_closed_form(ell, j)) for j in range(r + 1)])
    P = substitute_square(even)
    if r == 0:
        return P, GenFun([0])
    odd = lagrange([(Fraction(ell ** (2 * j)), Fraction(moments_closed_form(ell, j), ell**j))
                    for j in range(r)])
    return P, T * substitute_square(odd)


def _prod_sq(ell, r, scaled=False):
    """prod_{0 <= j < r} (t^2 - ell^2j), optionally divided by (ell^2r - ell^2j)."""
    out = GenFun([1])
    for j in range(r):
        f = GenFun([-ell ** (2 * j), 0, 1])
        if scaled:
            f = f * Fraction(1, ell ** (2 * r) - ell ** (2 * j))
        out = out * f
    return out


def g_identity_forms(ell, r):
    """Right-hand sides of the four identities for the rank-2r Dickson kernel
    (G_r) and the rank-2(r+1) complement (G'_{r+1})."""
    P_prev, _ = interpolation_polys(ell, r - 1) if r >= 1 else (GenFun([0]), None)
    P_r, Pp_r = interpolation_polys(ell, r)
    _, Pp_next = interpolation_polys(ell, r + 1)
    h = group_order(r, ell) // 2
    return {
        "G_r_via_P_r_minus_1": P_prev + _prod_sq(ell, r) * Fraction(1, h),
        "G_r_via_P_r": P_r + _prod_sq(ell, r, scaled=True),
        "G'_r+1_via_P'_r": Pp_r + T * _prod_sq(ell, r, scaled=True) * Fraction(1, ell**r),
        "G'_r+1_via_P'_r+1": Pp_next,
    }


def coset_pgf(ell, N, coset):
    """Closed-form pgf of dim ker(g - 1), g uniform in a coset of split O(2N, F_ell).

    coset: "O", "H"/"SO" (Dickson kernel), "O-H"/"O-SO", and for odd ell the
    four Omega-cosets "Omega", "A", "B", "C" (Dickson 0/0/1/1, spinor 0/1/0/1).
    """
    forms = g_identity_forms(ell, N)
    G_H = forms["G_r_via_P_r"]
    # the complement at rank 2N is G'_N = P'_N
    G_rest = interpolation_polys(ell, N)[1]
    if coset == "O":
        return (G_H + G_rest) * Fraction(1, 2)
    if coset in ("H", "SO"):
        return G_H
    if coset in ("O-H", "O-SO"):
        return G_rest
    if ell == 2:
        raise ValueError("the four-coset split needs odd ell")
    omega = group_order(N, ell) // 4
    corr = _prod_sq(ell, N) * Fraction(1, 2 * omega)
    if coset == "Omega":
        return G_H + corr
    if coset == "A":
        return G_H - corr
    if coset in ("B", "C"):
        return G_rest
    raise ValueError(f"unknown coset {coset!r}")


def coset_name(dickson, spinor_bit):
    return {(0, 0): "Omega", (0, 1): "A", (1, 0): "B", (1, 1): "C"}[(dickson, spinor_bit)]


def spec_pgf(ell, N, spec):
    """Closed-form pgf for a CosetSpec at a single prime (e = 1)."""
    if spec.dickson == ANY and spec.spinor is None:
        return coset_pgf(ell, N, "O")
    bits = dict(spec.spinor or ())
    if ell != 2 and ell in bits:
        s = bits[ell]
        parts = {0: coset_pgf(ell, N, coset_name(0, s)), 1: coset_pgf(ell, N, coset_name(1, s))}
    else:
        parts = {0: coset_pgf(ell, N, "H"), 1: coset_pgf(ell, N, "O-H")}
    if spec.dickson in (0, 1):
        return parts[spec.dickson]
    return (parts[0] + parts[1]) * Fraction(1, 2)


# --- the model --------------------------------------------------------------


@dataclass
class KernelDistParams:
    modulus: int
    m: int = None            # half-rank; or give d
    d: int = None            # height, half-rank 6d - 2
    coset: CosetSpec = field(default_factory=CosetSpec.full)
    mode: str = EXACT_ENUM
    samples: int = 0
    seed: int = 0
    threads: int = 1
    budget: int = 10**8
    joint: bool = False

    def __post_init__(self):
        self.modulus = Modulus.of(self.modulus)
        if self.m is None:
            if self.d is None:
                raise ValueError("give either m or d")
            self.m = 6 * self.d - 2
        if self.m < 1:
            raise ValueError("half-rank must be >= 1")
        if self.mode not in (EXACT_ENUM, MONTE_CARLO, CLOSED_FORM):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == CLOSED_FORM and not self.modulus.is_prime:
            raise ValueError("closed-form mode needs a prime modulus")
        if self.mode == MONTE_CARLO and self.samples <= 0:
            raise ValueError("monte-carlo mode needs samples > 0")

    def to_json(self):
        return {"modulus": self.modulus.n, "m": self.m, "d": self.d,
                "coset": self.coset.to_json(), "mode": self.mode,
                "samples": self.samples, "seed": self.seed, "joint": self.joint}


def _class_of_row(parts):
    d = {}
    for ell, row in parts:
        d[ell] = [int(c) for c in row if c > 0]
    return ModuleClass.from_dict(d)


def _local_joint_counts(ell, e, m):
    """{(dickson, spinor, class): count} over split O(2m, Z/ell^e)."""
    tab = split_table(m, ell, e)
    dick = (tab["dims"] % 2).astype(np.int64)
    spin = tab["spinor"].astype(np.int64)
    if e == 1:
        codes = tab["dims"].astype(np.int64)
        keyed = lambda c: ModuleClass.elementary(ell, int(c), 1)
        combo = (dick * 2 + spin) * (2 * m + 1) + codes
        vals, cnt = np.unique(combo, return_counts=True)
        out = {}
        for v, c in zip(vals, cnt):
            code, dim = divmod(int(v), 2 * m + 1)
            out[(code // 2, code % 2, keyed(dim))] = int(c)
        return out
    exps = tab["exps"].astype(np.int64)
    base = e + 1
    code = np.zeros(len(exps), dtype=np.int64)
    for col in range(exps.shape[1]):
        code = code * base + exps[:, col]
    code = (dick * 2 + spin) * base ** exps.shape[1] + code
    vals, cnt = np.unique(code, return_counts=True)
    out = {}
    for v, c in zip(vals, cnt):
        v = int(v)
        digits = []
        for _ in range(exps.shape[1]):
            v, r = divmod(v, base)
            digits.append(r)
        ds = v
        cls = ModuleClass.from_dict({ell: [x for x in digits if x > 0]})
        out[(ds // 2, ds % 2, cls)] = int(c)
    return out


def exact_kernel_counts(modulus, m, spec, budget=10**8):
    """{(rank bit, class): count} over the elements of the coset union.

    For composite moduli the product group is never materialised: the count
    of a product element only depends on its per-prime invariants, so the
    per-prime tables are combined directly.
    """
    mod = Modulus.of(modulus)
    for ell, k in mod.factorization:
        order = group_order(m, ell, k)
        if order > budget:
            raise RuntimeError(f"group order {order} exceeds the enumeration budget {budget}")
    locs = [(ell, _local_joint_counts(ell, k, m)) for ell, k in mod.factorization]
    agg = {}
    items = [[(ell, key, c) for key, c in tab.items()] for ell, tab in locs]
    for combo in itertools.product(*items):
        dbits = {ell: np.array([key[0]]) for ell, key, _ in combo}
        sbits = {ell: np.array([key[1]]) for ell, key, _ in combo if ell != 2}
        if not spec.accepts(dbits, sbits)[0]:
            continue
        cnt = math.prod(c for _, _, c in combo)
        cls = ModuleClass.trivial()
        for _, key, _ in combo:
            cls = cls + key[2]
        r = combo[0][1][0]
        agg[(r, cls)] = agg.get((r, cls), 0) + cnt
    return agg


def kernel_distribution(params):
    """Law of ker(g - 1) (or of (rank bit, ker) when params.joint)."""
    p = params
    meta = p.to_json()
    if p.mode == EXACT_ENUM:
        counts = exact_kernel_counts(p.modulus, p.m, p.coset, p.budget)
        tot = sum(counts.values())
        law = {k: Fraction(v, tot) for k, v in counts.items()}
        meta["population"] = tot
        D = Distribution.exact(law, meta)
    elif p.mode == CLOSED_FORM:
        ell = p.modulus.n
        pgf = spec_pgf(ell, p.m, p.coset)
        if p.joint:
            if p.coset.dickson == ANY:
                raise ValueError("joint law needs a Dickson-diagonal coset")
            law = {(i % 2, ModuleClass.elementary(ell, i)): a for i, a in pgf.pmf().items()}
        else:
            law = {ModuleClass.elementary(ell, i): a for i, a in pgf.pmf().items()}
        return Distribution.exact(law, meta)
    else:
        inv = sample_coset_invariants(p.m, p.modulus, p.coset, p.samples, p.seed, p.threads)
        counts = empirical_counts(inv, p.modulus)
        D = Distribution.empirical(counts, meta)
    if not p.joint:
        D = D.pushforward(lambda k: k[1])
    return D


def empirical_counts(inv, modulus):
    """{(rank bit, class): count} from sampled invariants."""
    mod = Modulus.of(modulus)
    cols = []
    for ell, k in mod.factorization:
        if k == 1:
            cols.append(inv["dims"][ell].astype(np.int64)[:, None])
        else:
            cols.append(inv["exps"][ell].astype(np.int64))
    r = inv["dickson"].astype(np.int64)[:, None]
    table = np.concatenate([r] + cols, axis=1)
    rows, cnt = np.unique(table, axis=0, return_counts=True)
    out = {}
    for row, c in zip(rows, cnt):
        pos = 1
        d = {}
        for ell, k in mod.factorization:
            if k == 1:
                d[ell] = [1] * int(row[pos])
                pos += 1
            else:
                width = inv["exps"][ell].shape[1]
                d[ell] = [int(x) for x in row[pos:pos + width] if x > 0]
                pos += width
        key = (int(row[0]), ModuleClass.from_dict(d))
        out[key] = out.get(key, 0) + int(c)
    return out


def dimension_law(D, ell):
    """Push a class-keyed law forward to dim over F_ell of the ell-part."""
    def f(k):
        cls = k[1] if isinstance(k, tuple) else k
        return cls.dim(ell)
    return D.pushforward(f)


def product_mean_enumerated(m, primes, spec):
    """Mean #ker(g - 1) over the coset union of split O(2m, Z/(l1 l2)), by a
    literal loop over every pair (g1, g2) of the two local groups."""
    from . import _jit

    if len(primes) != 2:
        raise ValueError("exactly two primes expected")
    t1, t2 = (split_table(m, ell, 1) for ell in primes)
    if spec.dickson == ANY:
        dmode = -2
    elif spec.dickson == BOTH:
        dmode = -1
    else:
        dmode = int(spec.dickson)
    bits = dict(spec.spinor or ())
    s1, s2 = (bits.get(ell, -1) if ell != 2 else -1 for ell in primes)
    num, den = _jit.product_fixed_sum(t1["dims"], t1["spinor"], t2["dims"], t2["spinor"],
                                      primes[0], primes[1], dmode, s1, s2)
    return Fraction(int(num), int(den)), int(den)
