"""The corank chain of uniform alternating forms.

Both the random kernel model and the Lagrangian intersection model produce
chains d_1 >= d_2 >= ... where d_{j+1} is distributed as the corank of a
uniform alternating form on F_ell^{d_j}.
"""

from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import stats

from .distrib import Distribution


@lru_cache(maxsize=None)
def alternating_rank_counts(ell, n):
    """{rank: number of alternating n x n matrices over F_ell of that rank}.

    Bordering an n x n form of rank r by a new row v keeps the rank when v lies
    in its image (ell^r choices) and raises it by two otherwise.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    counts = {0: 1}
    for k in range(n):
        nxt = {}
        for r, c in counts.items():
            nxt[r] = nxt.get(r, 0) + c * ell**r
            nxt[r + 2] = nxt.get(r + 2, 0) + c * (ell**k - ell**r)
        counts = {r: c for r, c in nxt.items() if c}
    return counts


def alternating_corank_pmf(ell, n):
    """Exact law of dim ker of a uniform alternating n x n matrix over F_ell."""
    total = ell ** (n * (n - 1) // 2)
    return Distribution.exact({n - r: Fraction(c, total)
                               for r, c in alternating_rank_counts(ell, n).items()},
                              meta={"ell": ell, "n": n})


class CorankKernel:
    """Transition table P(d -> d') for d <= n_max."""

    def __init__(self, ell, n_max):
        self.ell = ell
        self.n_max = n_max
        self.rows = [alternating_corank_pmf(ell, d) for d in range(n_max + 1)]

    def p(self, d, d2):
        return self.rows[d].prob(d2)

    def matrix(self):
        """Dense Fraction matrix, rows indexed by d, columns by d'."""
        n = self.n_max + 1
        return [[self.p(a, b) for b in range(n)] for a in range(n)]

    def power_row(self, d, steps):
        """Exact law of the chain after `steps` transitions from d."""
        law = {d: Fraction(1)}
        for _ in range(steps):
            nxt = {}
            for a, pa in law.items():
                for b, pb in self.rows[a].probs().items():
                    nxt[b] = nxt.get(b, 0) + pa * pb
            law = nxt
        return Distribution.exact(law)


def evolve_chain(d1, ell, steps, rng=None):
    """A sampled chain [d_1, ..., d_{steps+1}] (with rng), else the list of
    exact marginal laws of each step."""
    if rng is None:
        K = CorankKernel(ell, d1)
        return [K.power_row(d1, s) for s in range(steps + 1)]
    chain = [d1]
    cache = {}
    for _ in range(steps):
        d = chain[-1]
        if d not in cache:
            law = alternating_corank_pmf(ell, d)
            keys = sorted(law.weights)
            cache[d] = (keys, np.array([float(law.prob(k)) for k in keys]))
        keys, p = cache[d]
        chain.append(int(keys[rng.choice(len(keys), p=p)]))
    return chain


def sample_chains(d1s, ell, steps, rng):
    """Vectorised chains for an array of starting dimensions."""
    d = np.asarray(d1s, dtype=np.int64)
    out = np.empty((len(d), steps + 1), dtype=np.int64)
    out[:, 0] = d
    n_max = int(d.max()) if len(d) else 0
    cdfs = {}
    for a in range(n_max + 1):
        law = alternating_corank_pmf(ell, a)
        keys = np.array(sorted(law.weights))
        cdfs[a] = (keys, np.cumsum([float(law.prob(int(k))) for k in keys]))
    for s in range(steps):
        u = rng.random(len(d))
        nxt = np.empty_like(d)
        for a in np.unique(d):
            idx = d == a
            keys, cdf = cdfs[int(a)]
            pick = np.minimum(np.searchsorted(cdf, u[idx], side="right"), len(keys) - 1)
            nxt[idx] = keys[pick]
        d = nxt
        out[:, s + 1] = d
    return out


def _pool(obs, exp, min_expected=5.0):
    """Merge cells with small expectation, largest-to-smallest."""
    order = np.argsort(-exp)
    o, e = [], []
    acc_o = acc_e = 0.0
    for i in order:
        acc_o += obs[i]
        acc_e += exp[i]
        if acc_e >= min_expected:
            o.append(acc_o)
            e.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0:
        if e:
            o[-1] += acc_o
            e[-1] += acc_e
        else:
            o.append(acc_o)
            e.append(acc_e)
    return np.array(o), np.array(e)


def verify_markov(chains, ell, weights=None, alpha=1e-3, min_bucket=20, exact=False,
                  rank=None):
    """Compare each conditional law d_{i+1} | d_i = a with the kernel row a.

    chains: (N, e) integer array.  weights: optional per-chain integer
    multiplicities.  With exact=True the empirical conditional laws (as
    Fractions) must equal the rows exactly; otherwise a chi-square test per
    bucket at level alpha / #buckets.  For ell = 2 the bucket d_i = rank is
    reported separately and never fails the verdict.
    """
    chains = np.asarray(chains, dtype=np.int64)
    if weights is None:
        weights = np.ones(len(chains), dtype=np.int64)
    weights = np.asarray(weights, dtype=np.int64)
    steps = chains.shape[1] - 1
    buckets = {}
    for s in range(steps):
        a = chains[:, s]
        b = chains[:, s + 1]
        for key in np.unique(a):
            m = a == key
            vals, inv = np.unique(b[m], return_inverse=True)
            cnt = np.bincount(inv, weights=weights[m]).astype(np.int64)
            bk = buckets.setdefault((s, int(key)), {})
            for v, c in zip(vals, cnt):
                bk[int(v)] = bk.get(int(v), 0) + int(c)
    tested = [k for k, v in buckets.items() if sum(v.values()) >= min_bucket or exact]
    level = alpha / max(1, len(tested))
    report = {"ell": ell, "mode": "exact" if exact else "chi2", "alpha": alpha,
              "buckets": [], "skipped": [], "excluded": []}
    ok_all = True
    for (s, a), counts in sorted(buckets.items()):
        total = sum(counts.values())
        row = alternating_corank_pmf(ell, a)
        entry = {"step": s + 1, "from": a, "n": total, "counts": counts}
        if (s, a) not in tested:
            entry["notice"] = "insufficient bucket mass"
            report["skipped"].append(entry)
            continue
        excluded = ell == 2 and rank is not None and a == rank
        if exact:
            emp = {k: Fraction(v, total) for k, v in counts.items()}
            ref = {k: v for k, v in row.probs().items()}
            entry["match"] = emp == ref
            entry["pass"] = entry["match"]
        else:
            support = sorted(set(row.weights) | set(counts))
            obs = np.array([counts.get(k, 0) for k in support], dtype=float)
            exp = np.array([float(row.prob(k)) * total for k in support])
            if any(obs[i] > 0 and exp[i] == 0 for i in range(len(support))):
                entry.update(statistic=float("inf"), pvalue=0.0)
                entry["pass"] = False
            else:
                o, e = _pool(obs[exp > 0], exp[exp > 0])
                if len(o) < 2:
                    stat, pval = 0.0, 1.0
                else:
                    stat, pval = stats.chisquare(o, e * o.sum() / e.sum())
                entry["statistic"] = float(stat)
                entry["pvalue"] = float(pval)
                entry["pass"] = bool(pval >= level)
        if excluded:
            report["excluded"].append(entry)
        else:
            report["buckets"].append(entry)
            ok_all &= entry["pass"]
    report["pass"] = bool(ok_all)
    return report
