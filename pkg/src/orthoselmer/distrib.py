"""Distributions over module classes, dimensions or (rank, class) pairs.

Exact distributions hold Fractions summing to one.  Empirical ones hold raw
integer counts and are only normalised when a probability is requested.
"""

import csv
import io
import json
import math
from collections import Counter
from fractions import Fraction

from .modring import ModuleClass

EXACT = "exact"
EMPIRICAL = "empirical"


def _key_kind(k):
    if isinstance(k, ModuleClass):
        return "class"
    if isinstance(k, tuple) and len(k) == 2 and isinstance(k[1], ModuleClass):
        return "joint"
    if isinstance(k, (int,)) and not isinstance(k, bool):
        return "int"
    raise TypeError(f"unsupported outcome key {k!r}")


def key_to_json(k):
    kind = _key_kind(k)
    if kind == "class":
        return k.to_json()
    if kind == "joint":
        return [k[0], k[1].to_json()]
    return k


def key_from_json(obj):
    if isinstance(obj, int):
        return obj
    if obj and isinstance(obj[0], int) and len(obj) == 2 and isinstance(obj[1], list):
        return (obj[0], ModuleClass.from_json(obj[1]))
    return ModuleClass.from_json(obj)


class Distribution:
    def __init__(self, weights, kind=EXACT, meta=None):
        if kind not in (EXACT, EMPIRICAL):
            raise ValueError(f"unknown kind {kind!r}")
        w = {}
        for k, v in dict(weights).items():
            if kind == EXACT:
                v = Fraction(v)
            else:
                if int(v) != v:
                    raise ValueError("empirical weights must be integer counts")
                v = int(v)
            if v < 0:
                raise ValueError("negative weight")
            if v:
                w[k] = v
        kinds = {_key_kind(k) for k in w}
        if len(kinds) > 1:
            raise TypeError(f"mixed outcome key types {sorted(kinds)}")
        if kind == EXACT and w and sum(w.values()) != 1:
            raise ValueError(f"exact weights sum to {sum(w.values())}, not 1")
        self.weights = w
        self.kind = kind
        self.meta = dict(meta or {})

    @classmethod
    def exact(cls, probs, meta=None):
        return cls(probs, EXACT, meta)

    @classmethod
    def empirical(cls, counts, meta=None):
        return cls(Counter(counts) if not isinstance(counts, dict) else counts, EMPIRICAL, meta)

    @classmethod
    def from_counts(cls, counts, meta=None):
        """Exact law from integer counts over a finite population."""
        total = sum(counts.values())
        return cls({k: Fraction(v, total) for k, v in counts.items()}, EXACT, meta)

    @property
    def key_kind(self):
        return _key_kind(next(iter(self.weights))) if self.weights else None

    @property
    def total(self):
        return sum(self.weights.values())

    def support(self):
        return sorted(self.weights, key=_sort_key)

    def prob(self, k):
        v = self.weights.get(k, 0)
        return Fraction(v) if self.kind == EXACT else Fraction(v, self.total)

    def probs(self):
        return {k: self.prob(k) for k in self.weights}

    def merge(self, other):
        """Pool two empirical accumulators (associative and commutative)."""
        if self.kind != EMPIRICAL or other.kind != EMPIRICAL:
            raise ValueError("only empirical distributions merge")
        c = Counter(self.weights)
        c.update(other.weights)
        meta = dict(self.meta)
        meta["samples"] = sum(c.values())
        return Distribution(c, EMPIRICAL, meta)

    def pushforward(self, fn):
        out = {}
        for k, v in self.weights.items():
            nk = fn(k)
            out[nk] = out.get(nk, 0) + v
        return Distribution(out, self.kind, self.meta)

    def as_exact(self):
        return Distribution(self.probs(), EXACT, self.meta) if self.kind == EMPIRICAL else self

    def to_json(self):
        """{"kind", "meta", "pmf": [[key, num, den] (+ count if empirical), ...]}."""
        rows = []
        for k in self.support():
            p = self.prob(k)
            row = [key_to_json(k), p.numerator, p.denominator]
            if self.kind == EMPIRICAL:
                row.append(self.weights[k])
            rows.append(row)
        return {"kind": self.kind, "meta": self.meta, "pmf": rows}

    @classmethod
    def from_json(cls, obj):
        if obj["kind"] == EMPIRICAL:
            w = {key_from_json(r[0]): r[3] for r in obj["pmf"]}
        else:
            w = {key_from_json(r[0]): Fraction(r[1], r[2]) for r in obj["pmf"]}
        return cls(w, obj["kind"], obj.get("meta"))

    def to_csv(self):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["key", "num", "den", "prob"])
        for k in self.support():
            p = self.prob(k)
            wr.writerow([_csv_key(k), p.numerator, p.denominator, f"{float(p):.12g}"])
        return buf.getvalue()

    def __eq__(self, other):
        return isinstance(other, Distribution) and self.probs() == other.probs()

    def __repr__(self):
        items = ", ".join(f"{_csv_key(k)}: {self.prob(k)}" for k in self.support()[:6])
        more = "" if len(self.weights) <= 6 else ", ..."
        return f"Distribution({self.kind}; {items}{more})"


def _sort_key(k):
    kind = _key_kind(k)
    if kind == "int":
        return (k,)
    if kind == "class":
        return (k.order, k)
    return (k[0], k[1].order, k[1])


def _csv_key(k):
    kind = _key_kind(k)
    if kind == "joint":
        return f"r={k[0]};{k[1]}"
    return str(k)


def _check_comparable(P, R):
    if P.weights and R.weights and P.key_kind != R.key_kind:
        raise TypeError(f"key spaces differ: {P.key_kind} vs {R.key_kind}")


def tv_distance(P, R):
    """Half the L1 distance; a Fraction when both inputs are exact."""
    _check_comparable(P, R)
    keys = set(P.weights) | set(R.weights)
    d = sum(abs(P.prob(k) - R.prob(k)) for k in keys) / 2
    if P.kind == EXACT and R.kind == EXACT:
        return d
    return float(d)


def outcome_size(k, ell=None):
    kind = _key_kind(k)
    if kind == "class":
        return k.order
    if kind == "joint":
        return k[1].order
    if ell is None:
        raise ValueError("dimension keys need ell to define a size")
    return ell**k


def moment(P, j, ell=None):
    """E[|G|^j] as an exact Fraction."""
    return sum((P.prob(k) * outcome_size(k, ell) ** j for k in P.weights), Fraction(0))


def mean_size(P, ell=None):
    return moment(P, 1, ell)


def noise_bound(P, R, factor=5.0):
    """factor * sqrt(K / N) with K outcome classes and N the smaller sample count."""
    K = len(set(P.weights) | set(R.weights))
    Ns = [D.total for D in (P, R) if D.kind == EMPIRICAL]
    if not Ns:
        return 0.0
    return factor * math.sqrt(K / min(Ns))


def compare_models(A, B, tolerance="auto", moments=(1, 2), ell=None):
    """TV, per-outcome deltas, moments and a verdict.

    tolerance: a number, or "auto" meaning exact equality for two exact
    inputs and the noise bound 5 sqrt(K / N) otherwise.
    """
    _check_comparable(A, B)
    tv = tv_distance(A, B)
    if tolerance == "auto":
        tol = 0 if (A.kind == EXACT and B.kind == EXACT) else noise_bound(A, B)
    else:
        tol = tolerance
    keys = sorted(set(A.weights) | set(B.weights), key=_sort_key)
    deltas = [{"key": key_to_json(k), "a": float(A.prob(k)), "b": float(B.prob(k)),
               "delta": float(A.prob(k) - B.prob(k))} for k in keys]
    mom = []
    for j in moments:
        try:
            mom.append({"j": j, "a": float(moment(A, j, ell)), "b": float(moment(B, j, ell))})
        except ValueError:
            break
    return {"tv": float(tv), "tv_exact": str(tv) if isinstance(tv, Fraction) else None,
            "tolerance": float(tol), "pass": bool(tv <= tol), "deltas": deltas,
            "moments": mom}


def dumps(obj):
    return json.dumps(obj, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, Fraction):
        return [o.numerator, o.denominator]
    if isinstance(o, ModuleClass):
        return o.to_json()
    if hasattr(o, "item"):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")
