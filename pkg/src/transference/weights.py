"""Weight functions on Z_N: majorants, planted subsets, and their file formats."""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import EmptySupport, PreconditionError, ZeroMass
from .residue import Group, make_group

TAGS = ("nu", "f", "fmodel", "signed")


@dataclass(frozen=True, eq=False)
class WeightFn:
    group: Group
    values: np.ndarray = field(repr=False)
    tag: str = "f"

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.shape != (self.group.N,):
            raise PreconditionError(f"expected {self.group.N} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise PreconditionError("weight values must be finite")
        if self.tag not in TAGS:
            raise PreconditionError(f"unknown tag {self.tag!r}")
        if self.tag != "signed" and np.any(v < 0):
            raise PreconditionError("negative weight in an unsigned WeightFn")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def N(self):
        return self.group.N

    def with_values(self, values, tag=None):
        return WeightFn(self.group, values, self.tag if tag is None else tag)

    def __eq__(self, other):
        return (isinstance(other, WeightFn) and self.group == other.group
                and self.tag == other.tag and np.array_equal(self.values, other.values))


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str = "random_sparse"
    p: float = 1.0
    delta: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("uniform", "random_sparse", "planted_subset", "interval_adversary"):
            raise PreconditionError(f"unknown generator kind {self.kind!r}")
        if not 0 < self.p <= 1:
            raise PreconditionError(f"density p must be in (0, 1], got {self.p}")
        if not 0 <= self.delta <= 1:
            raise PreconditionError(f"planted fraction must be in [0, 1], got {self.delta}")


def mean(w):
    values = w.values if isinstance(w, WeightFn) else np.asarray(w, dtype=np.float64)
    return float(np.mean(values)) if values.size else 0.0


def uniform(g):
    return WeightFn(g, np.ones(g.N), "nu")


def random_sparse_majorant(g, p, seed):
    """nu = (N/|S|) 1_S with each x in S independently with probability p.

    Returns ``(nu, S)`` where S is a sorted int array.
    """
    if not 0 < p <= 1:
        raise PreconditionError(f"density p must be in (0, 1], got {p}")
    if p * g.N < 1:
        raise PreconditionError(f"p*N = {p * g.N} < 1")
    if p == 1:
        members = np.ones(g.N, dtype=bool)
    else:
        members = rng.stream(seed, rng.SUPPORT).random(g.N) < p
    S = np.flatnonzero(members)
    if S.size == 0:
        raise EmptySupport(f"empty support for N={g.N}, p={p}, seed={seed}")
    values = np.zeros(g.N)
    values[S] = g.N / S.size
    return WeightFn(g, values, "nu"), S


def planted_subset(nu, S, delta, seed):
    """f = 1_A nu where A keeps each element of S with probability delta."""
    S = np.asarray(S, dtype=np.int64)
    if S.size == 0:
        raise EmptySupport("planted_subset needs a nonempty S")
    if not 0 <= delta <= 1:
        raise PreconditionError(f"planted fraction must be in [0, 1], got {delta}")
    keep = rng.stream(seed, rng.PLANTED).random(S.size) < delta
    values = np.zeros(nu.N)
    A = S[keep]
    values[A] = nu.values[A]
    return WeightFn(nu.group, values, "f")


def interval_adversary(g, p):
    """nu supported on {0, ..., ceil(pN)-1}, scaled to mean 1.

    A deliberately structured majorant: it fails the linear forms condition
    for any p bounded away from 1.
    """
    if not 0 < p <= 1:
        raise PreconditionError(f"density p must be in (0, 1], got {p}")
    size = min(g.N, math.ceil(p * g.N))
    values = np.zeros(g.N)
    values[:size] = g.N / size
    return WeightFn(g, values, "nu")


def rescale_to_unit_mass(f, delta):
    """Replace f by delta*f/E[f] when E[f] > 1, otherwise return f unchanged."""
    m = mean(f)
    if not m > 0:
        raise ZeroMass("cannot rescale a function with zero mass")
    if m <= 1:
        return f
    if not 0 < delta <= 1:
        raise PreconditionError(f"target mass must be in (0, 1], got {delta}")
    return f.with_values(delta * f.values / m)


def generate(spec, g):
    """Build ``(nu, f)`` from a GeneratorSpec."""
    if spec.kind == "uniform":
        nu = uniform(g)
        S = np.arange(g.N)
    elif spec.kind == "interval_adversary":
        nu = interval_adversary(g, spec.p)
        S = np.flatnonzero(nu.values)
    else:
        nu, S = random_sparse_majorant(g, spec.p, spec.seed)
    if spec.kind == "planted_subset" or spec.delta < 1:
        f = planted_subset(nu, S, spec.delta, spec.seed)
    else:
        f = nu.with_values(nu.values, "f")
    return nu, f


# -- serialization ---------------------------------------------------------

def to_json_dict(w):
    return {"N": w.N, "k": w.group.k, "tag": w.tag, "values": [float(v) for v in w.values]}


def from_json_dict(d):
    g = make_group(d["N"], d["k"])
    return WeightFn(g, np.array(d["values"], dtype=np.float64), d.get("tag", "f"))


def dumps_csv(w):
    lines = ["N,k,tag", f"{w.N},{w.group.k},{w.tag}"]
    lines += [repr(float(v)) for v in w.values]
    return "\n".join(lines) + "\n"


def loads_csv(text):
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if len(lines) < 2 or lines[0].replace(" ", "") != "N,k,tag":
        raise PreconditionError("CSV weight file must start with the header 'N,k,tag'")
    N, k, tag = (s.strip() for s in lines[1].split(","))
    g = make_group(int(N), int(k))
    return WeightFn(g, np.array([float(v) for v in lines[2:]]), tag)


def save(w, path, fmt=None):
    path = str(path)
    fmt = fmt or ("csv" if path.endswith(".csv") else "json")
    with open(path, "w") as fh:
        if fmt == "csv":
            fh.write(dumps_csv(w))
        else:
            json.dump(to_json_dict(w), fh)
            fh.write("\n")


def load(path):
    path = str(path)
    with open(path) as fh:
        text = fh.read()
    if path.endswith(".csv"):
        return loads_csv(text)
    return from_json_dict(json.loads(text))
