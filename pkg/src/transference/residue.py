"""Exact arithmetic on Z_N and the k linear forms psi_1, ..., psi_k.

``psi_j`` sends a (k-1)-tuple, indexed by i in [k] \\ {j} in increasing order,
to sum (i - j) * x_i mod N.  All arithmetic here is integer-exact.
"""

from dataclasses import dataclass
from math import gcd

import numpy as np

from .errors import ArityMismatch, CoprimalityViolation, PreconditionError


@dataclass(frozen=True)
class Group:
    """The cyclic group Z_N together with the progression length k."""

    N: int
    k: int

    @property
    def r(self):
        return self.k - 1

    def to_dict(self):
        return {"N": self.N, "k": self.k}


@dataclass(frozen=True)
class LinearForm:
    N: int
    k: int
    j: int
    coefficients: tuple

    @property
    def arity(self):
        return len(self.coefficients)

    @property
    def indices(self):
        """The original indices i in [k] \\ {j}, in wire order."""
        return tuple(i for i in range(1, self.k + 1) if i != self.j)


def make_group(N, k):
    N, k = int(N), int(k)
    if N < 1:
        raise PreconditionError(f"N must be positive, got {N}")
    if k < 3:
        raise PreconditionError(f"k must be at least 3, got {k}")
    # gcd(N, (k-1)!) = 1 iff gcd(N, m) = 1 for every 2 <= m <= k-1
    for m in range(2, k):
        if gcd(N, m) != 1:
            raise CoprimalityViolation(N, m)
    return Group(N, k)


def inverse_mod(a, N):
    """Inverse of ``a`` modulo ``N`` by the extended Euclidean algorithm."""
    if N == 1:
        return 0
    old_r, r = a % N, N
    old_s, s = 1, 0
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
    if old_r != 1:
        raise ValueError(f"{a} is not a unit modulo {N}")
    return old_s % N


def linear_form(g, j):
    if not 1 <= j <= g.k:
        raise PreconditionError(f"form index j={j} outside 1..{g.k}")
    coeffs = tuple((i - j) % g.N for i in range(1, g.k + 1) if i != j)
    return LinearForm(g.N, g.k, j, coeffs)


def all_forms(g):
    return [linear_form(g, j) for j in range(1, g.k + 1)]


def psi(form, x):
    if len(x) != form.arity:
        raise ArityMismatch(f"psi_{form.j} takes {form.arity} arguments, got {len(x)}")
    return sum(c * int(xi) for c, xi in zip(form.coefficients, x)) % form.N


def psi_array(form, x):
    """Vectorized psi over the last axis of an integer array."""
    x = np.asarray(x, dtype=np.int64)
    if x.shape[-1] != form.arity:
        raise ArityMismatch(f"psi_{form.j} takes {form.arity} arguments, got {x.shape[-1]}")
    return (x % form.N) @ np.asarray(form.coefficients, dtype=np.int64) % form.N


def psi_grid(form):
    """psi evaluated on all of G^r, as an int array of shape (N,)*r."""
    N = form.N
    out = np.zeros((N,) * form.arity, dtype=np.int64)
    for axis, c in enumerate(form.coefficients):
        shape = [1] * form.arity
        shape[axis] = N
        out = out + (c * np.arange(N, dtype=np.int64)).reshape(shape)
    return out % N


def scaling_map(from_j, to_j, g):
    """Per-position unit multipliers s with psi_from(s * x) == psi_to(x).

    Positions follow the wire order of each form, so position p of psi_from
    is matched with position p of psi_to.
    """
    src = linear_form(g, from_j).coefficients
    dst = linear_form(g, to_j).coefficients
    return tuple(d * inverse_mod(c, g.N) % g.N for c, d in zip(src, dst))
