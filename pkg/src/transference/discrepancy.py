"""Product tests, generalized convolutions and discrepancy between weight functions.

For a form psi: G^r -> G and test functions u_1, ..., u_r: G^(r-1) -> [0,1]
(u_i reads every coordinate except the i-th), the discrepancy of (g, g~) is

    | E_x [ (g - g~)(psi(x)) prod_i u_i(x without x_i) ] |.

Every fiber of psi has N^(r-1) points, so this equals |<g - g~, conv>| where
conv(x) is the mean of prod_i u_i over the fiber psi^{-1}(x).  Test-function
arrays have shape (N,) * (r-1) with axes in increasing coordinate order.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import rng
from .errors import ArityMismatch, PreconditionError
from .residue import Group, inverse_mod, linear_form, psi_grid, scaling_map


@dataclass(frozen=True, eq=False)
class TestFamily:
    __test__ = False  # not a pytest class

    u: tuple = field(repr=False)

    def __post_init__(self):
        arrays = tuple(np.array(a, dtype=np.float64) for a in self.u)
        if len(arrays) < 2:
            raise PreconditionError("a test family needs r >= 2 functions")
        r = len(arrays)
        N = arrays[0].shape[0] if arrays[0].ndim else 0
        for a in arrays:
            if a.shape != (N,) * (r - 1):
                raise PreconditionError(f"test functions must have shape {(N,) * (r - 1)}, got {a.shape}")
            if np.any(a < 0) or np.any(a > 1):
                raise PreconditionError("test function values must lie in [0, 1]")
            a.flags.writeable = False
        object.__setattr__(self, "u", arrays)

    @property
    def r(self):
        return len(self.u)

    @property
    def N(self):
        return self.u[0].shape[0]

    def to_list(self):
        return [a.tolist() for a in self.u]


@dataclass(frozen=True)
class DiscrepancyReport:
    value: float
    signed_value: float
    j: int
    mode: str
    witness: TestFamily = field(default=None, repr=False)
    epsilon_target: float = None
    restart: int = None
    history: tuple = field(default=(), repr=False)

    @property
    def sign(self):
        return 1.0 if self.signed_value >= 0 else -1.0

    def to_dict(self, include_witness=True):
        d = {
            "value": self.value,
            "signed_value": self.signed_value,
            "j": self.j,
            "mode": self.mode,
            "epsilon_target": self.epsilon_target,
            "restart": self.restart,
        }
        if include_witness and self.witness is not None:
            d["witness"] = self.witness.to_list()
        return d


@dataclass(frozen=True)
class BoxNorm:
    value: float
    raw: float
    r: int
    mode: str
    standard_error: float = 0.0

    def to_dict(self):
        return {"value": self.value, "raw": self.raw, "r": self.r, "mode": self.mode,
                "standard_error": self.standard_error}


def _values(w):
    return np.asarray(getattr(w, "values", w), dtype=np.float64)


@lru_cache(maxsize=8)
def _cached_grid(N, k, j):
    grid = psi_grid(linear_form(Group(N, k), j))
    grid.flags.writeable = False
    return grid


def _grid(form):
    return _cached_grid(form.N, form.k, form.j)


def _check(u, form):
    if u.r != form.arity:
        raise ArityMismatch(f"psi_{form.j} has arity {form.arity}, family has r = {u.r}")
    if u.N != form.N:
        raise PreconditionError(f"family lives on Z_{u.N}, form on Z_{form.N}")


def _expand(a, i):
    """View u_i (axes = coordinates other than i) as a broadcastable G^r array."""
    return np.expand_dims(a, axis=i)


def product_tensor(u):
    """prod_i u_i(x without x_i) over all of G^r."""
    out = 1.0
    for i, a in enumerate(u.u):
        out = out * _expand(a, i)
    return np.broadcast_to(out, (u.N,) * u.r)


def convolution_table(u, form):
    """The generalized convolution at every x in G, via one pass over G^r."""
    _check(u, form)
    N, r = form.N, form.arity
    weights = np.ascontiguousarray(product_tensor(u)).ravel()
    return np.bincount(_grid(form).ravel(), weights=weights, minlength=N) / N ** (r - 1)


def generalized_convolution(u, form, x):
    """Mean of prod_i u_i over the fiber {y : psi(y) = x}.

    The fiber is walked by choosing y_2..y_r freely and solving for y_1.
    """
    _check(u, form)
    N, r = form.N, form.arity
    c = form.coefficients
    rest = np.indices((N,) * (r - 1)).reshape(r - 1, -1).astype(np.int64)
    partial = sum(c[p + 1] * rest[p] for p in range(r - 1))
    y1 = (inverse_mod(c[0], N) * (int(x) - partial)) % N
    y = np.vstack([y1[None, :], rest])
    prod = np.ones(y.shape[1])
    for i, a in enumerate(u.u):
        others = tuple(y[q] for q in range(r) if q != i)
        prod *= a[others]
    return float(prod.mean())


def discrepancy_signed(g, g_tilde, form, u):
    h = _values(g) - _values(g_tilde)
    return float(np.dot(h, convolution_table(u, form)) / form.N)


def discrepancy_value(g, g_tilde, form, u):
    return abs(discrepancy_signed(g, g_tilde, form, u))


def random_family(r, N, seed, binary=False):
    gen = rng.stream(seed, rng.SEARCH, 10**6)
    shape = (N,) * (r - 1)
    if binary:
        return TestFamily(tuple(gen.integers(0, 2, size=shape).astype(float) for _ in range(r)))
    return TestFamily(tuple(gen.random(shape) for _ in range(r)))


# -- search ---------------------------------------------------------------

def _partial(H, us, i):
    """d Phi / d u_i: sum over x_i of H(x) prod_{l != i} u_l(x without x_l), over N^r."""
    r = H.ndim
    N = H.shape[0]
    if r == 2:
        other = us[1 - i]
        # u_1 reads x_2, u_2 reads x_1
        grad = H.T @ other if i == 0 else H @ other
        return grad / N ** 2
    W = H
    for l, a in enumerate(us):
        if l != i:
            W = W * _expand(a, l)
    return W.sum(axis=i) / N ** r


def _objective(H, us):
    r = H.ndim
    if r == 2:
        return float(us[1] @ H @ us[0]) / H.shape[0] ** 2
    W = H
    for l, a in enumerate(us):
        W = W * _expand(a, l)
    return float(W.sum()) / H.shape[0] ** r


def coordinate_ascent(H, us, sign, max_sweeps=200):
    """Blockwise ascent on sign * Phi; returns (us, history of sign * Phi).

    Each block update is exact for the multilinear objective: u_i becomes the
    indicator of a positive partial derivative, and a zero derivative keeps
    the current value.
    """
    us = [a.copy() for a in us]
    history = [sign * _objective(H, us)]
    for _ in range(max_sweeps):
        changed = False
        for i in range(len(us)):
            grad = sign * _partial(H, us, i)
            new = np.where(grad > 0, 1.0, np.where(grad < 0, 0.0, us[i]))
            if not np.array_equal(new, us[i]):
                changed = True
                us[i] = new
            # Phi is linear in u_i and grad does not depend on it
            history.append(float(np.sum(grad * new)))
        if not changed:
            break
    return us, history


def discrepancy_search(g, g_tilde, form, restarts=4, seed=0, max_sweeps=200, epsilon_target=None):
    """Lower bound on the discrepancy of (g, g~) by multistart coordinate ascent.

    Each restart runs ascent for both signs of the objective from its own
    seeded uniform start; the best witness wins, ties going to the earlier
    restart.  The reported value is recomputed from the witness.
    """
    N, r = form.N, form.arity
    h = _values(g) - _values(g_tilde)
    H = h[_grid(form)]
    shape = (N,) * (r - 1)
    best = None
    for restart in range(max(1, int(restarts))):
        for s_index, sign in enumerate((1.0, -1.0)):
            gen = rng.stream(seed, rng.SEARCH, restart, s_index)
            start = [gen.random(shape) for _ in range(r)]
            us, history = coordinate_ascent(H, start, sign, max_sweeps)
            score = history[-1]
            if best is None or score > best[0]:
                best = (score, restart, us, history)
    _, restart, us, history = best
    witness = TestFamily(tuple(us))
    signed = discrepancy_signed(g, g_tilde, form, witness)
    return DiscrepancyReport(abs(signed), signed, form.j, "searched", witness,
                             epsilon_target, restart, tuple(history))


def discrepancy_exact(g, g_tilde, form, max_n=12):
    """Exact maximum over all test families, r = 2 only, by vertex enumeration."""
    N, r = form.N, form.arity
    if r != 2:
        raise PreconditionError("exact enumeration is implemented for r = 2 only")
    if N > max_n:
        raise PreconditionError(f"N={N} too large for 2^N enumeration (max {max_n})")
    h = _values(g) - _values(g_tilde)
    H = h[_grid(form)]
    # every 0/1 vector u_1 (a function of x_2), one per row
    U1 = ((np.arange(2 ** N)[:, None] >> np.arange(N)[None, :]) & 1).astype(float)
    rows = U1 @ H.T                      # rows[m, x1] = sum_x2 H[x1, x2] u_1(x2)
    pos = np.clip(rows, 0, None).sum(axis=1)
    neg = np.clip(-rows, 0, None).sum(axis=1)
    scores = np.maximum(pos, neg)
    m = int(np.argmax(scores))
    u1 = U1[m]
    u2 = (rows[m] > 0).astype(float) if pos[m] >= neg[m] else (rows[m] < 0).astype(float)
    witness = TestFamily((u1, u2))
    signed = discrepancy_signed(g, g_tilde, form, witness)
    return DiscrepancyReport(abs(signed), signed, form.j, "exact", witness)


# -- box norm ---------------------------------------------------------------

def _box_power(h, r):
    """E over a, e_1..e_r of prod_omega h(a + omega . e), folding one difference at a time."""
    if r == 1:
        return float(np.mean(h)) ** 2
    N = h.size
    x = np.arange(N)
    # row e holds the multiplicative derivative h(a) h(a + e)
    D = h[None, :] * h[(x[None, :] + x[:, None]) % N]
    if r == 2:
        return float(np.mean(np.mean(D, axis=1) ** 2))
    return float(np.mean([_box_power(row, r - 1) for row in D]))


def box_norm_bound(nu, form, samples=200_000, seed=0, exact_max_r=3):
    """The 2^r-th root of E prod_omega (nu - 1)(psi(x^omega)) over x^(0), x^(1) in G^r.

    Substituting x^(1) = x^(0) + d and a = psi(x^(0)), e_p = c_p d_p (units)
    turns the average into E_{a,e} prod_omega h(a + omega . e) with h = nu - 1,
    which is contracted one coordinate pair at a time in O(N^r).  For
    r > ``exact_max_r`` it is estimated by Monte Carlo over (a, e).
    """
    h = _values(nu) - 1.0
    r = form.arity
    if r <= exact_max_r:
        raw = _box_power(h, r)
        se, mode = 0.0, "exact"
    else:
        N = h.size
        gen = rng.stream(seed, rng.BOX)
        a = gen.integers(0, N, size=samples)
        e = gen.integers(0, N, size=(samples, r))
        prod = np.ones(samples)
        for w in range(2 ** r):
            mask = np.array([(w >> p) & 1 for p in range(r)])
            prod *= h[(a + e @ mask) % N]
        raw = float(prod.mean())
        se = float(prod.std(ddof=1) / np.sqrt(samples)) if samples > 1 else 0.0
        mode = "monte_carlo"
    value = max(raw, 0.0) ** (1.0 / 2 ** r)
    return BoxNorm(value, raw, r, mode, se)


# -- transport and closure ------------------------------------------------

def transport_witness(u, from_j, to_j, g):
    """Re-parametrize u so that its discrepancy under psi_to equals the one under psi_from.

    With s = scaling_map(from_j, to_j), psi_from(s * y) = psi_to(y); the new
    family reads u_i at s * y, a permutation of each array.
    """
    if from_j == to_j:
        return u
    s = scaling_map(from_j, to_j, g)
    N, r = g.N, u.r
    ar = np.arange(N, dtype=np.int64)
    out = []
    for i, a in enumerate(u.u):
        idx = [(s[p] * ar) % N for p in range(r) if p != i]
        out.append(a[np.ix_(*idx)])
    return TestFamily(tuple(out))


def zero_fiber(form):
    """All z in G^r with psi(z) = 0, as an (N^(r-1), r) int array."""
    N, r = form.N, form.arity
    c = form.coefficients
    rest = np.indices((N,) * (r - 1)).reshape(r - 1, -1).astype(np.int64)
    partial = sum(c[p + 1] * rest[p] for p in range(r - 1))
    z1 = (inverse_mod(c[0], N) * (-partial)) % N
    return np.vstack([z1[None, :], rest]).T


def shifted_product_family(u, u_prime, z):
    """v_i(y) = u_i(y) u'_i(y + z without z_i)."""
    r = u.r
    out = []
    for i, (a, b) in enumerate(zip(u.u, u_prime.u)):
        shifts = [int(z[p]) for p in range(r) if p != i]
        rolled = np.roll(b, shift=[-s for s in shifts], axis=tuple(range(r - 1)))
        out.append(a * rolled)
    return TestFamily(tuple(out))


def product_closure_witness(u, u_prime, form, x, samples=None, seed=0):
    """Both sides of conv_u(x) conv_u'(x) = E_{psi(z)=0} conv_{v_z}(x).

    The right side enumerates the whole zero fiber unless ``samples`` asks
    for a seeded subsample.
    """
    _check(u, form)
    _check(u_prime, form)
    lhs = generalized_convolution(u, form, x) * generalized_convolution(u_prime, form, x)
    fiber = zero_fiber(form)
    if samples is not None and samples < len(fiber):
        pick = rng.stream(seed, rng.SEARCH, 2 * 10**6).choice(len(fiber), size=samples, replace=False)
        fiber = fiber[np.sort(pick)]
    rhs = float(np.mean([generalized_convolution(shifted_product_family(u, u_prime, z), form, x)
                         for z in fiber]))
    return lhs, rhs
