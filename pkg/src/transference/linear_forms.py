"""Exact and Monte Carlo evaluation of the k-linear forms condition.

A factor of the condition is indexed by (j, omega) with omega in
{0,1}^([k] \\ {j}); it evaluates nu at psi_j of the tuple whose i-th entry is
x_i^(omega_i).  Inside :class:`ExponentPattern` omega is stored as an integer
whose bit p is the choice for the p-th index of psi_j in wire order.

The exact evaluator does not loop over Z_N^(2k).  Writing x^(1) = x^(0) + D,
factor (j, omega) becomes nu(a_j + psi_j(omega * D)) with a_j = psi_j(x^(0)),
and a_j = A - j*B for A = sum i*x_i, B = sum x_i.  So for each shift vector D
the average over x^(0) is a weighted k-term progression count in (A, B).
That is O(N^(k+2)) directly, or O(N^(k+1) log N) through the DFT when k = 3.
"""

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import ArityMismatch, BudgetExceeded, PreconditionError
from .residue import all_forms

DEFAULT_BUDGET = 10**9
CHUNK_SIZE = 1 << 16


def lfc_factor_count(g):
    return g.k * 2 ** (g.k - 1)


@dataclass(frozen=True, eq=False)
class ExponentPattern:
    """Bits n_{j,omega}, stored as a (k, 2^(k-1)) uint8 array."""

    k: int
    bits: np.ndarray = field(repr=False)

    def __post_init__(self):
        b = np.array(self.bits, dtype=np.uint8).reshape(self.k, 2 ** (self.k - 1))
        if np.any(b > 1):
            raise PreconditionError("exponent bits must be 0 or 1")
        b.flags.writeable = False
        object.__setattr__(self, "bits", b)

    @classmethod
    def ones(cls, k):
        return cls(k, np.ones((k, 2 ** (k - 1))))

    @classmethod
    def zeros(cls, k):
        return cls(k, np.zeros((k, 2 ** (k - 1))))

    @classmethod
    def from_int(cls, k, value):
        """Bit t of ``value`` is the t-th entry of the j-major flattening."""
        n = k * 2 ** (k - 1)
        return cls(k, [(value >> t) & 1 for t in range(n)])

    def to_int(self):
        return sum(int(b) << t for t, b in enumerate(self.bits.ravel()))

    def factors(self):
        """Active (j, omega) pairs, j 1-based, omega as an int."""
        return [(j + 1, w) for j, w in zip(*np.nonzero(self.bits))]

    def __len__(self):
        return self.bits.size

    def __eq__(self, other):
        return isinstance(other, ExponentPattern) and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash(self.to_int())

    def to_list(self):
        return [int(b) for b in self.bits.ravel()]


@dataclass(frozen=True)
class LfcReport:
    pattern: ExponentPattern
    estimate: float
    standard_error: float
    sample_count: int
    mode: str
    seed: object = None

    @property
    def deviation(self):
        return abs(self.estimate - 1.0)

    def to_dict(self):
        return {
            "pattern": self.pattern.to_list(),
            "estimate": self.estimate,
            "deviation": self.deviation,
            "standard_error": self.standard_error,
            "sample_count": self.sample_count,
            "mode": self.mode,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class LfcSweep:
    reports: list
    worst_deviation: float
    worst_index: int
    max_standard_error: float

    def to_dict(self, include_reports=True):
        d = {
            "worst_deviation": self.worst_deviation,
            "worst_pattern": self.reports[self.worst_index].pattern.to_list(),
            "worst_index": self.worst_index,
            "max_standard_error": self.max_standard_error,
            "pattern_count": len(self.reports),
        }
        if include_reports:
            d["reports"] = [r.to_dict() for r in self.reports]
        return d


def _values(nu):
    return np.asarray(getattr(nu, "values", nu), dtype=np.float64)


def _check_pattern(pattern, k):
    if pattern.k != k:
        raise PreconditionError(f"pattern is for k={pattern.k}, weight group has k={k}")


def lfc_term(nu, pattern, x0, x1):
    """The integrand of the linear forms condition at one point (x0, x1)."""
    g = nu.group
    _check_pattern(pattern, g.k)
    if len(x0) != g.k or len(x1) != g.k:
        raise ArityMismatch(f"points must have length k={g.k}")
    v = nu.values
    xs = (tuple(int(t) for t in x0), tuple(int(t) for t in x1))
    forms = all_forms(g)
    out = 1.0
    for j, w in pattern.factors():
        form = forms[j - 1]
        total = 0
        for p, (i, c) in enumerate(zip(form.indices, form.coefficients)):
            total += c * xs[(w >> p) & 1][i - 1]
        out *= v[total % g.N]
    return float(out)


# -- exact ----------------------------------------------------------------

def _shift_tables(nu, pattern):
    """For each j, T_j[D_(-j)..., a] = prod over active omega of nu(a + psi_j(omega * D))."""
    g = nu.group
    N, r = g.N, g.k - 1
    v = _values(nu)
    grid = np.arange(N, dtype=np.int64)
    tables = []
    for form in all_forms(g):
        a = grid.reshape((1,) * r + (N,))
        table = np.ones((N,) * (r + 1))
        for w in np.flatnonzero(pattern.bits[form.j - 1]):
            arg = a
            for p, c in enumerate(form.coefficients):
                if (w >> p) & 1:
                    shape = [1] * (r + 1)
                    shape[p] = N
                    arg = arg + (c * grid).reshape(shape)
            table = table * v[arg % N]
        tables.append(table)
    return tables


def _exact_direct(nu, pattern):
    g = nu.group
    N, k = g.N, g.k
    tables = _shift_tables(nu, pattern)
    A = np.arange(N, dtype=np.int64)
    total = 0.0
    for B in range(N):
        prod = np.ones((N,) * k + (N,))
        for j, table in enumerate(tables, start=1):
            sliced = table[..., (A - j * B) % N]
            prod = prod * np.expand_dims(sliced, axis=j - 1)
        total += prod.sum()
    return total / N ** (k + 2)


def _exact_fourier_k3(nu, pattern):
    g = nu.group
    N = g.N
    t1, t2, t3 = (np.fft.fft(t, axis=-1) for t in _shift_tables(nu, pattern))
    # t1[D2, D3, t], t2[D1, D3, t], t3[D1, D2, t]; the AP sum pairs t2 at -2t
    t2 = t2[..., (-2 * np.arange(N)) % N]
    x = np.transpose(t1, (2, 1, 0))            # (t, D3, D2)
    y = np.transpose(t2, (2, 0, 1))            # (t, D1, D3)
    z = np.transpose(t3, (2, 0, 1))            # (t, D1, D2)
    total = np.sum(np.matmul(y, x) * z)
    return float(total.real) / N ** 6


def exact_cost(g, method="auto"):
    """Work estimate (grid points visited) for :func:`lfc_exact`."""
    direct = g.N ** (g.k + 2)
    if method == "direct":
        return direct
    if g.k == 3 and method in ("auto", "fourier"):
        fourier = g.N ** (g.k + 1)
        return fourier if method == "fourier" else min(direct, fourier)
    return direct


def lfc_exact(nu, pattern, budget=DEFAULT_BUDGET, method="auto"):
    g = nu.group
    _check_pattern(pattern, g.k)
    if method not in ("auto", "direct", "fourier"):
        raise PreconditionError(f"unknown method {method!r}")
    if method == "fourier" and g.k != 3:
        raise PreconditionError("the Fourier route exists only for k = 3")
    if method == "auto":
        # the direct route sums exactly when values are small integers, so prefer it
        method = "direct" if g.N ** (g.k + 2) <= budget or g.k != 3 else "fourier"
    cost = exact_cost(g, method)
    if cost > budget:
        raise BudgetExceeded(cost, budget)
    if method == "direct":
        value = _exact_direct(nu, pattern)
    else:
        value = _exact_fourier_k3(nu, pattern)
    return LfcReport(pattern, float(value), 0.0, g.N ** (2 * g.k), "exact", None)


# -- Monte Carlo --------------------------------------------------------

def _factor_plan(nu, pattern):
    """Per active factor: (coefficient vector, omega bits per position, indices)."""
    plan = []
    forms = all_forms(nu.group)
    for j, w in pattern.factors():
        form = forms[j - 1]
        idx = np.array([i - 1 for i in form.indices])
        coeffs = np.array(form.coefficients, dtype=np.int64)
        bits = np.array([(w >> p) & 1 for p in range(form.arity)], dtype=bool)
        plan.append((idx, coeffs, bits))
    return plan


def _terms(v, N, plan, x0, x1):
    out = np.ones(x0.shape[0])
    for idx, coeffs, bits in plan:
        pts = np.where(bits, x1[:, idx], x0[:, idx])
        out *= v[(pts @ coeffs) % N]
    return out


def _chunk_stats(v, N, k, plan, seed, chunk, size):
    gen = rng.stream(seed, rng.MONTE_CARLO, chunk)
    x0 = gen.integers(0, N, size=(size, k), dtype=np.int64)
    x1 = gen.integers(0, N, size=(size, k), dtype=np.int64)
    t = _terms(v, N, plan, x0, x1)
    m = float(t.mean())
    return size, m, float(np.sum((t - m) ** 2))


def lfc_monte_carlo(nu, pattern, samples, seed, workers=1, chunk_size=CHUNK_SIZE):
    """Sample mean of the integrand at uniform (x0, x1).

    Samples are drawn in fixed-size chunks, each from its own stream keyed by
    the chunk index, and merged in chunk order, so the result does not depend
    on ``workers``.
    """
    g = nu.group
    _check_pattern(pattern, g.k)
    samples = int(samples)
    if samples < 1:
        raise PreconditionError("need at least one sample")
    v = _values(nu)
    plan = _factor_plan(nu, pattern)
    sizes = [min(chunk_size, samples - s) for s in range(0, samples, chunk_size)]
    jobs = [(v, g.N, g.k, plan, seed, c, size) for c, size in enumerate(sizes)]
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            stats = list(pool.map(lambda a: _chunk_stats(*a), jobs))
    else:
        stats = [_chunk_stats(*a) for a in jobs]

    # Chan et al. pairwise merge, applied left to right in chunk order
    n, m, m2 = stats[0]
    for nb, mb, m2b in stats[1:]:
        tot = n + nb
        delta = mb - m
        m = m + delta * nb / tot
        m2 = m2 + m2b + delta * delta * n * nb / tot
        n = tot
    se = float(np.sqrt(m2 / (n - 1) / n)) if n > 1 else 0.0
    return LfcReport(pattern, float(m), se, n, "monte_carlo", seed)


# -- sweep --------------------------------------------------------------

def sweep_patterns(k, pattern_budget, seed):
    """The all-ones pattern followed by distinct random patterns.

    When all 2^(k 2^(k-1)) patterns fit in the budget every one is returned.
    """
    nbits = k * 2 ** (k - 1)
    ones = (1 << nbits) - 1
    pattern_budget = max(1, int(pattern_budget))
    if nbits < 63 and (1 << nbits) <= pattern_budget:
        values = [ones] + [v for v in range(ones)]
    else:
        gen = rng.stream(seed, rng.PATTERNS)
        seen = {ones}
        values = [ones]
        while len(values) < pattern_budget:
            draw = gen.integers(0, 2, size=nbits)
            v = sum(int(b) << t for t, b in enumerate(draw))
            if v not in seen:
                seen.add(v)
                values.append(v)
    return [ExponentPattern.from_int(k, v) for v in values]


def lfc_sweep(nu, pattern_budget, samples, seed, exact=False, workers=1, budget=DEFAULT_BUDGET):
    patterns = sweep_patterns(nu.group.k, pattern_budget, seed)
    if exact:
        reports = [lfc_exact(nu, p, budget=budget) for p in patterns]
    else:
        reports = [lfc_monte_carlo(nu, p, samples, seed, workers=workers) for p in patterns]
    devs = [r.deviation for r in reports]
    worst = int(np.argmax(devs))
    return LfcSweep(reports, float(devs[worst]), worst, max(r.standard_error for r in reports))


def iter_points(N, k):
    """All (x0, x1) in Z_N^k x Z_N^k, for tiny brute-force checks."""
    for x in itertools.product(range(N), repeat=2 * k):
        yield x[:k], x[k:]
