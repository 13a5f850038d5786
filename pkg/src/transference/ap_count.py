"""Weighted k-term progression densities E[f(x) f(x+d) ... f(x+(k-1)d)] over x, d in Z_N.

Degenerate progressions (d = 0) are part of the average.
"""

from dataclasses import asdict, dataclass

import numpy as np

from .errors import PreconditionError, WrongK


@dataclass(frozen=True)
class ApDensity:
    value: float
    k: int
    N: int
    method: str

    def to_dict(self):
        return asdict(self)


def _values(f):
    return np.asarray(getattr(f, "values", f), dtype=np.float64)


def ap_density_direct(f, k):
    v = _values(f)
    N = v.size
    if k < 1:
        raise PreconditionError("k must be positive")
    x = np.arange(N, dtype=np.int64)
    block = max(1, (1 << 18) // max(N, 1))
    total = 0.0
    # fixed block order keeps the float sum reproducible
    for start in range(0, N, block):
        d = np.arange(start, min(N, start + block), dtype=np.int64)[:, None]
        prod = np.broadcast_to(v, (d.shape[0], N)).copy()
        for i in range(1, k):
            prod *= v[(x + i * d) % N]
        total += prod.sum()
    return ApDensity(float(total / (N * N)), int(k), N, "direct")


def ap3_density_fourier(f, k=3):
    """Lambda_3 as sum_t fhat(t)^2 fhat(-2t), fhat(t) = E_x f(x) e(-xt/N).

    The identity needs 2 to be invertible mod N, i.e. N odd.
    """
    if k != 3:
        raise WrongK(f"the Fourier kernel handles k = 3 only, got k = {k}")
    v = _values(f)
    N = v.size
    if N % 2 == 0:
        raise PreconditionError(f"N={N} is even; 2 is not a unit")
    fhat = np.fft.fft(v) / N
    t = np.arange(N)
    value = np.sum(fhat * fhat * fhat[(-2 * t) % N]).real
    return ApDensity(float(value), 3, N, "fourier")


def ap_density(f, k, method="direct"):
    if method == "fourier":
        return ap3_density_fourier(f, k)
    if method != "direct":
        raise PreconditionError(f"unknown method {method!r}")
    return ap_density_direct(f, k)


def ap_gap(f, f_model, k, method="direct"):
    return abs(ap_density(f, k, method).value - ap_density(f_model, k, method).value)
