"""Constructive dense models: a [0,1]-valued f~ with E f~ = E f that product tests cannot tell from f.

The extractor is an additive boosting loop.  A potential lam starts at
min(f, 1); the model is clip(lam + s, 0, 1) with the shift s chosen so the
mean matches E f.  Each round searches for a product test phi (a generalized
convolution) with |<f - f~, phi>| > eps and moves lam by (eps/2) sign * phi.
"""

from dataclasses import dataclass, field

import numpy as np

from . import rng
from .discrepancy import convolution_table, discrepancy_search
from .errors import NoConvergence, NotDominated, PreconditionError
from .weights import WeightFn

MEAN_TOL = 1e-12
PROGRESS_WINDOW = 10


@dataclass(frozen=True)
class DenseModelResult:
    f_model: WeightFn = field(repr=False)
    iterations: int
    final_gap: float
    epsilon_target: float
    converged: bool
    distinguisher_log: list = field(default_factory=list, repr=False)
    progress_ok: bool = True
    seed: int = 0
    last_witness: object = field(default=None, repr=False)

    def to_dict(self, include_log=True):
        d = {
            "iterations": self.iterations,
            "final_gap": self.final_gap,
            "epsilon_target": self.epsilon_target,
            "converged": self.converged,
            "progress_ok": self.progress_ok,
            "seed": self.seed,
            "mean": float(np.mean(self.f_model.values)),
        }
        if include_log:
            d["distinguisher_log"] = list(self.distinguisher_log)
        return d


def project_to_mean(lam, target):
    """clip(lam + s, 0, 1) with s chosen so the mean equals ``target``.

    The clipped mean is continuous and nondecreasing in s, so s is bracketed
    and bisected, then polished with Newton steps on the linear piece.
    """
    lam = np.asarray(lam, dtype=np.float64)
    if target <= 0:
        return np.zeros_like(lam)
    if target >= 1:
        return np.ones_like(lam)
    N = lam.size

    def clipped_mean(s):
        return float(np.clip(lam + s, 0.0, 1.0).mean())

    if abs(clipped_mean(0.0) - target) <= MEAN_TOL * 1e-2:
        return np.clip(lam, 0.0, 1.0)
    lo, hi = -float(lam.max()), 1.0 - float(lam.min())
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if clipped_mean(mid) < target:
            lo = mid
        else:
            hi = mid
    s = 0.5 * (lo + hi)
    for _ in range(4):
        shifted = lam + s
        free = np.count_nonzero((shifted > 0) & (shifted < 1))
        err = target - clipped_mean(s)
        if free == 0 or abs(err) <= 1e-16:
            break
        s_new = s + err * N / free
        if abs(target - clipped_mean(s_new)) >= abs(err):
            break
        s = s_new
    return np.clip(lam + s, 0.0, 1.0)


def _progress_ok(gaps):
    # best gap inside the trailing window must not be worse than the best before it
    if len(gaps) <= PROGRESS_WINDOW:
        return True
    return min(gaps[-PROGRESS_WINDOW:]) <= min(gaps[:-PROGRESS_WINDOW])


def extract_dense_model(f, nu, form, epsilon, search_restarts=4, max_iters=500, seed=0):
    fv = np.asarray(f.values, dtype=np.float64)
    nv = np.asarray(nu.values, dtype=np.float64)
    if np.any(fv > nv):
        bad = int(np.flatnonzero(fv > nv)[0])
        raise NotDominated(f"f({bad}) = {fv[bad]} exceeds nu({bad}) = {nv[bad]}")
    if np.any(fv < 0):
        raise PreconditionError("f must be nonnegative")
    if not epsilon > 0:
        raise PreconditionError("epsilon must be positive")
    target = float(fv.mean())
    if target > 1 + MEAN_TOL:
        raise PreconditionError(f"E[f] = {target} > 1; rescale to unit mass first")

    step = epsilon / 2
    lam = np.minimum(fv, 1.0)
    model = project_to_mean(lam, target)
    log, gaps = [], []
    best = None
    for it in range(max_iters + 1):
        rep = discrepancy_search(fv, model, form, restarts=search_restarts,
                                 seed=rng.derive_seed(seed, rng.DENSE_MODEL, it),
                                 epsilon_target=epsilon)
        gaps.append(rep.value)
        if best is None or rep.value < best[0]:
            best = (rep.value, model, it, rep.witness)
        done = rep.value <= epsilon
        entry = {"iteration": it, "value": rep.value, "signed_value": rep.signed_value,
                 "step": 0.0 if done or it == max_iters else step * rep.sign}
        log.append(entry)
        if done:
            return DenseModelResult(WeightFn(f.group, model, "fmodel"), it, rep.value, epsilon,
                                    True, log, _progress_ok(gaps), seed, rep.witness)
        if it == max_iters:
            break
        lam = lam + step * rep.sign * convolution_table(rep.witness, form)
        model = project_to_mean(lam, target)

    gap, model, _, witness = best
    result = DenseModelResult(WeightFn(f.group, model, "fmodel"), max_iters, gap, epsilon,
                              False, log, _progress_ok(gaps), seed, witness)
    raise NoConvergence(max_iters, result)


def verify_model(f, f_model, forms, epsilon, restarts=4, seed=0):
    """Fresh distinguisher search for (f, f~) against each form in ``forms``."""
    return [discrepancy_search(f, f_model, form, restarts=restarts,
                               seed=rng.derive_seed(seed, rng.VERIFY, form.j),
                               epsilon_target=epsilon)
            for form in forms]
