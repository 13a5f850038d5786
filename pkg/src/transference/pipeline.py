"""End-to-end transference run: majorant -> dense model -> progression counts.

Every stage writes its artifacts to the output directory, and the final
report only contains numbers that can be recomputed from those files.
"""

import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__, rng
from .ap_count import ap_density
from .dense_model import extract_dense_model, verify_model
from .discrepancy import box_norm_bound, discrepancy_search, discrepancy_value, transport_witness
from .errors import NoConvergence, PreconditionError, RangeViolation, StageError, TransferenceError
from .linear_forms import exact_cost, lfc_sweep
from .residue import all_forms, make_group
from .weights import GeneratorSpec, generate, mean, rescale_to_unit_mass, save

log = logging.getLogger(__name__)

# auto mode evaluates the sweep exactly when the whole sweep stays under this many grid points
EXACT_SWEEP_LIMIT = 2 * 10**9


@dataclass
class PipelineConfig:
    N: int = 3001
    k: int = 3
    p: float = 0.3
    delta: float = 0.5
    epsilon: float = 0.05
    samples: int = 100_000
    restarts: int = 4
    max_iters: int = 500
    seed: int = 7
    out_dir: str = "transference-out"
    generator: str = "random_sparse"
    patterns: int = 16
    lfc_mode: str = "auto"
    threads: int = 1

    def validate(self):
        make_group(self.N, self.k)
        GeneratorSpec(self.generator, self.p, self.delta, self.seed)
        if self.generator == "random_sparse" and self.p * self.N < 1:
            raise PreconditionError(f"p*N = {self.p * self.N} < 1")
        if not self.epsilon > 0:
            raise PreconditionError("epsilon must be positive")
        if not 0 < self.delta <= 1:
            raise PreconditionError("delta must be in (0, 1]")
        if self.samples < 1 or self.restarts < 1 or self.max_iters < 0 or self.patterns < 1:
            raise PreconditionError("samples, restarts and patterns must be positive, max_iters >= 0")
        if self.lfc_mode not in ("auto", "exact", "monte_carlo"):
            raise PreconditionError(f"unknown lfc_mode {self.lfc_mode!r}")
        return self

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise PreconditionError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class PipelineReport:
    config: dict
    group: dict
    seeds: dict
    lfc: dict
    nu_pair: dict
    dense_model: dict
    verification: list
    counting: dict
    artifacts: dict
    version: str = __version__
    timings: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def compare_baseline(f_model, k):
    """Lambda_k of a [0,1]-valued model, recorded as the dense-setting baseline."""
    v = np.asarray(getattr(f_model, "values", f_model), dtype=np.float64)
    if np.any(v < 0) or np.any(v > 1):
        raise RangeViolation("dense model values must lie in [0, 1]")
    return ap_density(v, k).value


def _count_method(g):
    return "fourier" if g.k == 3 and g.N % 2 == 1 else "direct"


class _Stages:
    def __init__(self):
        self.timings = {}

    def run(self, name, fn, *args, **kwargs):
        log.info("stage %s", name)
        t0 = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        except StageError:
            raise
        except TransferenceError as exc:
            raise StageError(name, exc) from exc
        finally:
            self.timings[name] = time.perf_counter() - t0


def run_pipeline(cfg):
    cfg.validate()
    g = make_group(cfg.N, cfg.k)
    forms = all_forms(g)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stages = _Stages()
    seeds = {
        "generator": cfg.seed,
        "lfc": rng.derive_seed(cfg.seed, 101),
        "nu_search": rng.derive_seed(cfg.seed, 102),
        "dense_model": rng.derive_seed(cfg.seed, 103),
        "verify": rng.derive_seed(cfg.seed, 104),
    }
    artifacts = {}

    def persist(name, w):
        path = out / f"{name}.json"
        save(w, path)
        artifacts[name] = path.name

    # 1. majorant and planted function
    nu, f_raw = stages.run("generate", generate, GeneratorSpec(cfg.generator, cfg.p, cfg.delta, cfg.seed), g)
    persist("nu", nu)
    persist("f_raw", f_raw)

    # 2. linear forms condition
    exact = cfg.lfc_mode == "exact" or (
        cfg.lfc_mode == "auto" and exact_cost(g) * cfg.patterns <= EXACT_SWEEP_LIMIT)
    sweep = stages.run("lfc", lfc_sweep, nu, cfg.patterns, cfg.samples, seeds["lfc"],
                       exact=exact, workers=cfg.threads)
    (out / "lfc.json").write_text(json.dumps([r.to_dict() for r in sweep.reports]) + "\n")
    artifacts["lfc"] = "lfc.json"

    # 3. (nu, 1) as a discrepancy pair: box-norm bound, searched value, transport
    def nu_pair():
        ones = np.ones(g.N)
        boxes = {str(fm.j): box_norm_bound(nu, fm, seed=seeds["nu_search"]).to_dict() for fm in forms}
        rep = discrepancy_search(nu, ones, forms[0], restarts=cfg.restarts, seed=seeds["nu_search"])
        moved = {}
        for fm in forms:
            u = transport_witness(rep.witness, 1, fm.j, g)
            moved[str(fm.j)] = discrepancy_value(nu, ones, fm, u)
        drift = max(abs(v - rep.value) for v in moved.values())
        return {"box_norm_bound": boxes, "searched": rep.to_dict(include_witness=False),
                "transported_values": moved, "transport_max_drift": drift}, rep.witness

    nu_report, nu_witness = stages.run("nu_pair", nu_pair)

    # 4-5. rescale and extract the dense model
    f = stages.run("rescale", rescale_to_unit_mass, f_raw, cfg.delta) if mean(f_raw) > 0 else f_raw
    persist("f", f)

    def model():
        try:
            return extract_dense_model(f, nu, forms[0], cfg.epsilon, cfg.restarts, cfg.max_iters,
                                       seeds["dense_model"])
        except NoConvergence as exc:
            log.warning("%s", exc)
            return exc.result

    result = stages.run("dense_model", model)
    persist("fmodel", result.f_model)

    # 6. fresh-seed audit against every form
    checks = stages.run("verify", verify_model, f, result.f_model, forms, cfg.epsilon,
                        cfg.restarts, seeds["verify"])

    # 7. progression counts
    def counting():
        method = _count_method(g)
        lam_f = ap_density(f, g.k, method).value
        lam_model = ap_density(result.f_model, g.k, method).value
        return {"method": method, "lambda_f": lam_f, "lambda_model": lam_model,
                "ap_gap": abs(lam_f - lam_model), "baseline": compare_baseline(result.f_model, g.k),
                "mean_f": mean(f), "gap_threshold": 0.1 * mean(f) ** g.k}

    counts = stages.run("count", counting)

    witnesses = {"nu_pair": nu_witness.to_list()}
    if result.last_witness is not None:
        witnesses["dense_model"] = result.last_witness.to_list()
    witnesses["verify"] = {str(r.j): r.witness.to_list() for r in checks}
    (out / "witnesses.json").write_text(json.dumps(witnesses) + "\n")
    artifacts["witnesses"] = "witnesses.json"

    # 8. report
    report = PipelineReport(
        # out_dir is where, not what: leaving it out keeps reports comparable across runs
        config={k: v for k, v in asdict(cfg).items() if k != "out_dir"},
        group=g.to_dict(),
        seeds=seeds,
        lfc=sweep.to_dict(include_reports=False) | {"mode": "exact" if exact else "monte_carlo"},
        nu_pair=nu_report,
        dense_model=result.to_dict(),
        verification=[r.to_dict(include_witness=False) for r in checks],
        counting=counts,
        artifacts=artifacts,
        timings=dict(stages.timings),
    )
    (out / "report.json").write_text(report.to_json())
    return report
