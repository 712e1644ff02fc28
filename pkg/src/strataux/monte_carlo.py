"""SRSWOR Monte Carlo harness for validating the first-order theory.

Populations are generated stratum by stratum from a trivariate normal with
target moments, then frozen: all downstream theory uses the realized
finite-population summaries, so the theory-vs-simulation comparison is not
polluted by generator-target error.

RNG contract: every random draw comes from a counter-based Philox4x64
generator keyed by the pair (master_seed, stream_id). Stream ids 0..R-1
belong to the replications, one per replication index; population
generation for stratum h uses stream id 2^63 + h, a disjoint namespace.
Replications are therefore independent, order-free, and reproducible:
serial and parallel runs produce bit-identical reports.
"""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .data_model import (
    InputError,
    Microdata,
    NumericalError,
    PopulationSummary,
    SampleDesign,
    StratifiedSample,
    ValidationError,
    summarize,
)
from .estimators import ESTIMATOR_ORDER, _estimate_from_means
from .moments import moment_set
from .mse_theory import mse_classic, mse_tp, optimal_m, variance_mean

_MASK64 = (1 << 64) - 1
_POP_STREAM_BASE = 1 << 63
GENERATOR_NAME = "philox4x64"

# a run fails when any estimator's non-finite replication share exceeds this
NONFINITE_LIMIT = 0.001


def _rng(master_seed: int, stream: int) -> np.random.Generator:
    key = np.array([master_seed & _MASK64, stream & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class GeneratorStratum:
    """Targets for one synthetic stratum."""

    N: int
    mean_y: float
    mean_x: float
    mean_z: float
    sd_y: float
    sd_x: float
    sd_z: float
    rho_yx: float
    rho_yz: float
    rho_xz: float

    def __post_init__(self) -> None:
        if self.N < 2:
            raise InputError(f"generator stratum needs N >= 2, got {self.N}")
        for name in ("mean_y", "mean_x", "mean_z"):
            if getattr(self, name) <= 0.0:
                raise InputError(f"generator target {name} must be positive")
        for name in ("sd_y", "sd_x", "sd_z"):
            if getattr(self, name) < 0.0:
                raise InputError(f"generator target {name} must be >= 0")
        for name in ("rho_yx", "rho_yz", "rho_xz"):
            if not -1.0 <= getattr(self, name) <= 1.0:
                raise InputError(f"generator target {name} outside [-1, 1]")


@dataclass(frozen=True)
class PopulationConfig:
    strata: tuple[GeneratorStratum, ...]
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.strata:
            raise InputError("generator config needs at least one stratum")


def generate_population(cfg: PopulationConfig) -> tuple[Microdata, PopulationSummary]:
    """Draw and freeze a finite population matching the config targets.

    Values come from a trivariate normal built by Cholesky factorization of
    each stratum's target correlation matrix. The returned summary is
    computed from the realized values, not the targets.
    """
    labels = []
    groups = []
    for h, s in enumerate(cfg.strata, start=1):
        corr = np.array(
            [
                [1.0, s.rho_yx, s.rho_yz],
                [s.rho_yx, 1.0, s.rho_xz],
                [s.rho_yz, s.rho_xz, 1.0],
            ]
        )
        try:
            chol = np.linalg.cholesky(corr)
        except np.linalg.LinAlgError:
            raise InputError(
                f"stratum {h}: correlation matrix is not positive definite"
            ) from None
        rng = _rng(cfg.seed, _POP_STREAM_BASE + h)
        raw = rng.standard_normal((s.N, 3))
        vals = raw @ chol.T
        vals *= np.array([s.sd_y, s.sd_x, s.sd_z])
        vals += np.array([s.mean_y, s.mean_x, s.mean_z])
        for k, name in enumerate(("y", "x", "z")):
            mean_k = float(vals[:, k].mean())
            sd_k = float(vals[:, k].std())
            if mean_k <= 0.0 or mean_k <= 1e-9 * sd_k:
                raise NumericalError(
                    f"stratum {h}: realized {name} mean {mean_k:.6g} is within "
                    "the zero guard band; raise the target mean or lower the SD"
                )
        labels.append(str(h))
        groups.append(tuple(tuple(row) for row in vals.tolist()))
    micro = Microdata(labels=tuple(labels), groups=tuple(groups))
    return micro, summarize(micro)


def _check_micro_design(micro: Microdata, design: SampleDesign) -> None:
    if len(design.n) != len(micro.groups):
        raise InputError(
            f"design has {len(design.n)} strata, population has {len(micro.groups)}"
        )
    for label, group, n_h in zip(micro.labels, micro.groups, design.n):
        if n_h > len(group):
            raise InputError(
                f"stratum {label!r}: sample size {n_h} exceeds population {len(group)}"
            )


def draw_sample(
    micro: Microdata, design: SampleDesign, master_seed: int, stream: int = 0
) -> StratifiedSample:
    """One stratified SRSWOR draw under the documented stream contract."""
    _check_micro_design(micro, design)
    rng = _rng(master_seed, stream)
    picks = []
    for group, n_h in zip(micro.groups, design.n):
        idx = rng.permutation(len(group))[:n_h]
        picks.append(tuple(group[i] for i in idx))
    return StratifiedSample(design=design, observations=tuple(picks))


def population_fingerprint(micro: Microdata) -> str:
    """SHA-256 over the population's raw values, column-major per stratum."""
    digest = hashlib.sha256()
    for label, group in zip(micro.labels, micro.groups):
        digest.update(label.encode())
        arr = np.asarray(group, dtype=np.float64)
        digest.update(arr.tobytes())
    return digest.hexdigest()


@dataclass(frozen=True)
class SimRow:
    estimator: str
    m1: Optional[float]
    m2: Optional[float]
    emp_mean: float
    emp_bias: float
    emp_mse: float
    theory_mse: float
    rel_gap: float
    nonfinite: int


@dataclass(frozen=True)
class SimulationReport:
    rows: tuple[SimRow, ...]
    R: int
    seed: int
    generator: str
    design: tuple[int, ...]
    ybar: float
    fingerprint: str
    notes: tuple[str, ...] = ()

    def row(self, estimator: str) -> SimRow:
        for r in self.rows:
            if r.estimator == estimator:
                return r
        raise KeyError(estimator)


def run_simulation(
    micro: Microdata,
    design: SampleDesign,
    R: int,
    master_seed: int,
    estimators: Optional[Sequence[str]] = None,
    m1: float = 1.0,
    m2: float = 1.0,
    workers: int = 1,
) -> SimulationReport:
    """Estimate empirical MSE/bias over R replications and compare to theory.

    When exp_regression is requested it is evaluated twice: at the fixed
    (m1, m2) given here and, as row exp_regression_opt, at the optimum
    tuned from the realized population moments. Non-finite estimates are
    counted per estimator and excluded from the averages; a share above
    NONFINITE_LIMIT fails the run.
    """
    if R < 1:
        raise InputError(f"replication count must be >= 1, got {R}")
    _check_micro_design(micro, design)
    requested = tuple(estimators) if estimators is not None else ESTIMATOR_ORDER
    for e in requested:
        if e not in ESTIMATOR_ORDER:
            raise InputError(f"unknown estimator {e!r}")

    pop = summarize(micro)
    mset = moment_set(pop, design)
    ybar, xbar, zbar = mset.ybar, mset.xbar, mset.zbar

    row_plan: list[tuple[str, str, Optional[float], Optional[float], float]] = []
    for e in requested:
        if e == "exp_regression":
            row_plan.append((e, e, m1, m2, mse_tp(mset, m1, m2).mse))
            m1s, m2s = optimal_m(mset)
            row_plan.append(("exp_regression_opt", e, m1s, m2s, mse_tp(mset, m1s, m2s).mse))
        elif e == "mean":
            row_plan.append((e, e, None, None, variance_mean(mset)))
        else:
            row_plan.append((e, e, None, None, mse_classic(e, mset)))

    need_slopes = any(base in ("regression", "exp_regression") for _, base, *_ in row_plan)
    n_rows = len(row_plan)
    ys = [np.asarray([o[0] for o in g]) for g in micro.groups]
    xs = [np.asarray([o[1] for o in g]) for g in micro.groups]
    zs = [np.asarray([o[2] for o in g]) for g in micro.groups]
    N = pop.N
    strata_const = [
        (s.N / N, (s.N / N) ** 2 * (1.0 / n_h - 1.0 / s.N), n_h)
        for s, n_h in zip(pop.strata, design.n)
    ]
    census = all(n_h == s.N for s, n_h in zip(pop.strata, design.n))

    out = np.empty((R, n_rows))

    def _run_range(lo: int, hi: int) -> None:
        for r in range(lo, hi):
            rng = _rng(master_seed, r)
            ybar_st = xbar_st = zbar_st = 0.0
            num1 = den1 = num2 = den2 = 0.0
            for h, (w, g, n_h) in enumerate(strata_const):
                idx = rng.permutation(len(ys[h]))[:n_h]
                sy, sx, sz = ys[h][idx], xs[h][idx], zs[h][idx]
                my, mx, mz = sy.mean(), sx.mean(), sz.mean()
                ybar_st += w * my
                xbar_st += w * mx
                zbar_st += w * mz
                if need_slopes and n_h >= 2:
                    dy, dx, dz = sy - my, sx - mx, sz - mz
                    scale = g / (n_h - 1)
                    num1 += scale * float(dy @ dx)
                    den1 += scale * float(dx @ dx)
                    num2 += scale * float(dy @ dz)
                    den2 += scale * float(dz @ dz)
            if census:
                b1 = b2 = 0.0  # the corrections they multiply are exactly zero
            else:
                b1 = num1 / den1 if den1 != 0.0 else math.nan
                b2 = num2 / den2 if den2 != 0.0 else math.nan
            for j, (_, base, rm1, rm2, _) in enumerate(row_plan):
                try:
                    v = _estimate_from_means(
                        base, ybar_st, xbar_st, zbar_st, xbar, zbar,
                        b1, b2, rm1 if rm1 is not None else 0.0,
                        rm2 if rm2 is not None else 0.0,
                    )
                except NumericalError:
                    v = math.nan
                out[r, j] = v

    if workers <= 1 or R < 2:
        _run_range(0, R)
    else:
        chunk = (R + workers - 1) // workers
        bounds = [(lo, min(lo + chunk, R)) for lo in range(0, R, chunk)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda b: _run_range(*b), bounds))

    rows = []
    failures = []
    for j, (label, _, rm1, rm2, theory) in enumerate(row_plan):
        col = out[:, j]
        finite = np.isfinite(col)
        bad = int(R - int(finite.sum()))
        vals = col[finite].tolist()
        if vals:
            emp_mean = math.fsum(vals) / len(vals)
            emp_mse = math.fsum((v - ybar) ** 2 for v in vals) / len(vals)
        else:
            emp_mean = emp_mse = math.nan
        emp_bias = emp_mean - ybar
        rel_gap = (emp_mse - theory) / theory if theory != 0.0 else math.nan
        rows.append(
            SimRow(
                estimator=label, m1=rm1, m2=rm2,
                emp_mean=emp_mean, emp_bias=emp_bias, emp_mse=emp_mse,
                theory_mse=theory, rel_gap=rel_gap, nonfinite=bad,
            )
        )
        if bad > NONFINITE_LIMIT * R:
            failures.append(f"{label}: {bad}/{R} non-finite")
    if failures:
        raise ValidationError(
            "simulation failed, non-finite estimate share exceeds "
            f"{NONFINITE_LIMIT:.1%}: " + "; ".join(failures)
        )
    return SimulationReport(
        rows=tuple(rows), R=R, seed=master_seed, generator=GENERATOR_NAME,
        design=tuple(design.n), ybar=ybar,
        fingerprint=population_fingerprint(micro),
        notes=tuple(mset.warnings),
    )


_GEN_FIELDS = (
    "N", "mean_y", "mean_x", "mean_z", "sd_y", "sd_x", "sd_z",
    "rho_yx", "rho_yz", "rho_xz",
)


def parse_generator_config(text: str) -> PopulationConfig:
    """Parse a JSON generator config: {"seed": ..., "strata": [{...}]}."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"invalid generator config: {e}") from None
    if not isinstance(doc, dict):
        raise InputError("generator config must be an object")
    unknown = set(doc) - {"seed", "strata"}
    if unknown:
        raise InputError(f"unknown top-level field(s): {sorted(unknown)}")
    if "strata" not in doc or not isinstance(doc["strata"], list):
        raise InputError("generator config needs a 'strata' list")
    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise InputError("seed must be an integer")
    strata = []
    for i, item in enumerate(doc["strata"], start=1):
        if not isinstance(item, dict):
            raise InputError(f"generator stratum {i} must be an object")
        bad = set(item) - set(_GEN_FIELDS)
        if bad:
            raise InputError(f"unknown field(s) {sorted(bad)} in generator stratum {i}")
        missing = set(_GEN_FIELDS) - set(item)
        if missing:
            raise InputError(f"missing field(s) {sorted(missing)} in generator stratum {i}")
        kw = {}
        for name, value in item.items():
            if name == "N":
                if isinstance(value, bool) or not isinstance(value, int):
                    raise InputError(f"generator stratum {i}: N must be an integer")
                kw[name] = value
            else:
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise InputError(f"generator stratum {i}: {name} must be a number")
                kw[name] = float(value)
        strata.append(GeneratorStratum(**kw))
    return PopulationConfig(strata=tuple(strata), seed=seed)
