"""Data types and ingestion for stratified populations with two auxiliaries.

A finite population split into L strata carries a study variable y and two
auxiliary variables x and z. It can be described either by per-stratum
summary statistics (sizes, means, SDs, covariances, correlations) or by
microdata records (stratum, y, x, z) from which those summaries are
computed. Summary inputs are redundant (covariance and correlation for
each pair), so an explicit reconciliation step decides which side wins
when they disagree.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, fields
from typing import Optional

# A covariance/correlation pair is considered consistent when the relative
# discrepancy |s_ab - rho_ab*s_a*s_b| / (s_a*s_b) stays within this bound.
RECONCILE_TOL = 0.01

_PAIRS = ("yx", "yz", "xz")


class InputError(ValueError):
    """Malformed or inconsistent input data (CLI exit code 2)."""


class NumericalError(ArithmeticError):
    """Ill-conditioned or degenerate numerical problem (CLI exit code 3)."""


class ValidationError(ValueError):
    """A validation or acceptance check failed (CLI exit code 4)."""


@dataclass(frozen=True)
class StratumSummary:
    """Known population quantities for one stratum.

    SDs and covariances use the N_h - 1 divisor. beta2_* are kurtosis
    values carried as inert metadata: no implemented formula consumes them.
    """

    h: int
    N: int
    ybar: float
    xbar: float
    zbar: float
    s_y: float
    s_x: float
    s_z: float
    s_yx: float
    s_yz: float
    s_xz: float
    rho_yx: float
    rho_yz: float
    rho_xz: float
    beta2_y: Optional[float] = None
    beta2_x: Optional[float] = None
    beta2_z: Optional[float] = None
    label: Optional[str] = None

    def __post_init__(self) -> None:
        if self.h < 1:
            raise InputError(f"stratum index must be >= 1, got {self.h}")
        if self.N < 2:
            raise InputError(f"stratum {self.h}: population size must be >= 2, got {self.N}")
        for name in ("s_y", "s_x", "s_z"):
            if getattr(self, name) < 0:
                raise InputError(f"stratum {self.h}: {name} must be >= 0")
        for name in ("rho_yx", "rho_yz", "rho_xz"):
            r = getattr(self, name)
            if not -1.0 <= r <= 1.0:
                raise InputError(f"stratum {self.h}: {name}={r} outside [-1, 1]")

    def sd_pair(self, pair: str) -> tuple[float, float]:
        a, b = pair
        return getattr(self, f"s_{a}"), getattr(self, f"s_{b}")

    def pair_discrepancy(self, pair: str) -> float:
        """Relative gap between the printed covariance and rho*s_a*s_b."""
        s_a, s_b = self.sd_pair(pair)
        cov = getattr(self, f"s_{pair}")
        rho = getattr(self, f"rho_{pair}")
        scale = s_a * s_b
        if scale == 0.0:
            return 0.0 if cov == 0.0 else math.inf
        return abs(cov - rho * scale) / scale


@dataclass(frozen=True)
class PopulationSummary:
    """A stratified population described by per-stratum summaries."""

    strata: tuple[StratumSummary, ...]

    def __post_init__(self) -> None:
        if not self.strata:
            raise InputError("population must have at least one stratum")
        indices = [s.h for s in self.strata]
        if indices != list(range(1, len(indices) + 1)):
            raise InputError(f"stratum indices must be contiguous 1..L, got {indices}")

    @property
    def L(self) -> int:
        return len(self.strata)

    @property
    def N(self) -> int:
        return sum(s.N for s in self.strata)

    @property
    def weights(self) -> tuple[float, ...]:
        N = self.N
        return tuple(s.N / N for s in self.strata)

    def _weighted_mean(self, field: str) -> float:
        w = self.weights
        return math.fsum(w[i] * getattr(s, field) for i, s in enumerate(self.strata))

    @property
    def ybar(self) -> float:
        return self._weighted_mean("ybar")

    @property
    def xbar(self) -> float:
        return self._weighted_mean("xbar")

    @property
    def zbar(self) -> float:
        return self._weighted_mean("zbar")


@dataclass(frozen=True)
class SampleDesign:
    """Per-stratum SRSWOR sample sizes n_h."""

    n: tuple[int, ...]

    def __post_init__(self) -> None:
        for i, n_h in enumerate(self.n, start=1):
            if not isinstance(n_h, int) or n_h < 1:
                raise InputError(f"stratum {i}: sample size must be an integer >= 1, got {n_h}")

    @property
    def total(self) -> int:
        return sum(self.n)

    def check_against(self, pop: PopulationSummary) -> None:
        if len(self.n) != pop.L:
            raise InputError(
                f"design has {len(self.n)} strata but population has {pop.L}"
            )
        for n_h, s in zip(self.n, pop.strata):
            if n_h > s.N:
                raise InputError(
                    f"stratum {s.h}: sample size {n_h} exceeds population size {s.N}"
                )


@dataclass(frozen=True)
class Microdata:
    """Raw records grouped by stratum, in first-appearance label order."""

    labels: tuple[str, ...]
    groups: tuple[tuple[tuple[float, float, float], ...], ...]

    def __post_init__(self) -> None:
        if len(self.labels) != len(self.groups):
            raise InputError("labels and groups length mismatch")

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(g) for g in self.groups)

    @property
    def n_records(self) -> int:
        return sum(self.sizes)


@dataclass(frozen=True)
class StratifiedSample:
    """Observations drawn by SRSWOR within each stratum."""

    design: SampleDesign
    observations: tuple[tuple[tuple[float, float, float], ...], ...]

    def __post_init__(self) -> None:
        if len(self.observations) != len(self.design.n):
            raise InputError("sample strata do not match the design")
        for i, (obs, n_h) in enumerate(zip(self.observations, self.design.n), start=1):
            if len(obs) != n_h:
                raise InputError(
                    f"stratum {i}: sample has {len(obs)} observations, design says {n_h}"
                )


def parse_microdata(text: str) -> Microdata:
    """Parse a delimited table with header ``stratum,y,x,z`` into Microdata."""
    rows = list(csv.reader(io.StringIO(text)))
    line = 0
    header = None
    while line < len(rows):
        if rows[line]:
            header = [c.strip() for c in rows[line]]
            break
        line += 1
    if header is None:
        raise InputError("empty input: expected header stratum,y,x,z")
    if header != ["stratum", "y", "x", "z"]:
        raise InputError(f"bad header {','.join(header)!r}: expected stratum,y,x,z")

    labels: list[str] = []
    groups: dict[str, list[tuple[float, float, float]]] = {}
    for ln in range(line + 1, len(rows)):
        cells = rows[ln]
        if not cells:
            continue
        lineno = ln + 1
        if len(cells) != 4:
            raise InputError(f"line {lineno}: expected 4 fields, got {len(cells)}")
        label = cells[0].strip()
        if not label:
            raise InputError(f"line {lineno}: empty stratum label")
        values = []
        for name, cell in zip(("y", "x", "z"), cells[1:]):
            try:
                v = float(cell)
            except ValueError:
                raise InputError(
                    f"line {lineno}: non-numeric value {cell.strip()!r} in column {name}"
                ) from None
            if not math.isfinite(v):
                raise InputError(f"line {lineno}: non-finite value in column {name}")
            values.append(v)
        if label not in groups:
            labels.append(label)
            groups[label] = []
        groups[label].append((values[0], values[1], values[2]))

    if not labels:
        raise InputError("no records")
    for label in labels:
        if len(groups[label]) < 2:
            raise InputError(
                f"stratum {label!r} has {len(groups[label])} record(s); need at least 2"
            )
    return Microdata(
        labels=tuple(labels),
        groups=tuple(tuple(groups[label]) for label in labels),
    )


def summarize(micro: Microdata) -> PopulationSummary:
    """Compute exact per-stratum summaries from microdata.

    Covariance and correlation pairs are consistent by construction, so the
    result needs no reconciliation. Compensated summation is used so that
    recomputing summaries from the same finite data is exact.
    """
    strata = []
    for idx, (label, obs) in enumerate(zip(micro.labels, micro.groups), start=1):
        N = len(obs)
        cols = tuple(list(col) for col in zip(*obs))
        means = [math.fsum(c) / N for c in cols]
        devs = [[v - m for v in c] for c, m in zip(cols, means)]
        var = [math.fsum(d * d for d in dv) / (N - 1) for dv in devs]
        sd = [math.sqrt(v) for v in var]
        for name, s in zip(("y", "x", "z"), sd):
            if s == 0.0:
                raise InputError(
                    f"stratum {label!r}: zero variance in {name}; correlations undefined"
                )
        cov = {}
        rho = {}
        for pair, (i, j) in (("yx", (0, 1)), ("yz", (0, 2)), ("xz", (1, 2))):
            c = math.fsum(a * b for a, b in zip(devs[i], devs[j])) / (N - 1)
            cov[pair] = c
            # clamp pure roundoff excursions beyond +-1
            rho[pair] = max(-1.0, min(1.0, c / (sd[i] * sd[j])))
        strata.append(
            StratumSummary(
                h=idx, N=N,
                ybar=means[0], xbar=means[1], zbar=means[2],
                s_y=sd[0], s_x=sd[1], s_z=sd[2],
                s_yx=cov["yx"], s_yz=cov["yz"], s_xz=cov["xz"],
                rho_yx=rho["yx"], rho_yz=rho["yz"], rho_xz=rho["xz"],
                label=label,
            )
        )
    return PopulationSummary(strata=tuple(strata))


@dataclass(frozen=True)
class ReconciliationEntry:
    """Outcome of checking one covariance/correlation pair in one stratum."""

    h: int
    pair: str
    cov_before: float
    cov_after: float
    rho_before: float
    rho_after: float
    discrepancy: float
    repaired: bool
    note: str = ""


@dataclass(frozen=True)
class ReconciliationReport:
    policy: str
    tolerance: float
    entries: tuple[ReconciliationEntry, ...]

    @property
    def repaired(self) -> tuple[ReconciliationEntry, ...]:
        return tuple(e for e in self.entries if e.repaired)

    @property
    def flagged(self) -> tuple[ReconciliationEntry, ...]:
        return tuple(e for e in self.entries if e.note)


def reconcile_covariances(
    summary: PopulationSummary, policy: str = "prefer-correlation"
) -> tuple[PopulationSummary, ReconciliationReport]:
    """Resolve covariance vs correlation disagreements per stratum pair.

    prefer-correlation rewrites every covariance as rho*s_a*s_b, so the
    output is exactly self-consistent; entries whose printed covariance
    moved by more than RECONCILE_TOL (relative to s_a*s_b) are marked
    repaired. prefer-covariance goes the other way, deriving correlations
    from the covariances; a pair whose implied correlation falls outside
    [-1, 1] keeps its original correlation and is flagged inconsistent.
    strict refuses input with any pair beyond the tolerance.

    The operation is idempotent under both repairing policies.
    """
    if policy not in ("prefer-correlation", "prefer-covariance", "strict"):
        raise InputError(f"unknown reconciliation policy {policy!r}")

    entries: list[ReconciliationEntry] = []
    new_strata: list[StratumSummary] = []
    violations: list[str] = []
    for s in summary.strata:
        updates: dict[str, float] = {}
        for pair in _PAIRS:
            s_a, s_b = s.sd_pair(pair)
            scale = s_a * s_b
            cov = getattr(s, f"s_{pair}")
            rho = getattr(s, f"rho_{pair}")
            disc = s.pair_discrepancy(pair)
            cov_after, rho_after, note = cov, rho, ""
            repaired = False
            if policy == "prefer-correlation":
                cov_after = rho * scale
                repaired = disc > RECONCILE_TOL
                updates[f"s_{pair}"] = cov_after
            elif policy == "prefer-covariance":
                if scale == 0.0:
                    note = "zero SD; correlation not derivable, kept as given"
                else:
                    implied = cov / scale
                    if -1.0 <= implied <= 1.0:
                        rho_after = implied
                        repaired = disc > RECONCILE_TOL
                        updates[f"rho_{pair}"] = rho_after
                    else:
                        note = (
                            f"implied correlation {implied:.6g} outside [-1, 1]; "
                            "pair left inconsistent"
                        )
            else:  # strict
                if disc > RECONCILE_TOL:
                    violations.append(f"stratum {s.h} pair {pair} (discrepancy {disc:.3g})")
            entries.append(
                ReconciliationEntry(
                    h=s.h, pair=pair,
                    cov_before=cov, cov_after=cov_after,
                    rho_before=rho, rho_after=rho_after,
                    discrepancy=disc, repaired=repaired, note=note,
                )
            )
        if updates:
            kw = {f.name: getattr(s, f.name) for f in fields(StratumSummary)}
            kw.update(updates)
            new_strata.append(StratumSummary(**kw))
        else:
            new_strata.append(s)

    if violations:
        raise ValidationError(
            "covariance/correlation mismatch beyond "
            f"{RECONCILE_TOL:.0%}: " + "; ".join(violations)
        )
    report = ReconciliationReport(
        policy=policy, tolerance=RECONCILE_TOL, entries=tuple(entries)
    )
    return PopulationSummary(strata=tuple(new_strata)), report


# Six-stratum school-survey population (y: teachers, x: students, z: classes),
# the Koyuncu-Kadilar dataset from the survey-sampling literature. Values are
# stored verbatim from the published tabulation, which is known to carry
# transcription damage: s_yx in stratum 4 and s_xz in stratum 3 are off by
# orders of magnitude against the printed correlations (reconcile_covariances
# surfaces these), and zbar_4 duplicates zbar_1. The tabulation omits x-z
# correlations: strata 1, 2, 4 and 6 carry values backed out of the printed
# x-z covariances (3 decimals); strata 3 and 5, where the printed covariance
# is unusable, carry the values published elsewhere for the same survey.
_KK2009_ROWS = (
    # N, n, ybar, s_y, xbar, s_x, s_yx, rho_yx, zbar, s_z, s_yz, s_xz, rho_yz, rho_xz,
    # beta2_y, beta2_x, beta2_z
    (127, 31, 703.74, 883.835, 20804.59, 30486.751, 25237153.52, 0.936,
     498.28, 555.5816, 480688.2, 15914648.0, 0.978, 0.940, 2.158, 4.593, 2.314),
    (117, 21, 413.00, 644.000, 9211.79, 15180.760, 9747942.85, 0.996,
     318.33, 365.4576, 230092.8, 5379190.0, 0.976, 0.970, 16.392, 18.543, 11.190),
    (103, 29, 573.17, 1033.467, 14309.30, 27549.697, 28294397.04, 0.994,
     431.36, 612.9509, 623019.3, 16490067456.0, 0.983, 0.994, 14.979, 15.446, 10.786),
    (170, 38, 424.66, 810.585, 9478.85, 18218.931, 1452885.53, 0.983,
     498.28, 458.0282, 36493.4, 8041254.0, 0.982, 0.964, 12.167, 10.162, 8.624),
    (205, 22, 267.03, 403.654, 5569.95, 8997.776, 3393591.75, 0.989,
     227.20, 260.8511, 101539.0, 214457.0, 0.964, 0.914, 21.008, 21.947, 9.720),
    (201, 39, 393.84, 711.723, 12997.59, 23094.141, 15864573.97, 0.965,
     313.71, 397.0481, 277696.1, 8857729.0, 0.982, 0.966, 20.254, 23.114, 14.406),
)


def embedded_kk2009() -> tuple[PopulationSummary, SampleDesign]:
    """Return the embedded six-stratum dataset and its published design."""
    strata = tuple(
        StratumSummary(
            h=i, N=r[0],
            ybar=r[2], xbar=r[4], zbar=r[8],
            s_y=r[3], s_x=r[5], s_z=r[9],
            s_yx=r[6], s_yz=r[10], s_xz=r[11],
            rho_yx=r[7], rho_yz=r[12], rho_xz=r[13],
            beta2_y=r[14], beta2_x=r[15], beta2_z=r[16],
        )
        for i, r in enumerate(_KK2009_ROWS, start=1)
    )
    design = SampleDesign(n=tuple(r[1] for r in _KK2009_ROWS))
    return PopulationSummary(strata=strata), design


_REQUIRED_FIELDS = tuple(
    f.name for f in fields(StratumSummary) if f.name not in
    ("beta2_y", "beta2_x", "beta2_z", "label")
)
_OPTIONAL_FIELDS = ("beta2_y", "beta2_x", "beta2_z", "label")


def parse_summary(text: str) -> PopulationSummary:
    """Parse a JSON summary document with a top-level ``strata`` list."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"invalid summary document: {e}") from None
    if not isinstance(doc, dict):
        raise InputError("summary document must be an object")
    unknown = set(doc) - {"strata"}
    if unknown:
        raise InputError(f"unknown top-level field(s): {sorted(unknown)}")
    if "strata" not in doc or not isinstance(doc["strata"], list):
        raise InputError("summary document needs a 'strata' list")

    strata = []
    for i, item in enumerate(doc["strata"], start=1):
        if not isinstance(item, dict):
            raise InputError(f"stratum entry {i} must be an object")
        bad = set(item) - set(_REQUIRED_FIELDS) - set(_OPTIONAL_FIELDS)
        if bad:
            raise InputError(f"unknown field(s) {sorted(bad)} in stratum entry {i}")
        missing = set(_REQUIRED_FIELDS) - set(item)
        if missing:
            raise InputError(f"missing field(s) {sorted(missing)} in stratum entry {i}")
        kw = {}
        for name, value in item.items():
            if name == "label":
                if value is not None and not isinstance(value, str):
                    raise InputError(f"stratum entry {i}: label must be a string")
                kw[name] = value
            elif name in ("h", "N"):
                if isinstance(value, bool) or not isinstance(value, int):
                    raise InputError(f"stratum entry {i}: {name} must be an integer")
                kw[name] = value
            else:
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise InputError(f"stratum entry {i}: {name} must be a number")
                kw[name] = float(value)
        strata.append(StratumSummary(**kw))
    return PopulationSummary(strata=tuple(strata))


def summary_to_json(summary: PopulationSummary, indent: int | None = 2) -> str:
    """Serialize a PopulationSummary; floats round-trip bit-exactly."""
    items = []
    for s in summary.strata:
        d = {}
        for f in fields(StratumSummary):
            v = getattr(s, f.name)
            if v is None and f.name in _OPTIONAL_FIELDS:
                continue
            d[f.name] = v
        items.append(d)
    return json.dumps({"strata": items}, indent=indent)
