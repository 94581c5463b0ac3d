"""Monte-Carlo experiments: paired drops, per-algorithm metrics, CSV/JSON output.

Every drop draws one channel realization per sweep value, shared by all
algorithms, and every design is scored on the true channels. When any
algorithm cannot start on a drop (unreachable targets or a solver failure),
that drop is dropped for all algorithms so comparisons stay paired.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import algorithms as alg
from . import robust
from .channels import (
    ChannelSet, ScenarioConfig, db_to_linear, degrade_csi, generate_channels, rng_stream, sinr,
    watts_to_dbm,
)
from .errors import InfeasibleProblem, SolverFailure

ALGORITHMS = (
    "sdr-altmin", "penalty-altmin", "ia", "robust-penalty-altmin",
    "baseline1-no-irs", "baseline2-random-phase", "non-robust",
)
# run order: the SDR budget needs the proposed designs' iteration counts first
_RUN_ORDER = ("penalty-altmin", "robust-penalty-altmin", "ia", "non-robust", "sdr-altmin",
              "baseline1-no-irs", "baseline2-random-phase")
DEFAULT_SDR_BUDGET = 20
OUTAGE_TOL = 1e-6
_SPECIAL_SWEEPS = {"gamma_db", "m", "sigma2_dbm"}


def total_power(P: float, nt: int, m: int, eta: float = 1.0, ps: float = 0.034,
                prf: float = 0.08, pirs: float = 0.005) -> float:
    """System power: P / eta + Ps + Nt * Prf + M * Pirs, all in watts."""
    if not eta > 0 or eta > 1:
        raise ValueError("amplifier efficiency eta must lie in (0, 1]")
    if min(P, nt, m, ps, prf, pirs) < 0:
        raise ValueError("powers and counts must be nonnegative")
    return P / eta + ps + nt * prf + m * pirs


@dataclass(frozen=True)
class PowerModel:
    eta: float = 1.0
    ps: float = 0.034
    prf: float = 0.08
    pirs: float = 0.005

    def total(self, P: float, nt: int, m: int) -> float:
        return total_power(P, nt, m, self.eta, self.ps, self.prf, self.pirs)


@dataclass(frozen=True)
class ExperimentSpec:
    """What to sweep, which designs to run and how many drops to average.

    ``sweep_var`` is a :class:`ScenarioConfig` field name, or one of
    ``gamma_db``, ``sigma2_dbm`` and ``m`` (element count of a single IRS).
    ``thresholds_db`` are the SINR levels at which outage is reported; the
    target SINR is used when it is empty.
    """

    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    sweep_var: str = "gamma_db"
    sweep_values: tuple = (2.0,)
    algorithms: tuple[str, ...] = ("penalty-altmin",)
    drops: int = 20
    thresholds_db: tuple[float, ...] = ()
    power_model: PowerModel = field(default_factory=PowerModel)
    max_outer: int = alg.MAX_OUTER
    sdr_budget: int | None = None
    workers: int = 1

    def __post_init__(self):
        if not self.algorithms:
            raise ValueError("at least one algorithm is required")
        unknown = sorted(set(self.algorithms) - set(ALGORITHMS))
        if unknown:
            raise ValueError(f"unknown algorithm(s) {unknown}; choose from {list(ALGORITHMS)}")
        if len(set(self.algorithms)) != len(self.algorithms):
            raise ValueError("algorithms must not repeat")
        if self.drops < 1:
            raise ValueError("drops must be >= 1")
        if not self.sweep_values:
            raise ValueError("sweep_values must not be empty")
        names = {f.name for f in fields(ScenarioConfig)}
        if self.sweep_var not in names | _SPECIAL_SWEEPS:
            raise ValueError(f"cannot sweep {self.sweep_var!r}")
        if self.workers < 1 or self.max_outer < 1:
            raise ValueError("workers and max_outer must be >= 1")

    def scenario_at(self, value) -> ScenarioConfig:
        if self.sweep_var == "gamma_db":
            return self.scenario.with_(gamma=float(db_to_linear(value)))
        if self.sweep_var == "sigma2_dbm":
            return self.scenario.with_(sigma2=float(db_to_linear(value)) / 1000.0)
        if self.sweep_var == "m":
            return self.scenario.with_(irs_elements=(int(value),))
        if self.sweep_var in ("nt", "k", "seed"):
            value = int(value)
        return self.scenario.with_(**{self.sweep_var: value})

    def thresholds_at(self, cfg: ScenarioConfig) -> np.ndarray:
        if self.thresholds_db:
            return np.asarray(db_to_linear(np.asarray(self.thresholds_db, dtype=float)))
        return np.array([cfg.gamma])

    def threshold_labels(self) -> list[str]:
        if self.thresholds_db:
            return [f"outage@{t:g}dB" for t in self.thresholds_db]
        return ["outage@target"]


@dataclass
class DropResult:
    sweep_value: float
    drop: int
    algorithm: str
    power_w: float = math.nan
    true_sinr: list[float] = field(default_factory=list)
    iterations: int = 0
    status: str = ""
    error: str = ""
    infeasible: bool = False
    excluded: bool = False
    objectives: list[float] = field(default_factory=list)
    m: int = 0

    @property
    def ok(self) -> bool:
        return not self.error


@dataclass
class MetricRow:
    sweep_var: str
    sweep_value: float
    algorithm: str
    mean_power_dbm: float
    std_power_db: float
    outage: list[float]
    p_total_w: float
    drops_used: int
    drops_infeasible: int

    def csv_cells(self) -> list[str]:
        return ([self.sweep_var, _fmt(self.sweep_value), self.algorithm, _fmt(self.mean_power_dbm),
                 _fmt(self.std_power_db)] + [_fmt(o) for o in self.outage]
                + [_fmt(self.p_total_w), str(self.drops_used), str(self.drops_infeasible)])


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def outage_curve(sinr_values, thresholds, tol: float = OUTAGE_TOL) -> np.ndarray:
    """Fraction of SINR samples below each threshold (linear scale).

    A sample counts as an outage when it is below ``threshold * (1 - tol)``,
    so designs that sit exactly on their target are not penalized for
    rounding. The result is non-decreasing in the threshold.
    """
    s = np.concatenate([np.ravel(np.asarray(v, dtype=float)) for v in sinr_values]) \
        if isinstance(sinr_values, (list, tuple)) else np.ravel(np.asarray(sinr_values, dtype=float))
    if s.size == 0:
        raise ValueError("need at least one SINR sample")
    thr = np.asarray(thresholds, dtype=float)
    return np.array([float(np.mean(s < t * (1 - tol))) for t in np.ravel(thr)])


def design(name: str, ch: ChannelSet, est, cfg: ScenarioConfig, drop: int, init: alg.PhaseState,
           budget: int = DEFAULT_SDR_BUDGET, max_outer: int = alg.MAX_OUTER,
           warm: alg.PhaseState | None = None):
    """Run one design; returns (beam, phase, trace, channels to score it on)."""
    robust_csi = cfg.kappa > 0
    known = est if robust_csi else ch
    if name == "penalty-altmin":
        return (*alg.penalty_altmin(known, cfg, drop=drop, init=init, max_outer=max_outer), ch)
    if name == "robust-penalty-altmin":
        return (*robust.robust_penalty_altmin(est, cfg, drop=drop, init=warm or init,
                                              max_outer=max_outer), ch)
    if name in ("ia", "non-robust"):
        return (*alg.ia_solve(known, cfg, drop=drop, init=init), ch)
    if name == "sdr-altmin":
        if robust_csi:
            return (*robust.robust_sdr_altmin(est, cfg, drop=drop, init=init, max_iter=budget), ch)
        return (*alg.sdr_altmin(ch, cfg, drop=drop, init=init, max_iter=budget), ch)
    if name == "baseline1-no-irs":
        bare = ch.without_irs()
        if robust_csi:
            return (*robust.robust_fixed_phase_design(est.without_irs(), cfg, alg.PhaseState.zero(0),
                                                      "baseline1-no-irs"), bare)
        return (*alg.random_phase_design(bare, cfg, drop=drop, init=alg.PhaseState.zero(0)), bare)
    if name == "baseline2-random-phase":
        if robust_csi:
            return (*robust.robust_fixed_phase_design(est, cfg, init, "baseline2-random-phase"), ch)
        return (*alg.random_phase_design(ch, cfg, drop=drop, init=init), ch)
    raise ValueError(f"unknown algorithm {name!r}")


def _sweep_order(spec: ExperimentSpec) -> list:
    # robust runs over a kappa grid go from the largest radius down, each warm-started from
    # the previous solution; nested uncertainty sets then make power monotone in kappa
    if spec.sweep_var == "kappa":
        return sorted(spec.sweep_values, reverse=True)
    return list(spec.sweep_values)


def run_drop(spec: ExperimentSpec, drop: int) -> list[DropResult]:
    """All sweep values and algorithms for one drop index."""
    out: list[DropResult] = []
    warm: alg.PhaseState | None = None
    for value in _sweep_order(spec):
        cfg = spec.scenario_at(value)
        ch = generate_channels(cfg, drop)
        est = degrade_csi(ch, cfg.kappa, rng_stream(cfg.seed, drop, "csi"))
        init = alg.initial_phase(cfg, cfg.m, drop)
        done: dict[str, DropResult] = {}
        for name in (a for a in _RUN_ORDER if a in spec.algorithms):
            res = DropResult(float(value), drop, name, m=0 if name == "baseline1-no-irs" else cfg.m)
            budget = spec.sdr_budget or next(
                (done[a].iterations for a in ("penalty-altmin", "robust-penalty-altmin", "ia")
                 if a in done and done[a].ok and done[a].iterations > 0), DEFAULT_SDR_BUDGET)
            try:
                beam, phase, trace, score_on = design(
                    name, ch, est, cfg, drop, init, budget, spec.max_outer, warm)
            except InfeasibleProblem as exc:
                res.infeasible, res.error, res.status = True, str(exc), "infeasible"
            except (SolverFailure, np.linalg.LinAlgError, ValueError) as exc:
                res.error, res.status = f"{type(exc).__name__}: {exc}", "failed"
            else:
                res.power_w = beam.P
                res.true_sinr = [float(x) for x in sinr(score_on, beam.w, phase.phi, cfg.sigma2s)]
                res.iterations, res.status = trace.iterations, trace.status
                res.objectives = [float(o) for o in trace.objectives]
                if name == "robust-penalty-altmin" and spec.sweep_var == "kappa":
                    warm = phase
            done[name] = res
        if any(not r.ok for r in done.values()):
            for r in done.values():
                r.excluded = True
        out.extend(done.values())
    return out


def collect(spec: ExperimentSpec) -> list[DropResult]:
    """Per-drop results, sorted by (sweep value, algorithm, drop)."""
    drops = range(spec.drops)
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            chunks = list(pool.map(run_drop, [spec] * spec.drops, drops))
    else:
        chunks = [run_drop(spec, d) for d in drops]
    results = [r for chunk in chunks for r in chunk]
    return sorted(results, key=lambda r: (r.sweep_value, r.algorithm, r.drop))


def summarize(spec: ExperimentSpec, results: list[DropResult]) -> list[MetricRow]:
    rows = []
    for value in sorted({float(v) for v in spec.sweep_values}):
        cfg = spec.scenario_at(value)
        thresholds = spec.thresholds_at(cfg)
        for name in sorted(spec.algorithms):
            mine = [r for r in results if r.sweep_value == value and r.algorithm == name]
            used = [r for r in mine if not r.excluded]
            if used:
                powers = np.array([r.power_w for r in used])
                mean_p = float(powers.mean())
                mean_dbm = float(watts_to_dbm(mean_p))
                std_db = float(np.std(watts_to_dbm(powers)))
                outage = [float(x) for x in outage_curve([r.true_sinr for r in used], thresholds)]
                p_total = spec.power_model.total(mean_p, cfg.nt, used[0].m)
            else:
                mean_dbm = std_db = p_total = math.nan
                outage = [math.nan] * len(thresholds)
            rows.append(MetricRow(spec.sweep_var, value, name, mean_dbm, std_db, outage, p_total,
                                  len(used), len(mine) - len(used)))
    return rows


def run_experiment(spec: ExperimentSpec) -> list[MetricRow]:
    return summarize(spec, collect(spec))


def csv_text(spec: ExperimentSpec, rows: list[MetricRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["sweep_var", "sweep_value", "algorithm", "mean_power_dbm", "std_power_db",
                     *spec.threshold_labels(), "p_total_w", "drops_used", "drops_infeasible"])
    for row in rows:
        writer.writerow(row.csv_cells())
    return buf.getvalue()


def sidecar(results: list[DropResult]) -> str:
    """Full per-drop records as JSON (no timings, so reruns are byte-identical)."""
    def clean(d):
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in d.items()}
    return json.dumps([clean(asdict(r)) for r in results], indent=1, sort_keys=True) + "\n"
