"""Experiment orchestration: Monte-Carlo drops, metrics and result files.

A run sweeps `drops` random placements; each drop keeps its large-scale
state fixed for `slots` time slots of independent fading.  Per slot the
proportional-fair weights are computed, the per-mode design problem is
solved, the achieved rates are pushed through the configured rate mapping
and folded back into the fairness averages.  Both compression modes can run
side by side on identical channel realizations, which makes all reported
gains paired comparisons.

Drops execute independently (optionally in a process pool); every drop
derives its rng streams from the master seed and its own index, so results
are byte-identical no matter how many workers are used.
"""

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import yaml

from . import cellgeom, channel as channel_mod, downlink, scheduler, uplink
from .errors import ConfigurationError, DomainError

MODE_P2P = uplink.MODE_P2P
MODE_MT = uplink.MODE_MT
MODE_ORDER = (MODE_P2P, MODE_MT)
OUT_DIR_ENV = "CRANSIM_OUT"
FLOAT_FMT = "%.9g"
_SLOT_STREAM = 101


@dataclass
class RateMapping:
    """Map Shannon rates to scheduled rates; `attenuated` approximates a
    practical modulation/coding ceiling via min(scale*r, cap)."""

    kind: str = "shannon"
    scale: float = 0.6
    cap: float = 4.4

    def apply(self, rates):
        rates = np.asarray(rates, dtype=float)
        if self.kind == "shannon":
            return rates
        if self.kind == "attenuated":
            return np.minimum(self.scale * rates, self.cap)
        raise ConfigurationError(f"unknown rate mapping {self.kind!r}")


@dataclass
class SolverOptions:
    mm_tol: float = 1e-4
    mm_max_iter: int = 60
    inner_steps_ul: int = 200
    inner_steps_dl: int = 40
    barrier_rounds: int = 3
    inner_tol: float = 1e-6


@dataclass
class ExperimentConfig:
    direction: str = "uplink"          # uplink | downlink
    mode: str = "both"                 # point_to_point | multiterminal | both
    k_ms: int = 5
    n_pico: int = 3
    c_macro: float = 3.0
    c_pico: float = 1.0
    alpha: object = 0.0                # float, or list of floats for sweeps
    beta: float = 0.5
    slots: int = 1
    drops: int = 200
    seed: int = 1
    reuse: str = "F1_3"
    jobs: int = 1
    rate_mapping: RateMapping = field(default_factory=RateMapping)
    solver: SolverOptions = field(default_factory=SolverOptions)
    propagation: cellgeom.PropagationParams = field(
        default_factory=cellgeom.PropagationParams)

    def validate(self):
        if self.direction not in ("uplink", "downlink"):
            raise ConfigurationError(f"unknown direction {self.direction!r}")
        if self.mode not in (MODE_P2P, MODE_MT, "both"):
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if self.drops < 1 or self.slots < 1:
            raise ConfigurationError("drops and slots must be >= 1")
        if self.c_macro < 0 or self.c_pico < 0:
            raise ConfigurationError("backhaul capacities must be >= 0")
        if self.k_ms < 1 or self.n_pico < 0:
            raise ConfigurationError("k_ms must be >= 1 and n_pico >= 0")
        if self.jobs < 1:
            raise ConfigurationError("jobs must be >= 1")
        alphas = self.alpha if isinstance(self.alpha, (list, tuple)) \
            else [self.alpha]
        if len(alphas) == 0:
            raise ConfigurationError("alpha sweep list must be nonempty")
        if any(a < 0 for a in alphas):
            raise ConfigurationError("fairness exponents must be >= 0")
        return self

    @property
    def modes(self):
        return MODE_ORDER if self.mode == "both" else (self.mode,)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        if "rate_mapping" in data and isinstance(data["rate_mapping"], dict):
            data["rate_mapping"] = RateMapping(**data["rate_mapping"])
        if "solver" in data and isinstance(data["solver"], dict):
            data["solver"] = SolverOptions(**data["solver"])
        if "propagation" in data and isinstance(data["propagation"], dict):
            data["propagation"] = cellgeom.PropagationParams(**data["propagation"])
        unknown = set(data) - {f.name for f in
                               cls.__dataclass_fields__.values()}
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data).validate()

    @classmethod
    def from_yaml(cls, path):
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ConfigurationError("config file must contain a mapping")
        return cls.from_dict(data)

    def to_dict(self):
        return asdict(self)


# Named experiment setups.  The two downlink entries are the two parameter
# sets quoted for the cell-edge/efficiency trade-off figure, which disagree
# between caption and body text; both ship so either can be reproduced.
# The downlink sweeps start at stronger fairness exponents than the uplink
# one: below alpha ~ 1.5-2 the downlink scheduler partially starves the
# weakest users in both compression modes, and a 5%-ile comparison of
# near-zero rates is not informative.
PRESETS = {
    "ul-cdf": dict(direction="uplink", mode="both", k_ms=5, n_pico=5,
                   c_macro=3.0, c_pico=1.0, alpha=0.0, slots=1, drops=200),
    "ul-sweep": dict(direction="uplink", mode="both", k_ms=5, n_pico=3,
                     c_macro=9.0, c_pico=3.0, beta=0.5, slots=10, drops=24,
                     alpha=[0.0, 0.5, 1.0, 2.0, 3.0]),
    "dl-sweep-a": dict(direction="downlink", mode="both", k_ms=4, n_pico=1,
                       c_macro=3.0, c_pico=1.0, beta=0.5, slots=5, drops=20,
                       alpha=[2.0, 2.5, 3.0, 4.0]),
    "dl-sweep-b": dict(direction="downlink", mode="both", k_ms=5, n_pico=3,
                       c_macro=9.0, c_pico=3.0, beta=0.5, slots=10, drops=12,
                       alpha=[1.5, 2.0, 3.0, 4.0]),
}


def percentile(samples, q):
    """Linear-interpolation empirical quantile, q in [0, 100]."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise DomainError("percentile of an empty sample set")
    if not 0.0 <= q <= 100.0:
        raise DomainError("q must lie in [0, 100]")
    return float(np.percentile(samples, q, method="linear"))


def normalize_backhaul(link_rate_bps, bandwidth_hz):
    """Backhaul link rate normalized by the wireless bandwidth (bps/Hz)."""
    if bandwidth_hz <= 0:
        raise DomainError("bandwidth must be > 0")
    return float(link_rate_bps) / float(bandwidth_hz)


def _drop_seed(master_seed, drop):
    words = np.random.SeedSequence([int(master_seed), int(drop)]).generate_state(2)
    return int(words[0]) << 32 | int(words[1])


def _slot_rng(master_seed, drop, slot):
    return np.random.default_rng(
        np.random.SeedSequence([int(master_seed), int(drop), _SLOT_STREAM,
                                int(slot)]))


@dataclass
class DropOutcome:
    drop: int
    rates: dict              # mode -> (slots, k_ms) mapped rates
    warnings: int = 0
    mm_iterations: int = 0


def _simulate_drop(config, drop):
    """Run all slots of one drop; deterministic given (config.seed, drop)."""
    topo = cellgeom.build_layout(_drop_seed(config.seed, drop), config.k_ms,
                                 config.n_pico, config.propagation,
                                 reuse=config.reuse)
    cluster = channel_mod.build_cluster(topo, config.propagation)
    c_vec = cluster.backhaul_capacities(config.c_macro, config.c_pico)
    modes = config.modes
    states = {m: scheduler.initial_state(config.k_ms, float(config.alpha),
                                         config.beta) for m in modes}
    out = DropOutcome(drop=drop,
                      rates={m: np.zeros((config.slots, config.k_ms))
                             for m in modes})
    sol = config.solver

    for slot in range(config.slots):
        chan = channel_mod.realize_channel(cluster, slot,
                                           _slot_rng(config.seed, drop, slot))
        results = {}
        if config.direction == "uplink":
            p_max = cluster.power_limits_ul()
            for m in modes:
                results[m] = uplink.optimize_ul(
                    chan, c_vec, scheduler.weights(states[m]), m, p_max,
                    n_macro=cluster.n_macro, mm_tol=sol.mm_tol,
                    mm_max_iter=sol.mm_max_iter,
                    inner_steps=sol.inner_steps_ul, inner_tol=sol.inner_tol)
        else:
            p_bs = cluster.power_limits_dl()
            dl_opts = dict(mm_tol=sol.mm_tol, mm_max_iter=sol.mm_max_iter,
                           inner_steps=sol.inner_steps_dl,
                           barrier_rounds=sol.barrier_rounds,
                           inner_tol=sol.inner_tol)
            p2p_res = None
            if MODE_P2P in modes:
                p2p_res = downlink.optimize_dl(
                    chan, c_vec, p_bs, scheduler.weights(states[MODE_P2P]),
                    MODE_P2P, **dl_opts)
                results[MODE_P2P] = p2p_res
            if MODE_MT in modes:
                init = p2p_res.design if p2p_res is not None else None
                results[MODE_MT] = downlink.optimize_dl(
                    chan, c_vec, p_bs, scheduler.weights(states[MODE_MT]),
                    MODE_MT, init=init, **dl_opts)

        for m in modes:
            mapped = config.rate_mapping.apply(results[m].rates)
            out.rates[m][slot] = mapped
            states[m] = scheduler.update(states[m], mapped)
            out.warnings += len(results[m].trace.warnings)
            out.mm_iterations += results[m].trace.iterations
    return out


@dataclass
class ModeMetrics:
    mode: str
    rates: np.ndarray                 # (drops, slots, k_ms)
    sum_rate_samples: np.ndarray      # sorted over (drop, slot)
    p5_sum_rate: float
    p50_sum_rate: float
    mean_sum_rate: float
    avg_spectral_efficiency: float    # mean long-run per-MS rate
    cell_edge_throughput: float       # 5%-ile of long-run per-MS rates
    solver_warnings: int
    mm_iterations: int


@dataclass
class MetricsReport:
    config: ExperimentConfig
    metrics: dict                     # mode -> ModeMetrics
    elapsed_s: float

    @property
    def modes(self):
        return tuple(m for m in MODE_ORDER if m in self.metrics)


def _aggregate(config, outcomes):
    metrics = {}
    for m in config.modes:
        rates = np.stack([o.rates[m] for o in outcomes])
        sums = np.sort(rates.sum(axis=2).ravel())
        long_run = rates.mean(axis=1).ravel()
        metrics[m] = ModeMetrics(
            mode=m, rates=rates, sum_rate_samples=sums,
            p5_sum_rate=percentile(sums, 5), p50_sum_rate=percentile(sums, 50),
            mean_sum_rate=float(np.mean(sums)),
            avg_spectral_efficiency=float(np.mean(long_run)),
            cell_edge_throughput=percentile(long_run, 5),
            solver_warnings=sum(o.warnings for o in outcomes),
            mm_iterations=sum(o.mm_iterations for o in outcomes))
    return metrics


def run_experiment(config):
    """Execute all drops of one configuration and aggregate the metrics."""
    config.validate()
    if isinstance(config.alpha, (list, tuple)):
        raise ConfigurationError(
            "run_experiment needs a scalar alpha; use alpha_sweep for lists")
    start = time.perf_counter()
    indices = range(config.drops)
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            outcomes = list(pool.map(_simulate_drop,
                                     [config] * config.drops, indices))
    else:
        outcomes = [_simulate_drop(config, d) for d in indices]
    outcomes.sort(key=lambda o: o.drop)
    return MetricsReport(config=config, metrics=_aggregate(config, outcomes),
                         elapsed_s=time.perf_counter() - start)


@dataclass
class SweepPoint:
    alpha: float
    avg_spectral_efficiency: float
    cell_edge_throughput: float


@dataclass
class SweepResult:
    config: ExperimentConfig
    alphas: tuple
    points: dict                      # mode -> list of SweepPoint
    reports: list                     # one MetricsReport per alpha
    notes: list

    def max_efficiency(self, mode):
        return max(p.avg_spectral_efficiency for p in self.points[mode])


def alpha_sweep(config):
    """One (efficiency, cell-edge) curve point per fairness exponent and mode.

    All sweep points share the same seed, so curves are paired across both
    alpha and compression mode.  The expected fairness trade-off (cell edge
    non-decreasing in alpha) is checked softly and reported in `notes`.
    """
    config.validate()
    alphas = config.alpha if isinstance(config.alpha, (list, tuple)) \
        else [config.alpha]
    alphas = tuple(float(a) for a in alphas)
    points = {m: [] for m in config.modes}
    reports = []
    for a in alphas:
        rep = run_experiment(replace(config, alpha=a))
        reports.append(rep)
        for m in config.modes:
            mm = rep.metrics[m]
            points[m].append(SweepPoint(
                alpha=a,
                avg_spectral_efficiency=mm.avg_spectral_efficiency,
                cell_edge_throughput=mm.cell_edge_throughput))
    notes = []
    for m in config.modes:
        ce = [p.cell_edge_throughput for p in points[m]]
        if any(b < a - 1e-12 for a, b in zip(ce, ce[1:])):
            notes.append(f"cell-edge throughput not monotone in alpha for "
                         f"{m}: {ce}")
    return SweepResult(config=config, alphas=alphas, points=points,
                       reports=reports, notes=notes)


# ---------------------------------------------------------------------------
# result files
# ---------------------------------------------------------------------------

def default_out_dir():
    return os.environ.get(OUT_DIR_ENV, "results")


def write_records_csv(report, path):
    """Per-slot records, fixed field order and float format (9 significant
    digits) so identical runs produce byte-identical files."""
    with open(path, "w") as fh:
        fh.write("drop,slot,mode,ms,rate\n")
        for drop in range(report.config.drops):
            for slot in range(report.config.slots):
                for mode in report.modes:
                    rates = report.metrics[mode].rates[drop, slot]
                    for ms, rate in enumerate(rates):
                        fh.write(f"{drop},{slot},{mode},{ms},"
                                 f"{FLOAT_FMT % rate}\n")


def write_summary(report, path, extra_lines=()):
    cfg = report.config
    lines = ["experiment summary", "==================",
             f"direction={cfg.direction} mode={cfg.mode} K={cfg.k_ms} "
             f"N={cfg.n_pico} C=({cfg.c_macro},{cfg.c_pico}) "
             f"alpha={cfg.alpha} beta={cfg.beta} slots={cfg.slots} "
             f"drops={cfg.drops} seed={cfg.seed} reuse={cfg.reuse}",
             f"rate_mapping={cfg.rate_mapping.kind}",
             f"elapsed_s={report.elapsed_s:.1f}", ""]
    for mode in report.modes:
        m = report.metrics[mode]
        lines += [f"[{mode}]",
                  f"  sum-rate bps/Hz: mean={FLOAT_FMT % m.mean_sum_rate} "
                  f"p50={FLOAT_FMT % m.p50_sum_rate} "
                  f"p5={FLOAT_FMT % m.p5_sum_rate}",
                  f"  avg spectral efficiency={FLOAT_FMT % m.avg_spectral_efficiency}"
                  f" cell-edge={FLOAT_FMT % m.cell_edge_throughput}",
                  f"  solver: mm_iterations={m.mm_iterations} "
                  f"warnings={m.solver_warnings}"]
    if len(report.modes) == 2:
        p50_gain = report.metrics[MODE_MT].p50_sum_rate \
            / max(report.metrics[MODE_P2P].p50_sum_rate, 1e-30)
        lines.append(f"multiterminal/p2p 50%-ile sum-rate ratio="
                     f"{FLOAT_FMT % p50_gain}")
    lines.extend(extra_lines)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_cdf_data(report, out_dir):
    for mode in report.modes:
        samples = report.metrics[mode].sum_rate_samples
        ecdf = (np.arange(samples.size) + 1) / samples.size
        with open(os.path.join(out_dir, f"cdf_{mode}.dat"), "w") as fh:
            for x, y in zip(samples, ecdf):
                fh.write(f"{FLOAT_FMT % x} {FLOAT_FMT % y}\n")


def write_sweep_data(sweep, out_dir):
    for mode, pts in sweep.points.items():
        with open(os.path.join(out_dir, f"sweep_{mode}.dat"), "w") as fh:
            for p in pts:
                fh.write(f"{FLOAT_FMT % p.avg_spectral_efficiency} "
                         f"{FLOAT_FMT % p.cell_edge_throughput}\n")


def write_report(report, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    write_records_csv(report, os.path.join(out_dir, "records.csv"))
    write_summary(report, os.path.join(out_dir, "summary.txt"))
    write_cdf_data(report, out_dir)


def write_sweep(sweep, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    write_sweep_data(sweep, out_dir)
    lines = ["alpha sweep", "==========="]
    for mode, pts in sweep.points.items():
        lines.append(f"[{mode}]")
        for p in pts:
            lines.append(f"  alpha={p.alpha:g} "
                         f"avg_se={FLOAT_FMT % p.avg_spectral_efficiency} "
                         f"cell_edge={FLOAT_FMT % p.cell_edge_throughput}")
    lines.extend(sweep.notes)
    with open(os.path.join(out_dir, "sweep_summary.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    for a, rep in zip(sweep.alphas, sweep.reports):
        sub = os.path.join(out_dir, f"alpha_{a:g}")
        write_report(rep, sub)
