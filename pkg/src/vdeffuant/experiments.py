"""Replicated runs, parameter sweeps and initial-measure diagnostics.

Seeds: replicate ``k`` of an experiment with master seed ``s`` draws its
initial configuration and its dynamics from the two children of
``SeedSequence(s, spawn_key=(k,))``. Sweep cells add their parameters to the
spawn key, so a cell gives the same numbers alone or inside any grid.
"""
from __future__ import annotations

import dataclasses
import json
import math
import subprocess
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .analytics import (expected_weight_biased, expected_weight_uniform, format_decimal,
                        format_fraction, phase_region)
from .engine import Engine, Stop, StopReason
from .genealogy import write_probe_report
from .opinions import (Boundary, Dynamics, InitKind, InitSpec, LatticeSpec, ModelParams,
                       pile_pmf_biased, pile_pmf_uniform, popcount64, sample_configuration)
from .particles import ContributionLedger, densities, write_snapshot_csv


@dataclass
class ExperimentConfig:
    F: int = 2
    theta: int = 1
    dynamics: str = "deffuant"
    init: str = "uniform"
    rho: Fraction = Fraction(0)
    sites: int = 1024
    boundary: str = "ring"
    t_max: float = 1000.0
    max_events: int | None = None
    replicates: int = 32
    seed: int = 0
    densities: bool = True
    ledger: bool = False
    genealogy: bool = False
    out: str = "out"

    def __post_init__(self):
        self.rho = Fraction(self.rho)
        if int(self.replicates) < 1:
            raise ValueError(f"replicates must be >= 1, got {self.replicates}")
        if int(self.seed) < 0:
            raise ValueError(f"seed must be nonnegative, got {self.seed}")
        # validate eagerly so bad configs fail before any work
        self.model()
        self.lattice()
        self.init_spec().validate(self.F)

    def model(self) -> ModelParams:
        return ModelParams(int(self.F), int(self.theta), Dynamics(self.dynamics))

    def lattice(self) -> LatticeSpec:
        return LatticeSpec(int(self.sites), Boundary(self.boundary))

    def init_spec(self) -> InitSpec:
        kind = InitKind(self.init)
        return InitSpec(kind, self.rho if kind is InitKind.BIASED else Fraction(0))

    def stop(self) -> Stop:
        return Stop(t_max=self.t_max, max_events=self.max_events, extinction=True)

    def echo(self) -> dict:
        d = dataclasses.asdict(self)
        d["rho"] = format_fraction(self.rho)
        return d


def version_string() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=Path(__file__).resolve().parent, capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def replicate_streams(master_seed: int, *key: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent (init, dynamics) generators for the replicate identified by ``key``."""
    init_ss, dyn_ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key)).spawn(2)
    return np.random.default_rng(init_ss), np.random.default_rng(dyn_ss)


def geometric_grid(t_max: float) -> list[float]:
    """``0, 1, 2, 4, ...`` up to ``t_max``, with ``t_max`` itself appended."""
    grid = [0.0]
    t = 1.0
    while t < t_max:
        grid.append(t)
        t *= 2
    if t_max > 0:
        grid.append(float(t_max))
    return grid


def make_engine(config: ExperimentConfig, *key: int, keep_log: bool | None = None) -> Engine:
    init_rng, dyn_rng = replicate_streams(config.seed, *key)
    if keep_log is None:
        keep_log = config.ledger or config.genealogy
    return Engine.from_init(config.model(), config.lattice(), config.init_spec(), init_rng, dyn_rng,
                            keep_log=keep_log, skip_absorbed=True)


def consensus_pairs_fraction(engine: Engine) -> float:
    return float(np.count_nonzero(engine.view.zeta == 0)) / engine.view.edges


class DensitySeries:
    """Time-series observer: particle densities and agreement on a time grid."""

    name = "densities"
    columns = ["time", "active_density", "frozen_density", "blockade_count", "consensus_pairs_fraction"]

    def __init__(self, threshold: int):
        self.threshold = threshold
        self.rows = []

    def sample(self, engine: Engine) -> None:
        d = densities(engine.view, self.threshold)
        blockades = int(np.count_nonzero(engine.view.zeta > self.threshold))
        self.rows.append((engine.clock, d.active_per_edge, d.frozen_per_edge, blockades,
                          consensus_pairs_fraction(engine)))

    def result(self):
        return self.rows


def _meta(config: ExperimentConfig | None, extra: dict | None = None) -> dict:
    meta = {"version": version_string()}
    if config is not None:
        meta["seed"] = config.seed
        meta["config"] = config.echo()
    if extra:
        meta.update(extra)
    return meta


def write_table(path, columns, rows, meta: dict) -> None:
    """Delimited output with the provenance block as leading ``#`` lines."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        for k, v in meta.items():
            fh.write(f"# {k}: {json.dumps(v, sort_keys=True)}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def read_table(path) -> tuple[dict, list[dict]]:
    meta, rows, header = {}, [], None
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# "):
                k, _, v = line[2:].partition(": ")
                meta[k] = json.loads(v)
            elif header is None:
                header = line.split(",")
            elif line:
                rows.append(dict(zip(header, line.split(","))))
    return meta, rows


# -- simulate -------------------------------------------------------------------

@dataclass
class SimulationResult:
    reason: StopReason
    summary: dict
    series: list
    engine: Engine


def simulate(config: ExperimentConfig, replicate: int = 0) -> SimulationResult:
    eng = make_engine(config, replicate)
    observers = [DensitySeries(config.model().frozen_above)] if config.densities else []
    grid = geometric_grid(config.t_max) if config.densities else []
    summary = eng.run(config.stop(), observers, grid)
    series = list(summary.observers.get("densities", []))
    if grid and eng.absorbed():
        # absorbed states are constant, so the remaining grid points repeat the final sample
        obs = DensitySeries(config.model().frozen_above)
        obs.sample(eng)
        final = obs.rows[0][1:]
        series += [(t,) + final for t in grid[len(series):]]
    final_class = summary.reason.value
    if summary.reason not in (StopReason.CONSENSUS, StopReason.FIXATED_FROZEN):
        final_class = StopReason.TRUNCATED.value
    info = {
        "final_state": final_class,
        "stop_reason": summary.reason.value,
        "clock": summary.clock,
        "events": summary.events,
        "active_events": summary.active_events,
        "annihilations": summary.annihilations,
        "particles": eng.particles,
        "live_edges": eng.live_edges,
        "replicate": replicate,
    }
    return SimulationResult(summary.reason, info, series, eng)


def cmd_simulate(config: ExperimentConfig, replicate: int = 0) -> SimulationResult:
    import time

    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    res = simulate(config, replicate)
    wall = time.perf_counter() - start
    meta = _meta(config)
    write_table(out / "timeseries.csv", DensitySeries.columns, res.series, meta)
    with open(out / "summary.json", "w") as fh:
        json.dump({"meta": meta, **res.summary}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    # wall time lives apart so the deterministic outputs stay byte-identical
    with open(out / "timing.json", "w") as fh:
        json.dump({"wall_time_s": wall}, fh)
        fh.write("\n")
    eng = res.engine
    write_snapshot_csv(eng.view, out / "snapshot.csv")
    if config.ledger:
        ledger = ContributionLedger.from_log(eng.initial_view, config.model().frozen_above, eng.log,
                                             ring=config.lattice().ring)
        ledger.write_csv(out / "ledger.csv")
    if config.genealogy:
        times = [t for t in geometric_grid(eng.clock)]
        F = config.F
        write_probe_report(out / "probes.csv", eng.log, np.repeat(times, F), np.tile(np.arange(F), len(times)))
    return res


# -- cluster probability ------------------------------------------------------------

def agreement_fraction(opinions: np.ndarray, d: int, ring: bool) -> float:
    if ring:
        return float(np.mean(opinions == np.roll(opinions, -d)))
    if d >= opinions.shape[0]:
        return math.nan
    return float(np.mean(opinions[:-d] == opinions[d:])) if d > 0 else 1.0


def cluster_prob(config: ExperimentConfig, distances, times) -> list[tuple]:
    """Monte Carlo estimates of P(two sites at distance d agree at time t).

    Returns rows ``(d, t, estimate, stderr, replicates)``; the per-replicate value
    is the lattice average, and the standard error is taken across replicates.
    """
    distances = [int(d) for d in distances]
    times = sorted(float(t) for t in times)
    samples = np.zeros((config.replicates, len(times), len(distances)))
    ring = config.lattice().ring
    for k in range(config.replicates):
        eng = make_engine(config, k, keep_log=False)
        for a, t in enumerate(times):
            eng.advance(t_max=t)
            for b, d in enumerate(distances):
                samples[k, a, b] = agreement_fraction(eng.state.opinions, d, ring)
    rows = []
    R = config.replicates
    for b, d in enumerate(distances):
        for a, t in enumerate(times):
            x = samples[:, a, b]
            se = float(np.std(x, ddof=1) / math.sqrt(R)) if R > 1 else math.nan
            rows.append((d, t, float(np.mean(x)), se, R))
    return rows


def cmd_cluster_prob(config: ExperimentConfig, distances, times) -> list[tuple]:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = cluster_prob(config, distances, times)
    write_table(out / "cluster_prob.csv", ["d", "time", "estimate", "stderr", "replicates"], rows, _meta(config))
    return rows


# -- sweeps ----------------------------------------------------------------------

@dataclass
class SweepGrid:
    """Cells ``(F, theta, rho)``; ``rho=None`` means the uniform initial measure."""

    cells: list
    template: ExperimentConfig = field(default_factory=ExperimentConfig)
    simulate: bool = True

    def __post_init__(self):
        for F, theta, rho in self.cells:
            ModelParams(F, theta)
            if rho is not None:
                InitSpec.biased(rho).validate(F)

    @classmethod
    def from_ranges(cls, F_values, theta_values, rhos=(None,), template=None, simulate=True,
                    theta_below_F=True) -> "SweepGrid":
        cells = []
        for F in F_values:
            for theta in theta_values:
                if theta > F or (theta_below_F and theta >= F):
                    continue
                for rho in rhos:
                    rho = None if rho is None else Fraction(rho)
                    if rho is not None and not rho < Fraction(1, 2**F):
                        continue
                    cells.append((int(F), int(theta), rho))
        return cls(cells, template or ExperimentConfig(), simulate)


SWEEP_COLUMNS = ["F", "theta", "rho", "phase_region", "expected_weight", "expected_weight_decimal",
                 "blockade_survival", "final_particle_density", "replicates", "seed", "status"]


def sweep_cell(template: ExperimentConfig, F: int, theta: int, rho, simulate_cell: bool = True) -> tuple:
    rho_key = (0, 0) if rho is None else (Fraction(rho).numerator, Fraction(rho).denominator)
    region = phase_region(F, theta).value
    ew = expected_weight_uniform(F, theta) if rho is None else expected_weight_biased(F, theta, rho)
    survival = density = math.nan
    reps = 0
    status = "ok"
    if simulate_cell:
        try:
            cfg = dataclasses.replace(
                template, F=F, theta=theta, init="uniform" if rho is None else "biased",
                rho=Fraction(0) if rho is None else Fraction(rho))
            surv, dens = [], []
            for k in range(cfg.replicates):
                eng = make_engine(cfg, F, theta, *rho_key, k, keep_log=False)
                blockades0 = eng.initial_view.zeta > cfg.model().frozen_above
                eng.advance(t_max=cfg.t_max, max_events=cfg.max_events)
                n_b = int(blockades0.sum())
                surv.append(float(np.count_nonzero(blockades0 & ~eng.touched)) / n_b if n_b else math.nan)
                dens.append(eng.particles / eng.view.edges)
            survival = float(np.nanmean(surv)) if not all(math.isnan(s) for s in surv) else math.nan
            density = float(np.mean(dens))
            reps = cfg.replicates
        except (ValueError, ArithmeticError, MemoryError) as exc:
            status = f"error: {type(exc).__name__}: {exc}".replace(",", ";")
    return (F, theta, "" if rho is None else format_fraction(rho), region, format_fraction(ew),
            format_decimal(ew), survival, density, reps, template.seed, status)


def sweep(grid: SweepGrid) -> list[tuple]:
    return [sweep_cell(grid.template, F, theta, rho, grid.simulate) for F, theta, rho in grid.cells]


def cmd_sweep(grid: SweepGrid) -> list[tuple]:
    out = Path(grid.template.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = sweep(grid)
    extra = {"cells": [[F, t, None if r is None else format_fraction(r)] for F, t, r in grid.cells],
             "simulate": grid.simulate}
    write_table(out / "sweep.csv", SWEEP_COLUMNS, rows, _meta(grid.template, extra))
    return rows


# -- initial-measure statistics ----------------------------------------------------

def changeover_moments(N: int, p: float) -> tuple[float, float]:
    """Mean and standard deviation of the changeover count of N+1 coin flips."""
    q = 2 * p * (1 - p)
    var = N * q * (1 - q) + 2 * max(N - 1, 0) * (p * (1 - p) - q * q)
    return N * q, math.sqrt(max(var, 0.0))


def edge_pair_moments(N: int, a: float) -> tuple[float, float]:
    """Mean and standard deviation of the count of ``u -> v`` edges (u != v), ``a = rho(u) rho(v)``."""
    var = N * a * (1 - a) - 2 * max(N - 1, 0) * a * a
    return N * a, math.sqrt(max(var, 0.0))


def initial_stats(config: ExperimentConfig, N: int, pairs=None, replicate: int = 0) -> list[tuple]:
    """Sample ``N + 1`` initial sites (``N`` edges) and compare counts to their laws.

    Rows are ``(quantity, key, observed, expected, stderr)``.
    """
    F = config.F
    init = config.init_spec()
    full = (1 << F) - 1
    if pairs is None:
        pairs = [(0, full), (full, 0)]
        if F >= 2:
            pairs += [(0, 1), (1, 2)]
    init_rng, _ = replicate_streams(config.seed, replicate)
    eta = sample_configuration(init, F, N + 1, init_rng) if N > 0 else np.zeros(0, dtype=np.uint64)
    rows = []
    for u in sorted({0, full}):
        p = float(init.profile_probability(F, u))
        if N > 0:
            x = eta == np.uint64(u)
            z = int(np.count_nonzero(x[:-1] != x[1:]))
        else:
            z = 0
        mean, sd = changeover_moments(N, p)
        rows.append(("changeover", format(u, "x"), z, mean, sd))
    for u, v in pairs:
        a = float(init.profile_probability(F, u) * init.profile_probability(F, v))
        c = int(np.count_nonzero((eta[:-1] == np.uint64(u)) & (eta[1:] == np.uint64(v)))) if N > 0 else 0
        mean, sd = edge_pair_moments(N, a)
        rows.append(("edge_pair", f"{u:x}->{v:x}", c, mean, sd))
    zeta = popcount64(eta[:-1] ^ eta[1:]) if N > 0 else np.zeros(0, dtype=np.int64)
    hist = np.bincount(zeta, minlength=F + 1)
    for j in range(F + 1):
        pj = pile_pmf_uniform(F, j) if init.kind is InitKind.UNIFORM else pile_pmf_biased(F, config.theta, init.rho, j)
        pj = float(pj)
        rows.append(("pile_size", str(j), int(hist[j]), N * pj, math.sqrt(N * pj * (1 - pj))))
    return rows


def cmd_stats(config: ExperimentConfig, N: int, pairs=None) -> list[tuple]:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = initial_stats(config, N, pairs)
    write_table(out / "stats.csv", ["quantity", "key", "observed", "expected", "stderr"], rows,
                _meta(config, {"N": N}))
    return rows
