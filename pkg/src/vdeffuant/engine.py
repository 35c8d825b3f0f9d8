"""Event-driven Harris construction of the vectorial Deffuant model.

Every (site, issue) pair carries a unit-rate Poisson clock. When it rings at
site ``x`` for issue ``i`` an arrow points to ``y = x + B`` with ``B = +-1``
equiprobable, and the arrow is active when the edge it crosses holds a
particle at level ``i`` and a uniform mark is at most ``rate(zeta)``. An
active arrow copies issue ``i`` from ``x`` to ``y`` and pushes the particle one
edge further, annihilating it if that edge-level is occupied. Inactive arrows
are no-ops.

The clocks are realized in aggregate: exponential waiting times of total rate
``L * F`` and a uniform choice of ``(x, i)``. Each event consumes exactly four
uniforms from the dynamics stream, so stepping one event at a time and running
in bulk give identical trajectories.
"""
from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _kernel as K
from .opinions import (Dynamics, InitSpec, LatticeSpec, ModelParams, popcount64,
                       sample_configuration)
from .particles import ParticleView, derive_xi

logger = logging.getLogger(__name__)

DEFAULT_HARD_BUDGET = 10**10


class CouplingError(RuntimeError):
    """The incrementally maintained particle view disagrees with the opinions."""


def rate(params: ModelParams, j: int) -> Fraction:
    """Per-particle jump rate on an edge holding ``j`` particles."""
    if not 0 <= j <= params.F:
        raise ValueError(f"pile size must lie in [0, {params.F}], got {j}")
    if j == 0:
        return Fraction(0)
    if params.dynamics is Dynamics.AXELROD:
        return Fraction(1, j) * (1 - Fraction(j, params.F))
    return Fraction(1, j) if j <= params.theta else Fraction(0)


def rate_table(params: ModelParams) -> np.ndarray:
    return np.array([float(rate(params, j)) for j in range(params.F + 1)], dtype=np.float64)


@dataclass
class LatticeState:
    params: ModelParams
    lattice: LatticeSpec
    opinions: np.ndarray
    clock: float = 0.0
    event_count: int = 0


@dataclass(frozen=True)
class ArrowEvent:
    time: float
    site: int
    level: int
    direction: int
    mark: float
    active: bool
    annihilated: bool
    edge: int = -1
    far_edge: int = -1

    @property
    def target(self) -> int:
        return self.site + self.direction


class ActiveArrowLog:
    """Time-ordered arrow records; a view over the engine's log buffers.

    ``rows`` columns: event index, source site, level, direction, active, annihilated.
    """

    def __init__(self, times: np.ndarray, rows: np.ndarray, sites: int, ring: bool):
        self.times = times
        self.rows = rows
        self.sites = sites
        self.ring = ring

    def __len__(self):
        return self.times.shape[0]

    def active_only(self) -> "ActiveArrowLog":
        keep = self.rows[:, 4] != 0
        return ActiveArrowLog(self.times[keep], self.rows[keep], self.sites, self.ring)

    def targets(self) -> np.ndarray:
        t = self.rows[:, 1] + self.rows[:, 3]
        if self.ring:
            t = np.mod(t, self.sites)
        return t

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["event_index", "time", "site", "level", "direction", "active", "annihilated"])
            for t, r in zip(self.times, self.rows):
                w.writerow([int(r[0]), repr(float(t)), int(r[1]), int(r[2]), int(r[3]), int(r[4]), int(r[5])])


class StopReason(str, enum.Enum):
    CONSENSUS = "Consensus"
    FIXATED_FROZEN = "FixatedFrozen"
    TIME = "TimeReached"
    MAX_EVENTS = "MaxEvents"
    TRUNCATED = "Truncated"


@dataclass(frozen=True)
class Stop:
    """Stop when any of the given conditions fires."""

    t_max: float | None = None
    max_events: int | None = None
    extinction: bool = False
    hard_budget: int = DEFAULT_HARD_BUDGET


@dataclass
class RunSummary:
    reason: StopReason
    clock: float
    events: int
    active_events: int
    annihilations: int
    observers: dict = field(default_factory=dict)


class Engine:
    """Owns a coupled (opinions, particle view) pair and its dynamics stream.

    Args:
        params: model parameters.
        lattice: sites and boundary.
        opinions: initial profiles, one ``uint64`` per site.
        rng: dynamics random stream; consumed in blocks of four uniforms per event.
        record_all: keep inactive arrows in the log as well.
        keep_log: keep the arrow log at all (genealogy and ledgers need it).
        skip_absorbed: once no particle can ever move again, jump straight to the
            requested horizon instead of drawing the remaining no-op arrows. The
            state path is unchanged; event counts then exclude the skipped arrows.
    """

    def __init__(self, params: ModelParams, lattice: LatticeSpec, opinions, rng: np.random.Generator,
                 *, record_all: bool = False, keep_log: bool = True, skip_absorbed: bool = False,
                 buffer_events: int = 1 << 16):
        opinions = np.array(opinions, dtype=np.uint64)
        if opinions.shape != (lattice.sites,):
            raise ValueError(f"expected {lattice.sites} opinions, got shape {opinions.shape}")
        if np.any(opinions & ~np.uint64(params.mask)):
            raise ValueError(f"opinion words have bits above position F-1 = {params.F - 1}")
        self.params = params
        self.lattice = lattice
        self.state = LatticeState(params, lattice, opinions)
        self.initial_opinions = opinions.copy()
        xi = derive_xi(opinions, lattice.ring)
        self.view = ParticleView(xi, popcount64(xi))
        self.initial_view = self.view.copy()
        self.rates = rate_table(params)
        self.rng = rng
        self.record_all = record_all
        self.keep_log = keep_log
        self.skip_absorbed = skip_absorbed
        self._buffer_events = int(buffer_events)

        self._ictr = np.zeros(K.N_ICTR, dtype=np.int64)
        self._fctr = np.zeros(K.N_FCTR, dtype=np.float64)
        self._last = np.zeros(K.N_LAST, dtype=np.int64)
        self._ictr[K.PARTICLES] = int(self.view.zeta.sum())
        z = self.view.zeta
        self._ictr[K.LIVE_EDGES] = int(np.count_nonzero((z > 0) & (self.rates[z] > 0)))
        self._fctr[K.NEXT_TIME] = -math.log1p(-rng.random()) / (lattice.sites * params.F)
        self._uniforms = np.empty(0, dtype=np.float64)
        self._ictr[K.CURSOR] = 0

        self.qualifying = np.zeros(params.F + 1, dtype=np.int64)
        self.activated = np.zeros(params.F + 1, dtype=np.int64)
        self.touched = np.zeros(self.view.edges, dtype=np.bool_)
        self._log_f = np.empty(1024, dtype=np.float64)
        self._log_i = np.empty((1024, K.N_LOG_COLS), dtype=np.int64)
        self._scratch = np.empty(self.view.edges, dtype=np.uint64)

    @classmethod
    def from_init(cls, params: ModelParams, lattice: LatticeSpec, init: InitSpec,
                  init_rng: np.random.Generator, dynamics_rng: np.random.Generator, **kw) -> "Engine":
        opinions = sample_configuration(init, params.F, lattice.sites, init_rng)
        return cls(params, lattice, opinions, dynamics_rng, **kw)

    # -- read-only accessors -------------------------------------------------
    @property
    def clock(self) -> float:
        return float(self._fctr[K.CLOCK])

    @property
    def event_count(self) -> int:
        return int(self._ictr[K.EVENTS])

    @property
    def active_events(self) -> int:
        return int(self._ictr[K.ACTIVE])

    @property
    def annihilations(self) -> int:
        return int(self._ictr[K.ANNIHILATIONS])

    @property
    def particles(self) -> int:
        return int(self._ictr[K.PARTICLES])

    @property
    def live_edges(self) -> int:
        return int(self._ictr[K.LIVE_EDGES])

    @property
    def log(self) -> ActiveArrowLog:
        if not self.keep_log:
            raise RuntimeError("arrow log disabled (keep_log=False)")
        n = int(self._ictr[K.LOG_POS])
        return ActiveArrowLog(self._log_f[:n], self._log_i[:n], self.lattice.sites, self.lattice.ring)

    def absorbed(self) -> bool:
        return self.particles == 0 or self.live_edges == 0

    # -- dynamics ---------------------------------------------------------------
    def _refill(self) -> None:
        c = int(self._ictr[K.CURSOR])
        rest = self._uniforms[c:]
        self._uniforms = np.concatenate([rest, self.rng.random(4 * self._buffer_events)])
        self._ictr[K.CURSOR] = 0

    def _grow_log(self) -> None:
        if not self.keep_log:
            self._ictr[K.LOG_POS] = 0
            return
        n = self._log_f.shape[0]
        self._log_f = np.resize(self._log_f, 2 * n)
        self._log_i = np.resize(self._log_i, (2 * n, K.N_LOG_COLS))

    def advance(self, t_max: float = math.inf, max_events: int | None = None,
                stop_on_extinct: bool = False, audit: bool = False) -> int:
        """Run the compiled loop until a stop status; returns the kernel status code."""
        if max_events is None:
            max_events = np.iinfo(np.int64).max
        self.state.clock = self.clock
        while True:
            status = K.run_events(
                self.state.opinions, self.view.xi, self.view.zeta, self.rates,
                self.lattice.ring, self.params.F, self._uniforms, self._ictr, self._fctr,
                self._last, self.qualifying, self.activated, self.touched,
                self._log_f, self._log_i, self.record_all,
                float(t_max), int(max_events), bool(stop_on_extinct), bool(audit), self._scratch,
                bool(self.skip_absorbed),
            )
            if status == K.NEED_RANDOM:
                self._refill()
            elif status == K.LOG_FULL:
                self._grow_log()
            elif status == K.AUDIT_FAIL:
                raise CouplingError(
                    f"coupling audit failed after event {self.event_count} at t={self.clock}: "
                    f"last event {self._last.tolist()}")
            else:
                break
        self.state.clock = self.clock
        self.state.event_count = self.event_count
        return status

    def last_event(self) -> ArrowEvent:
        x, i, B, act, ann, e = (int(v) for v in self._last)
        far = -1
        if act:
            L = self.lattice.sites
            y = x + B
            if self.lattice.ring:
                y %= L
                far = y if B == 1 else (y - 1) % L
            elif B == 1:
                far = y if y < L - 1 else -1
            else:
                far = y - 1 if y > 0 else -1
        return ArrowEvent(time=float(self._fctr[K.LAST_TIME]), site=x, level=i, direction=B,
                          mark=float(self._fctr[K.LAST_MARK]), active=bool(act), annihilated=bool(ann),
                          edge=e, far_edge=far)

    def step(self, log=None, observers=(), audit: bool = False) -> ArrowEvent:
        """Process exactly one arrow event.

        ``log`` receives the event via ``append``; each observer is called as
        ``observer(event, engine)`` before returning.
        """
        self.advance(max_events=self.event_count + 1, audit=audit)
        event = self.last_event()
        if log is not None:
            log.append(event)
        for obs in observers:
            obs(event, self)
        return event

    def run(self, stop: Stop, observers=(), sample_times=()) -> RunSummary:
        """Advance until ``stop`` fires.

        Observers are objects with ``sample(engine)`` (called at each time in
        ``sample_times`` that is reached, in order) and ``result()``.
        """
        limit_events = stop.hard_budget if stop.max_events is None else min(stop.max_events, stop.hard_budget)
        t_max = math.inf if stop.t_max is None else float(stop.t_max)
        reason = None
        for ts in sorted(sample_times):
            if ts > t_max:
                break
            status = self.advance(t_max=ts, max_events=limit_events, stop_on_extinct=stop.extinction)
            if status != K.STOP_TIME:
                reason = status
                break
            for obs in observers:
                obs.sample(self)
        if reason is None:
            reason = self.advance(t_max=t_max, max_events=limit_events, stop_on_extinct=stop.extinction)
        if reason == K.STOP_EXTINCT:
            why = StopReason.CONSENSUS if self.particles == 0 else StopReason.FIXATED_FROZEN
        elif reason == K.STOP_TIME:
            why = StopReason.TIME
        elif stop.max_events is not None and self.event_count >= stop.max_events:
            why = StopReason.MAX_EVENTS
        else:
            why = StopReason.TRUNCATED
            logger.warning("run truncated at hard budget of %d events (t=%.6g)", stop.hard_budget, self.clock)
        return RunSummary(why, self.clock, self.event_count, self.active_events, self.annihilations,
                          {getattr(o, "name", type(o).__name__): o.result() for o in observers})
