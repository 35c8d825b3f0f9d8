"""The annihilating-random-walk picture coupled to the opinion configuration.

Edge ``e`` joins sites ``e`` and ``e + 1`` (wrapping on the ring). Its
occupation word ``xi[e]`` has bit ``i`` set when the endpoints disagree on
issue ``i``; the pile size ``zeta[e]`` is the popcount of that word.
"""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field

import numpy as np

from . import _kernel
from .opinions import popcount64


class EdgeClass(enum.IntEnum):
    EMPTY = 0
    LIVE = 1
    BLOCKADE = 2


@dataclass
class ParticleView:
    xi: np.ndarray
    zeta: np.ndarray

    def copy(self) -> "ParticleView":
        return ParticleView(self.xi.copy(), self.zeta.copy())

    def __eq__(self, other):
        if not isinstance(other, ParticleView):
            return NotImplemented
        return np.array_equal(self.xi, other.xi) and np.array_equal(self.zeta, other.zeta)

    @property
    def edges(self) -> int:
        return self.xi.shape[0]

    def total(self) -> int:
        return int(self.zeta.sum())


def derive_xi(opinions: np.ndarray, ring: bool) -> np.ndarray:
    opinions = np.asarray(opinions, dtype=np.uint64)
    xi = opinions[:-1] ^ opinions[1:]
    if ring:
        xi = np.append(xi, opinions[-1] ^ opinions[0])
    return xi


def derive(state) -> ParticleView:
    """Recompute the particle view from scratch from ``state.opinions``."""
    xi = derive_xi(state.opinions, state.lattice.ring)
    return ParticleView(xi, popcount64(xi))


def classify(view: ParticleView, theta: int) -> np.ndarray:
    """Per-edge :class:`EdgeClass` codes: empty, live (``0 < zeta <= theta``) or blockade."""
    z = np.asarray(view.zeta)
    out = np.full(z.shape, EdgeClass.LIVE, dtype=np.int8)
    out[z == 0] = EdgeClass.EMPTY
    out[z > theta] = EdgeClass.BLOCKADE
    return out


def level_parity(view: ParticleView, i: int) -> int:
    bit = np.uint64(1) << np.uint64(i)
    return int(np.count_nonzero(view.xi & bit) % 2)


@dataclass(frozen=True)
class Densities:
    active_per_edge: float
    frozen_per_edge: float
    blockade_fraction: float

    @property
    def particles_per_edge(self) -> float:
        return self.active_per_edge + self.frozen_per_edge


def densities(view: ParticleView, theta: int) -> Densities:
    cls = classify(view, theta)
    z = view.zeta
    n = z.shape[0]
    live = cls == EdgeClass.LIVE
    frozen = cls == EdgeClass.BLOCKADE
    return Densities(
        active_per_edge=float(z[live].sum()) / n,
        frozen_per_edge=float(z[frozen].sum()) / n,
        blockade_fraction=float(frozen.sum()) / n,
    )


class LedgerPhase(enum.IntEnum):
    WATCHING = 0
    CLOSED = 1


@dataclass
class ContributionLedger:
    """Per-edge running contribution of each initial pile.

    An edge that starts live (or empty) counts incoming particles that annihilate
    on it or freeze there, until one of its original particles leaves or is
    annihilated; it then closes at ``count - initial size``. When an incoming
    particle annihilates an original one, ``count_then_close`` includes that
    annihilation in the count. An edge that starts
    as a blockade counts the same events until its pile first drops to the
    freezing threshold, and closes at ``count - threshold``.

    The ledger only observes; it never feeds back into the dynamics.
    """

    threshold: int
    initial_size: np.ndarray
    kind: np.ndarray
    originals: np.ndarray
    closed: np.ndarray
    count: np.ndarray
    final: np.ndarray
    ring: bool = True
    count_then_close: bool = True
    last_time: float = field(default=0.0)

    @classmethod
    def start(cls, view: ParticleView, threshold: int, ring: bool = True,
              count_then_close: bool = True) -> "ContributionLedger":
        zeta = np.asarray(view.zeta, dtype=np.int64)
        n = zeta.shape[0]
        return cls(
            threshold=int(threshold),
            initial_size=zeta.copy(),
            kind=(zeta > threshold).astype(np.int8),
            originals=np.asarray(view.xi, dtype=np.uint64).copy(),
            closed=np.zeros(n, dtype=np.bool_),
            count=np.zeros(n, dtype=np.int64),
            final=np.zeros(n, dtype=np.int64),
            ring=ring,
            count_then_close=count_then_close,
        )

    @classmethod
    def from_log(cls, initial_view: ParticleView, threshold: int, log, ring: bool = True,
                 count_then_close: bool = True) -> "ContributionLedger":
        """Build the ledger offline by replaying an active-arrow log."""
        ledger = cls.start(initial_view, threshold, ring, count_then_close)
        _kernel.replay_ledger(
            np.asarray(initial_view.xi, dtype=np.uint64), ring, ledger.threshold,
            log.rows, len(log), ledger.kind, ledger.initial_size, ledger.originals,
            ledger.closed, ledger.count, ledger.final, ledger.count_then_close,
        )
        if len(log):
            ledger.last_time = float(log.times[len(log) - 1])
        return ledger

    def observe(self, event, view: ParticleView) -> None:
        """Feed one event; ``view`` is the particle view right after it."""
        if event.time < self.last_time:
            raise ValueError(f"event at t={event.time} precedes last observed t={self.last_time}")
        self.last_time = event.time
        if not event.active:
            return
        e, e2 = event.edge, event.far_edge
        z2 = int(view.zeta[e2]) if e2 >= 0 else 0
        _kernel.ledger_update(e, e2, event.level, event.annihilated, z2, self.threshold,
                              self.kind, self.initial_size, self.originals, self.closed,
                              self.count, self.final, self.count_then_close)

    @property
    def tally(self) -> np.ndarray:
        """Closed value where closed, running ``count - reference`` otherwise."""
        ref = np.where(self.kind == 1, self.threshold, self.initial_size)
        return np.where(self.closed, self.final, self.count - ref)

    def closed_tallies(self, initial_size: int) -> np.ndarray:
        mask = self.closed & (self.initial_size == initial_size)
        return self.final[mask]

    def write_csv(self, path) -> None:
        tally = self.tally
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["edge_index", "initial_size", "tally", "closed_flag"])
            for e in range(self.initial_size.shape[0]):
                w.writerow([e, int(self.initial_size[e]), int(tally[e]), int(self.closed[e])])


def write_snapshot_csv(view: ParticleView, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["edge_index", "zeta", "xi_bits_hex"])
        for e in range(view.edges):
            w.writerow([e, int(view.zeta[e]), format(int(view.xi[e]), "x")])
