"""Ancestry of opinions along active paths, reconstructed from the arrow log."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import _kernel


def ancestors(log, sites, times, levels=None) -> np.ndarray:
    """Ancestor site at time 0 of each probe ``(site, time, level)``.

    Walks backward in time: every active arrow at the probe's level that points
    at the current site moves the walker to the arrow's source. With
    ``levels=None`` the level filter is off and generalized active paths are
    followed instead.
    """
    sites = np.atleast_1d(np.asarray(sites, dtype=np.int64))
    times = np.broadcast_to(np.asarray(times, dtype=np.float64), sites.shape).copy()
    use_level = levels is not None
    if use_level:
        levels = np.broadcast_to(np.asarray(levels, dtype=np.int64), sites.shape).copy()
    else:
        levels = np.zeros_like(sites)
    return _kernel.ancestors(log.times, log.rows, len(log), log.sites, log.ring,
                             sites, times, levels, use_level)


def ancestor(log, x: int, t: float, i: int) -> int:
    return int(ancestors(log, [x], [t], [i])[0])


def displacement(a: int, b: int, sites: int, ring: bool) -> int:
    """Distance between two sites; the shorter arc on the ring."""
    d = abs(int(a) - int(b))
    return min(d, sites - d) if ring else d


@dataclass(frozen=True)
class ReachStats:
    time: float
    max_abs_displacement: int
    per_level: list

    def exceeds(self, n: int) -> bool:
        """Finite-window stand-in for an active path reaching the origin from beyond ``n``."""
        return self.max_abs_displacement > n


def reach_stats(log, t: float, F: int, origin: int = 0) -> ReachStats:
    anc = ancestors(log, np.full(F, origin), np.full(F, float(t)), np.arange(F))
    per_level = [displacement(a, origin, log.sites, log.ring) for a in anc]
    return ReachStats(float(t), max(per_level) if per_level else 0, per_level)


def write_probe_report(path, log, times, levels, origin: int = 0) -> None:
    """CSV of ``time, level, ancestor_site, displacement`` for probes of ``origin``."""
    times = np.asarray(times, dtype=np.float64)
    levels = np.asarray(levels, dtype=np.int64)
    anc = ancestors(log, np.full(times.shape, origin), times, levels)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "level", "ancestor_site", "displacement"])
        for t, i, a in zip(times, levels, anc):
            w.writerow([repr(float(t)), int(i), int(a), displacement(a, origin, log.sites, log.ring)])
