"""Pilot for the coexistence and clustering guard values used by the acceptance suite.

Writes ``tests/data/pilot.json`` with the seeds and the measured statistics.
Run: ``python scripts/pilot_coexistence.py``.
"""
import json
from pathlib import Path

import numpy as np

from vdeffuant.experiments import ExperimentConfig, geometric_grid, make_engine
from vdeffuant.genealogy import reach_stats

SEEDS = (0, 1, 2)
SITES, T_END, T_MID, REPS = 2048, 2000.0, 1000.0, 32


def measure(F: int, theta: int, seed: int) -> dict:
    cfg = ExperimentConfig(F=F, theta=theta, sites=SITES, t_max=T_END, replicates=REPS, seed=seed)
    blockades = survivors = stable = monotone = 0
    dens0 = densT = 0.0
    for k in range(REPS):
        eng = make_engine(cfg, k, keep_log=True)
        b0 = eng.initial_view.zeta > theta
        series = [eng.particles / SITES]
        for t in geometric_grid(T_END)[1:]:
            eng.advance(t_max=t)
            series.append(eng.particles / SITES)
        monotone += bool(np.all(np.diff(series) <= 0))
        dens0 += series[0] / REPS
        densT += series[-1] / REPS
        blockades += int(b0.sum())
        survivors += int(np.count_nonzero(b0 & ~eng.touched & (eng.view.zeta > theta)))
        stable += reach_stats(eng.log, T_MID, F).per_level == reach_stats(eng.log, T_END, F).per_level
    return {"F": F, "theta": theta, "seed": seed, "blockade_survival": survivors / max(blockades, 1),
            "stabilized_fraction": stable / REPS, "monotone_replicates": monotone,
            "density_ratio": densT / dens0}


def main() -> None:
    rows = [measure(F, theta, s) for s in SEEDS for F, theta in ((9, 2), (2, 1))]
    out = Path(__file__).resolve().parents[1] / "tests" / "data" / "pilot.json"
    out.parent.mkdir(exist_ok=True)
    out.write_text(json.dumps({"sites": SITES, "t_end": T_END, "t_mid": T_MID, "replicates": REPS,
                               "acceptance_seed": SEEDS[0], "runs": rows}, indent=2) + "\n")
    for r in rows:
        print(r)


if __name__ == "__main__":
    main()
