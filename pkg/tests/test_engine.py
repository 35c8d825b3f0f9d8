from fractions import Fraction

import numpy as np
import pytest

from reference import reference_run
from vdeffuant.engine import Engine, Stop, StopReason, rate, rate_table
from vdeffuant.opinions import Boundary, Dynamics, InitSpec, LatticeSpec, ModelParams
from vdeffuant.particles import derive


def make(F=4, theta=2, L=64, boundary=Boundary.PERIODIC, dynamics=Dynamics.DEFFUANT, seed=7, **kw):
    params = ModelParams(F, theta, dynamics)
    lat = LatticeSpec(L, boundary)
    return Engine.from_init(params, lat, InitSpec.uniform(), np.random.default_rng(seed),
                            np.random.default_rng(seed + 1000), **kw)


def test_rates():
    p = ModelParams(5, 2)
    assert [rate(p, j) for j in range(6)] == [0, 1, Fraction(1, 2), 0, 0, 0]
    a = ModelParams(4, 0, Dynamics.AXELROD)
    assert [rate(a, j) for j in range(5)] == [0, Fraction(3, 4), Fraction(1, 4), Fraction(1, 12), 0]
    with pytest.raises(ValueError):
        rate(p, 6)


@pytest.mark.parametrize("boundary", [Boundary.PERIODIC, Boundary.FREE_INTERVAL])
@pytest.mark.parametrize("dynamics", [Dynamics.DEFFUANT, Dynamics.AXELROD])
def test_compiled_engine_matches_reference(boundary, dynamics):
    params = ModelParams(4, 2, dynamics)
    lat = LatticeSpec(40, boundary)
    op0 = np.random.default_rng(3).integers(0, 16, 40).astype(np.uint64)
    eng = Engine(params, lat, op0, np.random.default_rng(11), record_all=True, buffer_events=97)
    eng.advance(max_events=5000)
    ref_op, ref_events = reference_run(op0, 4, 40, lat.ring, rate_table(params), np.random.default_rng(11), 5000)
    assert np.array_equal(eng.state.opinions, ref_op)
    log = eng.log
    assert len(log) == 5000
    assert np.allclose(log.times, [e[0] for e in ref_events], rtol=1e-12)
    assert log.rows[:, 1].tolist() == [e[1] for e in ref_events]
    assert log.rows[:, 2].tolist() == [e[2] for e in ref_events]
    assert log.rows[:, 4].astype(bool).tolist() == [e[4] for e in ref_events]


def test_step_and_bulk_runs_agree():
    a = make(seed=5)
    b = make(seed=5)
    for _ in range(3000):
        a.step()
    b.advance(max_events=3000)
    assert np.array_equal(a.state.opinions, b.state.opinions)
    assert a.clock == b.clock
    assert np.array_equal(a.log.times, b.log.times)


def test_chunked_horizons_agree():
    a = make(seed=9)
    b = make(seed=9)
    for t in np.linspace(0.5, 20, 40):
        a.advance(t_max=t)
    b.advance(t_max=20)
    assert np.array_equal(a.state.opinions, b.state.opinions)
    assert a.event_count == b.event_count
    assert a.clock == b.clock == 20


def test_step_mode_view_matches_recomputation():
    eng = make(F=4, theta=2, L=32, seed=1)
    total = eng.particles
    for _ in range(4000):
        ev = eng.step(audit=True)
        assert derive(eng.state) == eng.view
        if ev.active:
            assert total - eng.particles == (2 if ev.annihilated else 0)
        total = eng.particles


def test_interval_particles_exit():
    params = ModelParams(1, 1)
    lat = LatticeSpec(5, Boundary.FREE_INTERVAL)
    eng = Engine(params, lat, np.array([1, 0, 0, 0, 0], dtype=np.uint64), np.random.default_rng(0))
    summary = eng.run(Stop(t_max=1e6, extinction=True))
    assert summary.reason is StopReason.CONSENSUS
    assert len(set(eng.state.opinions.tolist())) == 1


def test_voter_reduction_reaches_consensus():
    eng = make(F=1, theta=1, L=64, seed=3)
    assert eng.run(Stop(t_max=1e7, extinction=True)).reason is StopReason.CONSENSUS
    assert eng.particles == 0


def test_all_blockades_fixate_immediately():
    params = ModelParams(3, 1)
    lat = LatticeSpec(64, Boundary.PERIODIC)
    op = np.tile(np.array([0, 7], dtype=np.uint64), 32)
    eng = Engine(params, lat, op, np.random.default_rng(0))
    summary = eng.run(Stop(t_max=100, extinction=True))
    assert summary.reason is StopReason.FIXATED_FROZEN
    assert summary.events == 0


def test_max_events_stop():
    eng = make(seed=2)
    summary = eng.run(Stop(max_events=123))
    assert summary.reason is StopReason.MAX_EVENTS
    assert summary.events == 123


def test_hard_budget_truncates():
    eng = make(F=1, theta=1, L=512, seed=2)
    summary = eng.run(Stop(t_max=1e9, hard_budget=1000))
    assert summary.reason is StopReason.TRUNCATED


def test_skip_absorbed_preserves_state_path():
    a = make(F=9, theta=2, L=128, seed=4)
    b = make(F=9, theta=2, L=128, seed=4, skip_absorbed=True)
    a.advance(t_max=300)
    b.advance(t_max=300)
    assert a.absorbed()
    assert np.array_equal(a.state.opinions, b.state.opinions)
    assert np.array_equal(a.log.times, b.log.times)
    assert b.clock == 300
    assert b.event_count < a.event_count


def test_sample_times_observer():
    class Clock:
        name = "clock"

        def __init__(self):
            self.seen = []

        def sample(self, engine):
            self.seen.append(engine.clock)

        def result(self):
            return self.seen

    eng = make(seed=6)
    summary = eng.run(Stop(t_max=8), [Clock()], [1, 2, 4, 8])
    assert summary.observers["clock"] == [1, 2, 4, 8]


def test_rejects_bits_above_F():
    with pytest.raises(ValueError):
        Engine(ModelParams(2, 1), LatticeSpec(4), np.array([0, 4, 0, 0], dtype=np.uint64),
               np.random.default_rng(0))


def test_blockade_arrows_never_fire():
    eng = make(F=6, theta=2, L=128, seed=8)
    eng.advance(max_events=200_000)
    assert eng.activated[3:].sum() == 0
    assert eng.qualifying[3:].sum() > 0
