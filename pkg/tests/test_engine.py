import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hsclusters.engine import (CollisionLog, Face, OverlapError, ParticleState, SimConfig,
                               predict_pair_collision, predict_wall_collision,
                               resolve_pair_collision, resolve_wall_collision, run)
from hsclusters.initial import (VelocityDistribution, make_initial_condition, rng_stream,
                                sample_positions)

from oracles import replay


def ps(x, v):
    return ParticleState(np.array(x, float), np.array(v, float))


# --- time of impact ---------------------------------------------------------

def test_pair_closing_gap():
    a = ps((0.05, 0.5, 0.5), (1, 0, 0))
    b = ps((0.95, 0.5, 0.5), (0, 0, 0))
    assert predict_pair_collision(a, b, 0.1) == pytest.approx(0.8, rel=1e-14)


def test_pair_equal_velocities_never_meet():
    a = ps((0.2, 0.3, 0.4), (0.3, -1, 2))
    b = ps((0.7, 0.1, 0.9), (0.3, -1, 2))
    assert predict_pair_collision(a, b, 0.1) is None


def test_pair_receding():
    a = ps((0.4, 0.5, 0.5), (-1, 0.1, 0))
    b = ps((0.6, 0.5, 0.5), (1, 0, 0))
    assert predict_pair_collision(a, b, 0.1) is None


def test_pair_miss_by_impact_parameter():
    a = ps((0.2, 0.5, 0.5), (1, 0, 0))
    b = ps((0.8, 0.65, 0.5), (0, 0, 0))
    assert predict_pair_collision(a, b, 0.1) is None
    b = ps((0.8, 0.59, 0.5), (0, 0, 0))
    s = predict_pair_collision(a, b, 0.1)
    # offset 0.09 across, so the along-axis gap at contact is sqrt(0.01 - 0.0081)
    assert s == pytest.approx(0.6 - math.sqrt(0.01 - 0.0081), rel=1e-12)


def test_pair_overlap_is_an_error():
    a = ps((0.5, 0.5, 0.5), (1, 0, 0))
    b = ps((0.55, 0.5, 0.5), (0, 0, 0))
    with pytest.raises(OverlapError):
        predict_pair_collision(a, b, 0.1)


def test_pair_touching_and_approaching_is_immediate():
    a = ps((0.5, 0.5, 0.5), (1, 0, 0))
    b = ps((0.6, 0.5, 0.5), (0, 0, 0))
    s = predict_pair_collision(a, b, 0.1)
    assert s is not None and abs(s) < 1e-12


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=12, max_size=12), st.floats(0.01, 0.3))
def test_pair_time_lands_on_contact(vals, eps):
    xa, va, xb, vb = (np.array(vals[k:k + 3]) for k in range(0, 12, 3))
    if np.linalg.norm(xa - xb) < eps * 1.001:
        return
    s = predict_pair_collision(ps(xa, va), ps(xb, vb), eps)
    if s is None:
        return
    d = np.linalg.norm((xa + va * s) - (xb + vb * s))
    assert s > 0
    assert d == pytest.approx(eps, rel=1e-8)
    # and never closer than eps before s
    for u in np.linspace(0, s, 17):
        assert np.linalg.norm((xa + va * u) - (xb + vb * u)) >= eps * (1 - 1e-9)


# --- walls --------------------------------------------------------------------

def test_wall_positive_x():
    s, face = predict_wall_collision(ps((0.5, 0.5, 0.5), (2, 0, 0)), 1.0)
    assert s == 0.25 and face is Face.POS_X


def test_wall_at_rest():
    s, face = predict_wall_collision(ps((0.5, 0.5, 0.5), (0, 0, 0)), 1.0)
    assert math.isinf(s) and face is None


def test_wall_exact_tie_prefers_lower_axis():
    s, face = predict_wall_collision(ps((0.25, 0.75, 0.5), (-1, 1, 0)), 1.0)
    assert s == 0.25 and face is Face.NEG_X
    s, face = predict_wall_collision(ps((0.75, 0.5, 0.25), (1, 0, -1)), 1.0)
    assert face is Face.POS_X


def test_wall_decimal_near_tie():
    # 1 - 0.9 rounds below 0.1, so +y is strictly first in binary floating point
    s, face = predict_wall_collision(ps((0.1, 0.9, 0.5), (-1, 1, 0)), 1.0)
    assert s == pytest.approx(0.1, abs=1e-15)
    assert face in (Face.NEG_X, Face.POS_Y)


def test_wall_offset_for_surface_contact():
    s, face = predict_wall_collision(ps((0.5, 0.5, 0.5), (1, 0, 0)), 1.0, offset=0.05)
    assert s == pytest.approx(0.45) and face is Face.POS_X


def test_resolve_wall():
    assert np.array_equal(resolve_wall_collision((1, 2, 3), Face.POS_X), [-1, 2, 3])
    assert np.array_equal(resolve_wall_collision((0, 1, 0), Face.POS_X), [0, 1, 0])
    assert np.array_equal(resolve_wall_collision((1, 2, 3), Face.NEG_Z), [1, 2, -3])


# --- pair resolution --------------------------------------------------------

def test_resolve_head_on_exchange():
    v, v1 = resolve_pair_collision((1, 0, 0), (0, 0, 0), (1, 0, 0))
    assert np.array_equal(v, [0, 0, 0]) and np.array_equal(v1, [1, 0, 0])


def test_resolve_equal_velocities_unchanged():
    v, v1 = resolve_pair_collision((0.3, 0.2, 1), (0.3, 0.2, 1), (0, 0.6, 0.8))
    assert np.array_equal(v, [0.3, 0.2, 1]) and np.array_equal(v1, [0.3, 0.2, 1])


def test_resolve_grazing_unchanged():
    v, v1 = resolve_pair_collision((1, 0, 0), (0, 0, 0), (0, 1, 0))
    assert np.array_equal(v, [1, 0, 0]) and np.array_equal(v1, [0, 0, 0])


def test_resolve_rejects_non_unit_omega():
    with pytest.raises(ValueError):
        resolve_pair_collision((1, 0, 0), (0, 0, 0), (1, 1e-4, 0))


unit = st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)).filter(
    lambda w: 0.1 < np.linalg.norm(w)).map(lambda w: np.array(w) / np.linalg.norm(w))
vec = st.tuples(*[st.floats(-10, 10)] * 3).map(np.array)


@settings(max_examples=500, deadline=None)
@given(vec, vec, unit)
def test_resolve_conserves_momentum_and_energy(v, v1, w):
    a, b = resolve_pair_collision(v, v1, w)
    np.testing.assert_allclose(a + b, v + v1, rtol=0, atol=1e-12)
    e0 = v @ v + v1 @ v1
    assert a @ a + b @ b == pytest.approx(e0, rel=1e-12, abs=1e-12)
    # the relative velocity flips along omega and is unchanged across it
    assert w @ (a - b) == pytest.approx(-(w @ (v - v1)), abs=1e-10)


# --- configuration ----------------------------------------------------------

def test_config_defaults_and_validation():
    cfg = SimConfig(1802, t_end=2.0)
    assert cfg.epsilon == pytest.approx(1802 ** -0.5)
    assert cfg.wall_offset == pytest.approx(cfg.epsilon / 2)
    assert SimConfig(10, 1.0, wall_contact="center").wall_offset == 0.0
    for bad in (dict(n_particles=1, t_end=1.0), dict(n_particles=5, t_end=0.0),
                dict(n_particles=5, t_end=1.0, epsilon=0.6),
                dict(n_particles=5, t_end=1.0, sample_times=[0.5, 0.2]),
                dict(n_particles=5, t_end=1.0, sample_times=[1.5]),
                dict(n_particles=5, t_end=1.0, wall_contact="sticky")):
        with pytest.raises(ValueError):
            SimConfig(**bad)


def test_run_rejects_initial_overlap():
    states = [ps((0.5, 0.5, 0.5), (0, 0, 0)), ps((0.55, 0.5, 0.5), (0, 0, 0))]
    with pytest.raises(OverlapError):
        run(SimConfig(2, 1.0, epsilon=0.1), states)


def test_run_rejects_centres_in_walls():
    states = [ps((0.01, 0.5, 0.5), (0, 0, 0)), ps((0.5, 0.5, 0.5), (0, 0, 0))]
    with pytest.raises(ValueError):
        run(SimConfig(2, 1.0, epsilon=0.1), states)
    with pytest.raises(ValueError):
        run(SimConfig(3, 1.0, epsilon=0.1), states)


# --- whole runs ---------------------------------------------------------------

def test_head_on_run_logs_one_collision():
    states = [ps((0.2, 0.5, 0.5), (1, 0, 0)), ps((0.6, 0.5, 0.5), (0, 0, 0))]
    res = run(SimConfig(2, 0.9, epsilon=0.1, sample_times=[0.5, 0.9]), states)
    assert res.m_c == 1
    rec = res.log[0]
    assert rec.t == pytest.approx(0.3, abs=1e-15)
    assert (rec.p, rec.q) == (0, 1)
    np.testing.assert_array_equal(rec.omega, [1, 0, 0])
    np.testing.assert_array_equal(res.velocities[0], [[0, 0, 0], [1, 0, 0]])
    # particle 1 bounced off x = 1 - eps/2 at t = 0.65 and is on its way back
    np.testing.assert_array_equal(res.velocities[1], [[0, 0, 0], [-1, 0, 0]])
    np.testing.assert_allclose(res.positions[1][1], [0.95 - 0.25, 0.5, 0.5], atol=1e-14)
    assert res.n_wall_events == 1


def _ic(n, seed=0, dist=None):
    return make_initial_condition(n, dist or VelocityDistribution.case1(), rng_stream(seed, n))


def test_determinism_bit_identical():
    ic = _ic(400, seed=5)
    cfg = SimConfig(400, 1.0, sample_times=[0.5, 1.0])
    a, b = run(cfg, ic), run(cfg, ic)
    assert a.log == b.log
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(a.velocities, b.velocities)


@pytest.mark.parametrize("cells", [False, True])
def test_velocity_doubling_halves_times_exactly(cells):
    ic = _ic(1802, seed=11)
    base = run(SimConfig(1802, 1.0, cells=cells), ic)
    fast = run(SimConfig(1802, 0.5, cells=cells), ic.scaled(2.0))
    assert base.m_c > 1000
    assert np.array_equal(base.log.p, fast.log.p)
    assert np.array_equal(base.log.q, fast.log.q)
    assert np.array_equal(base.log.omega, fast.log.omega)
    assert np.array_equal(base.log.t, 2 * fast.log.t)


def test_invariants_on_a_moderate_run():
    n = 500
    ic = _ic(n, seed=2)
    res = run(SimConfig(n, 2.0, sample_times=[0.5, 1.0, 1.5, 2.0], check_overlaps=True), ic)
    drift = np.abs(res.energy_trace - res.initial_energy) / res.initial_energy
    assert drift.max() <= 1e-9
    assert res.min_gap_ratio >= 1 - 1e-9
    norms = np.linalg.norm(res.log.omega, axis=1)
    assert np.all(np.abs(norms - 1) <= 1e-12)
    assert np.all(res.approach_speed > 0)
    assert np.all(res.log.p < res.log.q)
    assert np.all(np.diff(res.log.t) >= 0)
    off = res.config.wall_offset
    assert np.all(res.positions >= off - 1e-12) and np.all(res.positions <= 1 - off + 1e-12)


@pytest.mark.parametrize("wall_contact", ["surface", "center"])
def test_trajectory_replay_small_systems(wall_contact):
    rng = np.random.default_rng(7)
    checked = 0
    for _ in range(12):
        n = int(rng.integers(2, 5))
        eps = 0.25
        off = SimConfig(n, 1.0, epsilon=eps, wall_contact=wall_contact).wall_offset
        pos = sample_positions(n, eps, 1.0, rng)
        vel = rng.normal(size=(n, 3))
        times = list(np.linspace(0.5, 6.0, 12))
        cfg = SimConfig(n, 6.0, epsilon=eps, sample_times=times, wall_contact=wall_contact)
        res = run(cfg, (pos, vel))
        snaps, contact, anchors, state_at = replay(pos, vel, res.log, off, 1 - off, times)
        for s, t in enumerate(times):
            np.testing.assert_allclose(res.positions[s], snaps[t], atol=1e-8)
        np.testing.assert_allclose(contact, eps, rtol=1e-9)
        # no pair passes through another between logged collisions
        grid = np.linspace(0, 6.0, 3001)
        events = list(res.log.t)
        anch = [(0.0, pos[k].copy(), vel[k].copy()) for k in range(n)]
        e = 0
        for t in grid:
            while e < len(events) and events[e] <= t:
                tm, p, q, w = res.log[e]
                xp, vp = state_at(p, tm, anch)
                xq, vq = state_at(q, tm, anch)
                k = w @ (vp - vq)
                anch[p] = (tm, xp, vp - w * k)
                anch[q] = (tm, xq, vq + w * k)
                e += 1
            xs = [state_at(k, t, anch)[0] for k in range(n)]
            for i in range(n):
                for j in range(i + 1, n):
                    assert np.linalg.norm(xs[i] - xs[j]) >= eps * (1 - 1e-6)
        checked += res.m_c
    assert checked > 20


def test_cells_match_all_pairs_before_chaos():
    ic = _ic(1802, seed=4)
    a = run(SimConfig(1802, 0.4, cells=False), ic)
    b = run(SimConfig(1802, 0.4, cells=True), ic)
    assert b.n_cell_events > 0
    assert a.m_c == b.m_c
    assert np.array_equal(a.log.p, b.log.p) and np.array_equal(a.log.q, b.log.q)
    np.testing.assert_allclose(a.log.t, b.log.t, rtol=1e-10)


def test_center_walls_reproduce_equilibrium_mean_free_time():
    # with centres reflecting at 0 and L the collision rate is the bulk value
    taus = []
    for k in range(3):
        ic = make_initial_condition(1802, VelocityDistribution.case1(), rng_stream(9, k),
                                    epsilon=1802 ** -0.5)
        res = run(SimConfig(1802, 2.0, cells=True, wall_contact="center"), ic)
        taus.append(1802 * 2.0 / (2 * res.m_c))
    assert np.mean(taus) == pytest.approx(0.2444, rel=0.03)


def test_empty_sample_times_still_logs():
    ic = _ic(50, seed=1)
    res = run(SimConfig(50, 1.0), ic)
    assert res.positions.shape == (0, 50, 3)
    assert res.m_c > 0


# --- log export ---------------------------------------------------------------

def test_log_csv_and_binary_round_trip(tmp_path):
    ic = _ic(200, seed=3)
    log = run(SimConfig(200, 1.0), ic).log
    log.write_csv(tmp_path / "log.csv")
    log.write_binary(tmp_path / "log.bin")
    assert CollisionLog.read_csv(tmp_path / "log.csv") == log
    assert CollisionLog.read_binary(tmp_path / "log.bin") == log
    assert (tmp_path / "log.bin").stat().st_size == 40 * log.m_c
    head = (tmp_path / "log.csv").read_text().splitlines()[0]
    assert head == "t,p,q,wx,wy,wz"


def test_binary_layout_is_little_endian():
    log = CollisionLog([0.5], [1], [2], [[1.0, 0.0, 0.0]])
    raw = log.to_bytes()
    assert raw[:8] == np.float64(0.5).astype("<f8").tobytes()
    assert raw[8:12] == (1).to_bytes(4, "little") and raw[12:16] == (2).to_bytes(4, "little")
    with pytest.raises(ValueError):
        CollisionLog.from_bytes(raw[:-1])


def test_log_validation():
    with pytest.raises(ValueError):
        CollisionLog([0.2, 0.1], [0, 1], [1, 2])
    with pytest.raises(ValueError):
        CollisionLog([0.2], [1], [1])
    log = CollisionLog([0.1, 0.2, 0.2, 0.3], [0, 1, 2, 0], [1, 2, 3, 3])
    assert log.cutoff(0.2) == 1 and log.cutoff(0.25) == 3 and log.cutoff(5) == 4
