"""Exit criteria for the build; run with ``pytest tests/test_acceptance.py -v``.

A summary line per criterion is printed at the end of the session.
"""

import io
import time

import numpy as np
import pytest

from conftest import random_params
from ringtraffic.io import SpacetimeImage, write_ascii, write_pgm
from ringtraffic.model import (
    SimParams,
    agent_to_grid,
    init_state,
    step_grid_serial,
    step_serial,
)
from ringtraffic.parallel import ParallelStepper, run
from ringtraffic.prng import lcg_jump, seed_lcg

CONGESTED = dict(road_length=1000, car_count=200, v_max=5, p=0.13)
M = 2**31 - 1


def physical_cores():
    try:
        import psutil

        return psutil.cpu_count(logical=False) or 1
    except ImportError:
        return 1


@pytest.fixture(scope="module", autouse=True)
def warm_up():
    # compile the kernels outside every timed region
    run(SimParams(road_length=20, car_count=5, steps=3, seed=1), 2)


@pytest.mark.criterion(1, "thread-count invariance, 200 cars on 1000 cells")
def test_c1_thread_count_invariance():
    params = SimParams(**CONGESTED, steps=1000, seed=13)
    start = time.perf_counter()
    sums = {w: run(params, w).checksum for w in (1, 2, 3, 4, 5, 8)}
    elapsed = time.perf_counter() - start
    assert len(set(sums.values())) == 1, sums
    assert elapsed < 5.0


@pytest.mark.criterion(2, "jump-ahead equals sequential iteration")
def test_c2_jump_oracle():
    spans = [0, 1, 2, 7, 100, 12345, 10**6]
    start = time.perf_counter()
    for seed in (1, 42, 2**30):
        expected = {}
        s, done = seed_lcg(seed).s, 0
        for k in spans:
            for _ in range(k - done):
                s = (48271 * s) % M
            done = k
            expected[k] = s
        for k in spans:
            assert lcg_jump(seed_lcg(seed), k).s == expected[k], (seed, k)
    assert time.perf_counter() - start < 2.0


def _sweep():
    return [random_params(np.random.default_rng(1000 + i)) for i in range(100)]


@pytest.mark.criterion(3, "agent and grid serial paths give identical occupancy")
def test_c3_representation_equivalence():
    start = time.perf_counter()
    for params in _sweep():
        state = init_state(params)
        grid = agent_to_grid(state)
        rng_a = rng_g = seed_lcg(params.seed)
        for t in range(params.steps):
            state, rng_a = step_serial(state, rng_a, params)
            grid, rng_g = step_grid_serial(grid, rng_g, params)
            assert np.array_equal(agent_to_grid(state).cells != -1, grid.cells != -1), (params, t)
            assert agent_to_grid(state) == grid
    assert time.perf_counter() - start < 10.0


@pytest.mark.criterion(4, "physics invariants after every step")
def test_c4_invariants():
    for params in _sweep():
        N, L = params.car_count, params.road_length
        state, rng = init_state(params), seed_lcg(params.seed)
        for _ in range(params.steps):
            before = state
            state, rng = step_serial(state, rng, params)
            x, v = state.positions, state.velocities
            assert len(np.unique(x)) == N == x.size
            assert ((v >= 0) & (v <= params.v_max)).all()
            # cyclic order kept: the old cars, moved in their old order, are the
            # new ascending state rotated by the number of wrapped cars
            k = _wraps(before, state)
            moved = (before.positions + np.roll(v, -k)) % L
            assert np.count_nonzero(np.diff(moved) < 0) <= 1
        assert rng == lcg_jump(seed_lcg(params.seed), params.steps * N)
        assert run(params, 3).draws_consumed == params.steps * N


def _wraps(before, after):
    # number of cars that passed cell L-1 this step = rotation of the labels
    L, N = before.road_length, before.car_count
    for k in range(N):
        if np.array_equal((before.positions + np.roll(after.velocities, -k)) % L, np.roll(after.positions, -k)):
            return k
    raise AssertionError("state is not a rotation of the moved cars")


@pytest.mark.criterion(5, "free-flow mean velocity equals v_max - p")
def test_c5_free_flow():
    params = SimParams(road_length=4000, car_count=200, steps=10_000, seed=1, v_max=5, p=0.13)
    start = time.perf_counter()
    stepper = ParallelStepper(init_state(params), seed_lcg(params.seed), params, 1)
    means = np.empty(params.steps)
    for t in range(params.steps):
        stepper.step()
        means[t] = stepper.vel.mean()
    late = means[5000:].mean()
    print(f"free-flow mean velocity {late:.4f}")
    assert abs(late - (params.v_max - params.p)) <= 0.02
    assert time.perf_counter() - start < 30.0


@pytest.mark.criterion(6, "jams emerge and drift backwards")
def test_c6_jam_drift():
    params = SimParams(**CONGESTED, steps=1000, seed=13)
    start = time.perf_counter()
    stepper = ParallelStepper(init_state(params), seed_lcg(params.seed), params, 2)
    occupancy = np.zeros((params.steps, params.road_length))
    means = np.empty(params.steps)
    for t in range(params.steps):
        stepper.step()
        occupancy[t, stepper.pos] = 1.0
        means[t] = stepper.vel.mean()
    long_run = means[500:].mean()
    assert long_run < 4.5

    lag = 50
    rho = occupancy - occupancy.mean()
    spectra = np.fft.rfft(rho, axis=1)
    corr = np.fft.irfft(np.conj(spectra[:-lag]) * spectra[lag:], n=params.road_length, axis=1).mean(axis=0)
    shift = np.arange(params.road_length)
    shift = np.where(shift > params.road_length // 2, shift - params.road_length, shift)
    peak = int(shift[np.argmax(corr)])
    print(f"mean velocity {long_run:.3f}, correlation peak at displacement {peak}")
    assert peak < 0
    assert time.perf_counter() - start < 5.0


@pytest.mark.criterion(7, "trivial fixed points")
@pytest.mark.parametrize("p", [0.0, 0.5, 1.0])
def test_c7_gridlock(p):
    params = SimParams(road_length=30, car_count=30, steps=100, seed=4, p=p)
    start = init_state(params)
    state, grid, rng, rng_g = start, agent_to_grid(start), seed_lcg(4), seed_lcg(4)
    for _ in range(100):
        state, rng = step_serial(state, rng, params)
        grid, rng_g = step_grid_serial(grid, rng_g, params)
        assert state == start and grid == agent_to_grid(start)
    assert run(params, 4).final_state == start


@pytest.mark.criterion(7, "trivial fixed points")
def test_c7_single_car():
    still = SimParams(road_length=100, car_count=1, steps=100, seed=8, v_max=5, p=1.0)
    state, rng = init_state(still), seed_lcg(8)
    for _ in range(100):
        state, rng = step_serial(state, rng, still)
        assert state.positions.tolist() == [0] and state.velocities.tolist() == [0]

    free = SimParams(road_length=100, car_count=1, steps=100, seed=8, v_max=5, p=0.0)
    state, rng = init_state(free), seed_lcg(8)
    for t in range(1, 101):
        state, rng = step_serial(state, rng, free)
        assert state.velocities[0] == min(t, 5)


SCALING = SimParams(road_length=10**6, car_count=2 * 10**5, steps=100, seed=13)


@pytest.fixture(scope="module")
def scaling_runs():
    return {w: run(SCALING, w) for w in (1, 2, 4)}


@pytest.mark.criterion(8, "scaling smoke test: checksums agree")
def test_c8_scaling_checksums(scaling_runs):
    assert len({r.checksum for r in scaling_runs.values()}) == 1


@pytest.mark.criterion(8, "scaling smoke test: 4 workers faster than 1")
@pytest.mark.skipif(physical_cores() < 4, reason=f"needs >= 4 physical cores, found {physical_cores()}")
def test_c8_scaling_speedup(scaling_runs):
    t1 = min(scaling_runs[1].step_seconds, run(SCALING, 1).step_seconds)
    t4 = min(scaling_runs[4].step_seconds, run(SCALING, 4).step_seconds)
    print(f"1 worker {t1:.3f}s, 4 workers {t4:.3f}s, speedup {t1 / t4:.2f}")
    assert t4 < t1


@pytest.mark.criterion(9, "output contract")
def test_c9_output_contract():
    base = dict(**CONGESTED, steps=300, seed=13, output_stride=2)
    sums = {mode: run(SimParams(**base, output_mode=mode), 2).checksum for mode in ("none", "ascii", "pgm")}
    assert len(set(sums.values())) == 1

    ascii_params = SimParams(**base, output_mode="ascii")
    texts = []
    for w in (1, 8):
        sink = io.StringIO()
        write_ascii(run(ascii_params, w).frames, sink)
        texts.append(sink.getvalue().encode("ascii"))
    assert texts[0] == texts[1] and len(texts[0]) > 0

    sink = io.BytesIO()
    write_pgm(SpacetimeImage(np.array([[False, True, False]])), sink)
    assert sink.getvalue() == b"P5 3 1 255\n\xff\x00\xff"
