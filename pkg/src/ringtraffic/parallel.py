"""Thread-parallel stepping that reproduces the serial trajectory bit for bit.

Each step draws ``N`` numbers from one shared LCG sequence; the draw for the
car of rank ``i`` at step ``t`` has global index ``t*N + i``. A worker owns
a contiguous rank block ``[lo, hi)`` and a private generator clone. Between
steps the clone skips the ``N - (hi - lo)`` draws that belong to the other
blocks with one precomputed jump, so the per-step fast-forward cost is flat.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .model import AgentState, OutputMode, SimParams, init_state
from .prng import LcgState, jump_coefficients, lcg_jump, seed_lcg


@dataclass(frozen=True)
class Partition:
    blocks: tuple[tuple[int, int], ...]

    @property
    def workers(self) -> int:
        return len(self.blocks)


def make_partition(n_cars: int, workers: int) -> Partition:
    """Split ``[0, n_cars)`` into ``workers`` blocks ``[floor(b*N/W), floor((b+1)*N/W))``."""
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    if n_cars < 1:
        raise ValueError(f"car count must be >= 1, got {n_cars}")
    return Partition(
        tuple((b * n_cars // workers, (b + 1) * n_cars // workers) for b in range(workers))
    )


@dataclass
class Frame:
    step: int
    positions: np.ndarray
    velocities: np.ndarray


@dataclass
class RunResult:
    final_state: AgentState
    frames: list[Frame]
    checksum: int
    draws_consumed: int
    step_seconds: float = 0.0
    final_rng: LcgState | None = field(default=None, repr=False)


class TrajectoryHasher:
    """Streaming FNV-1a 64 over little-endian uint64 positions then velocities."""

    def __init__(self):
        self._h = _kernels.FNV_OFFSET

    def update(self, positions, velocities, head: int = 0) -> None:
        pos = np.ascontiguousarray(positions, dtype=np.int64)
        vel = np.ascontiguousarray(velocities, dtype=np.int64)
        self._h = np.uint64(_kernels.fnv1a_update(self._h, pos, vel, head))

    @property
    def digest(self) -> int:
        return int(self._h)


def checksum_trajectory(rows) -> int:
    """Digest of a sequence of ``(positions, velocities)`` rows."""
    hasher = TrajectoryHasher()
    for positions, velocities in rows:
        hasher.update(positions, velocities)
    return hasher.digest


def _check_kernel_range(rng: LcgState) -> None:
    if rng.a * (rng.m - 1) + rng.c >= 2**63:
        raise ValueError("generator constants overflow the 64-bit kernel arithmetic")


class ParallelStepper:
    """Mutable ring state advanced by ``workers`` threads.

    Slots of ``pos``/``vel`` never move; ``head`` is the slot of the car with
    the smallest position, so wrapped cars are relabelled without copying.
    """

    def __init__(
        self,
        state: AgentState,
        rng: LcgState,
        params: SimParams,
        workers: int | Partition,
        executor: ThreadPoolExecutor | None = None,
        kernel=None,
        start_step: int = 0,
    ):
        _check_kernel_range(rng)
        self.params = params
        self.rng = rng
        self.pos = state.positions.copy()
        self.vel = state.velocities.copy()
        self.head = 0
        self.step_index = start_step
        self.draws = 0
        n = self.pos.shape[0]
        if isinstance(workers, Partition):
            self.partition = workers
        else:
            self.partition = make_partition(n, workers)
        self.kernel = kernel or _kernels.velocity_block
        self.executor = executor
        self._gens = [lcg_jump(rng, start_step * n + lo).s for lo, _ in self.partition.blocks]
        self._jumps = [
            jump_coefficients(n - (hi - lo), rng.a, rng.c, rng.m) for lo, hi in self.partition.blocks
        ]

    def _velocities(self, w: int) -> None:
        lo, hi = self.partition.blocks[w]
        jc = self._jumps[w]
        p = self.params
        r = self.rng
        self._gens[w] = int(
            self.kernel(
                self.pos, self.vel, self.head, lo, hi, p.road_length, p.v_max, p.p,
                r.a, r.c, r.m, self._gens[w], jc.A, jc.C,
            )
        )

    def _move(self, w: int) -> int:
        lo, hi = self.partition.blocks[w]
        return int(_kernels.move_block(self.pos, self.vel, self.head, lo, hi, self.params.road_length))

    def step(self) -> None:
        workers = range(self.partition.workers)
        if self.executor is None:
            for w in workers:
                self._velocities(w)
            wrapped = sum(self._move(w) for w in workers)
        else:
            # list() waits for every block: the barrier between braking and moving
            list(self.executor.map(self._velocities, workers))
            wrapped = sum(self.executor.map(self._move, workers))
        n = self.pos.shape[0]
        self.head = (self.head - wrapped) % n
        self.step_index += 1
        self.draws += n

    def hash_into(self, hasher: TrajectoryHasher) -> None:
        hasher.update(self.pos, self.vel, self.head)

    def state(self) -> AgentState:
        return AgentState(
            np.roll(self.pos, -self.head), np.roll(self.vel, -self.head), self.params.road_length
        )

    def generator(self) -> LcgState:
        """Shared-sequence position at the start of the current step."""
        return lcg_jump(self.rng, self.step_index * self.pos.shape[0])


def step_parallel(
    state: AgentState,
    seed_state: LcgState,
    t: int,
    partition: Partition,
    params: SimParams,
    executor: ThreadPoolExecutor | None = None,
) -> AgentState:
    """One step at step index ``t``; every block jumps from the seed state."""
    if t < 0:
        raise ValueError(f"step index must be >= 0, got {t}")
    stepper = ParallelStepper(state, seed_state, params, partition, executor, start_step=t)
    stepper.step()
    return stepper.state()


def _record(stepper: ParallelStepper) -> Frame:
    s = stepper.state()
    return Frame(stepper.step_index, s.positions, s.velocities)


def run(
    params: SimParams,
    workers: int = 1,
    *,
    steps: int | None = None,
    record: bool | None = None,
    kernel=None,
) -> RunResult:
    """Simulate ``params.steps`` steps (or ``steps``) with ``workers`` threads.

    The checksum covers the initial state and the state after every step,
    whatever the output policy. Frames are recorded at steps
    ``0, stride, 2*stride, ...`` below the step count when output is on.
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    n_steps = params.steps if steps is None else steps
    if record is None:
        record = params.output_mode is not OutputMode.NONE
    state = init_state(params)
    rng = seed_lcg(params.seed)
    hasher = TrajectoryHasher()
    frames: list[Frame] = []
    elapsed = 0.0
    executor = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        stepper = ParallelStepper(state, rng, params, workers, executor, kernel)
        stepper.hash_into(hasher)
        for t in range(n_steps):
            if record and t % params.output_stride == 0:
                frames.append(_record(stepper))
            start = time.perf_counter()
            stepper.step()
            elapsed += time.perf_counter() - start
            stepper.hash_into(hasher)
    finally:
        if executor is not None:
            executor.shutdown()
    return RunResult(
        final_state=stepper.state(),
        frames=frames,
        checksum=hasher.digest,
        draws_consumed=stepper.draws,
        step_seconds=elapsed,
        final_rng=stepper.generator(),
    )
