"""Nagel-Schreckenberg ring-road model: state types and serial update rules.

Two state representations are provided. :class:`AgentState` stores one
position and one velocity per car; :class:`GridState` stores one slot per
road cell. Cars are always enumerated in ascending cell order, so car 0 is
the car nearest cell 0 and the leader of car ``N-1`` is car 0. After a move
in which ``k`` cars wrap past the end of the road the arrays are rotated by
``k``, which keeps that enumeration (and therefore the draw order) stable.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .prng import LcgState

EMPTY = -1


class InvalidParametersError(ValueError):
    """Raised when a parameter set violates the model's invariants."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


class OutputMode(str, enum.Enum):
    NONE = "none"
    ASCII = "ascii"
    PGM = "pgm"


@dataclass(frozen=True)
class SimParams:
    """A complete experiment description."""

    road_length: int
    car_count: int
    steps: int
    seed: int
    v_max: int = 5
    p: float = 0.13
    output_mode: OutputMode = OutputMode.NONE
    output_stride: int = 1

    def __post_init__(self):
        object.__setattr__(self, "output_mode", OutputMode(self.output_mode))
        checks = [
            ("length", self.road_length >= 1, f"road length must be >= 1, got {self.road_length}"),
            ("ncars", self.car_count >= 1, f"car count must be >= 1, got {self.car_count}"),
            (
                "ncars",
                self.car_count <= self.road_length,
                f"cannot place {self.car_count} cars on a road of {self.road_length} cells",
            ),
            ("vmax", self.v_max >= 1, f"vmax must be >= 1, got {self.v_max}"),
            ("p", 0.0 <= self.p <= 1.0, f"p must lie in [0, 1], got {self.p}"),
            ("steps", self.steps >= 0, f"steps must be >= 0, got {self.steps}"),
            ("seed", self.seed >= 0, f"seed must be >= 0, got {self.seed}"),
            ("stride", self.output_stride >= 1, f"stride must be >= 1, got {self.output_stride}"),
        ]
        for key, ok, msg in checks:
            if not ok:
                raise InvalidParametersError(msg, key)

    @property
    def density(self) -> float:
        return self.car_count / self.road_length


class AgentState:
    """Per-car positions and velocities on a ring of ``road_length`` cells."""

    __slots__ = ("positions", "velocities", "road_length")

    def __init__(self, positions, velocities, road_length: int):
        self.positions = np.array(positions, dtype=np.int64)
        self.velocities = np.array(velocities, dtype=np.int64)
        self.road_length = int(road_length)
        if self.positions.shape != self.velocities.shape or self.positions.ndim != 1:
            raise ValueError("positions and velocities must be 1-d arrays of equal length")

    @property
    def car_count(self) -> int:
        return self.positions.shape[0]

    def __eq__(self, other):
        if not isinstance(other, AgentState):
            return NotImplemented
        return (
            self.road_length == other.road_length
            and np.array_equal(self.positions, other.positions)
            and np.array_equal(self.velocities, other.velocities)
        )

    def __repr__(self):
        return (
            f"AgentState(positions={self.positions.tolist()}, "
            f"velocities={self.velocities.tolist()}, road_length={self.road_length})"
        )

    def check(self, v_max: int | None = None) -> None:
        """Raise ``AssertionError`` if the state invariants are violated."""
        x = self.positions
        assert x.size >= 1, "no cars"
        assert ((x >= 0) & (x < self.road_length)).all(), "position off the road"
        assert (np.diff(x) > 0).all(), "positions not strictly ascending"
        assert (self.velocities >= 0).all(), "negative velocity"
        if v_max is not None:
            assert (self.velocities <= v_max).all(), "velocity above v_max"


class GridState:
    """Per-cell occupancy: ``EMPTY`` or the velocity of the occupying car."""

    __slots__ = ("cells",)

    def __init__(self, cells):
        self.cells = np.array(cells, dtype=np.int64)

    @property
    def road_length(self) -> int:
        return self.cells.shape[0]

    @property
    def car_count(self) -> int:
        return int(np.count_nonzero(self.cells != EMPTY))

    def __eq__(self, other):
        if not isinstance(other, GridState):
            return NotImplemented
        return np.array_equal(self.cells, other.cells)

    def __repr__(self):
        return f"GridState({self.cells.tolist()})"


@dataclass(frozen=True)
class Observables:
    mean_velocity: float
    density: float
    flow: float


def init_state(params: SimParams) -> AgentState:
    """Evenly spaced cars at rest: car i sits at ``floor(i * L / N)``."""
    L, N = params.road_length, params.car_count
    if N > L or N < 1:
        raise InvalidParametersError(f"cannot place {N} cars on a road of {L} cells", "ncars")
    positions = (np.arange(N, dtype=np.int64) * L) // N
    return AgentState(positions, np.zeros(N, dtype=np.int64), L)


def gap_ahead(state: AgentState, i: int) -> int:
    """Empty cells between car ``i`` and the car ahead of it."""
    N = state.car_count
    if not 0 <= i < N:
        raise IndexError(f"car index {i} out of range for {N} cars")
    leader = state.positions[(i + 1) % N]
    return int((leader - state.positions[i] - 1) % state.road_length)


def _canonical(positions: np.ndarray, velocities: np.ndarray, L: int) -> AgentState:
    # cars that wrapped are at the tail of the arrays; rotate them to the front
    descent = np.flatnonzero(positions[1:] < positions[:-1])
    k = positions.size - 1 - int(descent[0]) if descent.size else 0
    return AgentState(np.roll(positions, k), np.roll(velocities, k), L)


def step_serial(
    state: AgentState, rng: LcgState, params: SimParams
) -> tuple[AgentState, LcgState]:
    """Advance one synchronous step, one uniform draw per car in car order."""
    L, v_max, p = state.road_length, params.v_max, params.p
    a, c, m, s = rng.a, rng.c, rng.m, rng.s
    x = state.positions.tolist()
    v = state.velocities.tolist()
    N = len(x)
    new_v = [0] * N
    for i in range(N):
        vi = min(v[i] + 1, v_max)
        gap = (x[(i + 1) % N] - x[i] - 1) % L
        vi = min(vi, gap)
        s = (a * s + c) % m
        if s / m < p:
            vi = max(vi - 1, 0)
        new_v[i] = vi
    new_x = [(x[i] + new_v[i]) % L for i in range(N)]
    nxt = _canonical(np.array(new_x, dtype=np.int64), np.array(new_v, dtype=np.int64), L)
    return nxt, LcgState(s, a, c, m)


def agent_to_grid(state: AgentState) -> GridState:
    cells = np.full(state.road_length, EMPTY, dtype=np.int64)
    cells[state.positions] = state.velocities
    return GridState(cells)


def grid_to_agent(state: GridState) -> AgentState:
    positions = np.flatnonzero(state.cells != EMPTY)
    return AgentState(positions, state.cells[positions], state.road_length)


def step_grid_serial(
    state: GridState, rng: LcgState, params: SimParams
) -> tuple[GridState, LcgState]:
    """Same update as :func:`step_serial`, computed by scanning road cells.

    Gaps are found by looking forward cell by cell, and draws are consumed
    in ascending cell order.
    """
    v_max, p = params.v_max, params.p
    a, c, m, s = rng.a, rng.c, rng.m, rng.s
    cells = state.cells.tolist()
    L = len(cells)
    moves = []
    for x in range(L):
        if cells[x] == EMPTY:
            continue
        vi = min(cells[x] + 1, v_max)
        for d in range(1, vi + 1):
            if cells[(x + d) % L] != EMPTY:
                vi = d - 1
                break
        s = (a * s + c) % m
        if s / m < p:
            vi = max(vi - 1, 0)
        moves.append((x, vi))
    new_cells = np.full(L, EMPTY, dtype=np.int64)
    for x, vi in moves:
        new_cells[(x + vi) % L] = vi
    return GridState(new_cells), LcgState(s, a, c, m)


def measure(state: AgentState) -> Observables:
    mean_velocity = float(state.velocities.mean())
    density = state.car_count / state.road_length
    return Observables(mean_velocity, density, density * mean_velocity)
