"""Compiled per-block kernels used by the parallel engine.

Every kernel releases the GIL so worker threads run concurrently. Cars are
addressed by rank ``r`` (ascending cell order); rank r lives in array slot
``(head + r) % N``.
"""

import numpy as np
from numba import njit

FNV_OFFSET = np.uint64(14695981039346656037)
FNV_PRIME = np.uint64(1099511628211)


@njit(nogil=True, cache=True)
def velocity_block(pos, vel, head, lo, hi, road_length, v_max, p, a, c, m, s, jump_a, jump_c):
    """Accelerate, brake and randomize ranks ``[lo, hi)``.

    ``s`` is the generator state positioned just before this block's first
    draw. Returns the state advanced past the block and then by the
    ``(jump_a, jump_c)`` jump, i.e. positioned for the next step.
    """
    n = pos.shape[0]
    for r in range(lo, hi):
        i = head + r
        if i >= n:
            i -= n
        j = i + 1
        if j == n:
            j = 0
        v = vel[i] + 1
        if v > v_max:
            v = v_max
        gap = pos[j] - pos[i] - 1
        if gap < 0:
            gap += road_length
        if v > gap:
            v = gap
        s = (a * s + c) % m
        if s / m < p:
            v = v - 1 if v > 0 else 0
        vel[i] = v
    return (jump_a * s + jump_c) % m


@njit(nogil=True, cache=True)
def velocity_block_reversed(pos, vel, head, lo, hi, road_length, v_max, p, a, c, m, s, jump_a, jump_c):
    """Faulty variant drawing in descending rank order; used to test ``verify``."""
    n = pos.shape[0]
    for r in range(hi - 1, lo - 1, -1):
        i = head + r
        if i >= n:
            i -= n
        j = i + 1
        if j == n:
            j = 0
        v = vel[i] + 1
        if v > v_max:
            v = v_max
        gap = pos[j] - pos[i] - 1
        if gap < 0:
            gap += road_length
        if v > gap:
            v = gap
        s = (a * s + c) % m
        if s / m < p:
            v = v - 1 if v > 0 else 0
        vel[i] = v
    return (jump_a * s + jump_c) % m


@njit(nogil=True, cache=True)
def move_block(pos, vel, head, lo, hi, road_length):
    """Move ranks ``[lo, hi)``; returns how many of them wrapped past cell L-1."""
    n = pos.shape[0]
    wrapped = 0
    for r in range(lo, hi):
        i = head + r
        if i >= n:
            i -= n
        x = pos[i] + vel[i]
        if x >= road_length:
            x -= road_length
            wrapped += 1
        pos[i] = x
    return wrapped


@njit(nogil=True, cache=True)
def fnv1a_update(h, pos, vel, head):
    """Fold one row (positions then velocities, rank order) into digest ``h``."""
    n = pos.shape[0]
    mask = np.uint64(0xFF)
    for arr_id in range(2):
        for r in range(n):
            i = head + r
            if i >= n:
                i -= n
            value = np.uint64(pos[i]) if arr_id == 0 else np.uint64(vel[i])
            shift = np.uint64(0)
            for _ in range(8):
                h = (h ^ ((value >> shift) & mask)) * FNV_PRIME
                shift += np.uint64(8)
    return h
