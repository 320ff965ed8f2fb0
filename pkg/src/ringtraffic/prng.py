"""Linear congruential generator with O(log k) jump-ahead.

All arithmetic uses Python integers, so every modular product is exact.
The defaults are the minimal-standard multiplicative generator
(``a = 48271``, ``c = 0``, ``m = 2**31 - 1``).
"""

from __future__ import annotations

from dataclasses import dataclass

MODULUS = 2**31 - 1
MINSTD_MULTIPLIER = 48271
MINSTD0_MULTIPLIER = 16807


@dataclass(frozen=True)
class LcgState:
    """Generator constants plus the current state ``s``."""

    s: int
    a: int = MINSTD_MULTIPLIER
    c: int = 0
    m: int = MODULUS

    def __post_init__(self):
        if not 0 < self.a < self.m:
            raise ValueError(f"multiplier must lie in (0, m), got {self.a}")
        if not 0 <= self.c < self.m:
            raise ValueError(f"increment must lie in [0, m), got {self.c}")
        if not 0 <= self.s < self.m:
            raise ValueError(f"state must lie in [0, m), got {self.s}")
        if self.c == 0 and self.s == 0:
            raise ValueError("multiplicative generator cannot have state 0")


@dataclass(frozen=True)
class JumpCoefficients:
    """Affine map ``s -> (A*s + C) mod m`` equivalent to ``span`` draws."""

    A: int
    C: int
    span: int

    def apply(self, s: int, m: int = MODULUS) -> int:
        return (self.A * s + self.C) % m


def seed_lcg(seed: int, a: int = MINSTD_MULTIPLIER, c: int = 0, m: int = MODULUS) -> LcgState:
    """Build a generator from a nonnegative integer seed.

    The seed is reduced modulo ``m``; a multiplicative generator that would
    land on 0 is moved to 1 instead.
    """
    if seed < 0:
        raise ValueError(f"seed must be nonnegative, got {seed}")
    s = seed % m
    if s == 0 and c == 0:
        s = 1
    return LcgState(s=s, a=a, c=c, m=m)


def lcg_next(state: LcgState) -> tuple[LcgState, int]:
    """Advance one draw; returns the new state and the raw draw (= new s)."""
    s = (state.a * state.s + state.c) % state.m
    return LcgState(s, state.a, state.c, state.m), s


def jump_coefficients(
    k: int, a: int = MINSTD_MULTIPLIER, c: int = 0, m: int = MODULUS
) -> JumpCoefficients:
    """Coefficients of a k-draw jump by binary doubling.

    Composing a jump of i draws ``(Ai, Ci)`` with a later jump of j draws
    ``(Aj, Cj)`` gives ``(Ai*Aj, Aj*Ci + Cj)``.
    """
    if k < 0:
        raise ValueError(f"jump span must be nonnegative, got {k}")
    acc_a, acc_c = 1, 0
    sq_a, sq_c = a % m, c % m  # jump of 2**bit draws
    n = k
    while n:
        if n & 1:
            acc_a, acc_c = (sq_a * acc_a) % m, (sq_a * acc_c + sq_c) % m
        sq_a, sq_c = (sq_a * sq_a) % m, (sq_a * sq_c + sq_c) % m
        n >>= 1
    return JumpCoefficients(acc_a, acc_c, k)


def lcg_jump(state: LcgState, k: int) -> LcgState:
    """State after exactly ``k`` sequential draws."""
    jc = jump_coefficients(k, state.a, state.c, state.m)
    return LcgState(jc.apply(state.s, state.m), state.a, state.c, state.m)


def uniform01(state: LcgState) -> tuple[LcgState, float]:
    """Advance one draw and map it to ``draw / m`` in binary64."""
    nxt, draw = lcg_next(state)
    return nxt, float(draw) / float(state.m)
