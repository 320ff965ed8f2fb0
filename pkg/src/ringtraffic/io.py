"""Parameter files and trajectory output (ASCII rows, binary PGM space-time image)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import InvalidParametersError, OutputMode, SimParams

REQUIRED_KEYS = ("length", "ncars", "steps", "seed")
DEFAULTS = {"vmax": 5, "p": 0.13, "output": "none", "stride": 1, "threads": 1}

_PARSERS = {
    "length": int,
    "ncars": int,
    "vmax": int,
    "p": float,
    "steps": int,
    "seed": int,
    "output": lambda s: OutputMode(s.lower()),
    "stride": int,
    "threads": int,
}

# parameter-file key -> SimParams field
_FIELDS = {
    "length": "road_length",
    "ncars": "car_count",
    "vmax": "v_max",
    "p": "p",
    "steps": "steps",
    "seed": "seed",
    "output": "output_mode",
    "stride": "output_stride",
}


class ParamFileError(InvalidParametersError):
    """A parameter-file problem, tagged with the offending key and line."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        what = f"{key}: " if key is not None else ""
        super().__init__(f"{where}{what}{message}", key)
        self.line = line


def read_params(text: str) -> tuple[SimParams, int]:
    """Parse ``key = value`` lines into ``(SimParams, threads)``."""
    values: dict[str, object] = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParamFileError(f"expected 'key = value', got {line!r}", line=lineno)
        key, _, value = (part.strip() for part in line.partition("="))
        key = key.lower()
        if key not in _PARSERS:
            raise ParamFileError("unknown key", key, lineno)
        if key in values:
            raise ParamFileError(f"duplicate key (first set on line {lines[key]})", key, lineno)
        try:
            values[key] = _PARSERS[key](value)
        except ValueError:
            raise ParamFileError(f"cannot parse value {value!r}", key, lineno) from None
        lines[key] = lineno

    for key in REQUIRED_KEYS:
        if key not in values:
            raise ParamFileError("missing required key", key)
    merged = {**DEFAULTS, **values}

    threads = merged.pop("threads")
    if threads < 1:
        raise ParamFileError(f"threads must be >= 1, got {threads}", "threads", lines.get("threads"))
    try:
        params = SimParams(**{_FIELDS[k]: v for k, v in merged.items()})
    except InvalidParametersError as exc:
        raise ParamFileError(str(exc), exc.key, lines.get(exc.key)) from None
    return params, threads


def format_params(params: SimParams, threads: int = 1) -> str:
    """Inverse of :func:`read_params`."""
    lines = [
        f"length = {params.road_length}",
        f"ncars = {params.car_count}",
        f"vmax = {params.v_max}",
        f"p = {params.p!r}",
        f"steps = {params.steps}",
        f"seed = {params.seed}",
        f"output = {params.output_mode.value}",
        f"stride = {params.output_stride}",
        f"threads = {threads}",
    ]
    return "\n".join(lines) + "\n"


def write_ascii(frames, sink) -> None:
    """One line per frame: the step index then ``position:velocity`` pairs."""
    for frame in frames:
        pairs = " ".join(f"{x}:{v}" for x, v in zip(frame.positions.tolist(), frame.velocities.tolist()))
        sink.write(f"{frame.step} {pairs}\n")


@dataclass
class SpacetimeImage:
    """Occupancy raster; row r is recorded frame r, column x is road cell x."""

    occupied: np.ndarray  # bool, shape (rows, cols)

    @property
    def rows(self) -> int:
        return self.occupied.shape[0]

    @property
    def cols(self) -> int:
        return self.occupied.shape[1]

    @classmethod
    def from_frames(cls, frames, road_length: int) -> "SpacetimeImage":
        occupied = np.zeros((len(frames), road_length), dtype=bool)
        for r, frame in enumerate(frames):
            occupied[r, frame.positions] = True
        return cls(occupied)


def write_pgm(image: SpacetimeImage, sink) -> None:
    """Binary P5 greymap: occupied cells 0, empty cells 255."""
    sink.write(f"P5 {image.cols} {image.rows} 255\n".encode("ascii"))
    pixels = np.where(image.occupied, 0, 255).astype(np.uint8)
    sink.write(pixels.tobytes())
