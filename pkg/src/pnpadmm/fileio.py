"""File formats: binary PGM images, trace CSV, and flat key=value configs."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .denoisers import ImageGrid
from .solver import ConditionFlag, TraceRecord

TRACE_COLUMNS = ("iter", "delta", "rho", "sigma", "condition", "fidelity_value")


class PgmFormatError(ValueError):
    """Malformed PGM file."""


class TraceFormatError(ValueError):
    """Malformed trace CSV; carries the offending line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _fmt(x: float) -> str:
    return format(x, ".17g")


# ---------------------------------------------------------------------------
# PGM (binary, magic P5, 8-bit)

def _read_pgm_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read whitespace-separated header tokens, skipping # comments."""
    tokens: list[bytes] = []
    i = 0
    while len(tokens) < count:
        if i >= len(data):
            raise PgmFormatError("truncated header")
        c = data[i : i + 1]
        if c == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j : j + 1].isspace():
                j += 1
            tokens.append(data[i:j])
            i = j
    return tokens, i


def load_image(path) -> ImageGrid:
    """Load an 8-bit binary PGM, mapping [0, 255] to [0, 1]."""
    data = Path(path).read_bytes()
    tokens, pos = _read_pgm_tokens(data, 4)
    if tokens[0] != b"P5":
        raise PgmFormatError(f"bad magic number {tokens[0]!r}, expected P5")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise PgmFormatError(f"non-numeric header field: {exc}") from exc
    if width < 1 or height < 1:
        raise PgmFormatError(f"bad dimensions {width}x{height}")
    if not (1 <= maxval <= 255):
        raise PgmFormatError(f"declared maxval {maxval} out of range [1, 255]")
    pos += 1  # single whitespace byte after maxval
    payload = data[pos : pos + width * height]
    if len(payload) < width * height:
        raise PgmFormatError(
            f"truncated payload: expected {width * height} bytes, "
            f"got {len(payload)}"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).astype(np.float64) / 255.0
    return ImageGrid(width=width, height=height, pixels=pixels)


def save_image(img: ImageGrid, path) -> None:
    """Write an 8-bit binary PGM, round-half-up with clamping to [0, 255]."""
    levels = np.floor(img.pixels * 255.0 + 0.5)
    levels = np.clip(levels, 0, 255).astype(np.uint8)
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + levels.tobytes())


# ---------------------------------------------------------------------------
# Trace CSV

def serialize_trace(records: list[TraceRecord]) -> str:
    lines = [",".join(TRACE_COLUMNS)]
    for r in records:
        cond = r.condition.value if r.condition is not None else "NA"
        lines.append(
            f"{r.iteration},{_fmt(r.delta)},{_fmt(r.rho)},{_fmt(r.sigma)},"
            f"{cond},{_fmt(r.fidelity_value)}"
        )
    return "\n".join(lines) + "\n"


def write_trace_csv(records: list[TraceRecord], path) -> None:
    Path(path).write_text(serialize_trace(records), encoding="ascii", newline="")


def parse_trace(text: str) -> list[TraceRecord]:
    lines = text.splitlines()
    if not lines or tuple(lines[0].split(",")) != TRACE_COLUMNS:
        raise TraceFormatError(
            f"expected header {','.join(TRACE_COLUMNS)}", line=1
        )
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(TRACE_COLUMNS):
            raise TraceFormatError(
                f"expected {len(TRACE_COLUMNS)} fields, got {len(parts)}",
                line=lineno,
            )
        try:
            iteration = int(parts[0])
            delta, rho, sigma = (float(p) for p in parts[1:4])
            fidelity_value = float(parts[5])
        except ValueError as exc:
            raise TraceFormatError(str(exc), line=lineno) from exc
        if parts[4] == "NA":
            condition = None
        else:
            try:
                condition = ConditionFlag(parts[4])
            except ValueError as exc:
                raise TraceFormatError(
                    f"bad condition {parts[4]!r}", line=lineno
                ) from exc
        records.append(
            TraceRecord(
                iteration=iteration,
                delta=delta,
                rho=rho,
                sigma=sigma,
                condition=condition,
                fidelity_value=fidelity_value,
            )
        )
    return records


def read_trace_csv(path) -> list[TraceRecord]:
    return parse_trace(Path(path).read_text(encoding="ascii"))


def infer_gamma(records: list[TraceRecord]) -> float | None:
    """Recover the penalty growth factor from the first C1 record, if any."""
    for prev, rec in zip(records, records[1:]):
        if rec.condition == ConditionFlag.C1:
            return rec.rho / prev.rho
    return None


def infer_eta(records: list[TraceRecord]) -> float:
    """Tightest threshold consistent with the flags: min C1 residual ratio.

    Any eta in (max C2 ratio, min C1 ratio] reproduces the recorded flags;
    using the upper end can only enlarge downstream envelopes, never
    invalidate them.
    """
    best = None
    for prev, rec in zip(records, records[1:]):
        if rec.condition == ConditionFlag.C1 and prev.delta > 0:
            ratio = rec.delta / prev.delta
            best = ratio if best is None else min(best, ratio)
    if best is None or not (0 < best < 1):
        # all-C2 traces leave eta unconstrained from above; any valid value
        # at least as large as every C2 ratio keeps the flags consistent
        worst_c2 = 0.0
        for prev, rec in zip(records, records[1:]):
            if rec.condition == ConditionFlag.C2 and prev.delta > 0:
                worst_c2 = max(worst_c2, rec.delta / prev.delta)
        best = min(0.5 * (worst_c2 + 1.0) if worst_c2 > 0 else 0.5, 1.0 - 1e-9)
    return float(best)


# ---------------------------------------------------------------------------
# Flat key=value config files

def parse_config(path) -> dict[str, str]:
    """Parse lines of the form ``key = value``; # starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def write_config(values: dict[str, object], path) -> None:
    lines = [f"{k} = {v}" for k, v in values.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")
