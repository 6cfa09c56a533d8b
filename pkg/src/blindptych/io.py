"""Binary image stacks, trace CSVs, JSON sidecars and PGM previews.

CIMG: ``b"CIMG1\\n"``, a header line ``"N m\\n"``, then ``m * N * N`` pairs of
little-endian float64 ``(re, im)`` in row-major order. RIMG is the same with
magic ``b"RIMG1\\n"`` and one float64 per pixel.
"""

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .solvers import Trace, TraceRow

CIMG_MAGIC = b"CIMG1\n"
RIMG_MAGIC = b"RIMG1\n"
TRACE_COLUMNS = ("k", "F", "step_sq", "decrease_slack", "r_factor", "elapsed_ms")


def _as_stack(arr):
    arr = np.asarray(arr)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise ValueError(f"expected (N, N) or (m, N, N), got {arr.shape}")
    return arr


def write_cimg(path, stack):
    stack = _as_stack(stack).astype(np.complex128)
    m, n, _ = stack.shape
    pairs = np.empty(stack.shape + (2,), dtype="<f8")
    pairs[..., 0] = stack.real
    pairs[..., 1] = stack.imag
    with open(path, "wb") as fh:
        fh.write(CIMG_MAGIC)
        fh.write(f"{n} {m}\n".encode("ascii"))
        fh.write(pairs.tobytes())


def write_rimg(path, stack):
    stack = _as_stack(stack)
    if np.iscomplexobj(stack):
        raise ValueError("RIMG holds real data; use write_cimg for complex stacks")
    m, n, _ = stack.shape
    with open(path, "wb") as fh:
        fh.write(RIMG_MAGIC)
        fh.write(f"{n} {m}\n".encode("ascii"))
        fh.write(stack.astype("<f8").tobytes())


def _read(path, magic, per_pixel):
    data = Path(path).read_bytes()
    if not data.startswith(magic):
        raise ValueError(f"{path}: bad magic, expected {magic!r}")
    end = data.index(b"\n", len(magic))
    n, m = (int(t) for t in data[len(magic):end].split())
    body = data[end + 1:]
    expected = m * n * n * per_pixel * 8
    if len(body) != expected:
        raise ValueError(f"{path}: expected {expected} payload bytes, found {len(body)}")
    return n, m, np.frombuffer(body, dtype="<f8")


def read_cimg(path):
    """Return an ``(m, N, N)`` complex128 stack."""
    n, m, flat = _read(path, CIMG_MAGIC, 2)
    pairs = flat.reshape(m, n, n, 2)
    return pairs[..., 0] + 1j * pairs[..., 1]


def read_rimg(path):
    n, m, flat = _read(path, RIMG_MAGIC, 1)
    return flat.reshape(m, n, n).astype(np.float64)


def write_pgm(path, image):
    """8-bit binary PGM of a real image, min-max scaled. Display only."""
    image = np.asarray(image, dtype=float)
    lo, hi = float(image.min()), float(image.max())
    scaled = np.zeros(image.shape) if hi == lo else (image - lo) / (hi - lo)
    pixels = np.round(scaled * 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{image.shape[1]} {image.shape[0]}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def write_previews(prefix, image):
    """Amplitude and phase PGMs for a complex image."""
    prefix = str(prefix)
    write_pgm(prefix + "_amp.pgm", np.abs(image))
    write_pgm(prefix + "_phase.pgm", np.angle(image))


def _num(v):
    return "" if v is None else repr(float(v))


def trace_to_csv(trace):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for r in trace.rows:
        writer.writerow((r.k, _num(r.F), _num(r.step_sq), _num(r.decrease_slack), _num(r.r_factor), _num(r.elapsed_ms)))
    return buf.getvalue()


def write_trace(path, trace):
    Path(path).write_text(trace_to_csv(trace))


def read_trace(path, variant="", lambda_minus=math.nan, f_initial=math.nan):
    """Parse a trace CSV; metadata not stored in the CSV can be passed in."""
    trace = Trace(variant, lambda_minus, f_initial)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        for rec in reader:
            trace.rows.append(
                TraceRow(
                    k=int(rec["k"]),
                    F=float(rec["F"]),
                    step_sq=float(rec["step_sq"]),
                    decrease_slack=float(rec["decrease_slack"]),
                    r_factor=float(rec["r_factor"]),
                    elapsed_ms=float(rec["elapsed_ms"]) if rec["elapsed_ms"] else None,
                )
            )
    return trace


def write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")
