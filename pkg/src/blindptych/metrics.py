"""Reconstruction quality scores and convergence-certificate checks."""

import csv
import io
import math

import numpy as np

from .field import fft2
from .model import exit_waves


def r_factor(x, y, geom, meas):
    """``sum_j ||b_j - |F(S_j(x) y)|||_1 / sum_j ||b_j||_1``."""
    denom = float(np.sum(meas.mags))
    if denom == 0:
        raise ValueError("R-factor is undefined for all-zero measurements")
    model = np.abs(fft2(exit_waves(x, y, geom)))
    return float(np.sum(np.abs(meas.mags - model)) / denom)


def register(est, truth):
    """Align ``est`` to ``truth`` by an integer cyclic shift and a complex scale.

    Returns ``(aligned, shift, scale)`` where ``aligned = scale * roll(est, shift)``.
    For cyclic shifts ``||roll(est)||`` is fixed, so the least-squares optimum
    over all shifts is the peak of ``|<roll(est), truth>|``, i.e. of the
    circular cross-correlation.
    """
    est = np.asarray(est, dtype=complex)
    truth = np.asarray(truth, dtype=complex)
    if est.shape != truth.shape:
        raise ValueError(f"size mismatch: {est.shape} vs {truth.shape}")
    # xcorr[s] = sum_r conj(est[r - s]) * truth[r]
    xcorr = np.fft.ifft2(np.fft.fft2(truth) * np.conj(np.fft.fft2(est)))
    peak = np.unravel_index(np.argmax(np.abs(xcorr)), xcorr.shape)
    shifted = np.roll(est, peak, axis=(0, 1))
    energy = float(np.vdot(shifted, shifted).real)
    scale = np.vdot(shifted, truth) / energy if energy > 0 else 0.0
    return scale * shifted, tuple(int(p) for p in peak), complex(scale)


def rms_error_registered(est, truth):
    """Relative error ``||c T(est) - truth|| / ||truth||`` after registration."""
    truth = np.asarray(truth, dtype=complex)
    norm = float(np.linalg.norm(truth))
    if norm == 0:
        raise ValueError("truth is identically zero")
    aligned, _, _ = register(est, truth)
    return float(np.linalg.norm(aligned - truth) / norm)


def certificate_report(trace, rel_tol=1e-9):
    """Check the decrease and rate certificates on a solver trace.

    ``trace`` is a :class:`~blindptych.solvers.Trace` (or anything with
    ``rows``, ``lambda_minus`` and ``f_initial``). Only main-loop rows
    (``k >= 1``) are examined. Returns a dict; ``ok`` is true when the trace
    is monotone, every step satisfies the sufficient-decrease inequality to
    ``rel_tol * (1 + |F|)`` and the rate bound holds.
    """
    rows = [r for r in trace.rows if r.k >= 1]
    lam = trace.lambda_minus
    report = {
        "iterations": len(rows),
        "lambda_minus": lam,
        "monotone": True,
        "monotone_violations": 0,
        "decrease_violations": 0,
        "min_decrease_slack": math.nan,
        "max_decrease_slack": math.nan,
        "rate_min_step_sq": math.nan,
        "rate_bound": math.nan,
        "rate_ok": True,
        "lipschitz_ratio_max": math.nan,
    }
    if not rows:
        report["ok"] = True
        return report

    f_prev = trace.f_initial
    slacks, tols = [], []
    for r in rows:
        tol = rel_tol * (1.0 + abs(f_prev))
        tols.append(tol)
        if r.F > f_prev + tol:
            report["monotone_violations"] += 1
        slack = f_prev - lam * r.step_sq - r.F
        slacks.append(slack)
        if slack < -tol:
            report["decrease_violations"] += 1
        f_prev = r.F
    report["monotone"] = report["monotone_violations"] == 0
    report["min_decrease_slack"] = float(min(slacks))
    report["max_decrease_slack"] = float(max(slacks))

    # min_{k<=N} ||s^{k+1}||^2 <= (F(u^1) - F(u^{N+1}) + sum tol) / (N lambda),
    # u^1 being the iterate entering the main loop
    n_steps = len(rows)
    if lam > 0:
        min_step = min(r.step_sq for r in rows)
        bound = (trace.f_initial - rows[-1].F + sum(tols)) / (n_steps * lam)
        report["rate_min_step_sq"] = float(min_step)
        report["rate_bound"] = float(bound)
        report["rate_ok"] = bool(min_step <= bound)

    ratios = [r.lipschitz_ratio for r in rows if r.lipschitz_ratio is not None and math.isfinite(r.lipschitz_ratio)]
    if ratios:
        report["lipschitz_ratio_max"] = float(max(ratios))
    report["ok"] = report["monotone"] and report["decrease_violations"] == 0 and report["rate_ok"]
    return report


SUMMARY_COLUMNS = ("F", "step_sq", "rms_object", "rms_probe", "r_factor", "time_s")


def summary_csv(rows):
    """CSV text for summary rows (dicts with a ``name`` plus SUMMARY_COLUMNS)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("name",) + SUMMARY_COLUMNS)
    for row in rows:
        writer.writerow([row["name"]] + [_fmt(row.get(c)) for c in SUMMARY_COLUMNS])
    return buf.getvalue()


def summary_table(rows):
    """Fixed-width text table in the same column order as :func:`summary_csv`."""
    header = ("name",) + SUMMARY_COLUMNS
    body = [[str(row["name"])] + [_fmt_short(row.get(c)) for c in SUMMARY_COLUMNS] for row in rows]
    widths = [max(len(h), *(len(b[i]) for b in body)) if body else len(h) for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for b in body:
        lines.append("  ".join(v.ljust(w) for v, w in zip(b, widths)))
    return "\n".join(lines) + "\n"


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    return repr(float(v))


def _fmt_short(v):
    if v is None:
        return "-"
    if isinstance(v, str):
        return v
    return f"{float(v):.4g}"


def aggregate(rows, key="name"):
    """Mean and worst (max) of every summary column, grouped by ``key``.

    Returns rows named ``"<group> mean"`` and ``"<group> worst"`` in first-seen
    group order. Missing values are skipped; a column with none stays ``None``.
    """
    groups = {}
    for row in rows:
        groups.setdefault(row[key], []).append(row)
    out = []
    for name, members in groups.items():
        mean_row, worst_row = {"name": f"{name} mean"}, {"name": f"{name} worst"}
        for col in SUMMARY_COLUMNS:
            vals = [float(r[col]) for r in members if r.get(col) is not None]
            mean_row[col] = float(np.mean(vals)) if vals else None
            worst_row[col] = float(np.max(vals)) if vals else None
        out += [mean_row, worst_row]
    return out
