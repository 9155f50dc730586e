"""CSV artifacts.

trace       ``t, y_1..y_S``
states      ``t, x_1..x_n`` (oracle state trace written next to a target)
schedule    ``t_start, re_gamma_<label>..., im_gamma_<label>...``
iterations  ``iter, J, grad_norm, eps_R, eps_I``

Every float is written with 15 significant digits.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .simulator import DampingSchedule, TraceRecord

FMT = "{:.15g}"


def _fmt(v) -> str:
    return FMT.format(float(v))


def _read_table(path):
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(header))
    return header, data


def write_table(path, header, rows):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if not isinstance(v, (int, np.integer)) else str(v) for v in row])


def write_trace(trace: TraceRecord, path) -> None:
    header = ["t", *[f"y_{i + 1}" for i in range(trace.y.shape[1])]]
    write_table(path, header, np.column_stack([trace.times, trace.y]))


def read_trace(path, x0=None, states=None) -> TraceRecord:
    header, data = _read_table(path)
    if header[0] != "t" or not all(h.startswith("y_") for h in header[1:]) or len(header) < 2:
        raise ValueError(f"{path}: expected header 't, y_1..y_S', got {header}")
    x0 = np.zeros(0) if x0 is None else x0
    return TraceRecord(data[:, 0], data[:, 1:], x0, states=states)


def write_states(times, states, path) -> None:
    header = ["t", *[f"x_{i + 1}" for i in range(states.shape[1])]]
    write_table(path, header, np.column_stack([times, states]))


def read_states(path):
    header, data = _read_table(path)
    if header[0] != "t" or not all(h.startswith("x_") for h in header[1:]):
        raise ValueError(f"{path}: expected header 't, x_1..x_n', got {header}")
    return data[:, 0], data[:, 1:]


def write_schedule(schedule: DampingSchedule, labels, path) -> None:
    labels = list(labels)
    if len(labels) != schedule.n_channels:
        raise ValueError("one label per channel required")
    header = ["t_start", *[f"re_gamma_{lab}" for lab in labels], *[f"im_gamma_{lab}" for lab in labels]]
    write_table(path, header, np.column_stack([schedule.t_start, schedule.values.real, schedule.values.imag]))


def read_schedule(path, dt=None):
    """Return ``(schedule, labels)``; ``dt`` is needed only for one-row files."""
    header, data = _read_table(path)
    if header[0] != "t_start" or (len(header) - 1) % 2:
        raise ValueError(f"{path}: malformed schedule header {header}")
    P = (len(header) - 1) // 2
    labels = [h[len("re_gamma_"):] for h in header[1 : 1 + P]]
    t = data[:, 0]
    if t.size == 0:
        raise ValueError(f"{path}: schedule has no rows")
    if t.size > 1:
        dt = float(t[1] - t[0])
    elif dt is None:
        raise ValueError(f"{path}: cannot infer interval width from a single row")
    values = data[:, 1 : 1 + P] + 1j * data[:, 1 + P :]
    return DampingSchedule(dt, values), labels


def write_iterations(result, eps_R, eps_I, path) -> None:
    scale = result.eps_history if result.eps_history is not None else np.ones(len(result.J_history))
    rows = [
        (i + 1, J, g, eps_R * s, eps_I * s)
        for i, (J, g, s) in enumerate(zip(result.J_history, result.grad_norm_history, scale))
    ]
    write_table(path, ["iter", "J", "grad_norm", "eps_R", "eps_I"], rows)
