"""Post-mission analytics over an event log.

Three families of questions, all answered from the NDJSON log alone:

  * how fast did robots get into the course (deployment table vs. the
    one-robot-per-minute goal line),
  * where did the operator spend their attention (per-view usage, cursor
    heatmaps with a gaze-offset ring kernel),
  * bookkeeping for the above (inactivity filtering, kernel scaling by
    display dpi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .store import Event

GOAL_SECONDS_PER_ROBOT = 60.0

# gaze-to-cursor offset statistics measured at 96 dpi
_BASE_DPI = 96.0
_BASE_MU = 77.0
_BASE_SIGMA = 33.9

DEFAULT_GRID = (1600, 900)  # console logical resolution (width, height)


# -- deployment --------------------------------------------------------------


@dataclass(frozen=True)
class DeploymentRow:
    robot: str
    entry: float  # seconds since the course opened
    interval: float | None  # since the previous entry; None for the first


@dataclass(frozen=True)
class DeploymentTable:
    rows: tuple[DeploymentRow, ...]
    count: int
    span: float  # last entry, measured from course open
    avg_per_robot: float
    goal: float
    above_goal: bool

    def format(self) -> str:
        lines = [f"{'robot':<12}{'entry (s)':>12}{'interval (s)':>14}"]
        for row in self.rows:
            interval = "" if row.interval is None else f"{row.interval:.1f}"
            lines.append(f"{row.robot:<12}{row.entry:>12.1f}{interval:>14}")
        lines.append(
            f"{self.count} robots in {format_span(self.span)} "
            f"({self.avg_per_robot:.1f} s/robot; goal {self.goal:.0f})"
        )
        lines.append("above goal" if self.above_goal else "meets goal")
        return "\n".join(lines)


def format_span(seconds: float) -> str:
    minutes, rest = divmod(int(round(seconds)), 60)
    m = f"{minutes} minute" + ("" if minutes == 1 else "s")
    s = f"{rest} second" + ("" if rest == 1 else "s")
    if minutes and rest:
        return f"{m} and {s}"
    return m if minutes else s


def deployment_times(
    events: Iterable[Event], goal: float = GOAL_SECONDS_PER_ROBOT
) -> DeploymentTable:
    entries = sorted(
        (e.payload["since_open"], e.payload["robot"])
        for e in events
        if e.kind == "course-entry"
    )
    rows = []
    previous: float | None = None
    for entry, robot in entries:
        interval = None if previous is None else entry - previous
        rows.append(DeploymentRow(robot, entry, interval))
        previous = entry
    if not rows:
        return DeploymentTable((), 0, 0.0, 0.0, goal, False)
    span = rows[-1].entry
    avg = span / len(rows)
    return DeploymentTable(tuple(rows), len(rows), span, avg, goal, avg > goal)


# -- view usage ---------------------------------------------------------------


def usage_breakdown(events: Sequence[Event], initial_view: str = "mission") -> dict[str, float]:
    """Share of total logged time spent in each console view, in percent."""
    events = list(events)
    if not events:
        return {}
    t0, t_end = events[0].at, events[-1].at
    durations: dict[str, float] = {}
    view, since = initial_view, t0
    for e in events:
        if e.kind != "view-switch":
            continue
        durations[view] = durations.get(view, 0.0) + (e.at - since)
        view, since = e.payload["view"], e.at
    durations[view] = durations.get(view, 0.0) + (t_end - since)
    total = sum(durations.values())
    if total <= 0.0:
        return {view: 100.0}
    return {v: 100.0 * d / total for v, d in durations.items()}


# -- cursor activity -----------------------------------------------------------


def kernel_scale(dpi: float) -> tuple[int, int]:
    """Gaze-offset kernel parameters (mu, sigma) in pixels at the given dpi."""
    if dpi <= 0:
        raise ValueError(f"dpi must be positive, got {dpi}")
    return (
        int(round(_BASE_MU * dpi / _BASE_DPI)),
        int(round(_BASE_SIGMA * dpi / _BASE_DPI)),
    )


@dataclass(frozen=True)
class HeatmapConfig:
    dpi: float = 96.0
    mu: float | None = None  # pixels; derived from dpi unless given
    sigma: float | None = None
    grid: tuple[int, int] = DEFAULT_GRID  # (width, height)
    inactivity_window: float = 10.0
    sample_rate: float = 1.5  # Hz
    zero_mean: bool = False  # classic Gaussian instead of the ring kernel

    def __post_init__(self):
        if self.mu is not None and self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.sigma is not None and self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def scaled(self) -> tuple[float, float]:
        mu, sigma = kernel_scale(self.dpi)
        return (
            float(self.mu if self.mu is not None else mu),
            float(self.sigma if self.sigma is not None else sigma),
        )


def cursor_samples(events: Iterable[Event]) -> list[dict]:
    return [
        {"t": e.at, "x": e.payload["x"], "y": e.payload["y"], "view": e.payload.get("view")}
        for e in events
        if e.kind == "cursor-sample"
    ]


def filter_inactive(samples: Sequence[dict], config: HeatmapConfig) -> list[dict]:
    """Drop maximal constant-position runs lasting strictly longer than the window.

    A sample covers one full period, so a run's duration is
    (t_last - t_first) + 1/sample_rate.
    """
    period = 1.0 / config.sample_rate
    out: list[dict] = []
    i, n = 0, len(samples)
    while i < n:
        j = i
        while (
            j + 1 < n
            and samples[j + 1]["x"] == samples[i]["x"]
            and samples[j + 1]["y"] == samples[i]["y"]
        ):
            j += 1
        duration = samples[j]["t"] - samples[i]["t"] + period
        if duration <= config.inactivity_window + 1e-9:
            out.extend(samples[i : j + 1])
        i = j + 1
    return out


@dataclass
class HeatmapResult:
    grid: np.ndarray  # raw mass, shape (height, width)
    normalized: np.ndarray  # [0, 1] for rendering
    deposited: int
    clipped: int
    config: HeatmapConfig = field(repr=False, default=None)

    @property
    def mass(self) -> float:
        return float(self.grid.sum())


def _ring_kernel(mu: float, sigma: float, zero_mean: bool) -> np.ndarray:
    """Unit-mass radial kernel peaking at radius mu (or at 0 when zero_mean)."""
    center = 0.0 if zero_mean else mu
    radius = int(math.ceil(center + 4.0 * sigma))
    ax = np.arange(-radius, radius + 1, dtype=np.float64)
    r = np.hypot(ax[None, :], ax[:, None])
    k = np.exp(-((r - center) ** 2) / (2.0 * sigma * sigma))
    return k / k.sum()


def heatmap(samples: Sequence[dict], config: HeatmapConfig) -> HeatmapResult:
    width, height = config.grid
    mu, sigma = config.scaled
    grid = np.zeros((height, width), dtype=np.float64)
    kernel = _ring_kernel(mu, sigma, config.zero_mean)
    radius = kernel.shape[0] // 2
    deposited = clipped = 0
    for s in samples:
        x, y = int(round(s["x"])), int(round(s["y"]))
        if not (0 <= x < width and 0 <= y < height):
            clipped += 1
            continue
        gx0, gx1 = max(0, x - radius), min(width, x + radius + 1)
        gy0, gy1 = max(0, y - radius), min(height, y + radius + 1)
        patch = kernel[
            gy0 - (y - radius) : gy1 - (y - radius),
            gx0 - (x - radius) : gx1 - (x - radius),
        ]
        visible = patch.sum()
        if visible <= 0.0:
            clipped += 1
            continue
        # border samples renormalize over the visible part: every deposited
        # sample contributes exactly unit mass to the grid
        grid[gy0:gy1, gx0:gx1] += patch / visible
        deposited += 1
    peak = grid.max()
    normalized = grid / peak if peak > 0 else grid.copy()
    return HeatmapResult(grid, normalized, deposited, clipped, config)


# -- output writers -------------------------------------------------------------


def write_grid_csv(grid: np.ndarray, path: str | Path) -> None:
    np.savetxt(path, grid, delimiter=",", fmt="%.8g")


def write_pgm(normalized: np.ndarray, path: str | Path) -> None:
    """Plain (P2) grayscale image of a [0, 1] grid."""
    levels = np.clip(np.rint(normalized * 255.0), 0, 255).astype(np.int32)
    height, width = levels.shape
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"P2\n{width} {height}\n255\n")
        for row in levels:
            fh.write(" ".join(str(v) for v in row) + "\n")
