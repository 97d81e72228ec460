import math
from typing import Optional

import plotext as plt

from monitor import TICKS_COLOR, ResourceStats

MIN_WIDTH = 77


def _prepare(width: int, height: int):
    plt.clf()  # Clear previous frame
    plt.clear_color()
    plt.ticks_color(TICKS_COLOR)
    plt.plot_size(width - 3 if width > 80 else MIN_WIDTH, height)
    plt.limit_size(False, False)


def per_second(times_ms: list, duration_sec: float) -> list:
    """Counts of the given event times bucketed into whole seconds."""
    buckets = [0] * max(1, math.ceil(duration_sec))
    for t in times_ms:
        idx = min(int(t // 1000), len(buckets) - 1)
        if idx >= 0:
            buckets[idx] += 1
    return buckets


def run_chart(requests_per_sec: list, resources: Optional[ResourceStats] = None, width: int = 100,
              height: int = 25) -> str:
    _prepare(width, height)

    # --- RIGHT AXIS: Percentages ---
    if resources is not None and resources.samples:
        seconds = [s.t_ms / 1000 for s in resources.samples]
        plt.plot(seconds, [s.cpu_percent for s in resources.samples], label="CPU %", color="cyan",
                 marker="braille", yside="right")
        plt.plot(seconds, [s.mem_percent for s in resources.samples], label="Mem %", color="magenta",
                 marker="braille", yside="right")
        plt.ylabel("Usage (%)", yside="right")
        plt.ylim(0, 100, yside="right")

    # --- LEFT AXIS: requests/s ---
    plt.plot(list(range(len(requests_per_sec))), requests_per_sec, label="Requests/s", color="red",
             marker="braille", yside="left")
    peak = max(requests_per_sec, default=0)
    plt.ylabel("Requests/s", yside="left")
    plt.ylim(0, math.floor(peak) + 1 if peak > 0 else 20, yside="left")

    plt.grid(False, False)
    plt.xlabel("Seconds")
    return plt.build()


def histogram_chart(counts: dict, title: str, width: int = 100, height: int = 15) -> str:
    """Bar chart of value -> occurrences, values in ascending order."""
    _prepare(width, height)
    keys = sorted(counts)
    plt.bar([str(k) for k in keys], [counts[k] for k in keys], color="cyan")
    plt.title(title)
    return plt.build()
