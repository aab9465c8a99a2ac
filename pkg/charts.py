"""Line charts written as deterministic, self-contained SVG files."""
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

plt.rcParams["svg.hashsalt"] = "ssc-gomp"
plt.rcParams["svg.fonttype"] = "none"


def line_chart(path: str, x: Sequence[float], series: Mapping[str, Sequence[float]],
               title: str = "", xlabel: str = "", ylabel: str = "", steps: bool = False) -> None:
    """One polyline per series; ``steps`` holds each value until the next x (post-step)."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for label, ys in series.items():
        if steps:
            ax.step(x, ys, where="post", marker="o", label=label)
        else:
            ax.plot(x, ys, marker="o", label=label)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    if series:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
