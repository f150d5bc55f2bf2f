"""Static SVG line plots written next to the CSV outputs."""

import logging
from pathlib import Path
from typing import Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

logger = logging.getLogger(__name__)

# Fixed salt and no date so repeated runs produce identical files.
plt.rcParams["svg.hashsalt"] = "subsep"


def write_line_svg(path: Union[str, Path], x, y, title: str, xlabel: str, ylabel: str) -> None:
    fig, ax = plt.subplots(figsize=(8, 3))
    try:
        ax.plot(x, y, linewidth=0.8)
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.grid(True, linewidth=0.3)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
    logger.debug("Wrote plot %s", path)
