"""Line charts of a finished run directory, one SVG per metric."""
import json
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..metrics import aggregate, read_metrics_csv  # noqa: E402
from .runner import CSV_NAME, MANIFEST_NAME  # noqa: E402

log = logging.getLogger(__name__)

# file stem -> (csv column, y label)
METRICS = {
    "reward": ("return_raw", "rolling raw team return"),
    "pcr": ("pred_correct", "PCR"),
    "ptr": ("ptr", "PTR"),
    "success": ("success", "success rate"),
}


class NoDataError(RuntimeError):
    pass


def load_cells(run_dir):
    """Complete cells under ``run_dir`` as {beta: [columns, ...]}."""
    groups = {}
    for csv_path in sorted(Path(run_dir).rglob(CSV_NAME)):
        mpath = csv_path.with_name(MANIFEST_NAME)
        try:
            status = json.loads(mpath.read_text(encoding="utf-8")).get("status")
        except (OSError, ValueError):
            status = None
        if status != "complete":
            log.warning("skipping %s (status %s)", csv_path.parent, status)
            continue
        cols = read_metrics_csv(csv_path)
        if len(cols["episode"]) == 0:
            continue
        groups.setdefault(float(cols["beta"][0]), []).append(cols)
    return groups


def _window(groups, window):
    if window is not None:
        return window
    n = min(len(c["episode"]) for cells in groups.values() for c in cells)
    return max(1, n // 20)


def plot(run_dir, out_dir=None, window=None):
    """Write reward/pcr/ptr/success SVGs; returns their paths."""
    groups = load_cells(run_dir)
    if not groups:
        raise NoDataError(f"no complete metrics CSV under {run_dir}")
    out_dir = Path(run_dir if out_dir is None else out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    w = _window(groups, window)
    paths = []
    for stem, (col, label) in METRICS.items():
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        for beta in sorted(groups):
            cells = groups[beta]
            n = min(len(c[col]) for c in cells)
            curves = np.array([aggregate(c[col][:n], w) for c in cells])
            x = np.arange(n)
            mean = curves.mean(axis=0)
            sd = curves.std(axis=0)
            line, = ax.plot(x, mean, lw=1.2, label=f"β={beta:g} (n={len(cells)})")
            ax.fill_between(x, mean - sd, mean + sd, color=line.get_color(), alpha=0.2, lw=0)
        ax.set_xlabel("episode")
        ax.set_ylabel(label)
        ax.set_title(f"{label}, window {w}")
        ax.legend(loc="best", fontsize=8)
        fig.tight_layout()
        path = out_dir / f"{stem}.svg"
        fig.savefig(path, format="svg")
        plt.close(fig)
        paths.append(path)
    return paths
