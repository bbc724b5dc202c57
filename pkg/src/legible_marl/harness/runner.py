"""Run every (beta, seed) cell of a config; one CSV and one manifest per cell."""
import datetime
import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from sklearn.base import clone

from .. import __version__
from ..envs.maze import MazeMap
from ..metrics import CSV_COLUMNS, fmt, rows_to_csv_text
from .config import ExperimentConfig

log = logging.getLogger(__name__)

THREADS_ENV = "LEGIBLE_MARL_THREADS"
CSV_NAME = "metrics.csv"
MANIFEST_NAME = "manifest.json"


def code_version():
    """Package version plus a digest of the installed sources."""
    root = Path(__file__).resolve().parents[1]
    h = hashlib.sha256()
    for p in sorted(root.rglob("*.py")):
        h.update(p.relative_to(root).as_posix().encode())
        h.update(p.read_bytes())
    return f"{__version__}+src.{h.hexdigest()[:12]}"


def cell_name(beta, seed):
    return f"beta={fmt(beta)}_seed={seed}"


def max_workers(n_cells):
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        cap = os.cpu_count() or 1
    else:
        try:
            cap = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
        if cap < 1:
            raise ValueError(f"{THREADS_ENV} must be >= 1")
    return max(1, min(cap, n_cells))


def _write_manifest(path, manifest):
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    tmp.replace(path)


def map_hash(config):
    if config["env"] != "lfm":
        return None
    return MazeMap.load(config["map"]).sha256


def run_cell(config, beta, seed, out_dir=None):
    """Train one cell, streaming rows to its CSV chunk by chunk.

    The manifest is written before the first episode.  Only its
    ``status`` entry changes afterwards: "complete", or "incomplete" when
    the run is interrupted or fails, in which case the CSV holds every
    finished chunk.
    """
    out_dir = Path(config["output_dir"] if out_dir is None else out_dir)
    cell_dir = out_dir / cell_name(beta, seed)
    cell_dir.mkdir(parents=True, exist_ok=True)
    resolved = config.to_dict()
    resolved["betas"], resolved["seeds"] = [beta], [seed]
    manifest = {
        "config": resolved,
        "cell": {"beta": beta, "seed": seed},
        "map_sha256": map_hash(config),
        "code_version": code_version(),
        "started": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
        "status": "running",
    }
    mpath = cell_dir / MANIFEST_NAME
    _write_manifest(mpath, manifest)
    est = clone(config.estimator()).set_params(beta=beta, seed=seed)
    est._start()
    done = 0
    try:
        with open(cell_dir / CSV_NAME, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            fh.flush()
            while not est.finished_:
                est.partial_fit(n_episodes=config["chunk"])
                fh.write(rows_to_csv_text(est.rows_[done:], header=False))
                fh.flush()
                done = len(est.rows_)
    except BaseException as exc:
        manifest["status"] = "incomplete"
        manifest["episodes_written"] = done
        manifest["error"] = type(exc).__name__
        _write_manifest(mpath, manifest)
        raise
    manifest["status"] = "complete"
    _write_manifest(mpath, manifest)
    return cell_dir / CSV_NAME


def _cell_job(args):
    data, beta, seed, out_dir = args
    return str(run_cell(ExperimentConfig(data), beta, seed, out_dir))


def run(config, out_dir=None):
    """Run all cells; returns the list of CSV paths in cell order."""
    out_dir = Path(config["output_dir"] if out_dir is None else out_dir)
    cells = config.cells()
    workers = max_workers(len(cells))
    log.info("%d cells, %d worker(s), output in %s", len(cells), workers, out_dir)
    if workers == 1:
        return [run_cell(config, b, s, out_dir) for b, s in cells]
    jobs = [(config.to_dict(), b, s, str(out_dir)) for b, s in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return [Path(p) for p in pool.map(_cell_job, jobs)]
