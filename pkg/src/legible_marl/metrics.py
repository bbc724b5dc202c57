"""Per-episode legibility and performance metrics."""
import csv
import io
from dataclasses import astuple, dataclass, field, fields

import numpy as np

from ._validation import ConfigurationError, check_int

CSV_COLUMNS = ("episode", "seed", "beta", "return_raw", "return_shaped", "success", "ptr",
               "pred_correct", "steps")


@dataclass
class EpisodeRecord:
    """Trace of one episode as seen by one observer.

    ``beliefs`` has shape (T+1, |G|): the observer's belief before any action
    and after each of the T observed actions.
    """

    beliefs: np.ndarray
    true_goal: int
    actions: list = field(default_factory=list)
    rewards_raw: list = field(default_factory=list)
    rewards_shaped: list = field(default_factory=list)
    klg: list = field(default_factory=list)
    success: bool = False

    def __post_init__(self):
        self.beliefs = np.atleast_2d(np.asarray(self.beliefs, dtype=float))
        if self.beliefs.shape[0] < 2:
            raise ConfigurationError("an episode needs at least one step")

    @property
    def steps(self):
        return self.beliefs.shape[0] - 1


def _correct(b, g):
    """Argmax equals ``g`` and is unique."""
    m = int(np.argmax(b))
    return m == g and int(np.sum(b == b[m])) == 1


def prediction_correct(record):
    return _correct(record.beliefs[-1], record.true_goal)


def pcr(records):
    flags = [prediction_correct(r) if isinstance(r, EpisodeRecord) else bool(r) for r in records]
    if not flags:
        raise ConfigurationError("pcr needs a non-empty window")
    return sum(flags) / len(flags)


def correct_since(beliefs, goal):
    """Earliest t from which every belief up to the end predicts ``goal``.

    Returns ``len(beliefs)`` when the final belief is wrong.
    """
    t_star = len(beliefs)
    for t in range(len(beliefs) - 1, -1, -1):
        if _correct(beliefs[t], goal):
            t_star = t
        else:
            break
    return t_star


def ptr(record):
    T = record.steps
    t_star = correct_since(record.beliefs, record.true_goal)
    if t_star > T:
        return 1.0
    return t_star / T


def aggregate(values, window=1000):
    """Trailing-window means; early entries average over what exists so far.

    ``values`` is 1-d (one metric) or 2-d (episodes x metrics).
    """
    window = check_int(window, "window", 1)
    x = np.asarray(values, dtype=float)
    squeeze = x.ndim == 1
    x = x.reshape(len(x), -1)
    out = np.empty_like(x)
    for i in range(len(x)):
        lo = max(0, i - window + 1)
        out[i] = x[lo:i + 1].mean(axis=0)
    return out[:, 0] if squeeze else out


@dataclass
class MetricRow:
    episode: int
    seed: int
    beta: float
    return_raw: float
    return_shaped: float
    success: int
    ptr: float
    pred_correct: int
    steps: int

    def __post_init__(self):
        if not 0.0 <= self.ptr <= 1.0:
            raise ConfigurationError(f"ptr={self.ptr} outside [0, 1]")


def fmt(x):
    """Float formatting used in every metrics CSV."""
    return format(float(x), ".9g")


def row_to_csv(row):
    vals = astuple(row)
    out = []
    for f, v in zip(fields(row), vals):
        out.append(fmt(v) if f.type is float or f.type == "float" else str(int(v)))
    return ",".join(out)


def rows_to_csv_text(rows, header=True):
    buf = io.StringIO()
    if header:
        buf.write(",".join(CSV_COLUMNS) + "\n")
    for r in rows:
        buf.write(row_to_csv(r) + "\n")
    return buf.getvalue()


def read_metrics_csv(path):
    """Load a metrics CSV into a dict of numpy columns."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ConfigurationError(f"{path}: unexpected header {header}")
        data = [list(map(float, r)) for r in reader if r]
    arr = np.asarray(data, dtype=float).reshape(-1, len(CSV_COLUMNS))
    return {c: arr[:, i] for i, c in enumerate(CSV_COLUMNS)}
