"""Experiment configuration: one JSON document, CLI flags on top."""
import copy
import json
import numbers
from importlib import resources
from pathlib import Path

from .._validation import ConfigurationError
from ..estimators import LegibleMazeEstimator, LegibleNavEstimator

ENVS = ("lfm", "simple_navigation")
ALGOS = {"lfm": ("q_learning", "sarsa"), "simple_navigation": ("tile_td",)}
BACKENDS = {"lfm": ("empirical",), "simple_navigation": ("maxent",)}
DIVERGENCES = ("reverse_kl", "smoothed_forward_kl")

DEFAULTS = {
    "env": "lfm",
    "algo": "q_learning",
    "betas": [0.0],
    "episodes": 50_000,
    "max_steps": None,
    "seeds": [1],
    "divergence": {"mode": "reverse_kl", "eps_smooth": 1e-6},
    "recognizer": {"backend": None, "laplace_alpha": 1.0, "beta_like": 1.0},
    "learner": {"alpha": 0.1, "gamma": 0.95, "eps_start": 1.0, "eps_end": 0.05,
                "eps_fraction": 0.8, "tilings": 8, "tiles": 8},
    "physics": {},
    "map": None,
    "public_target": False,
    "chunk": 5000,
    "window": 1000,
    "output_dir": "runs",
}
LEARNER_KEYS = ("alpha", "gamma", "eps_start", "eps_end", "eps_fraction")


def _merge(base, extra, path=""):
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if k not in base:
            raise ConfigurationError(f"unknown config key {path + k!r}")
        if isinstance(base[k], dict) and k != "physics":
            if not isinstance(v, dict):
                raise ConfigurationError(f"{path + k} must be an object")
            out[k] = _merge(base[k], v, path + k + ".")
        else:
            out[k] = copy.deepcopy(v)
    return out


def preset_names():
    root = resources.files("legible_marl.harness").joinpath("presets")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def _read(source):
    path = Path(source)
    if path.is_file():
        text = path.read_text(encoding="utf-8")
    elif source in preset_names():
        text = resources.files("legible_marl.harness").joinpath(
            "presets", source + ".json").read_text(encoding="utf-8")
    else:
        raise ConfigurationError(f"no config file or preset named {source!r}")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{source}: invalid JSON ({exc})") from None


class ExperimentConfig:
    """Resolved, validated experiment configuration.

    Parameters
    ----------
    data : dict
        Partial document; missing keys take :data:`DEFAULTS`.
    """

    def __init__(self, data=None):
        raw = _merge(DEFAULTS, data or {})
        if raw["recognizer"]["backend"] is None:
            raw["recognizer"]["backend"] = BACKENDS.get(raw["env"], (None,))[0]
        if raw["max_steps"] is None:
            raw["max_steps"] = 50 if raw["env"] == "lfm" else 100
        self.data = raw
        self.validate()

    @classmethod
    def load(cls, source, betas=None, seeds=None, out=None, episodes=None):
        data = _read(source)
        if not isinstance(data, dict):
            raise ConfigurationError("config document must be a JSON object")
        if betas is not None:
            data["betas"] = list(betas)
        if seeds is not None:
            data["seeds"] = list(seeds)
        if out is not None:
            data["output_dir"] = str(out)
        if episodes is not None:
            data["episodes"] = int(episodes)
        return cls(data)

    def __getitem__(self, key):
        return self.data[key]

    def to_dict(self):
        return copy.deepcopy(self.data)

    def validate(self):
        d = self.data
        if d["env"] not in ENVS:
            raise ConfigurationError(f"env must be one of {ENVS}, got {d['env']!r}")
        if d["algo"] not in ALGOS[d["env"]]:
            raise ConfigurationError(f"algo {d['algo']!r} not available for {d['env']}")
        if d["recognizer"]["backend"] not in BACKENDS[d["env"]]:
            raise ConfigurationError(
                f"recognizer backend {d['recognizer']['backend']!r} not wired for {d['env']}")
        if d["divergence"]["mode"] not in DIVERGENCES:
            raise ConfigurationError(f"divergence mode must be one of {DIVERGENCES}")
        for key in ("episodes", "max_steps", "chunk", "window"):
            v = d[key]
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ConfigurationError(f"{key} must be an integer >= 1, got {v!r}")
        if not isinstance(d["betas"], list) or not d["betas"]:
            raise ConfigurationError("betas must be a non-empty list")
        for b in d["betas"]:
            if isinstance(b, bool) or not isinstance(b, numbers.Real) or not b >= 0:
                raise ConfigurationError(f"every beta must be a real >= 0, got {b!r}")
        if not isinstance(d["seeds"], list) or not d["seeds"]:
            raise ConfigurationError("at least one seed is required")
        for s in d["seeds"]:
            if isinstance(s, bool) or not isinstance(s, int) or s < 0:
                raise ConfigurationError(f"seeds must be non-negative integers, got {s!r}")
        if len(set(d["betas"])) != len(d["betas"]) or len(set(d["seeds"])) != len(d["seeds"]):
            raise ConfigurationError("betas and seeds must not repeat")
        if d["env"] == "simple_navigation" and d["max_steps"] != 100 and \
                "max_steps" not in d["physics"]:
            d["physics"] = dict(d["physics"], max_steps=d["max_steps"])
        # build one estimator so learner/physics values get checked now
        try:
            self.estimator().settings()
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(str(exc)) from None

    def estimator(self, beta=None, seed=None):
        d = self.data
        lr = {k: d["learner"][k] for k in LEARNER_KEYS}
        beta = float(d["betas"][0] if beta is None else beta)
        seed = int(d["seeds"][0] if seed is None else seed)
        if d["env"] == "lfm":
            return LegibleMazeEstimator(beta=beta, seed=seed, episodes=d["episodes"],
                            max_steps=d["max_steps"], algo=d["algo"],
                            divergence=d["divergence"]["mode"],
                            eps_smooth=d["divergence"]["eps_smooth"],
                            laplace_alpha=d["recognizer"]["laplace_alpha"],
                            map_path=d["map"], public_target=d["public_target"], **lr)
        return LegibleNavEstimator(beta=beta, seed=seed, episodes=d["episodes"],
                              divergence=d["divergence"]["mode"],
                              eps_smooth=d["divergence"]["eps_smooth"],
                              beta_like=d["recognizer"]["beta_like"],
                              tilings=d["learner"]["tilings"], tiles=d["learner"]["tiles"],
                              physics=dict(d["physics"]) or None, **lr)

    def cells(self):
        return [(float(b), int(s)) for b in self.data["betas"] for s in self.data["seeds"]]
