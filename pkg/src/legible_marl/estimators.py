"""scikit-learn style wrappers around one training cell.

There is no dataset to fit on: ``fit`` trains by simulation and ignores
``X``/``y``.  The wrappers exist so that a sweep can ``clone`` a base
estimator and ``set_params(beta=..., seed=...)`` per cell, and so that
learned greedy policies can be queried with ``predict``.
"""
import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .envs.particle import ParticleConfig
from .learners import LearnerConfig
from .maze_training import N_BINS, N_GOALS, MazeFastTrainer, MazeRunSettings
from .nav_training import NavFastTrainer, NavRunSettings


class _CellEstimator(BaseEstimator):

    def _learner(self):
        return LearnerConfig(self.alpha, self.gamma, self.eps_start, self.eps_end,
                             self.eps_fraction)

    def _trainer(self):
        raise NotImplementedError

    def _start(self):
        self.trainer_ = self._trainer()
        self.history_ = np.zeros((0, 7))
        self.rows_ = []

    def partial_fit(self, X=None, y=None, n_episodes=1000):
        """Train the next ``n_episodes`` (fewer if the budget runs out)."""
        if not hasattr(self, "trainer_"):
            self._start()
        first = self.trainer_.episode
        out = self.trainer_.run(n_episodes)
        self.history_ = np.vstack([self.history_, out])
        self.rows_.extend(self.trainer_.metric_rows(out, first))
        return self

    def fit(self, X=None, y=None):
        self._start()
        while not self.trainer_.done:
            self.partial_fit(n_episodes=self.episodes)
        return self

    @property
    def finished_(self):
        return self.trainer_.done

    def score(self, X=None, y=None, window=None):
        """Mean raw team return over the final window (10% of episodes by default)."""
        check_is_fitted(self, "history_")
        h = self.history_
        if len(h) == 0:
            raise ValueError("estimator has not been trained")
        window = max(1, len(h) // 10) if window is None else window
        return float(h[-window:, 0].mean())


class LegibleMazeEstimator(_CellEstimator):
    """Leader and follower tabular learners on the lead-follow maze.

    Parameters
    ----------
    beta : float
        Weight of the legibility bonus.  0 trains independent learners.
    seed : int
    episodes : int
    algo : {"q_learning", "sarsa"}
    divergence : {"reverse_kl", "smoothed_forward_kl"}
    shaping : bool
        False removes the bonus and the divergence work entirely.
    public_target : bool
        Give the follower the true target (sanity baseline).
    """

    def __init__(self, beta=0.0, seed=1, episodes=50_000, max_steps=50, algo="q_learning",
                 divergence="reverse_kl", eps_smooth=1e-6, laplace_alpha=1.0, alpha=0.1,
                 gamma=0.95, eps_start=1.0, eps_end=0.05, eps_fraction=0.8, map_path=None,
                 public_target=False, shaping=True):
        self.beta = beta
        self.seed = seed
        self.episodes = episodes
        self.max_steps = max_steps
        self.algo = algo
        self.divergence = divergence
        self.eps_smooth = eps_smooth
        self.laplace_alpha = laplace_alpha
        self.alpha = alpha
        self.gamma = gamma
        self.eps_start = eps_start
        self.eps_end = eps_end
        self.eps_fraction = eps_fraction
        self.map_path = map_path
        self.public_target = public_target
        self.shaping = shaping

    def settings(self):
        return MazeRunSettings(self.episodes, self.max_steps, self.beta, self.seed, self.algo,
                               self.divergence, self.eps_smooth, self.laplace_alpha,
                               self._learner(), self.map_path, self.public_target)

    def _trainer(self):
        return MazeFastTrainer(self.settings(), shaping=self.shaping)

    def predict(self, X):
        """Greedy leader action for rows of (lx, ly, fx, fy, target_index)."""
        X = np.atleast_2d(np.asarray(X, dtype=np.int64))
        lay = self.trainer_.layout
        C = lay.n_cells
        out = np.empty(len(X), dtype=np.int64)
        for i, (lx, ly, fx, fy, g) in enumerate(X):
            s = lay.cell((lx, ly)) * C + lay.cell((fx, fy))
            out[i] = int(np.argmax(self.trainer_.QL[(s * N_GOALS + g) * N_BINS]))
        return out


class LegibleNavEstimator(_CellEstimator):
    """Three tile-coded learners on particle navigation."""

    def __init__(self, beta=0.0, seed=1, episodes=10_000, divergence="reverse_kl",
                 eps_smooth=1e-6, beta_like=1.0, tilings=8, tiles=8, alpha=0.1, gamma=0.95,
                 eps_start=1.0, eps_end=0.05, eps_fraction=0.8, physics=None, shaping=True):
        self.beta = beta
        self.seed = seed
        self.episodes = episodes
        self.divergence = divergence
        self.eps_smooth = eps_smooth
        self.beta_like = beta_like
        self.tilings = tilings
        self.tiles = tiles
        self.alpha = alpha
        self.gamma = gamma
        self.eps_start = eps_start
        self.eps_end = eps_end
        self.eps_fraction = eps_fraction
        self.physics = physics
        self.shaping = shaping

    def settings(self):
        phys = ParticleConfig(**(self.physics or {}))
        return NavRunSettings(self.episodes, self.beta, self.seed, self.divergence,
                              self.eps_smooth, self.beta_like, self.tilings, self.tiles, phys,
                              self._learner())

    def _trainer(self):
        return NavFastTrainer(self.settings(), shaping=self.shaping)

    def predict(self, X, agent=0):
        """Greedy action of ``agent`` for feature rows (dx, dy, vx, vy)."""
        coder = self.trainer_.coders()[agent]
        return np.array([int(np.argmax(coder.q_all(x))) for x in np.atleast_2d(X)])
