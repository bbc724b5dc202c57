"""Reference environments."""
from .maze import (ACTIONS, EXIT_LABELS, LeadFollowMaze, MazeMap, MazeWorld, maze_observe,
                   maze_reset, maze_step)
from .particle import (ObservationChain, ParticleConfig, ParticleWorld, SimpleNavigation,
                       nav_observe, nav_reset, nav_step)

__all__ = ["ACTIONS", "EXIT_LABELS", "LeadFollowMaze", "MazeMap", "MazeWorld", "maze_observe",
           "maze_reset", "maze_step", "ObservationChain", "ParticleConfig", "ParticleWorld",
           "SimpleNavigation", "nav_observe", "nav_reset", "nav_step"]
