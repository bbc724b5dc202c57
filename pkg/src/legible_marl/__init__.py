"""Multiagent reward shaping for goal legibility."""
__version__ = "0.1.0"
