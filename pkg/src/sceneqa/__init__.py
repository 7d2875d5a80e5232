"""Compositional question-answer corpus synthesis over spatio-temporal scene graphs."""

__version__ = "0.1.0"
