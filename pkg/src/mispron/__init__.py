"""Phone-level mispronunciation analysis for L2 English speech."""

__version__ = "0.1.0"
