"""beatlab: strike-event and motion-signal toolkit for VR music-game
sessions — audio strike detection, dataset construction, ASD/TD sequence
classifiers and trajectory generation."""

__version__ = "0.1.0"
