"""Tracklet association, identity voting and detection evaluation."""

__version__ = "0.1.0"
