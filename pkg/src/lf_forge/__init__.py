"""Leader-follower pair identification and filtering toolkit for
heterogeneous, weak-lane-discipline trajectory data."""

__version__ = "0.1.0"
