"""Bus passenger origin-destination reconstruction from onboard camera logs."""

__version__ = "0.1.0"
