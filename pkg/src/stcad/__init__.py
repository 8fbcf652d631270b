"""Edge anomaly detection in dynamic graphs with a structural-temporal graph transformer."""

__version__ = "0.1.0"
