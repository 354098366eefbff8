"""Planning and analysis tools for near speed-of-light networks."""

__version__ = "0.1.0"
