"""Figure rendering for ellipsorb CSV/JSON artifacts."""

__version__ = "0.1.0"
