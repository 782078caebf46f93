"""Climate-change TV news indices and their relation to firm risk."""

__version__ = "0.1.0"
