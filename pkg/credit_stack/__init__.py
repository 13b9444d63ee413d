"""Credit score classification with tree ensembles and stacking."""

__version__ = "0.1.0"
