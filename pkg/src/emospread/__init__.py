"""News emotions and sovereign spread tail forecasting."""

__version__ = "0.1.0"
