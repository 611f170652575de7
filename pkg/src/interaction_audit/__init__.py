"""Static audit of user-interaction data collection claims in Android apps."""

__version__ = "0.1.0"
