"""simfair: simulation-guided, location-fairness-aware temperature regression lab."""

__version__ = "0.1.0"
