"""Previously fact-checked claim detection from crowd fact-checking data."""

__version__ = "0.1.0"
