"""Covariate-modulated Hawkes process for hourly post-volume forecasting."""
