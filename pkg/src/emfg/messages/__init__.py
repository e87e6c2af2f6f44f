"""Gaussian messages, multiplier-node EM messages and vectorization helpers."""
