"""Expectation maximization as Gaussian message passing on factor graphs."""
