"""Brute-force reference computations for validating the closed-form messages."""
