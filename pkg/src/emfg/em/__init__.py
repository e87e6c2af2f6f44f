"""The EM loop over an equality chain of per-section parameter copies."""
