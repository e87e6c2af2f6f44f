"""FIR and autoregressive state-space models: configuration, simulation and sweeps."""
