"""Ready-made marginal distribution specs for the synthetic generator."""
