"""NOMA-assisted pinching-antenna downlink optimisation."""
