"""NOMA downlink beamforming with a symbiotic backscatter tag."""

__version__ = "0.1.0"
