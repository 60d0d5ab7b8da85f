"""Classical and semiclassical tools for the perturbed 2D anharmonic oscillator."""

__version__ = "0.1.0"
