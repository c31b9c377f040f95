"""Class operators, POVMs and decoherence functionals for time-smeared observables."""

__version__ = "0.1.0"
