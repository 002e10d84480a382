"""Monte Carlo simulator for equalization-enhanced phase noise (EEPN) in
coherent optical receivers.

Subpackages by responsibility:

- ``constellation``: uniform and probabilistically shaped QAM alphabets
- ``stochastic``: seeded RNG streams, Wiener laser phase, circular AWGN
- ``channel``: the baseband chain (pulse shaping, dispersion, lasers, ASE,
  matched filter / electronic dispersion compensation)
- ``cpr``: carrier phase recovery (genie LO cancellation, ideal data
  remodulation, blind phase search) and genie cycle-slip removal
- ``metrics``: EEPN extraction, SNR, distribution statistics,
  cross-correlation, analytic reference models
- ``harness``: scenario sweeps, OSNR-penalty root finding, CSV emission
- ``cli``: command-line entry point (``eepnsim``)
"""

__version__ = "0.1.0"

from .errors import ConfigError, RangeError

__all__ = ["ConfigError", "RangeError", "__version__"]
