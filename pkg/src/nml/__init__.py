"""nml: simulator and mean-field toolkit for competing weak measurements
(nearest-neighbor ZZ vs on-site X) on qubit chains.

Subpackages:
  qsim        dense state engine (Kraus sampling, channels, fidelity)
  protocols   round-based experiments under complete / no / partial readout
  correlators order-parameter diagnostics and correlation-length fits
  analytic1d  closed-form 1D predictions used as oracles
  meanfield   order parameters, temporal propagators, Landau coefficients
  phasescan   (h, t_f) grid sweeps and critical-line extraction
  cli         command-line interface with CSV/JSON/figure output
"""

__version__ = "0.1.0"
