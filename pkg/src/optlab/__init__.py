"""optlab: a desk-scale numerical-optimization laboratory.

Subpackages:
  linalg          dense float64 factorizations and the matrix-sign iteration
  core            parameter blocks, step contract, telemetry
  first_order     classical and adaptive elementwise update rules
  curvature       Kronecker-factored, eigenbasis, and orthogonalized methods
  modular         norms, duality maps, modular steepest descent
  control         learning-rate schedules, scheduled decay, EMA/BEMA
  problems        test objectives, the manual-backprop MLP, data ingestion
  runner / cli    experiment harness and command-line entry points
"""

__version__ = "0.1.0"
