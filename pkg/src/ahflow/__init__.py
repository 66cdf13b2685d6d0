"""
ahflow: Arrow-Hurwicz solvers for the steady incompressible Navier-Stokes
equations.

Modules:
- mesh: structured triangulations (cavity, step channel) and Alfeld splits.
- fem: Taylor-Hood / Scott-Vogelius dof maps, operator assembly, norms.
- sparse_linalg: sparse factorizations and the weighted least-squares kernel.
- solvers: Stokes initializer, AH / grad-div AH / IPP / Picard steps and the
  fixed-point driver.
- anderson: Anderson acceleration over any fixed-point stepper.
- harness: presets, sweeps, exporters and the command line.
"""
__version__ = "0.1.0"
