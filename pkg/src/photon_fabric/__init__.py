"""Inverse-designed resonant 2x2 building blocks and switching fabrics.

Subpackage map:
    modes     guided modes of 1D index cuts
    solver    scalar frequency-domain field solver with absorbing layers
    topopt    density-based adjoint topology optimization
    devices   device design problems, metrics, sweeps, resonance fits
    netsim    behavioral 2x2 models and transfer-matrix circuit evaluation
    fabric    parallel-waveguide circuit layout generators
    routing   switch-state solvers and the path-trace oracle
    cli       command-line entry points
"""

__version__ = "0.1.0"
