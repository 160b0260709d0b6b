"""HDG-IP Solver - hybridizable interior penalty DG for degenerate advection-diffusion-reaction."""

__version__ = "0.1.0"
