"""Parallel-in-time methods lab.

Building blocks for Parareal, IMEX-SDC/MLSDC and two-level PFASST on 1-D
periodic pseudo-spectral PDEs, together with theoretical speedup models, a
threaded Parareal benchmark and an auditor that flags common ways of
over-reporting parallel-in-time performance.
"""

__version__ = "0.1.0"
