"""Hamilton-Jacobi whiskers, splitting potentials and homoclinic counts near a simple resonance.

Submodules: ``series`` (Fourier tables and momentum jets), ``cylinder``
(Chebyshev-Fourier fields), ``separatrix`` (time map and charts),
``homological`` (small-divisor solvers), ``normalform`` (resonant
scaling and averaging), ``kam`` (Newton iteration for the whiskers),
``splitting`` (splitting potential, flow-box, decay and critical points)
and ``cli``.
"""

__version__ = "0.1.0"
