"""Finite-length vs. asymptotic analysis tools for regular LDPC ensembles.

Submodules:

* ``graph``     Tanner graph sampling, serialization and expansion checks.
* ``de``        Density evolution: scalar, quantized and witness-size recursions.
* ``decoders``  Vectorized message-passing decoders with per-iteration traces.
* ``marking``   Marking process, witness construction and error-set enumeration.
* ``rprocess``  Reduced counting process, greedy schedule and tail bounds.
* ``fkg``       Exhaustive correlation-inequality checks on small cubes.
"""

from __future__ import annotations

__version__ = "0.1.0"
