"""spreadlab: competing first-passage growth and SI infection processes on Z^d.

Subpackages/modules:

* ``lattice``    finite-lattice geometry and the two graph metrics
* ``ssp``        exact two-colour growth engine (red/blue clocks, seeds)
* ``multiscale`` seed clustering, halo/core regions, distortion checks
* ``si``         event-driven SI particle simulator
* ``blocks``     block colouring over SI runs, derived clocks, equivalence
* ``dim1``       one-dimensional scale recursion and sequence lemma
* ``harness``    CLI, sweeps, reports, renders
"""

__version__ = "0.1.0"
