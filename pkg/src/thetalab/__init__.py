"""thetalab: numerics for the collapsing-polymer dilute O(n) loop model.

Subpackages map onto the pieces of the calculation:

- weights:   integrable vertex weights and named solvable points
- linkstate: link-pattern bases of the loop transfer matrix
- looptm:    matrix-free row transfer matrix and dominant eigenvalues
- vertextm:  Izergin-Korepin 19-vertex transfer matrix (spectral oracle)
- cftpred:   closed-form continuum predictions (exponents, central charges)
- mcvisaw:   grand-canonical Monte Carlo for vertex-interacting SAWs
- analysis:  finite-size scaling fits and sweeps
- cli:       the `thetalab` command-line front end
"""

__version__ = "0.1.0"

from . import weights, linkstate, looptm, vertextm, cftpred, mcvisaw, analysis  # noqa: F401
