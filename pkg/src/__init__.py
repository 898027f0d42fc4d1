"""
cokernel-lab - cokernels of P(X) for random matrices over Z/p^kZ.

This package provides tools for:
- Polynomial arithmetic over Z/p^kZ and F_q, factorization and Hensel lifting
- Smith and Howell normal forms, solution counting
- Finite modules over (Z/p^kZ)[t]/(P): types, Hom, Sur, Aut and Ext¹
- Limiting probabilities of cokernel types
- Monte-Carlo tallies, empirical moments and exhaustive oracles
"""

__version__ = "1.0.1"
