"""Contextuality and joint-measurability toolkit.

Modules:

- ``quantum_core``: operators, states, POVMs, Clifford generators, CHSH.
- ``polytope_engine``: exact vertex enumeration and exact simplex.
- ``joint_measurability``: noisy spin compatibility and hypergraph realisation.
- ``ks_polytope``: event hypergraphs and noncontextual assignment polytopes.
- ``specker_ncycle``: Specker's scenario and n-cycle witnesses.
- ``gpt_fit``: GPT fitting, secondary procedures and the fair-coin witness.
"""

from .errors import ContextLabError

__version__ = "0.1.0"

__all__ = ["ContextLabError", "__version__"]
