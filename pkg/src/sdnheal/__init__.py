"""Self-healing closed loop for a simulated software-defined network.

Subpackages by role: netmodel (topology and services), simkernel
(deterministic fault-injecting simulator), alarmpipe (alarm translation
and evidence), bndiag (noisy-OR Bayesian diagnosis), recover (strategy
selection and execution), healloop (the orchestrating loop and reports).
"""

__version__ = "0.1.0"
