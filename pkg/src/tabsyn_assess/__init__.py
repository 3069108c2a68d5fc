"""Evaluation toolkit for tabular data synthesizers.

Fidelity (Wasserstein distance over low-order marginals), membership
disclosure (shadow-model MDS plus DCR/NNDR baselines), utility (machine
learning affinity and range-query error) and a tuning objective that
combines them.
"""

__version__ = "0.1.0"
