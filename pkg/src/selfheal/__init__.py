"""Desk-scale self-healing database laboratory.

Simulated workloads with injected anomalies and cascading failures, a
few-shot meta-learned anomaly detector, a message-passing failure predictor,
a multi-objective Q-learning recovery agent with Pareto analysis, exact
Shapley explanations, and a reproducible CLI harness tying them together.
"""

__version__ = "0.1.0"
