"""Deterministic federated-learning simulator with a trust-aware DQN defense."""

__version__ = "0.1.0"
