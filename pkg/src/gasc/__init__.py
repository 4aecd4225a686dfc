"""Genre-aware semantic change: dynamic Bayesian sense model, embedding baselines, evaluation."""

__version__ = "0.1.0"
