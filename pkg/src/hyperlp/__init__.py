"""Bilevel hyperparameter tuning toolkit.

Upper level: searches over discrete architecture choices and continuous
regularization strengths (micro genetic algorithm, grid, random).
Lower level: an Adam-trained MLP. A linear program built from the
validation gradient and the training-loss Hessian rows yields the joint
steepest-descent direction over (regularization, weights); a line
search along it fine-tunes any trained model.
"""

from . import calculus, datasets, hls, linalg, mlp, search, simplex, verify

__version__ = "0.1.0"

__all__ = [
    "calculus",
    "datasets",
    "hls",
    "linalg",
    "mlp",
    "search",
    "simplex",
    "verify",
    "__version__",
]
