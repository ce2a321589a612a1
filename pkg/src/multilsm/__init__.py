"""Latent space models for multiplex binary networks with sender and receiver effects."""
from .model import EffectType, Hyperparameters, ModelSpec, ParameterState
from .network import DataValidationError, Multiplex, load_multiplex

__version__ = "0.1.0"

__all__ = [
    "DataValidationError", "EffectType", "Hyperparameters", "ModelSpec", "Multiplex",
    "ParameterState", "load_multiplex", "__version__",
]
