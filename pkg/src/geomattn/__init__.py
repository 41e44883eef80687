"""Rotation-equivariant attention networks built on 3D geometric algebra.

Submodules
----------
algebra
    Multivectors, the geometric product, rotation invariants and rotors.
tensor
    Small reverse-mode autodiff engine with nested tapes.
nn
    Parameters, checkpoints and basic layers.
attention
    Tuple-based attention layers producing invariant values or covariant vectors.
models
    Crystal classifier, conservative force field and backmapper.
datasets
    Synthetic crystals, neighbor search, backmapping and force data, XYZ files.
training
    Adam, the plateau schedule, losses, metrics and fit loops.
"""
from . import algebra, attention, datasets, models, nn, tensor, training
from .algebra import Multivector, Rotation, geometric_product, invariants, product_chain
from .attention import AttentionConfig, LabeledVectorAttention, Vector2VectorAttention, VectorAttention
from .models import ModelSpec, build_model, load_model, save_model

__version__ = "0.1.0"

__all__ = [
    "algebra",
    "attention",
    "datasets",
    "models",
    "nn",
    "tensor",
    "training",
    "Multivector",
    "Rotation",
    "geometric_product",
    "invariants",
    "product_chain",
    "AttentionConfig",
    "VectorAttention",
    "Vector2VectorAttention",
    "LabeledVectorAttention",
    "ModelSpec",
    "build_model",
    "load_model",
    "save_model",
]
