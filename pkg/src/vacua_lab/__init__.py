"""Exact computations with spaces of vacua for sl(n+1) current algebras and the bc system."""

from .exact import QMatrix, fstr
from .lie_core import build_lie_data, conformal_weight, dagger, label_set, parse_algebra
from .affine_module import build_truncated_module, sugawara
from .vacua_p1 import PointedSphere, fusion_dim, propagate, vacua_basis
from .fock import AbelianSphere, MayaDiagram, abelian_vacua, preferred_vacuum_p1
from .factorization import dim_functor, glue_series_abelian, glue_series_nonabelian, surface
from .mcg import ExtendedMorphism, Lagrangian, compose, wall_sigma

__version__ = "0.1.0"

__all__ = [
    "QMatrix", "fstr",
    "build_lie_data", "conformal_weight", "dagger", "label_set", "parse_algebra",
    "build_truncated_module", "sugawara",
    "PointedSphere", "fusion_dim", "propagate", "vacua_basis",
    "AbelianSphere", "MayaDiagram", "abelian_vacua", "preferred_vacuum_p1",
    "dim_functor", "glue_series_abelian", "glue_series_nonabelian", "surface",
    "ExtendedMorphism", "Lagrangian", "compose", "wall_sigma",
]
