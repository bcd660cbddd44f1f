"""Smooth increasing diffeomorphisms of the line with prescribed jets at points and integers."""

from .decomposition import Factorization, compose_factorization, factorize, jets_at_integers
from .dsl_parser import ast_eval, ast_jet, parse, to_source, validate_diffeo
from .extension_ops import (
    PiecewiseDiffeo,
    ZJetFamily,
    extend_integers,
    extend_left,
    extend_pair,
    extend_point,
    extend_right,
    extend_unit_pair,
)
from .jet_core import Jet, identity_jet, jet_compose, jet_invert
from .smooth_expr import expr_eval, expr_inverse_eval, expr_jet, from_json, to_json

__version__ = "0.1.0"
