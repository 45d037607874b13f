"""Textual model language: parser, canonical printer and resolver."""
from .ast import ModelFile, Span
from .lexer import Diagnostic, DslError, tokenize
from .parser import parse_expr, parse_model, parse_with_diagnostics
from .printer import print_model
from .resolve import MachineModel, ResolvedModel, SystemModel, resolve, resolve_with_diagnostics

__all__ = [
    "Diagnostic",
    "DslError",
    "MachineModel",
    "ModelFile",
    "ResolvedModel",
    "Span",
    "SystemModel",
    "parse_expr",
    "parse_model",
    "parse_with_diagnostics",
    "print_model",
    "resolve",
    "resolve_with_diagnostics",
    "tokenize",
]
