"""Preference-function language: parse, check, evaluate and print."""

from prefplan.dsl.check import Catalog, Diagnostic, DslCheckError, diagnose, typecheck
from prefplan.dsl.evaluate import DslEvalError, EvalContext, evaluate, normal_cdf
from prefplan.dsl.parser import (
    DslArityError,
    DslError,
    DslLexError,
    DslNameError,
    DslSyntaxError,
    DslTypeError,
    parse,
)
from prefplan.dsl.printer import pretty

__all__ = [
    "Catalog",
    "Diagnostic",
    "DslArityError",
    "DslCheckError",
    "DslError",
    "DslEvalError",
    "DslLexError",
    "DslNameError",
    "DslSyntaxError",
    "DslTypeError",
    "EvalContext",
    "diagnose",
    "evaluate",
    "normal_cdf",
    "parse",
    "pretty",
    "typecheck",
]
