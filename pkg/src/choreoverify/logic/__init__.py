from .expr import (
    Expr, Num, Var, BinOp, Neg, Pow, Call, Ite, BoolConst, Cmp, And, Or, Not, Implies,
    TRUE, FALSE, num, var, conj, disj, implies, negate, conjuncts, free_vars, substitute, show,
)
from .interval import Interval, eval_at, eval_bool, eval_term, DomainError, DivisionByZeroRegion
from .checker import Verdict, check_validity, UnboundedVariable, DEFAULT_DEPTH, make_bounds, combine
from .smtlib import emit_smtlib, parse_sexps, validate_script, logic_for, SexpError
from .footprint import Box, Region, as_pred, footprints_disjoint, footprint_within, fp_substitute

__all__ = [
    "Expr", "Num", "Var", "BinOp", "Neg", "Pow", "Call", "Ite", "BoolConst", "Cmp", "And", "Or",
    "Not", "Implies", "TRUE", "FALSE", "num", "var", "conj", "disj", "implies", "negate",
    "conjuncts", "free_vars", "substitute", "show", "Interval", "eval_at", "eval_bool",
    "eval_term", "DomainError", "DivisionByZeroRegion", "Verdict", "check_validity",
    "UnboundedVariable", "DEFAULT_DEPTH", "make_bounds", "combine", "emit_smtlib", "parse_sexps",
    "validate_script", "logic_for", "SexpError", "Box", "Region", "as_pred",
    "footprints_disjoint", "footprint_within", "fp_substitute",
]
