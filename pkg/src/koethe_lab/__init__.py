"""Convolution operators between power series (Koethe) spaces."""

__version__ = "0.1.0"

from .seqcore import (
    SignedLogValue,
    FiniteTable,
    Expression,
    Geometric,
    PowerLaw,
    ExpOfExponent,
    cauchy_product_prefix,
    unit,
    constant,
)
from .exponents import Linear, Log, PowerLog, Table
from .koethe import (
    InfiniteType,
    FiniteType,
    ExpressionMatrix,
    Tabulated,
    normalize,
    check_koethe_axioms,
    check_inclusion,
    check_membership,
    check_dual_membership,
    check_nuclear,
    check_G1,
    check_Ginf,
    seminorm_l1,
    seminorm_sup,
)
from .verdicts import Budget, Status, Verdict
from .operators import (
    Direction,
    Agreement,
    SpaceInstance,
    apply_T,
    apply_T_transpose,
    continuity_certificate,
    verify_theorem1,
    verify_theorem2,
    normality_transfer,
)
