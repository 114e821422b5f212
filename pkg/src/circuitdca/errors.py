"""Exception hierarchy shared by every stage of the pipeline."""


class AnalysisError(Exception):
    """Base class for input and analysis failures (CLI exit code 1)."""

    code = "analysis_error"

    def to_dict(self):
        return {"type": type(self).__name__, "code": self.code, "message": str(self)}


class DSLSyntaxError(AnalysisError):
    code = "syntax_error"

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)

    def to_dict(self):
        d = super().to_dict()
        d["line"] = self.line
        d["column"] = self.column
        return d


class UndeclaredIdentifier(DSLSyntaxError):
    code = "undeclared_identifier"


class UnboundParameter(DSLSyntaxError):
    code = "unbound_parameter"


class UnsupportedVelocityStructure(DSLSyntaxError):
    code = "unsupported_velocity_structure"


class ExpressionError(AnalysisError):
    """An operation would leave the supported expression class."""

    code = "expression_error"


class UnboundVariable(AnalysisError):
    code = "unbound_variable"


class DependentConstraintSet(AnalysisError):
    code = "dependent_constraint_set"


class SingularMatrixError(AnalysisError):
    code = "singular_matrix"


class NonAffineSecondaryConstraint(AnalysisError):
    code = "non_affine_secondary_constraint"

    def __init__(self, message, expression=None):
        self.expression = expression
        super().__init__(message)


class InconsistentConstraints(AnalysisError):
    code = "inconsistent_constraints"


class NonTerminating(AnalysisError):
    code = "non_terminating"


class NonConstantBracketMatrix(AnalysisError):
    code = "non_constant_bracket_matrix"


class InvalidSCCChoice(AnalysisError):
    code = "invalid_scc_choice"


class UnsolvableEliminationChoice(AnalysisError):
    code = "unsolvable_elimination_choice"


class InadmissibleGauge(AnalysisError):
    code = "inadmissible_gauge"


class OperatorOrderingUnsupported(AnalysisError):
    code = "operator_ordering_unsupported"


class NonFiniteState(AnalysisError):
    code = "non_finite_state"

    def __init__(self, message, step=None):
        self.step = step
        super().__init__(message)


class InvariantViolation(Exception):
    """Internal consistency check failed (CLI exit code 2)."""


class OddPhaseDof(UserWarning):
    """Odd phase-space dimension count; usually a misclassification."""
