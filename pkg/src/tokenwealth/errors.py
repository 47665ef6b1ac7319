"""Exception hierarchy.

Every error carries a module-qualified ``code`` (``"supply.RateOutOfRange"``)
which the CLI writes into its machine-readable error report.
"""


class TokenWealthError(Exception):
    module = "core"
    exit_code = 3

    @property
    def code(self):
        return f"{self.module}.{type(self).__name__}"

    def to_dict(self):
        return {"code": self.code, "message": str(self)}


class ValidationError(TokenWealthError, ValueError):
    """Input rejected before any simulation ran.

    ``field`` is a dotted path into the scenario (``"supply.r"``) and
    ``reason`` a short tag such as ``"conservation"``.
    """

    module = "scenario"
    exit_code = 2

    def __init__(self, field, reason, detail=""):
        self.field = field
        self.reason = reason
        self.detail = detail
        msg = f"{field}: {reason}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)

    def to_dict(self):
        d = super().to_dict()
        d.update(field=self.field, reason=self.reason)
        return d


class ScenarioSyntaxError(ValidationError):
    def __init__(self, line, column, detail):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}", "SyntaxError", detail)


# taxonomy
class TaxonomyError(ValidationError):
    module = "taxonomy"

    def __init__(self, detail, field="taxonomy"):
        super().__init__(field, type(self).__name__, detail)


class MissingControlMechanism(TaxonomyError):
    pass


class DuplicateId(TaxonomyError):
    pass


class DanglingEndpoint(TaxonomyError):
    pass


# parametrization
class ParametrizationError(TokenWealthError):
    module = "parametrization"


class ZeroWealthEndpoint(ParametrizationError, ZeroDivisionError):
    pass


class UnboundedExpectation(ParametrizationError):
    exit_code = 2


class ProcessExhausted(ParametrizationError):
    pass


class InfeasibleSample(ParametrizationError):
    pass


class NegativeRotationRate(ParametrizationError, ValueError):
    exit_code = 2


# supply
class SupplyError(TokenWealthError):
    module = "supply"


class RateOutOfRange(SupplyError, ValueError):
    exit_code = 2


class NonPositiveSupply(SupplyError, ValueError):
    pass


class LengthMismatch(SupplyError, ValueError):
    pass


# macro dynamics
class DynamicsError(TokenWealthError):
    module = "macro"


class NegativeWealth(DynamicsError):
    def __init__(self, step, category, value):
        self.step = step
        self.category = category
        self.value = value
        super().__init__(f"category {category} would hold {value!r} after step {step}")


class InsufficientWealthForBurn(DynamicsError):
    def __init__(self, step, category, value):
        self.step = step
        self.category = category
        self.value = value
        super().__init__(f"burn at step {step} drives category {category} to {value!r}")


class ConservationViolation(DynamicsError):
    pass


# analysis
class AnalysisError(TokenWealthError):
    module = "analysis"


class SampleTooSmall(AnalysisError, ValueError):
    pass


class ZeroVariance(AnalysisError, ValueError):
    pass


class TailTooSmall(AnalysisError, ValueError):
    pass


class LambdaOutOfRange(AnalysisError, ValueError):
    pass


class NotConverged(AnalysisError):
    """Equilibrium was not reached. A signal rather than a failure."""

    exit_code = 4


# inverse
class InverseError(TokenWealthError):
    module = "inverse"


class InfeasibleStructure(InverseError):
    pass


class MaxIterations(InverseError):
    pass
