"""Exception hierarchy.

Three families map to CLI exit codes: configuration problems (2),
convergence failures (3) and failed certificates (4).  Anything else is a
programming or precondition error and surfaces as a plain traceback.
"""


class AxisonicError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(AxisonicError):
    pass


class ConvergenceError(AxisonicError):
    pass


class CertificateError(AxisonicError):
    pass


# configuration / input
class ParseError(ConfigError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ValidationError(ConfigError):
    def __init__(self, message, key=None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class SignPatternViolation(ConfigError):
    pass


class Infeasible(ConfigError):
    pass


class CompatibilityViolation(ConfigError):
    pass


class DimensionMismatch(AxisonicError, ValueError):
    pass


class InsufficientResolution(AxisonicError, ValueError):
    pass


class PreconditionViolation(AxisonicError, ValueError):
    pass


# numerical failures
class NoRoot(ConvergenceError):
    pass


class RootConvergenceFailure(ConvergenceError):
    pass


class NewtonDivergence(ConvergenceError):
    pass


class ClassificationMismatch(ConvergenceError):
    pass


class RootBracketFailure(ConvergenceError):
    pass


class SingularAssembly(ConvergenceError):
    pass


class SingularMatrix(ConvergenceError):
    pass


class NoSigmaConvergence(ConvergenceError):
    pass


class DenominatorDegeneracy(ConvergenceError):
    pass


class NoContraction(ConvergenceError):
    pass


class GateViolation(NoContraction):
    """An iterate left the ball ||psi||_H4 <= delta0, so the map is not a self-map there."""


class MultipleCrossings(ConvergenceError):
    pass


# certificates
class Unclassifiable(CertificateError):
    pass


class NoCertificate(CertificateError):
    pass


class ExtensionFailure(CertificateError):
    pass
