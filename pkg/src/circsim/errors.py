"""Exception hierarchy shared by every engine."""


class SimulationError(Exception):
    """Base class for all errors raised by circsim."""


class UnknownGate(SimulationError, KeyError):
    def __init__(self, name, available):
        self.name = name
        self.available = tuple(available)
        super().__init__(f"Unknown gate '{name}'. Available gates: {', '.join(self.available)}")

    def __str__(self):
        return self.args[0]


class ArityMismatch(SimulationError, ValueError):
    pass


class ParamCountMismatch(SimulationError, ValueError):
    pass


class UnboundParameter(SimulationError, ValueError):
    pass


class NotMatrixRepresentable(SimulationError, TypeError):
    pass


class NotUnitary(SimulationError, ValueError):
    pass


class NotInvertible(SimulationError, TypeError):
    pass


class BadPartition(SimulationError, ValueError):
    pass


class TooManyQubits(SimulationError, ValueError):
    pass


class GateTooWide(SimulationError, ValueError):
    pass


class UnknownQubit(SimulationError, KeyError):
    pass


class BadToken(SimulationError, ValueError):
    pass


class QubitNotInState(SimulationError, KeyError):
    pass


class ShapeMismatch(SimulationError, ValueError):
    pass


class ZeroNormProjection(SimulationError, ArithmeticError):
    pass


class BadPauli(SimulationError, ValueError):
    pass


class LetterUsedOnce(SimulationError, ValueError):
    pass


class CapTooSmall(SimulationError, ValueError):
    pass


class NonFiniteResult(SimulationError, ArithmeticError):
    pass


class NonUnitaryGate(SimulationError, ValueError):
    pass


class BranchLimitExceeded(SimulationError, RuntimeError):
    pass


class ParamOutOfRange(SimulationError, ValueError):
    pass


class NotKrausForm(SimulationError, ValueError):
    pass


class ZeroNormBranch(SimulationError, ArithmeticError):
    pass


class MethodUnsupportedForInput(SimulationError, ValueError):
    pass
