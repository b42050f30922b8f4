"""Exception hierarchy shared by every module of the package."""


class BVPError(Exception):
    """Base class for all errors raised by nonlocal_sl."""


class ExprSyntaxError(BVPError):
    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownIdentifier(BVPError):
    def __init__(self, name):
        super().__init__(f"unknown identifier {name!r}")
        self.name = name


class DisallowedVariable(BVPError):
    def __init__(self, name, allowed):
        allowed = ", ".join(sorted(allowed)) or "none"
        super().__init__(f"variable {name!r} is not allowed here (allowed: {allowed})")
        self.name = name


class DomainError(BVPError, ArithmeticError):
    pass


class UnsupportedDerivative(BVPError):
    pass


class GridMismatch(BVPError, ValueError):
    pass


class ResonantLambda(BVPError):
    def __init__(self, lam, n):
        super().__init__(f"lambda={lam!r} is resonant (n={n}); use the resonant solver")
        self.lam = lam
        self.n = n


class SingularBoundarySystem(BVPError):
    def __init__(self, cond):
        super().__init__(f"boundary system is numerically singular (cond={cond:.3e}); lambda is near resonance")
        self.cond = cond


class NotInImage(BVPError):
    def __init__(self, defect, tol):
        super().__init__(f"right-hand side is not in the image: solvability defect {defect:.6e} exceeds {tol:.3e}")
        self.defect = defect
        self.tol = tol


class NoConvergence(BVPError):
    def __init__(self, message, iterations=None, last_ratio=None):
        super().__init__(message)
        self.iterations = iterations
        self.last_ratio = last_ratio


class SingularJacobian(BVPError):
    pass


class DegenerateRoot(BVPError):
    pass


class ProblemFileError(BVPError):
    def __init__(self, message, line=None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line
