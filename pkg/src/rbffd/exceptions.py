"""Exception hierarchy shared by all stages of the solver pipeline."""


class RBFFDError(Exception):
    """Base class for all errors raised by :mod:`rbffd`."""


class GeometryError(RBFFDError):
    pass


class NodeGenerationError(RBFFDError):
    pass


class StencilError(RBFFDError):
    pass


class SingularStencilError(StencilError):
    """A local saddle-point system is numerically singular.

    Carries the index of the offending stencil and its condition estimate.
    """

    def __init__(self, message, stencil=None, condition=None):
        super().__init__(message)
        self.stencil = stencil
        self.condition = condition


class AssemblyError(RBFFDError):
    pass


class SolverError(RBFFDError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class ConvergenceError(SolverError):
    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class ProblemError(RBFFDError):
    pass


class StageError(RBFFDError):
    """Wraps an error with the name of the pipeline stage that raised it."""

    def __init__(self, stage, error):
        super().__init__(f"[{stage}] {error}")
        self.stage = stage
        self.error = error
