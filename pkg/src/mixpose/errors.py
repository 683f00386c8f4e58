"""Exception hierarchy shared across the package."""


class MixposeError(Exception):
    """Base class for all package errors."""


class InvalidModelError(MixposeError, ValueError):
    pass


class OutOfGridError(MixposeError, ValueError):
    pass


class DegenerateKernelError(MixposeError, ValueError):
    """Sensing kernel too narrow to be represented on the grid."""


class NoOverlapError(MixposeError, RuntimeError):
    """Objective is identically zero over the starting simplex."""


class OptimizerError(MixposeError, RuntimeError):
    pass
