class InfeasibleProblem(RuntimeError):
    """The SINR targets cannot be met by the requested subproblem."""


class SolverFailure(RuntimeError):
    """The conic solver stopped without a trustworthy solution."""
