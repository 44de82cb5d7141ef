"""
Error types for the toolkit.

Every error carries the process exit code the command line maps it to:
2 for bad input or numerical breakdown, 3 for a failed certification.
"""


class ToolkitError(Exception):
    exit_code: int = 2

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


# input errors
class InputError(ToolkitError):
    exit_code = 2


class NotSymmetricError(InputError):
    pass


class DimensionMismatchError(InputError):
    pass


class DomainError(InputError):
    pass


class NormBoundError(InputError):
    def __init__(self, index: int, norm: float, bound: float):
        super().__init__(f"Matrix {index} has norm {norm:.17g} > {bound:.17g}")
        self.index = index
        self.norm = norm
        self.bound = bound


class GuardExceededError(InputError):
    pass


class NodeCollisionError(InputError):
    def __init__(self, i: int, j: int):
        super().__init__(f"Cauchy nodes collide at (t_{i}, s_{j})")
        self.i = i
        self.j = j


class RankCollapseError(InputError):
    pass


class FileFormatError(InputError):
    def __init__(self, path: str, line: int | None, reason: str):
        where = f"{path}:{line}" if line is not None else path
        super().__init__(f"{where}: {reason}")
        self.path = path
        self.line = line


# numerical errors
class NumericalError(ToolkitError):
    exit_code = 2


class EigenSolverError(NumericalError):
    def __init__(self, size: int, residual: float):
        super().__init__(f"Eigensolver failed on a {size}x{size} matrix (residual {residual:.3e})")
        self.size = size
        self.residual = residual


class PotentialOverflowError(NumericalError):
    def __init__(self, max_abs_eigenvalue: float):
        super().__init__(
            f"cosh overflows for eigenvalue magnitude {max_abs_eigenvalue:.6g}; "
            "use the log-domain potential"
        )
        self.max_abs_eigenvalue = max_abs_eigenvalue


class BarrierInfeasibleError(NumericalError):
    def __init__(self, step: int, gap: float):
        super().__init__(f"No vector satisfies the barrier condition at step {step} (gap {gap:.3e})")
        self.step = step
        self.gap = gap


class OracleError(NumericalError):
    def __init__(self, step: int, index: int, reason: str):
        super().__init__(f"Sample oracle failed at step {step}, index {index}: {reason}")
        self.step = step
        self.index = index


# certification
class CertificationError(ToolkitError):
    exit_code = 3

    def __init__(self, metric: str, value: float, bound: float, detail: str | None = None):
        super().__init__(detail or f"Certification failed: {metric} = {value:.17g} > {bound:.17g}")
        self.metric = metric
        self.value = value
        self.bound = bound
