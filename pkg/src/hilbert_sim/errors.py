"""Exception hierarchy shared by the simulator modules."""


class HilbertSimError(Exception):
    """Base class for every error raised by hilbert_sim."""


class InputShapeError(HilbertSimError, ValueError):
    pass


class DegenerateDeformationError(HilbertSimError, ValueError):
    pass


class ConstitutiveError(HilbertSimError, ValueError):
    """A constitutive function returned a non-finite or inadmissible value."""


class ModeError(HilbertSimError, ValueError):
    pass


class UnitarityError(HilbertSimError, RuntimeError):
    pass


class DiscretizationError(HilbertSimError, RuntimeError):
    """Finite-difference data too coarse to be structurally consistent."""


class SolverError(HilbertSimError, RuntimeError):
    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


class OracleError(HilbertSimError, RuntimeError):
    pass


class TruncationError(HilbertSimError, RuntimeError):
    def __init__(self, node, time, tail):
        super().__init__(
            f"Fock truncation tail occupation {tail:.3e} at node {node}, t={time!r}"
        )
        self.node = node
        self.time = time
        self.tail = tail


class CouplingDivergenceError(HilbertSimError, RuntimeError):
    pass


class ConfigError(HilbertSimError, ValueError):
    """Configuration could not be loaded; ``errors`` lists every problem found."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class StepError(HilbertSimError, RuntimeError):
    """Wraps a failure inside the time loop with its step index and time."""

    def __init__(self, step, time, cause):
        super().__init__(f"step {step} (t={time!r}): {cause}")
        self.step = step
        self.time = time
        self.cause = cause
