"""Exception types shared across the solver."""


class EgbeamError(Exception):
    pass


class SingularFIM(EgbeamError):
    """Fisher information matrix is numerically singular for this precoder."""


class ThresholdUnreachable(EgbeamError):
    """Requested harvested-energy level cannot be produced by the circuit."""


class ZeroPrecoder(EgbeamError):
    """Power renormalization asked for on an all-zero precoder."""


class NoFeasibleSample(EgbeamError):
    """Random-search oracle exhausted its budget without a feasible point."""


class NonFiniteEvaluation(EgbeamError):
    """Objective returned NaN/inf during finite differencing."""
