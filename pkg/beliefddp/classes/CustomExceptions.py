class BeliefDDPError(Exception):
    """Base class for all errors raised by beliefddp
    """
    def __init__(self, message):
        super().__init__(message)
        self.message = message


class InvalidArgumentError(BeliefDDPError, ValueError):
    """Exception raised when an input vector is malformed (wrong shape, NaN or Inf)
    """


class DegenerateEvidenceError(BeliefDDPError):
    """Exception raised when an observation is impossible under every latent value
    """
    def __init__(self, message="Total evidence mass vanished during the belief update."):
        super().__init__(message)


class DifferentiationError(BeliefDDPError):
    """Exception raised when a finite difference hits a non-finite function value
    """
    def __init__(self, message, coordinate=None):
        super().__init__(message)
        self.coordinate = coordinate


class StructuralCorruptionError(BeliefDDPError):
    """Exception raised when a trajectory tree is missing nodes
    """


class RolloutDivergenceError(BeliefDDPError):
    """Exception raised when a forward rollout produces non-finite states
    """


class BackwardFailureError(BeliefDDPError):
    """Exception raised when Q_uu stays indefinite up to the regularization cap
    """


class ConfigurationError(BeliefDDPError):
    """Exception raised for invalid experiment configurations or overrides
    """
