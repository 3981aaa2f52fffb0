"""Exception types shared across the package."""


class FlowstabError(Exception):
    """Base class for all package-specific failures."""


class GridError(FlowstabError):
    pass


class ProjectionError(FlowstabError):
    pass


class SteadyStateError(FlowstabError):
    """Newton failure; carries the last iterate and the residual history."""

    def __init__(self, message, iterate=None, history=None, nu=None):
        super().__init__(message)
        self.iterate = iterate
        self.history = list(history) if history is not None else []
        self.nu = nu


class SpectralAmbiguityError(FlowstabError):
    """Multiplicity decision sat inside the tolerance band; retry with another tau_eig."""

    def __init__(self, message, suggested_tau=None):
        super().__init__(message)
        self.suggested_tau = suggested_tau


class BiorthogonalityError(FlowstabError):
    pass


class SynthesisError(FlowstabError):
    """Actuator selection failed; carries the best rank margins seen."""

    def __init__(self, message, best_margin=None):
        super().__init__(message)
        self.best_margin = best_margin


class PlacementError(FlowstabError):
    """Pole placement failed; carries a condition estimate when available."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class ConfigError(FlowstabError):
    pass


class ArtifactError(FlowstabError):
    pass
