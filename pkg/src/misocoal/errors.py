"""Exception types raised across the package."""


class InvalidScenarioError(ValueError):
    """Scenario description violates a structural requirement."""


class AmbiguousSNRError(ValueError):
    """Direct-link distances differ, so a single SNR has no unique noise power."""


class DegenerateChannelError(ValueError):
    """A direct channel is the zero vector."""


class InvalidNoiseError(ValueError):
    """Noise power is not strictly positive."""


class InvalidDeviationError(ValueError):
    """Merge set is not a subset of the coalition structure."""


class BlowupGuardError(RuntimeError):
    """Exhaustive enumeration was requested beyond the configured size cap."""
