class NumericalFailure(RuntimeError):
    """An iterative kernel did not converge within its iteration cap."""


class DegenerateAngleError(ValueError):
    """A construction needed sin(theta) > 0 but got an (almost) aligned angle."""


class DegenerateWeightError(ValueError):
    """A weight or coherence value makes a required inverse undefined."""


class ConfigError(ValueError):
    """Invalid user configuration (CLI maps this to exit code 2)."""
