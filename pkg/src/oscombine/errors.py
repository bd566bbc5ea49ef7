"""Exception types shared across the package."""


class InputError(ValueError):
    """Arguments violate an operation's preconditions."""


class FormatError(InputError):
    """A score file does not follow the documented grammar."""


class UnsupportedMethodError(InputError):
    """The requested numerical method cannot handle this configuration."""


class NumericalError(RuntimeError):
    """A numerical routine failed to reach its accuracy target."""
