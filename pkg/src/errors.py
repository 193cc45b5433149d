class ParameterError(ValueError):
    """A physical or numerical parameter is outside its valid range."""


class ConfigError(ValueError):
    """A scenario or link-parameter file does not match the documented schema."""


class ProtocolError(RuntimeError):
    """The two parties cannot continue the key exchange."""


class QberCeilingExceeded(ProtocolError):
    pass


class AuthenticationError(ProtocolError):
    pass


class PoolExhaustedError(AuthenticationError):
    pass


class AuthDesyncError(AuthenticationError):
    """Sender and receiver disagree on how many authentication key bits were consumed."""
