"""Exception types shared across the package."""


class LidarCfeError(Exception):
    """Base class for errors raised by this package."""


class InputError(LidarCfeError):
    """A scenario, query, or config file failed to parse or validate."""


class ModelError(LidarCfeError):
    """A policy model could not be loaded, probed, or evaluated."""


class NetworkConfigError(ModelError):
    """A network layer spec or weight array has an incompatible shape."""


class BridgeError(ModelError):
    """The external-process policy bridge failed or broke protocol."""


class BridgeTimeout(BridgeError):
    """The external policy process did not answer within the deadline."""
