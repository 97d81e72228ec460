class VreError(Exception):
    """Base class of every error the platform raises on purpose."""


class BadConfig(VreError):
    pass


class DirNotEmpty(VreError):
    pass


class PortInUse(VreError):
    pass
