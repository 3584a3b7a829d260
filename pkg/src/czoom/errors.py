class CZoomError(ValueError):
    """Base class for data errors raised by this package."""


class GeometryError(CZoomError):
    pass


class DatasetError(CZoomError):
    pass


class DatasetParseError(DatasetError):
    def __init__(self, message, byte_offset):
        super().__init__(f"{message} (at byte offset {byte_offset})")
        self.byte_offset = byte_offset


class IntegrityError(DatasetError):
    def __init__(self, message, offenders=()):
        super().__init__(message)
        self.offenders = list(offenders)


class FusionError(CZoomError):
    pass


class SceneError(CZoomError):
    pass
