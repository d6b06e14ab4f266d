"""Exception types.

``ValidationError`` covers bad arguments and data that violate an invariant
(CLI exit code 1). ``VolumeFormatError`` covers unreadable or malformed files
(CLI exit code 2, alongside ``OSError``).
"""


class FnrsegError(Exception):
    pass


class ValidationError(FnrsegError, ValueError):
    pass


class EmptyGroundTruthError(ValidationError):
    def __init__(self, sample_id=None):
        self.sample_id = sample_id
        where = f" in sample {sample_id!r}" if sample_id is not None else ""
        super().__init__(f"empty ground truth{where}")


class VolumeFormatError(FnrsegError, ValueError):
    pass
