"""Exception hierarchy shared across the pipeline.

Everything raised on a domain-contract violation derives from RawseaError so
the CLI can map it to exit code 1; programming errors (TypeError, ...) are
left alone and crash loudly.
"""


class RawseaError(Exception):
    """Base class for all domain errors."""


# raster / granule I/O
class MissingBand(RawseaError):
    pass


class DimensionMismatch(RawseaError):
    pass


class BitDepthViolation(RawseaError):
    pass


class EmptyIntersection(RawseaError):
    pass


class InvalidAngle(RawseaError):
    pass


# coregistration
class MissingTableEntry(RawseaError):
    pass


class ConstantInput(RawseaError):
    pass


# thresholding / labeling
class ConstantPatch(RawseaError):
    pass


class NonConvergence(RawseaError):
    pass


class SizeMismatch(RawseaError):
    pass


# AIS parsing and matching
class MissingColumn(RawseaError):
    pass


class EmptyFile(RawseaError):
    pass


class FrameMismatch(RawseaError):
    pass


# metrics
class ZeroAreaGroundTruth(RawseaError):
    pass


# band analysis
class InsufficientSeaPixels(RawseaError):
    pass


class EmptyBoxes(RawseaError):
    pass


class ConstantBand(RawseaError):
    pass


# sensor simulation
class KernelTooSmall(RawseaError):
    pass


class SharpeningRequested(RawseaError):
    pass


# AISCOCO
class SchemaViolation(RawseaError):
    """Carries the JSON path of the first offending node."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.reason = message


class DanglingReference(RawseaError):
    pass


class InvariantViolation(RawseaError):
    pass


class UnknownAnnotationId(RawseaError):
    pass


# review server
class PortInUse(RawseaError):
    pass


class StoreLocked(RawseaError):
    pass
