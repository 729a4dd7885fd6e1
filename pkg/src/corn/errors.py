"""Exception types shared across the toolkit.

Every domain error raised by this package derives from CornError so callers
(including the CLI) can distinguish domain failures from genuine bugs.
"""


class CornError(Exception):
    pass


class DegenerateInput(CornError):
    pass


class EmptyMesh(CornError):
    pass


class NotWatertight(CornError):
    pass


class MeshLoadError(CornError):
    pass


class TooFewPoints(CornError):
    pass


class SizeMismatch(CornError):
    pass


class ShapeMismatch(CornError):
    pass


class NonFiniteInput(CornError):
    pass


class NonFiniteGradient(CornError):
    pass


class EmptyDataset(CornError):
    pass


class Divergence(CornError):
    pass


class SingularSolve(CornError):
    pass


class NonPositiveGains(CornError):
    pass


class NoCorrespondences(CornError):
    pass


class WorkspaceTooSmall(CornError):
    pass


class DegenerateGeometry(CornError):
    pass


class NonPositiveVolume(CornError):
    pass


class DatasetIoError(CornError):
    pass


class BadMagic(DatasetIoError):
    pass


class UnsupportedVersion(DatasetIoError):
    pass


class TruncatedRecord(DatasetIoError):
    pass


class ConfigError(CornError):
    pass
