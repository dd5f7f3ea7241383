"""Exception types shared across the package."""


class SceneAugError(Exception):
    """Base class for all package-specific errors."""


class OutOfBoundsError(SceneAugError):
    """Pixel or workspace coordinate outside the valid range."""


class InvalidDepthError(SceneAugError):
    """Depth at the requested pixel is the invalid sentinel (0)."""


class EmptyProjectionError(SceneAugError):
    """No valid depth pixel landed inside the workspace bounds."""


class FormatError(SceneAugError):
    """On-disk dataset is corrupt or inconsistent with its manifest."""


class ObjParseError(SceneAugError):
    """Malformed OBJ content (non-numeric vertex, bad face index)."""


class EmptyMeshError(SceneAugError):
    """Mesh has no triangles."""


class DegenerateMeshError(SceneAugError):
    """Mesh footprint covers zero cells or has zero XY extent."""


class DimMismatchError(SceneAugError):
    """Image/mask operands do not share dimensions."""


class RemoteTimeoutError(SceneAugError):
    """Remote generation service did not answer within the deadline."""


class RemoteProtocolError(SceneAugError):
    """Remote generation service broke the wire contract."""


class ReplacementInvalid(SceneAugError):
    """Cross-category replacement could not keep the action label valid."""


class PlacementExhausted(SceneAugError):
    """No collision-free placement found within the retry budget."""


class EmptyCorpusError(SceneAugError):
    """Cutout/background corpus directory holds no usable images."""


class EmptyDatasetError(SceneAugError):
    """Operation requires at least one demo."""


class UnknownTaskError(SceneAugError):
    """No model entry matches the requested task text."""
